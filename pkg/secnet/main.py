import sys
from typing import Annotated

import click
import typer
from dotenv import load_dotenv

from secnet.common.environment import load_environment
from secnet.common.errors import EXIT_OK, EXIT_USAGE, SecnError
from secnet.common.logger import configure_logging, get_logger
from secnet.common.version import get_version
from secnet.modules.datapipe import datapipe
from secnet.modules.flow import flow
from secnet.modules.metrics import metrics
from secnet.modules.trainer import trainer

load_dotenv()

app = typer.Typer(
    name="secn",
    help="Self-enhanced convolutional network for facial video super-resolution.",
    no_args_is_help=True,
    pretty_exceptions_enable=False,
    add_completion=False,
)


def _print_version(value: bool) -> None:
    if value:
        typer.echo(get_version())
        raise typer.Exit()


@app.callback()
def main(
    version: Annotated[
        bool,
        typer.Option("--version", callback=_print_version, is_eager=True, help="Print the version and exit"),
    ] = False,
) -> None:
    configure_logging(load_environment().LOG_LEVEL)


for router in (datapipe.router, trainer.router, metrics.router, flow.router):
    app.registered_commands.extend(router.registered_commands)


def dispatch(argv: list[str] | None = None) -> int:
    """
    Run one `secn` command and return its exit code: 0 on success, 1 for usage and config
    errors, 2 for every other failure.
    """
    args = sys.argv[1:] if argv is None else argv
    try:
        result = app(args=args, prog_name="secn", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except SecnError as e:
        get_logger().error(e.detail)
        return e.exit_code
    return result if isinstance(result, int) else EXIT_OK
