from pathlib import Path

VERSION_FILE = Path(__file__).resolve().parents[2] / ".version"


def get_version(version_file: Path = VERSION_FILE) -> str:
    """Version string of the secn tool, taken from the repository's .version file."""
    if not version_file.is_file():
        return "unknown"
    return version_file.read_text().strip() or "unknown"
