import os

import pytest

from secnet.main import dispatch
from secnet.modules.trainer.trainer_utils import grad_check_config

run_slow = os.getenv("SECN_RUN_SLOW", "false").lower() == "true"


@pytest.fixture(autouse=True)
def set_test_env(monkeypatch):
    """Pin the environment the commands read their defaults from."""
    monkeypatch.setenv("SECN_LOG_LEVEL", "WARNING")
    monkeypatch.setenv("SECN_WORKERS", "2")
    monkeypatch.setenv("SECN_SEED", "0")


@pytest.fixture
def secn():
    """Run a `secn` command line and assert it succeeds."""

    def run(*args: str) -> None:
        code = dispatch([str(arg) for arg in args])
        assert code == 0, f"secn {' '.join(map(str, args))} exited with {code}"

    return run


@pytest.fixture
def hr_dataset(tmp_path, secn):
    """Four synthetic 8-frame 16x16 sequences written as PPM files."""
    out = tmp_path / "hr"
    secn("synth", "--out", out, "--count", 4, "--length", 8, "--size", 16, "--pattern", "gradient", "--amplitude", 2)
    return out


@pytest.fixture
def micro_cfg():
    """Every module present at a few thousand weights, so hundreds of steps stay fast."""
    return grad_check_config(
        lr=1e-3, stride_max=1, pretrain_steps=30, joint_steps=70, validation_period=50, log_period=10
    )


def pytest_sessionstart(session):
    print("\nSetting up test environment...")
    if run_slow:
        print("SECN_RUN_SLOW is set: the overfit experiments will run")
