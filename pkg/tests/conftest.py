import os
import sys
import subprocess

import numpy as np
import pytest

from phs_lab.config import seed_from_env


def seed():
    return seed_from_env(0)


@pytest.fixture
def rng():
    return np.random.default_rng(seed())


def run_cli(*args, env=None, cwd=None, timeout=600):
    """Run ``python -m phs_lab`` in a subprocess."""
    full_env = dict(os.environ)
    if env:
        full_env.update(env)
    return subprocess.run(
        [sys.executable, "-m", "phs_lab", *map(str, args)],
        capture_output=True, text=True, env=full_env, cwd=cwd, timeout=timeout,
    )


_AC_LINES = {}


@pytest.fixture
def ac_line():
    """Record the one-line verdict of an acceptance criterion."""

    def record(ac, ok, detail):
        line = f"{ac} {'PASS' if ok else 'FAIL'}  {detail}"
        _AC_LINES[ac] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _AC_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for ac in sorted(_AC_LINES, key=lambda s: int(s.split("-")[1])):
        terminalreporter.write_line(_AC_LINES[ac])
