import json
import subprocess
import sys
from pathlib import Path

import pytest

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


@pytest.mark.slow
def test_benchmark_compares_both_backends(tmp_path):
    out = tmp_path / "bench.json"
    res = subprocess.run(
        [sys.executable, str(BENCH), "--repeat", "1", "--scale", "0.01", "--json", str(out)],
        capture_output=True, text=True, timeout=600,
    )
    assert res.returncode == 0, res.stderr
    data = json.loads(out.read_text())
    assert data["fallback"]["backend"] == "python"
    assert data["accelerated"]["results"].keys() == data["fallback"]["results"].keys()
    assert "speedup" in res.stdout
