"""Compare the numba kernels with the pure-numpy fallback.

Runs the workloads in this process (numba, unless disabled) and in a child
process with ``PHS_LAB_DISABLE_NUMBA=1``, then prints a table of steady-state
times and speedups.  The first call of each workload is reported separately
as it includes JIT compilation.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def workloads(scale):
    from phs_lab import kernels
    from phs_lab.coupling import RouterCoupling, compose_router, kick_start
    from phs_lab.integrator import InputLaw, simulate
    from phs_lab.models import MsdParams, make_heat_exchanger, make_msd

    msd = make_msd()
    router = compose_router(RouterCoupling(make_msd(MsdParams(1, 1, 0)), make_msd(MsdParams(1, 4, 0))))
    x_router = kick_start(router, [1.0, 0.0, 0.0, 0.0], [1e-3])
    hx = make_heat_exchanger()
    n_sim = max(10, int(20_000 * scale))
    rng = np.random.default_rng(0)
    n_scan = max(10, int(1_000_000 * scale))
    p = rng.normal(size=n_scan)
    d = np.cumsum(rng.normal(size=n_scan))

    return {
        "msd_simulate": lambda: simulate(msd, [1.0, 0.0], InputLaw.constant([0.1]), n_sim * 1e-3, 1e-3,
                                         backend="kernel"),
        "router_simulate": lambda: simulate(router, x_router, InputLaw.zero(2), n_sim * 1e-3, 1e-3,
                                            backend="kernel"),
        "heat_exchanger_simulate": lambda: simulate(hx, [0.0, 287.68], InputLaw.zero(2), n_sim * 0.5, 0.5,
                                                    backend="kernel"),
        "trapezoid_cumulative": lambda: kernels.trapezoid_cumulative(p, p, 1e-3),
        "max_pair_increase": lambda: kernels.max_pair_increase(d),
    }


def measure(repeat, scale):
    from phs_lab._accel import backend_name

    out = {"backend": backend_name(), "results": {}}
    for name, fn in workloads(scale).items():
        t0 = time.perf_counter()
        fn()
        first = time.perf_counter() - t0
        times = []
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        out["results"][name] = {"first": first, "best": min(times)}
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--scale", type=float, default=1.0, help="workload size multiplier")
    parser.add_argument("--json", help="write raw timings here")
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.worker:
        print(json.dumps(measure(args.repeat, args.scale)))
        return 0

    fast = measure(args.repeat, args.scale)
    env = dict(os.environ, PHS_LAB_DISABLE_NUMBA="1")
    child = subprocess.run(
        [sys.executable, __file__, "--worker", "--repeat", str(args.repeat), "--scale", str(args.scale)],
        capture_output=True, text=True, env=env, check=True,
    )
    slow = json.loads(child.stdout)

    print(f"{'workload':<26}{fast['backend'] + ' first':>14}{fast['backend'] + ' best':>14}"
          f"{slow['backend'] + ' best':>14}{'speedup':>10}")
    for name, f in fast["results"].items():
        s = slow["results"][name]
        print(f"{name:<26}{f['first']:>13.4f}s{f['best']:>13.4f}s{s['best']:>13.4f}s{s['best'] / f['best']:>9.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"accelerated": fast, "fallback": slow}, fh, indent=2, sort_keys=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
