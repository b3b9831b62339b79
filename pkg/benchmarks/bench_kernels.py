"""Time the hot kernels under numba and under the pure-numpy fallback.

The backend is fixed at import time by ``DRIFTNET_NUMBA``, so each backend
runs in its own interpreter. Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from driftnet import backend_name
from driftnet.relu_net import Architecture, evaluate, grad_lsq, init_params
from driftnet.sde_sim import ou_model, simulate_path

repeat, quick = int(sys.argv[1]), sys.argv[2] == "1"
n_path = 2_000 if quick else 20_000
n_batch = 5_000 if quick else 50_000


def best_of(fn):
    fn()  # warm-up, includes compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


model = ou_model()
arch = Architecture.uniform(1, 22, 15)
params = init_params(arch, "zeros_plus_sparse", seed=3, s=70, F=2.0)
rng = np.random.default_rng(0)
x = rng.uniform(-0.2, 1.2, (n_batch, 1))
y = rng.normal(size=n_batch)
out = {
    "backend": backend_name(),
    f"euler_maruyama n={n_path} m=10": best_of(lambda: simulate_path(model, [0.0], n_path, 0.01, 10, 1)),
    f"forward N={n_batch} L=22": best_of(lambda: evaluate(params, x)),
    f"grad_lsq N={n_batch} L=22": best_of(lambda: grad_lsq(params, x, y)),
}
print(json.dumps(out))
"""


def run(flag: str, repeat: int, quick: bool) -> dict:
    env = dict(os.environ, DRIFTNET_NUMBA=flag)
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(repeat), "1" if quick else "0"],
        env=env, check=True, capture_output=True, text=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args(argv)

    fast = run("1", args.repeat, args.quick)
    slow = run("0", args.repeat, args.quick)
    print(f"{'kernel':<34}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:<34}{fast[key]:>12.4f}{slow[key]:>12.4f}{slow[key] / fast[key]:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
