"""Time the numba kernels against the numpy fallback.

Each backend runs in its own interpreter because the choice is fixed at
import time. Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from rqclab import kernels
from rqclab.linalg import haar_unitaries, haar_states
from rqclab.mixing import fixed_subspace

repeat = int(sys.argv[1])
rng = np.random.default_rng(7)


def best(fn):
    fn()  # warm-up (includes JIT compilation)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


n = 20
psi = haar_states(2 ** n, 1, rng)[0]
gates = haar_unitaries(4, 32, rng)


def apply_layers():
    s = psi.copy()
    for k, g in enumerate(gates):
        i = k % (n - 1)
        s = kernels.apply_unitary(s, g, [i, i + 1], n)


basis = fixed_subspace(2).basis
batch = haar_unitaries(4, 20000, rng)
v = haar_unitaries(4, 1, rng)[0]
x0 = np.zeros(6)
k0 = np.eye(4, dtype=complex)
out = {
    "backend": kernels.BACKEND,
    "apply_unitary_20q_32gates_s": best(apply_layers),
    "det_transfer_20000_s": best(lambda: kernels.det_transfer(batch, basis, 1)),
    "product_arc_s": best(lambda: kernels.product_arc(v, 200)),
    "minimize_arc_s": best(lambda: kernels.minimize_arc(x0, k0, v, 0.3, 2000, 1e-12, 1e-10)),
}
print(json.dumps(out))
"""


def run(backend, repeat):
    env = dict(os.environ, RQCLAB_BACKEND=backend)
    res = subprocess.run([sys.executable, "-c", CHILD, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rows = [run(b, args.repeat) for b in ("numba", "numpy")]
    keys = [k for k in rows[0] if k != "backend"]
    print(f"{'kernel':32s} {'numba':>12s} {'numpy':>12s} {'speedup':>9s}")
    for k in keys:
        a, b = rows[0][k], rows[1][k]
        print(f"{k:32s} {a:12.5f} {b:12.5f} {b / a:9.1f}x")


if __name__ == "__main__":
    main()
