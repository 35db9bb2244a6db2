"""Compiled vs numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times cross-covariance, Gram assembly and one fit+predict round per size,
reporting the best of ``--repeat`` runs for each backend.
"""
import argparse
import json
import os
import subprocess
import sys

SIZES = (50, 200, 500, 1000)
DIM = 12

WORKLOAD = """
import json, sys, timeit
import numpy as np
from gatedsurrogate import gp, kernels
from gatedsurrogate.kernels import KernelParams
from gatedsurrogate.oracle import Bounds
p = KernelParams(2.5, 0.75)
b = Bounds.unit({dim})
rng = np.random.default_rng(0)
out = {{"backend": kernels.BACKEND}}
for n in {sizes}:
    x = rng.random((n, {dim}))
    q = rng.random((256, {dim}))
    y = np.sin(x).sum(axis=1)
    m = gp.fit(x, y, p, b)
    out[n] = {{
        "cross_cov": min(timeit.repeat(lambda: kernels.cross_cov(q, x, p), number=1, repeat={repeat})),
        "gram": min(timeit.repeat(lambda: kernels.gram(x, p), number=1, repeat={repeat})),
        "fit+predict": min(timeit.repeat(lambda: gp.predict_arrays(gp.fit(x, y, p, b), q),
                                         number=1, repeat={repeat})),
    }}
json.dump(out, sys.stdout)
"""


def run(backend, repeat):
    env = dict(os.environ, GATEDSURROGATE_BACKEND=backend)
    code = WORKLOAD.format(dim=DIM, sizes=SIZES, repeat=repeat)
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast, slow = run("cython", args.repeat), run("python", args.repeat)
    if fast["backend"] != "cython":
        print("compiled extension not built; both columns use the numpy fallback")
    print(f"{'n':>6} {'op':<12} {'compiled ms':>12} {'numpy ms':>10} {'speedup':>8}")
    for n in SIZES:
        for op in ("cross_cov", "gram", "fit+predict"):
            a, b = fast[str(n)][op], slow[str(n)][op]
            print(f"{n:>6} {op:<12} {a * 1e3:>12.3f} {b * 1e3:>10.3f} {b / a:>7.2f}x")


if __name__ == "__main__":
    main()
