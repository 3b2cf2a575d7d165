"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times Levenshtein distance on OCR-sized strings and the CG Poisson solve on
patch sizes typical of a forged text region.
"""
import argparse
import random
import string
import timeit

import numpy as np

from ettd import kernels


def lev_case(n, seed=0):
    r = random.Random(seed)
    a = "".join(r.choice(string.ascii_letters) for _ in range(n))
    b = "".join(c if r.random() > 0.2 else r.choice(string.ascii_letters) for c in a)
    return [ord(c) for c in a], [ord(c) for c in b]


def cg_case(h, w, seed=0):
    rng = np.random.default_rng(seed)
    rhs = rng.normal(scale=50, size=(3, h - 2, w - 2))
    return rhs, np.zeros_like(rhs)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the Python backend is available")
    cases = []
    for n in (10, 40, 200):
        a, b = lev_case(n)
        cases.append((f"levenshtein n={n}", lambda m, a=a, b=b: m.levenshtein(a, b)))
    for h, w in ((12, 12), (28, 80), (64, 160)):
        rhs, x0 = cg_case(h, w)
        cases.append((f"cg_poisson {h}x{w}", lambda m, rhs=rhs, x0=x0: m.cg_poisson(rhs, x0, 1e-3, 10 * rhs[0].size)))

    names = sorted(backends)
    print(f"{'case':<22}" + "".join(f"{n + ' (ms)':>16}" for n in names) + f"{'speedup':>10}")
    for label, fn in cases:
        times = {}
        for name in names:
            mod = backends[name]
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(mod), number=1), 1e-6)))
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
            times[name] = best * 1e3
        row = f"{label:<22}" + "".join(f"{times[n]:>16.3f}" for n in names)
        if len(names) == 2:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
