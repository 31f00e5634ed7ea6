"""Compare the compiled bit kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--n 1000000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from mulsedge import _pykernels
from mulsedge.phy import Modulation

try:
    from mulsedge import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(n: int, rng: np.random.Generator):
    vals = rng.standard_normal(n) * 50
    bits = _pykernels.q99_encode(vals)
    mod = Modulation.QAM64
    qbits = rng.integers(0, 2, n).astype(np.uint8)
    re, im = _pykernels.qam_map(qbits, mod.bits_per_axis, mod.scale)
    re = re + 0.05 * rng.standard_normal(re.size)
    im = im + 0.05 * rng.standard_normal(im.size)
    return {
        "q99_encode": lambda k: k.q99_encode(vals),
        "q99_decode": lambda k: k.q99_decode(bits),
        "qam64_map": lambda k: k.qam_map(qbits, mod.bits_per_axis, mod.scale),
        "qam64_demap": lambda k: k.qam_demap(re, im, mod.bits_per_axis, mod.scale),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=1_000_000, help="reals / bits per call")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = [("numpy", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"n={args.n}, best of {args.repeat}")
    print(f"{'kernel':<12}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for label, fn in cases(args.n, np.random.default_rng(0)).items():
        times = [min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for _, k in backends]
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) > 1 else f"{'-':>10}"
        print(f"{label:<12}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
