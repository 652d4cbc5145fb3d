"""Time the compiled kernels against the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat N]``
"""

import argparse
import math
import timeit

import numpy as np

from spacor import kernels
from spacor.comm import candidate_set, rayleigh_channel
from spacor.config import table1_config


def cases(cfg, rng):
    tau = np.linspace(-0.5, 0.5, 101) * cfg.T_r * cfg.F_s
    n_pulse = cfg.T_r * cfg.F_s
    a = math.pi * cfg.mu / cfg.F_s ** 2
    cands = candidate_set("GSM", cfg).X
    n = 20_000
    H = rayleigh_channel(n, cfg.M_R_c, cfg.M, rng)
    idx = rng.integers(0, cands.shape[1], n)
    Y = np.einsum("nrm,mn->nr", H, cands[:, idx])
    Y += 0.3 * (rng.standard_normal(Y.shape) + 1j * rng.standard_normal(Y.shape))
    return {
        "chip_correlations (101 delays)": lambda k: k.chip_correlations(
            tau, 0.0, int(n_pulse), n_pulse, float(cfg.chip_samples), cfg.K, a),
        "ml_search (20k symbols x 64)": lambda k: k.ml_search(Y, H, cands),
        "mi_terms (20k symbols x 64)": lambda k: k.mi_terms(Y, H, cands, idx, 1 / 0.09),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = {"python": kernels.backend("python")}
    try:
        backends["cython"] = kernels.backend("cython")
    except ImportError:
        print("compiled extension not built; timing the fallback only")
    cfg = table1_config()
    print(f"{'kernel':34s}" + "".join(f"{b:>12s}" for b in backends) + "     speedup")
    for name, fn in cases(cfg, np.random.default_rng(0)).items():
        times = {b: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for b, k in backends.items()}
        row = f"{name:34s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times.values())
        if len(times) == 2:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
