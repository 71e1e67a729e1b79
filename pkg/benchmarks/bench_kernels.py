"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--batch 2000]

Both backends are imported directly, so the ``QEVOREC_BACKEND`` flag does
not matter here. Numba compile time is excluded by a warm-up call.
"""
import argparse
import timeit

import numpy as np

from qevorec.correlations import DiscordConfig, _refine_step, fibonacci_hemisphere
from qevorec.kernels import _nb, _np
from qevorec.qsys import random_bures_matrix
from qevorec.rng import Rng


def _cases(batch):
    rng = Rng(0)
    g = np.random.default_rng(0)
    h4 = g.normal(size=(batch, 4, 4)) + 1j * g.normal(size=(batch, 4, 4))
    h4 = h4 + np.conj(np.swapaxes(h4, -1, -2))
    rhos = np.stack([random_bures_matrix(2, rng.child(k)) for k in range(max(1, batch // 10))])
    cfg = DiscordConfig()
    th, ph = fibonacci_hemisphere(cfg.n_directions)
    theta, x = g.normal(size=(200, 20)), g.normal(size=(200, 20))
    rows, cols = np.nonzero(g.random((200, 200)) < 0.5)
    vals = g.normal(size=rows.size)
    return {
        f"eigh_batch {batch}x4x4": lambda k: k.eigh_batch(h4, True, 1e-14, 50),
        f"discord_batch {len(rhos)} grid": lambda k: k.discord_batch(rhos, th, ph, False, 0, 0.0),
        f"discord_batch {len(rhos)} refined": lambda k: k.discord_batch(
            rhos, th, ph, True, cfg.refine_iters, _refine_step(cfg)
        ),
        "mf_gradients 200x200 f=20": lambda k: k.mf_gradients(theta, x, rows, cols, vals, 0.1),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--batch", type=int, default=2000)
    args = ap.parse_args(argv)
    print(f"{'kernel':34s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, fn in _cases(args.batch).items():
        fn(_nb)  # compile
        t_nb = min(timeit.repeat(lambda: fn(_nb), number=1, repeat=args.repeat))
        t_np = min(timeit.repeat(lambda: fn(_np), number=1, repeat=args.repeat))
        print(f"{name:34s} {1e3 * t_nb:11.2f} {1e3 * t_np:11.2f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
