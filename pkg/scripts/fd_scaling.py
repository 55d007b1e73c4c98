"""Accuracy of the first-order gradient against central finite differences.

For each random instance the slice length is set so that tau * ||H + u.G|| equals
each value in ``--norms``; the relative error is printed per instance together
with summary statistics, which makes the O(tau) trend and the heavy tail of
near-degenerate instances visible.

    python scripts/fd_scaling.py --instances 40 --norms 0.2,0.1,0.05,0.025
"""

import argparse
from dataclasses import replace

import numpy as np

from hybridqoc.checks import fd_relative_error, scaled_fd_instance
from hybridqoc.oracle import Oracle


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=40)
    ap.add_argument("--norms", default="0.2,0.1,0.05,0.025")
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--max-n", type=int, default=4)
    ap.add_argument("--max-M", type=int, default=8)
    args = ap.parse_args()
    norms = [float(v) for v in args.norms.split(",")]

    rng = np.random.default_rng(args.seed)
    errs = np.empty((args.instances, len(norms)))
    for i in range(args.instances):
        n, M, S = int(rng.integers(1, args.max_n + 1)), int(rng.integers(1, args.max_M + 1)), int(rng.integers(1, 4))
        base, u = scaled_fd_instance(rng, n, M, S, tau_norm=norms[0])
        for j, t in enumerate(norms):
            # the generator norm does not depend on tau, so tau scales linearly with the target product
            errs[i, j] = fd_relative_error(Oracle(replace(base.cfg, tau=base.cfg.tau * t / norms[0])), u)
        print(f"instance {i:3d} n={n} M={M} |S|={S}  " + "  ".join(f"{e:.3e}" for e in errs[i]))

    print()
    print("tau*||A||   median      p90         max        frac>2e-2")
    for j, t in enumerate(norms):
        col = errs[:, j]
        print(f"{t:<10g}  {np.median(col):.3e}  {np.quantile(col, 0.9):.3e}  {col.max():.3e}  {np.mean(col > 2e-2):.2f}")
    for j in range(1, len(norms)):
        r = errs[:, j - 1] / errs[:, j]
        print(f"halving {norms[j - 1]:g} -> {norms[j]:g}: median ratio {np.median(r):.2f}, worst-case ratio "
              f"{errs[:, j - 1].max() / errs[:, j].max():.2f}")


if __name__ == "__main__":
    main()
