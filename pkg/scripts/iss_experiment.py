"""ISS stage-1R reduction: unlimited vs band-limited TSIA at r = 30.

The benchmark file (``iss.mat`` with ``A``, ``B``, ``C``) is read from
``--mat`` or the ``FLMOR_ISS_MAT`` environment variable. Without it the
script runs on a labeled structural surrogate of the same size
(135 lightly damped modes, 3 inputs, 3 outputs).

    python scripts/iss_experiment.py --mat data/iss.mat --band 10,20
"""

import argparse
import os
import sys
import time
from pathlib import Path

from flmor import evaluation, tsia
from flmor.systems import FrequencyBand, generate_structural, load_mat


def load(mat):
    if mat:
        return load_mat(mat, cap=0), f"ISS ({mat})"
    return generate_structural(135, 3, 3), "structural surrogate n=270 (ISS data not found)"


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mat", default=os.environ.get("FLMOR_ISS_MAT", ""))
    p.add_argument("--band", default="10,20")
    p.add_argument("--r", type=int, default=30)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--out", default="", help="directory for sigma CSVs (optional)")
    args = p.parse_args(argv)

    sys_, label = load(args.mat)
    band = FrequencyBand.parse(args.band)
    opts = tsia.TsiaOptions(max_iter=args.max_iter)
    print(f"model: {label}, n = {sys_.n}, r = {args.r}, band = {band}")

    t0 = time.perf_counter()
    red_u, _, rep_u = tsia.tsia(sys_, args.r, opts)
    t_u = time.perf_counter() - t0
    t0 = time.perf_counter()
    red_b, _, rep_b = tsia.tsia_frequency_limited(sys_, args.r, band, opts)
    t_b = time.perf_counter() - t0

    xi_u = evaluation.h2_error_norm(sys_, red_u)
    xw_u = evaluation.h2fl_error_norm(sys_, red_u, band)
    xi_b = evaluation.h2_error_norm(sys_, red_b)
    xw_b = evaluation.h2fl_error_norm(sys_, red_b, band)
    print(f"{'run':<12} {'status':<10} {'iters':>5} {'wilson max':>10} {'Xi':>11} {'Xi_band':>11} {'time':>7}")
    for name, rep, xi, xw, t in (("unlimited", rep_u, xi_u, xw_u, t_u), ("band", rep_b, xi_b, xw_b, t_b)):
        wil = rep.wilson_residuals.max() if rep.wilson_residuals else float("nan")
        print(f"{name:<12} {rep.status:<10} {rep.iterations:>5} {wil:>10.2e} {xi:>11.4e} {xw:>11.4e} {t:>6.1f}s")
    print(f"band error ratio (unlimited / band-limited) = {xw_u / xw_b:.1f}")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        freqs, _ = evaluation.frequency_grid(band)
        evaluation.write_sigma_csv(out / "sigma_unlimited.csv", evaluation.sigma_table(sys_, red_u, freqs))
        evaluation.write_sigma_csv(out / "sigma_band.csv", evaluation.sigma_table(sys_, red_b, freqs))
    return 0


if __name__ == "__main__":
    sys.exit(main())
