"""Command-line front end: ``flmor reduce | evaluate | verify | benchmark``.

Exit codes: 0 success, 1 verification failure, 2 input error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from flmor import benchmark, evaluation, mmio, tsia, verify
from flmor.config import ConfigError, RunConfig, build_model, load_config
from flmor.systems import FrequencyBand, GeneralizedSystem, ReducedModel, load_system, save_system

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("flmor")

# flag prefix per config section; model/reduce/evaluate keys are used bare
_PREFIX = {"model": "", "reduce": "", "evaluate": "", "caps": "cap-", "output": ""}
_RENAME = {"output.dir": "out"}


def _flag(section, key):
    dotted = f"{section}.{key}"
    return "--" + _RENAME.get(dotted, _PREFIX[section] + key.replace("_", "-"))


def _add_config_flags(parser, sections):
    parser.add_argument("--config", help="plain-text config file (flags override it)")
    parser.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override any config key (repeatable)")
    defaults = RunConfig()
    for name in sections:
        grp = parser.add_argument_group(f"{name} options")
        for f in dataclasses.fields(getattr(defaults, name)):
            grp.add_argument(_flag(name, f.name), dest=f"cfg:{name}.{f.name}", default=None,
                             metavar=f.name.upper(), help=f"{name}.{f.name} (default {getattr(getattr(defaults, name), f.name)!r})")


def _config_from_args(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    for item in args.set:
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        cfg.set(key.strip(), val.strip(), "--set")
    for dest, val in sorted(vars(args).items()):
        if dest.startswith("cfg:") and val is not None:
            cfg.set(dest[4:], val, "command line")
    return cfg


def _model_id(cfg: RunConfig):
    m = cfg.model
    return m.generator or m.mat or m.manifest


def _options(cfg: RunConfig):
    r = cfg.reduce
    return tsia.TsiaOptions(tol=r.tol, max_iter=r.max_iter, restarts=r.restarts, seed=r.seed,
                            init=r.init, patience=r.patience, safeguard=r.safeguard)


def _run_tsia(model, cfg, band):
    opts = _options(cfg)
    if band.is_unbounded:
        return tsia.tsia(model, cfg.reduce.r, opts)
    return tsia.tsia_frequency_limited(model, cfg.reduce.r, band, opts)


def _write(path, text):
    Path(path).write_text(text)


def _write_timings(path, timings):
    _write(path, "".join(f"{k} = {v:.6f}\n" for k, v in sorted(timings.items())))


def _evaluate_and_write(out, model, reduced, cfg, band, timings, unlimited=None):
    ev = cfg.evaluate
    t0 = time.perf_counter()
    rep = evaluation.error_report(model, reduced, band, model_id=_model_id(cfg), unlimited_model=unlimited,
                                  method=ev.method, n_inside=ev.n_inside, n_outside=ev.n_outside,
                                  workers=ev.workers)
    timings["evaluate"] = time.perf_counter() - t0
    # timings live in their own file so the report bytes are reproducible
    _write(out / "error_report.txt", rep.to_text())
    evaluation.write_sigma_csv(out / "sigma.csv", rep.sigma)
    return rep


def cmd_reduce(cfg: RunConfig):
    out = Path(cfg.output.dir)
    band = cfg.band
    model = build_model(cfg.model, cap=cfg.caps.verify)
    timings = {}
    t0 = time.perf_counter()
    red, pair, report = _run_tsia(model, cfg, band)
    timings["tsia"] = time.perf_counter() - t0
    unlimited = None
    if cfg.reduce.compare_unlimited and not band.is_unbounded:
        t0 = time.perf_counter()
        unlimited, _, _ = tsia.tsia(model, cfg.reduce.r, _options(cfg))
        timings["tsia_unlimited"] = time.perf_counter() - t0

    out.mkdir(parents=True, exist_ok=True)
    _write(out / "config.txt", cfg.to_text())
    save_system(red.as_system(), out / "reduced")
    mmio.mmwrite(out / "V.mtx", pair.v)
    mmio.mmwrite(out / "W.mtx", pair.w)
    _write(out / "tsia_report.txt", report.to_text())
    rep = _evaluate_and_write(out, model, red, cfg, band, timings, unlimited)
    _write_timings(out / "timings.txt", timings)

    print(f"status {report.status} after {report.iterations} iterations (best {report.best_iteration})")
    if report.wilson_residuals is not None:
        print("wilson residuals " + " ".join(f"{v:.3e}" for v in report.wilson_residuals.as_tuple()))
    print(f"xi = {rep.xi:.6e}  xi_omega[{rep.band}] = {rep.xi_omega:.6e}")
    if rep.xi_omega_unlimited_model is not None:
        print(f"unlimited model on the band: xi_omega = {rep.xi_omega_unlimited_model:.6e}")
    print(f"artifacts in {out}")
    return EXIT_OK


def as_reduced(system):
    """Read a stored generalized system back as a dense :class:`ReducedModel`."""
    if not isinstance(system, GeneralizedSystem):
        raise ValueError("a reduced model must be a generalized (not index-1) system")
    E = system.E.toarray() if sp.issparse(system.E) else np.asarray(system.E)
    A = system.A.toarray() if sp.issparse(system.A) else np.asarray(system.A)
    B = np.asarray(system.B.toarray() if sp.issparse(system.B) else system.B, dtype=float)
    if not np.array_equal(E, np.eye(E.shape[0])):
        A, B = np.linalg.solve(E, A), np.linalg.solve(E, B)
    C = system.C.toarray() if sp.issparse(system.C) else system.C
    D = system.D.toarray() if sp.issparse(system.D) else system.D
    return ReducedModel(A, B, C, D)


def cmd_evaluate(cfg: RunConfig, reduced_path):
    out = Path(cfg.output.dir)
    model = build_model(cfg.model, cap=cfg.caps.verify)
    if not Path(reduced_path).exists():
        raise FileNotFoundError(f"reduced model not found: {reduced_path}")
    reduced = as_reduced(load_system(reduced_path, cap=cfg.caps.verify))
    if (reduced.p, reduced.m) != (model.p, model.m):
        raise ValueError(f"dimension mismatch: model has {model.m} outputs/{model.p} inputs, "
                         f"reduced has {reduced.m}/{reduced.p}")
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    rep = _evaluate_and_write(out, model, reduced, cfg, cfg.band, timings)
    _write_timings(out / "timings.txt", timings)
    print(f"xi = {rep.xi:.6e}  xi_omega[{rep.band}] = {rep.xi_omega:.6e}")
    return EXIT_OK


def cmd_verify(level="quick", flip_cross_sign=False):
    results = verify.run_checks(level, cross_coefficient=2.0 if flip_cross_sign else -2.0)
    print(verify.format_table(results))
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("FAILED: " + "; ".join(failed))
        return EXIT_VERIFY
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_benchmark(sizes, out, r=10, seed=0, repeats=3, n2_ratio=0.5):
    rows = benchmark.run_benchmark(sizes, n2_ratio=n2_ratio, r=r, seed=seed, repeats=repeats)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    benchmark.write_benchmark_csv(out / "benchmark.csv", rows)
    print(benchmark.FAMILY_LABEL)
    print(f"{'n1':>6} {'n2':>6} {'dense [s]':>10} {'sparse [s]':>10} {'ratio':>7} {'agree':>9}")
    for row in rows:
        print(f"{row.n1:>6} {row.n2:>6} {row.t_dense_path:>10.4f} {row.t_sparse_path:>10.4f} "
              f"{row.ratio:>7.2f} {row.agreement:>9.1e}")
    return EXIT_OK


def _sizes(text):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers, got {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive")
    return sizes


def build_parser():
    p = argparse.ArgumentParser(prog="flmor", description="Frequency-limited H2 model reduction of descriptor systems.")
    p.add_argument("-v", "--verbose", action="store_true", help="log iteration progress")
    sub = p.add_subparsers(dest="command", required=True)

    red = sub.add_parser("reduce", help="reduce a model and write the reduced matrices and reports")
    _add_config_flags(red, ["model", "reduce", "evaluate", "caps", "output"])

    ev = sub.add_parser("evaluate", help="error norms and sigma data of a stored reduced model")
    _add_config_flags(ev, ["model", "evaluate", "caps", "output"])
    ev.add_argument("--reduced", required=True, help="manifest of the reduced model")
    ev.add_argument("--eval-band", dest="cfg:reduce.band", default=None, metavar="BAND",
                    help="band for the band-limited norm (w1,w2 or 'unbounded')")

    ve = sub.add_parser("verify", help="run the oracle check suites")
    ve.add_argument("--level", choices=["quick", "full"], default="quick")
    ve.add_argument("--flip-cross-sign", action="store_true",
                    help="debug: use +2 for the cross term of the error norm (must make the suite fail)")

    be = sub.add_parser("benchmark", help="time the structured index-1 solve against elimination")
    be.add_argument("--sizes", type=_sizes, default=[250, 500, 1000, 2000], help="comma-separated n1 values")
    be.add_argument("--n2-ratio", type=float, default=0.5)
    be.add_argument("--r", type=int, default=10)
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--repeats", type=int, default=3)
    be.add_argument("--out", default="out")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args.level, args.flip_cross_sign)
        if args.command == "benchmark":
            return cmd_benchmark(args.sizes, args.out, args.r, args.seed, args.repeats, args.n2_ratio)
        cfg = _config_from_args(args)
        if args.command == "reduce":
            return cmd_reduce(cfg)
        return cmd_evaluate(cfg, args.reduced)
    except (ValueError, OSError) as exc:
        print(f"flmor: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"flmor: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
