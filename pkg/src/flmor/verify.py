"""Oracle suites behind ``flmor verify``.

Every check compares a production route against an independent one
(Kronecker solve, direct quadrature, dense elimination, closed forms) or
checks a structural property. ``quick`` runs the scalar and small suites,
``full`` adds the multi-instance sweeps.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from flmor import evaluation, gramians, sylvester, tsia
from flmor.systems import (
    FrequencyBand,
    GeneralizedSystem,
    ReducedModel,
    eliminate_algebraic,
    generate_random_index1,
    generate_random_stable,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    seconds: float = 0.0
    detail: str = ""


def _rel(X, Y):
    d = np.linalg.norm(Y)
    return float(np.linalg.norm(X - Y) / d) if d > 0 else float(np.linalg.norm(X))


def _stable_hat(rng, r):
    a = rng.standard_normal((r, r))
    return a - (np.max(np.linalg.eigvals(a).real) + 0.5 + rng.uniform()) * np.eye(r)


def _scalar_pair():
    G = GeneralizedSystem(np.eye(1), -np.eye(1), np.ones((1, 1)), np.ones((1, 1)))
    Gh = ReducedModel(-2.0 * np.eye(1), np.ones((1, 1)), np.ones((1, 1)))
    return G, Gh


# ---------------------------------------------------------------- checks
# each returns (value, tolerance[, detail]); pass means value <= tolerance


def check_kronecker(count=20, **_):
    worst = 0.0
    for k in range(count):
        rng = np.random.default_rng(1000 + k)
        n, r = int(rng.integers(5, 41)), int(rng.integers(1, 7))
        s = generate_random_stable(n, p=2, m=2, density=0.2, seed=k)
        a_hat = _stable_hat(rng, r)
        F = rng.standard_normal((n, r))
        for transpose in (False, True):
            X = sylvester.solve_semi_generalized(s.A, s.E, a_hat, F, transpose=transpose)
            A, E = (s.A.T, s.E.T) if transpose else (s.A, s.E)
            worst = max(worst, _rel(X, sylvester.kronecker_oracle(A, E, a_hat, F)))
    return worst, 1e-10


def check_scalar_h2(cross_coefficient=-2.0, **_):
    G, Gh = _scalar_pair()
    xi = evaluation.h2_error_norm(G, Gh, "trace", cross_coefficient=cross_coefficient)
    return abs(xi - math.sqrt(1.0 / 12.0)), 1e-12, f"Xi = {xi!r}"


def check_scalar_gramian(**_):
    G, _ = _scalar_pair()
    P = gramians.fl_gramian(G, FrequencyBand(0.0, 1.0))
    return abs(P[0, 0] - 0.25), 1e-10, f"P = {float(P[0, 0])!r}"


def check_scalar_band_norm(cross_coefficient=-2.0, **_):
    G, Gh = _scalar_pair()
    band = FrequencyBand(0.0, 1.0)
    t = evaluation.h2fl_error_norm(G, Gh, band, "trace", cross_coefficient=cross_coefficient)
    q = evaluation.h2fl_error_norm(G, Gh, band, "quadrature")
    return abs(t - q), 1e-8


def check_exp_log(count=10, **_):
    worst = 0.0
    for k in range(count):
        rng = np.random.default_rng(2000 + k)
        n = int(rng.integers(2, 25))
        X = rng.standard_normal((n, n)) / math.sqrt(n) + 1j * rng.standard_normal((n, n)) / math.sqrt(n)
        X = X * (2.0 / max(1.0, np.max(np.abs(np.linalg.eigvals(X)))))
        M = la.expm(X)
        worst = max(worst, _rel(la.expm(gramians.matrix_log_principal(M)), M))
    return worst, 1e-10


def check_gramian_quadrature(count=10, **_):
    worst = 0.0
    for k in range(count):
        rng = np.random.default_rng(3000 + k)
        n = int(rng.integers(4, 51))
        s = generate_random_stable(n, p=2, m=2, density=0.2, seed=100 + k)
        w1 = float(rng.uniform(0, 2))
        band = FrequencyBand(w1, w1 + float(rng.uniform(0.5, 5)))
        for side in ("controllability", "observability"):
            worst = max(worst, _rel(gramians.fl_gramian(s, band, side), gramians.fl_gramian_quadrature(s, band, side)))
    return worst, 1e-6


def check_trace_vs_quadrature(count=10, cross_coefficient=-2.0, **_):
    worst = 0.0
    for k in range(count):
        rng = np.random.default_rng(4000 + k)
        n = int(rng.integers(6, 31))
        s = generate_random_stable(n, p=2, m=2, density=0.2, seed=200 + k)
        red, _, _ = tsia.tsia(s, int(rng.integers(1, 4)), tsia.TsiaOptions(max_iter=5))
        w1 = float(rng.uniform(0, 1))
        band = FrequencyBand(w1, w1 + float(rng.uniform(0.5, 5)))
        t = evaluation.h2fl_error_norm(s, red, band, "trace", cross_coefficient=cross_coefficient)
        q = evaluation.h2fl_error_norm(s, red, band, "quadrature")
        worst = max(worst, abs(t - q) / q)
    return worst, 1e-6


def check_index1(count=5, **_):
    worst = 0.0
    for k in range(count):
        rng = np.random.default_rng(5000 + k)
        n1, n2 = int(rng.integers(10, 120)), int(rng.integers(5, 80))
        s = generate_random_index1(n1, n2, p=2, m=2, seed=300 + k, decades=1.0)
        el = eliminate_algebraic(s)
        r = int(rng.integers(1, 7))
        a_hat = _stable_hat(rng, r)
        F = rng.standard_normal((n1, r))
        for transpose in (False, True):
            X = sylvester.solve_index1(s, a_hat, F, transpose=transpose)
            Y = sylvester.solve_semi_generalized(el.A, el.E, a_hat, F, transpose=transpose)
            worst = max(worst, _rel(X, Y))
        pair = tsia.initialize_projection(n1, r, seed=k)
        a, b = tsia.build_reduced_index1(s, pair), tsia.build_reduced(el, pair)
        for x, y in ((a.a_hat, b.a_hat), (a.b_hat, b.b_hat), (a.c_hat, b.c_hat), (a.d_hat, b.d_hat)):
            worst = max(worst, _rel(x, y))
    return worst, 1e-8


def check_unbounded_limit(count=3, **_):
    """Very wide band against the unlimited iteration, 20-state instances."""
    worst = 0.0
    for k in range(count):
        s = generate_random_stable(20, p=2, m=2, density=0.2, seed=400 + k)
        lam = np.abs(la.eigvals(s.A.toarray(), s.E.toarray()))
        opts = tsia.TsiaOptions(max_iter=100, tol=1e-10, init="random")
        a, _, _ = tsia.tsia(s, 4, opts)
        b, _, _ = tsia.tsia_frequency_limited(s, 4, FrequencyBand(0.0, 1e6 * lam.max()), opts)
        worst = max(worst, tsia.spectral_change(a, b))
    return worst, 1e-4


def check_band_additivity(**_):
    s = generate_random_stable(25, p=2, m=2, density=0.2, seed=7)
    a, b, c = 0.3, 1.7, 6.0
    P = gramians.fl_gramian(s, FrequencyBand(a, c))
    Ps = gramians.fl_gramian(s, FrequencyBand(a, b)) + gramians.fl_gramian(s, FrequencyBand(b, c))
    return _rel(Ps, P), 1e-8


def check_gramian_psd(**_):
    s = generate_random_stable(25, p=2, m=2, density=0.2, seed=8)
    bands = [FrequencyBand(1.0, 2.0), FrequencyBand(0.5, 3.0), FrequencyBand(0.0, 10.0)]
    Ps = [gramians.fl_gramian(s, b) for b in bands]
    scale = np.linalg.norm(Ps[-1], 2)
    worst = max(-np.min(np.linalg.eigvalsh(0.5 * (P + P.T))) for P in Ps)
    for P, Q in zip(Ps, Ps[1:]):
        D = Q - P
        worst = max(worst, -np.min(np.linalg.eigvalsh(0.5 * (D + D.T))))
    return max(worst, 0.0) / scale, 1e-10


def check_biorthonormality(**_):
    worst = [0.0]

    def cb(_, __, pair):
        worst[0] = max(worst[0], pair.biorth_error())

    s = generate_random_stable(40, p=2, m=2, density=0.15, seed=9)
    tsia.tsia(s, 5, tsia.TsiaOptions(max_iter=20, callback=cb))
    tsia.tsia_frequency_limited(s, 5, FrequencyBand(0.5, 4.0), tsia.TsiaOptions(max_iter=20, callback=cb))
    return worst[0], 1e-10


def check_wilson(**_):
    s = generate_random_stable(40, p=2, m=2, density=0.15, seed=10)
    _, _, rep = tsia.tsia(s, 4, tsia.TsiaOptions(max_iter=200, tol=1e-9))
    return rep.wilson_residuals.max(), 1e-6, f"status {rep.status} after {rep.iterations}"


def check_exact_reduction(**_):
    rng = np.random.default_rng(11)
    r, n = 3, 30
    A = np.zeros((n, n))
    A[:r, :r] = -np.diag([1.0, 2.0, 3.0]) + 0.3 * rng.standard_normal((r, r))
    A[r:, r:] = -np.diag(rng.uniform(1, 5, n - r))
    A[r:, :r] = 0.5 * rng.standard_normal((n - r, r))
    B = np.zeros((n, 2))
    B[:r] = rng.standard_normal((r, 2))
    C = np.zeros((2, n))
    C[:, :r] = rng.standard_normal((2, r))
    s = GeneralizedSystem(sp.identity(n, format="csc"), sp.csc_matrix(A), B, C)
    red, _, _ = tsia.tsia(s, r)
    return evaluation.h2_error_norm(s, red), 1e-8


QUICK = [
    ("sylvester vs kronecker (4 instances)", lambda **kw: check_kronecker(count=4, **kw)),
    ("scalar H2 error 1/12", check_scalar_h2),
    ("scalar band Gramian 1/4", check_scalar_gramian),
    ("scalar band norm trace vs quadrature", check_scalar_band_norm),
    ("exp(log(M)) round trip", lambda **kw: check_exp_log(count=4, **kw)),
    ("index-1 vs eliminated (2 instances)", lambda **kw: check_index1(count=2, **kw)),
]

FULL = [
    ("sylvester vs kronecker (20 instances)", check_kronecker),
    ("scalar H2 error 1/12", check_scalar_h2),
    ("scalar band Gramian 1/4", check_scalar_gramian),
    ("scalar band norm trace vs quadrature", check_scalar_band_norm),
    ("exp(log(M)) round trip", check_exp_log),
    ("band Gramian log vs quadrature (10 instances)", check_gramian_quadrature),
    ("band norm trace vs quadrature (10 instances)", check_trace_vs_quadrature),
    ("index-1 vs eliminated (5 instances)", check_index1),
    ("wide band vs unlimited iteration", check_unbounded_limit),
    ("band additivity", check_band_additivity),
    ("Gramian PSD and band monotonicity", check_gramian_psd),
    ("biorthonormality after every iteration", check_biorthonormality),
    ("Wilson residuals at the fixed point", check_wilson),
    ("exact reduction recovered", check_exact_reduction),
]


def run_checks(level="quick", cross_coefficient=-2.0):
    suite = {"quick": QUICK, "full": FULL}.get(level)
    if suite is None:
        raise ValueError(f"unknown verify level {level!r}")
    results = []
    for name, fn in suite:
        t0 = time.perf_counter()
        try:
            out = fn(cross_coefficient=cross_coefficient)
            value, tol = out[0], out[1]
            detail = out[2] if len(out) > 2 else ""
            passed = bool(np.isfinite(value) and value <= tol)
        except Exception as exc:  # a crashing oracle is a failed check
            value, tol, passed, detail = math.nan, math.nan, False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, passed, float(value), float(tol), time.perf_counter() - t0, detail))
    return results


def format_table(results):
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  {'value':>10}  {'tol':>8}  {'time':>6}"]
    for r in results:
        lines.append(
            f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.value:>10.2e}  {r.tolerance:>8.0e}  {r.seconds:>5.1f}s"
            + (f"  {r.detail}" if r.detail else "")
        )
    return "\n".join(lines)
