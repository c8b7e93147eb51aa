"""H2 and band-limited H2 error norms, sigma data and error reports.

Norms are reported as ``Xi = ||G - Ĝ||`` with the band-limited variant

    Xi_w^2 = (1/pi) int_{w1}^{w2} ||G(i nu) - Ĝ(i nu)||_F^2 d nu,

computed either from Gramian traces,
``Tr(C P C^T) - 2 Tr(C M Ĉ^T) + Tr(Ĉ P̂ Ĉ^T)``, or by adaptive quadrature of
the error response (independent of every matrix equation solver).
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from flmor import gramians
from flmor.sylvester import solve_generalized_lyapunov
from flmor.systems import (
    ELIMINATION_CAP,
    FrequencyBand,
    GeneralizedSystem,
    Index1System,
    ReducedModel,
    _dense,
    eliminate_algebraic,
)
from flmor.tsia import CrossGramianSolver

DENSE_GRAMIAN_CAP = 2000
# below this ratio of Xi^2 to the largest trace term the trace route has lost
# more than half of the available digits
CANCELLATION_RATIO = 1e-8
NORM_QUAD_RTOL = 1e-10
ENERGY_FLOOR = 1e-15


class NormError(ArithmeticError):
    """The requested error norm is infinite or cannot be evaluated."""


def _feedthrough(sys):
    if isinstance(sys, Index1System):
        return sys.feedthrough()
    return sys.D


def _check_pair(sys, reduced):
    if (sys.p, sys.m) != (reduced.p, reduced.m):
        raise ValueError(f"input/output sizes differ: full {sys.m}x{sys.p}, reduced {reduced.m}x{reduced.p}")
    if not np.allclose(_feedthrough(sys), reduced.D, rtol=1e-12, atol=1e-14):
        raise NormError("feedthrough mismatch (D̂ != D): the H2 error norm is infinite")
    if not reduced.stable:
        raise NormError("reduced model is unstable: the H2 error norm is undefined")


def _dense_system(sys, cap):
    """Generalized form usable by the dense trace route, or None above the caps."""
    if isinstance(sys, Index1System):
        if sys.n1 > cap or sys.n1 + sys.n2 > ELIMINATION_CAP:
            return None
        return eliminate_algebraic(sys)
    return sys if sys.n <= cap else None


# ---------------------------------------------------------------- error system


@dataclass(eq=False)
class ErrorSystemBlocks:
    """Dense error system ``[[E, 0], [0, I]]``, ``blkdiag(A, Â)``, ``[B; B̂]``, ``[C, -Ĉ]``
    with its partitioned (band-limited) Gramians."""

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    P: np.ndarray
    M: np.ndarray
    P_hat: np.ndarray
    Q: np.ndarray
    N: np.ndarray
    Q_hat: np.ndarray
    band: FrequencyBand = None

    def controllability_gramian(self):
        return np.block([[self.P, self.M], [self.M.T, self.P_hat]])

    def observability_gramian(self):
        return np.block([[self.Q, self.N], [self.N.T, self.Q_hat]])

    def residuals(self):
        """Relative residuals of both error-system Lyapunov equations."""
        sysx = GeneralizedSystem(self.E, self.A, self.B, self.C)
        PX, QX = self.controllability_gramian(), self.observability_gramian()
        if self.band is None or self.band.is_unbounded:
            Fc, Fo = self.B @ self.B.T, self.C.T @ self.C
        else:
            w = gramians.band_weights(sysx, self.band)
            Fc = 2.0 * gramians.fl_rhs(sysx, None, w, None, "full")
            Fo = 2.0 * gramians.fl_rhs(sysx, None, w, None, "full-observability")
        Rc = self.A @ PX @ self.E.T + self.E @ PX @ self.A.T + Fc
        Ro = self.A.T @ QX @ self.E + self.E.T @ QX @ self.A + Fo
        sc = 2 * np.linalg.norm(self.A) * np.linalg.norm(self.E) * np.linalg.norm(PX) + np.linalg.norm(Fc)
        so = 2 * np.linalg.norm(self.A) * np.linalg.norm(self.E) * np.linalg.norm(QX) + np.linalg.norm(Fo)
        return float(np.linalg.norm(Rc) / sc), float(np.linalg.norm(Ro) / so)


def error_system_blocks(sys, reduced: ReducedModel, band: FrequencyBand = None, cap=DENSE_GRAMIAN_CAP):
    dense = _dense_system(sys, cap)
    if dense is None:
        raise ValueError(f"error-system blocks need a dense system with n <= {cap}")
    band = None if band is None or band.is_unbounded else band
    cs = CrossGramianSolver(dense, band)
    A, E = _dense(dense.A), _dense(dense.E)
    if band is None:
        P = solve_generalized_lyapunov(A, E, dense.B @ dense.B.T)
        Q = solve_generalized_lyapunov(A, E, dense.C.T @ dense.C, transpose=True)
    else:
        P = gramians.fl_gramian(dense, band, "controllability")
        Q = gramians.fl_gramian(dense, band, "observability")
    r = reduced.r
    return ErrorSystemBlocks(
        E=la.block_diag(E, np.eye(r)),
        A=la.block_diag(A, reduced.a_hat),
        B=np.vstack([dense.B, reduced.b_hat]),
        C=np.hstack([dense.C, -reduced.c_hat]),
        P=P, M=cs.solve_m(reduced), P_hat=cs.reduced_gramian(reduced, "controllability"),
        Q=Q, N=cs.solve_n(reduced), Q_hat=cs.reduced_gramian(reduced, "observability"),
        band=band,
    )


# ---------------------------------------------------------------- norms


@dataclass(frozen=True)
class NormResult:
    value: float
    method: str
    error_estimate: float = 0.0


def _trace_terms(dense, reduced, band):
    cs = CrossGramianSolver(dense, band)
    if band is None:
        P = solve_generalized_lyapunov(_dense(dense.A), _dense(dense.E), dense.B @ dense.B.T)
    else:
        P = gramians.fl_gramian(dense, band, "controllability")
    M = cs.solve_m(reduced)
    P_hat = cs.reduced_gramian(reduced, "controllability")
    C, Ch = dense.C, reduced.c_hat
    return float(np.trace(C @ P @ C.T)), float(np.trace(C @ M @ Ch.T)), float(np.trace(Ch @ P_hat @ Ch.T))


def _energy_floor(sys, reduced, band, rel=ENERGY_FLOOR):
    """Absolute quadrature floor: ``rel`` times a crude estimate of the band energy of ``G`` and ``Ĝ``.

    Never zero, so an identically vanishing integrand terminates.
    """
    hi = band.omega2 if math.isfinite(band.omega2) else max(10.0 * band.omega1, 1e3)
    lo = band.omega1 if band.omega1 > 0 else hi * 1e-4
    peak = max(float(np.sum(np.abs(g.transfer(1j * nu)) ** 2))
               for g in (sys, reduced) for nu in np.geomspace(lo, hi, 7))
    return max(rel * peak * (hi - band.omega1 if hi > band.omega1 else 1.0), np.finfo(float).tiny)


def error_quadrature(sys, reduced, band: FrequencyBand, rtol=NORM_QUAD_RTOL, atol=None):
    """``sqrt((1/pi) int_band ||G(i nu) - Ĝ(i nu)||_F^2 d nu)`` and its error estimate.

    ``atol`` bounds the absolute error of the integral; by default it is a
    tiny fraction of the band energy of ``G`` and ``Ĝ`` so that exact reductions
    (a zero integrand) terminate.
    """
    if band.is_degenerate:
        return 0.0, 0.0
    if atol is None:
        atol = _energy_floor(sys, reduced, band)

    def f(nu):
        D = sys.transfer(1j * nu) - reduced.transfer(1j * nu)
        return np.array(np.sum(np.abs(D) ** 2))

    val, err = gramians._integrate(f, band.omega1, band.omega2, rtol, (), atol=atol)
    val = max(float(val), 0.0) / math.pi
    xi = math.sqrt(val)
    # d sqrt(x) = dx / (2 sqrt(x))
    return xi, (err / math.pi) / (2 * xi) if xi > 0 else math.sqrt(err / math.pi)


def _norm(sys, reduced, band, method, cap, cross_coefficient):
    if method not in ("auto", "trace", "quadrature"):
        raise ValueError(f"unknown norm method {method!r}")
    _check_pair(sys, reduced)
    full_band = band if band is not None else FrequencyBand.unbounded()
    if full_band.is_degenerate:
        return NormResult(0.0, "trace")
    dense = _dense_system(sys, cap) if method != "quadrature" else None
    if dense is None and method == "trace":
        raise ValueError(f"trace route needs n <= {cap}; use method='quadrature'")
    if dense is not None:
        t1, t2, t3 = _trace_terms(dense, reduced, None if full_band.is_unbounded else full_band)
        sq = t1 + cross_coefficient * t2 + t3
        if method == "trace":
            return NormResult(math.sqrt(max(sq, 0.0)), "trace")
        if sq > CANCELLATION_RATIO * max(abs(t1), abs(t3), np.finfo(float).tiny):
            return NormResult(math.sqrt(sq), "trace")
    xi, err = error_quadrature(sys, reduced, full_band)
    return NormResult(xi, "quadrature", err)


def h2_error_norm(sys, reduced: ReducedModel, method="auto", cap=DENSE_GRAMIAN_CAP, cross_coefficient=-2.0, full=False):
    """H2 norm of ``G - Ĝ``.

    ``method="trace"`` uses the Gramian trace formula (dense, ``n <= cap``),
    ``"quadrature"`` integrates the error response over ``[0, inf)``, and
    ``"auto"`` takes the trace route unless it is above the cap or its
    terms cancel to fewer than half the working digits.
    ``cross_coefficient`` exists to demonstrate the sign sensitivity of the
    cross term; leave it at -2. ``full=True`` returns the :class:`NormResult`.
    """
    res = _norm(sys, reduced, None, method, cap, cross_coefficient)
    return res if full else res.value


def h2fl_error_norm(sys, reduced: ReducedModel, band: FrequencyBand, method="auto", cap=DENSE_GRAMIAN_CAP,
                    cross_coefficient=-2.0, full=False):
    """Band-limited H2 error ``Xi_w`` over ``±[w1, w2]`` (same routes as :func:`h2_error_norm`)."""
    res = _norm(sys, reduced, band, method, cap, cross_coefficient)
    return res if full else res.value


# ---------------------------------------------------------------- sigma data


@dataclass(frozen=True, eq=False)
class SigmaPoint:
    frequency: float
    sigma: float
    response: np.ndarray = None
    error: str = None


def _sample(sys, nu):
    try:
        G = np.atleast_2d(sys.transfer(1j * nu))
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        return SigmaPoint(float(nu), math.nan, None, f"{type(exc).__name__}: {exc}")
    if not np.all(np.isfinite(G)):
        return SigmaPoint(float(nu), math.nan, None, "non-finite response (i nu E - A singular)")
    return SigmaPoint(float(nu), float(np.linalg.norm(G, 2)), G)


def sigma_response(sys, frequencies, workers=1):
    """Largest singular value of ``G(i nu)`` per frequency; failures become per-point error entries."""
    freqs = [float(f) for f in frequencies]
    if any(not math.isfinite(f) or f < 0 for f in freqs):
        raise ValueError("frequencies must be finite and non-negative")
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda f: _sample(sys, f), freqs))
    return [_sample(sys, f) for f in freqs]


def frequency_grid(band: FrequencyBand, n_inside=200, n_outside=200, scale=(1e-2, 1e2)):
    """Log-spaced grid: ``n_inside`` points across the band and ``n_outside`` beyond it.

    Returns ``(frequencies, inside_mask)`` sorted ascending. An unbounded band
    uses ``scale`` as its plotting range; a degenerate band has one interior
    point.
    """
    if band.is_unbounded:
        f = np.geomspace(scale[0], scale[1], n_inside + n_outside)
        return f, np.ones(f.size, dtype=bool)
    if band.is_high_pass:
        band = FrequencyBand(band.omega1, max(band.omega1 * 1e4, scale[1]))
    if band.is_degenerate:
        inside = np.array([band.omega2])
        lo, hi = band.omega2, band.omega2
    else:
        lo = band.omega1 if band.omega1 > 0 else band.omega2 * 1e-4
        hi = band.omega2
        inside = np.geomspace(lo, hi, n_inside)
    if band.omega1 > 0:
        below = np.geomspace(lo / 100.0, lo, n_outside // 2 + 1)[:-1]
        above = np.geomspace(hi, hi * 100.0, n_outside - below.size + 1)[1:]
    else:
        below = np.empty(0)
        above = np.geomspace(hi, hi * 1e4, n_outside + 1)[1:]
    f = np.concatenate([below, inside, above])
    mask = np.concatenate([np.zeros(below.size, bool), np.ones(inside.size, bool), np.zeros(above.size, bool)])
    return f, mask


def sigma_table(sys, reduced, frequencies, workers=1):
    """Rows ``(frequency, sigma_full, sigma_reduced, abs_error, rel_error)``."""
    full = sigma_response(sys, frequencies, workers)
    red = sigma_response(reduced, frequencies, workers)
    rows = []
    for a, b in zip(full, red):
        if a.error or b.error:
            rows.append((a.frequency, a.sigma, b.sigma, math.nan, math.nan))
            continue
        err = float(np.linalg.norm(a.response - b.response, 2))
        rel = err / a.sigma if a.sigma > 0 else (0.0 if err == 0 else math.inf)
        rows.append((a.frequency, a.sigma, b.sigma, err, rel))
    return rows


SIGMA_COLUMNS = ("frequency", "sigma_full", "sigma_reduced", "abs_error", "rel_error")


def write_sigma_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIGMA_COLUMNS)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def read_sigma_csv(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != SIGMA_COLUMNS:
            raise ValueError(f"{path}: unexpected sigma CSV header {header}")
        return [tuple(float(v) for v in row) for row in rd]


# ---------------------------------------------------------------- reports


@dataclass
class ErrorReport:
    """Error norms of one reduced model.

    ``xi`` is the unlimited H2 error of this model and ``xi_omega`` its
    error on ``band``. When the model came from a band-limited run, the
    unlimited error can also mean that of a separately reduced unlimited
    model; that reading is carried in ``xi_unlimited_model`` (and its band
    error in ``xi_omega_unlimited_model``) when supplied.
    """

    xi: float
    xi_omega: float
    band: str
    r: int
    model_id: str = ""
    method_xi: str = ""
    method_xi_omega: str = ""
    error_estimate_xi: float = 0.0
    error_estimate_xi_omega: float = 0.0
    xi_unlimited_model: float = None
    xi_omega_unlimited_model: float = None
    timings: dict = field(default_factory=dict)
    sigma: list = field(default_factory=list)

    _SCALARS = (
        "xi", "xi_omega", "band", "r", "model_id", "method_xi", "method_xi_omega",
        "error_estimate_xi", "error_estimate_xi_omega", "xi_unlimited_model", "xi_omega_unlimited_model",
    )

    def to_text(self):
        """``key = <json>`` lines; sigma rows repeat the ``sigma`` key in order."""
        lines = [f"{k} = {json.dumps(getattr(self, k))}" for k in self._SCALARS]
        for k in sorted(self.timings):
            lines.append(f"timing.{k} = {json.dumps(self.timings[k])}")
        lines.extend(f"sigma = {json.dumps([float(v) for v in row])}" for row in self.sigma)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        values, timings, sigma = {}, {}, []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            if not raw.strip():
                continue
            if " = " not in raw:
                raise ValueError(f"line {lineno}: expected 'key = value'")
            key, val = raw.split(" = ", 1)
            val = json.loads(val)
            if key == "sigma":
                sigma.append(tuple(val))
            elif key.startswith("timing."):
                timings[key[len("timing."):]] = val
            elif key in cls._SCALARS:
                values[key] = val
            else:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
        return cls(**values, timings=timings, sigma=sigma)


def error_report(sys, reduced, band: FrequencyBand, timings=None, model_id="", unlimited_model=None,
                 method="auto", n_inside=200, n_outside=200, workers=1):
    """Collect both norms and the sigma tables for ``reduced``.

    ``unlimited_model`` (optional) is a model from an unlimited run whose
    errors are reported alongside for comparison.
    """
    xi = h2_error_norm(sys, reduced, method, full=True)
    xw = h2fl_error_norm(sys, reduced, band, method, full=True)
    xi_u = xw_u = None
    if unlimited_model is not None:
        xi_u = h2_error_norm(sys, unlimited_model, method)
        xw_u = h2fl_error_norm(sys, unlimited_model, band, method)
    if band.is_unbounded:
        lo, hi = _plot_scale(reduced)
        freqs, _ = frequency_grid(band, n_inside, n_outside, scale=(lo, hi))
    else:
        freqs, _ = frequency_grid(band, n_inside, n_outside)
    return ErrorReport(
        xi=xi.value, xi_omega=xw.value, band=str(band), r=reduced.r, model_id=model_id,
        method_xi=xi.method, method_xi_omega=xw.method,
        error_estimate_xi=xi.error_estimate, error_estimate_xi_omega=xw.error_estimate,
        xi_unlimited_model=xi_u, xi_omega_unlimited_model=xw_u,
        timings=dict(timings or {}), sigma=sigma_table(sys, reduced, freqs, workers),
    )


def _plot_scale(reduced):
    mag = np.abs(reduced.eigenvalues())
    mag = mag[mag > 0]
    if mag.size == 0:
        return 1e-2, 1e2
    return float(mag.min() / 100), float(mag.max() * 100)
