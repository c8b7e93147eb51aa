"""Two-sided iteration for (frequency-limited) H2-optimal reduction.

Each sweep solves the two cross-Gramian Sylvester equations of the current
reduced model,

    A V + E V Â^T + F_c = 0,        A^T N + E^T N Â + F_o = 0,

takes ``W = E^T N`` as the test basis, biorthonormalizes and projects
again. ``F_c = B B̂^T`` and ``F_o = -C^T Ĉ`` in the unlimited case, and the
band-weighted products of :func:`flmor.gramians.fl_rhs` (doubled for the
symmetric band) otherwise.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.optimize import linear_sum_assignment

from flmor import gramians
from flmor.sylvester import solve_dense_lyapunov, solve_index1, solve_semi_generalized
from flmor.systems import FrequencyBand, Index1System, ReducedModel, factorize

log = logging.getLogger(__name__)

BEST_RTOL = 1e-10


class TsiaError(ArithmeticError):
    """The iteration could not produce a usable reduced model."""


class NoStableIterateError(TsiaError):
    """Every iterate of a run had an unstable reduced matrix."""


class BreakdownError(TsiaError):
    def __init__(self, msg, condition=np.inf):
        super().__init__(msg)
        self.condition = condition


@dataclass(frozen=True, eq=False)
class ProjectionPair:
    v: np.ndarray
    w: np.ndarray
    biorthonormalized: bool = False

    @property
    def r(self):
        return self.v.shape[1]

    def biorth_error(self):
        return float(np.linalg.norm(self.w.T @ self.v - np.eye(self.r)))


@dataclass
class TsiaOptions:
    """Iteration controls.

    tol
        Stop when the relative spectral change of ``Â`` drops below it.
    restarts
        Budget shared by initialization reseeds and safeguard retries.
    init
        ``random``, ``eigen-heuristic`` or ``auto`` (band-sampled starts for
        band-limited runs, random otherwise; a band-limited ``auto`` run with
        no stable iterate is repeated once from a random start).
    patience
        Stop as ``stagnated`` after this many consecutive iterates that are
        worse than the best one (unstable iterates count as worse).
    safeguard
        ``reflect``: an unstable ``Â`` enters the next Sylvester solves with its
        eigenvalues mirrored into the left half-plane. ``perturb``: the iterate
        is rejected and the previous basis perturbed instead.
    callback
        Optional ``f(iteration, reduced, pair)`` called for the initial
        model and every new iterate.
    """

    tol: float = 1e-6
    max_iter: int = 50
    restarts: int = 3
    seed: int = 0
    init: str = "auto"
    patience: int = 15
    sylvester_tol: float = 1e-9
    safeguard: str = "reflect"
    dense_cap: int = gramians.DENSE_LOG_CAP
    callback: object = None


@dataclass(frozen=True)
class WilsonResiduals:
    res1: float
    res2: float
    res3: float

    def max(self):
        return max(self.res1, self.res2, self.res3)

    def as_tuple(self):
        return (self.res1, self.res2, self.res3)


@dataclass
class TsiaReport:
    iterations: int = 0
    convergence_history: list = field(default_factory=list)
    error_estimates: list = field(default_factory=list)
    wilson_residuals: WilsonResiduals = None
    status: str = "max-iter"
    best_iteration: int = 0
    restarts_used: int = 0
    band: str = "unbounded"
    init: str = ""
    rank_repairs: int = 0

    def to_text(self):
        """``key = <json>`` lines, one per field (Wilson residuals as a list)."""
        wil = None if self.wilson_residuals is None else list(self.wilson_residuals.as_tuple())
        rows = [
            ("status", self.status), ("band", self.band), ("iterations", self.iterations),
            ("best_iteration", self.best_iteration), ("restarts_used", self.restarts_used), ("init", self.init),
            ("rank_repairs", self.rank_repairs),
            ("wilson_residuals", wil),
            ("convergence_history", [float(v) for v in self.convergence_history]),
            ("error_estimates", [float(v) for v in self.error_estimates]),
        ]
        return "".join(f"{k} = {json.dumps(v)}\n" for k, v in rows)

    @classmethod
    def from_text(cls, text):
        vals = {}
        for raw in text.splitlines():
            if raw.strip():
                key, val = raw.split(" = ", 1)
                vals[key] = json.loads(val)
        wil = vals.pop("wilson_residuals", None)
        return cls(**vals, wilson_residuals=None if wil is None else WilsonResiduals(*wil))


# ---------------------------------------------------------------- projection


def biorthonormalize(pair: ProjectionPair, cond_limit=1e12):
    """Return ``(V, W (V^T W)^{-1})`` so that ``W^T V = I``; ``V`` is unchanged."""
    G = pair.v.T @ pair.w
    cond = np.linalg.cond(G) if G.size else 1.0
    if not np.isfinite(cond) or cond > cond_limit:
        raise BreakdownError(f"biorthonormalization breakdown: cond(V^T W) = {cond:.2e}", cond)
    W = np.linalg.solve(G.T, pair.w.T).T
    return ProjectionPair(pair.v, W, True)


def _orth(X):
    Q, R = la.qr(X, mode="economic")
    d = np.abs(np.diag(R))
    if d.size == 0 or d.min() <= 1e-12 * d.max():
        raise BreakdownError("projection basis lost rank")
    # fixed sign convention keeps runs reproducible across equivalent paths
    return Q * np.sign(np.diag(R))


def _frequency_scale(sys):
    """Cheap frequency range of the dynamics from the diagonal ratios ``|A_ii / E_ii|``."""
    if isinstance(sys, Index1System):
        A, E = sys.J1, sys.E1
    else:
        A, E = sys.A, sys.E
    d = np.abs(np.asarray(A.diagonal(), dtype=float) / np.asarray(E.diagonal(), dtype=float))
    d = d[np.isfinite(d) & (d > 0)]
    if d.size == 0:
        return 1e-2, 1e2
    return float(d.min()), float(max(d.max(), 10 * d.min()))


def _resolvent_samples(sys, band, k, rng, transpose=False):
    """Real/imaginary parts of ``(i nu E - A)^{-1} B`` (or the dual) at ``k`` band frequencies."""
    if band is None or band.is_unbounded:
        lo, hi = _frequency_scale(sys)
    else:
        hi = band.omega2 if np.isfinite(band.omega2) else max(_frequency_scale(sys)[1], 10 * band.omega1)
        lo = max(band.omega1, 1e-3 * hi)
    nus = np.geomspace(lo, hi, max(k, 1)) if hi > lo else np.full(max(k, 1), hi)
    cols = []
    res = gramians._ShiftedResolvent(sys, transpose)
    B, C = gramians._io_blocks(sys)
    K = C.T if transpose else B
    for nu in nus:
        Y = res.solve(-nu, -K)  # (A - i nu E) y = -k  <=>  (i nu E - A) y = k
        Y = Y @ rng.standard_normal((Y.shape[1], 1))
        cols += [Y.real, Y.imag]
    return np.hstack(cols)


def _basis_from_samples(S, r, rng, rank_tol=1e-10):
    """Orthonormal ``n x r`` basis led by the numerically independent sample directions."""
    Q, R, _ = la.qr(S, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    k = min(r, int(np.sum(d > rank_tol * d[0]))) if d.size and d[0] > 0 else 0
    Q = Q[:, :k]
    if k == r:
        return Q
    X = rng.standard_normal((S.shape[0], r - k))
    for _ in range(2):
        X -= Q @ (Q.T @ X)
    return np.hstack([Q, _orth(X)])


def initialize_projection(n, r, seed=0, mode="random", sys=None, band=None, attempts=5):
    """Initial biorthonormal pair (``W^T V = I``), deterministic in ``seed``.

    ``random``: one random orthonormal ``V`` with ``W = V``.
    ``eigen-heuristic``: resolvent samples of ``sys`` at log-spaced frequencies
    inside ``band``, padded with random columns when rank deficient; if the
    two sample bases are too close to orthogonal to biorthonormalize, the
    start is one-sided (``W = V``).
    """
    if not 1 <= r < n:
        raise ValueError(f"need 1 <= r < n, got r={r}, n={n}")
    last = None
    for attempt in range(attempts):
        rng = np.random.default_rng([seed, attempt])
        try:
            if mode == "random":
                V = _orth(rng.standard_normal((n, r)))
                W = V.copy()
            elif mode == "eigen-heuristic":
                if sys is None:
                    raise ValueError("eigen-heuristic initialization needs the system")
                k = int(np.ceil(r / 2))
                V = _basis_from_samples(_resolvent_samples(sys, band, k, rng), r, rng)
                Wr = _resolvent_samples(sys, band, k, rng, transpose=True)
                E = sys.E1 if isinstance(sys, Index1System) else sys.E
                W = _basis_from_samples(E.T @ Wr, r, rng)
                try:
                    return biorthonormalize(ProjectionPair(V, W))
                except BreakdownError:
                    # nearly orthogonal sample spaces; a one-sided start is always well posed
                    log.info("two-sided start ill-conditioned, using W = V")
                    W = V
            else:
                raise ValueError(f"unknown init mode {mode!r}")
            return biorthonormalize(ProjectionPair(V, W))
        except BreakdownError as exc:
            last = exc
    raise BreakdownError(f"initialization failed after {attempts} attempts: {last}")


# ---------------------------------------------------------------- reduction


def build_reduced(sys, pair: ProjectionPair, e_lu=None):
    """``Â = W^T E^{-1} A V``, ``B̂ = W^T E^{-1} B``, ``Ĉ = C V``, ``D̂ = D``; ``E^{-1}`` is applied by solves."""
    if isinstance(sys, Index1System):
        return build_reduced_index1(sys, pair, e_lu)
    lu = e_lu or factorize(sys.E, "E")
    V, W = pair.v, pair.w
    # W^T E^{-1} X = (E^{-T} W)^T X: one transposed solve serves Â and B̂
    Wt = lu.solve(W, "T")
    A_hat = Wt.T @ (sys.A @ V)
    B_hat = Wt.T @ sys.B
    return ReducedModel(A_hat, B_hat, sys.C @ V, sys.D)


def build_reduced_index1(sys: Index1System, pair: ProjectionPair, e_lu=None):
    """Reduced matrices of an index-1 system without forming the eliminated pencil.

    ``Ĵ1 = W^T E1^{-1} J1 V``, ``Ĵ2 = W^T E1^{-1} J2``, ``Ĵ3 = J3 V``; then
    ``Â = Ĵ1 - Ĵ2 J4^{-1} Ĵ3``, ``B̂ = B̂1 - Ĵ2 J4^{-1} B2``,
    ``Ĉ = Ĉ1 - C2 J4^{-1} Ĵ3`` and ``D̂ = Da - C2 J4^{-1} B2``.
    """
    lu = e_lu or factorize(sys.E1, "E1")
    lu4 = sys.j4_lu()
    V, W = pair.v, pair.w
    Wt = lu.solve(W, "T")
    J1h = Wt.T @ (sys.J1 @ V)
    J2h = (sys.J2.T @ Wt).T
    J3h = sys.J3 @ V
    B1h = Wt.T @ sys.B1
    C1h = sys.C1 @ V
    r = V.shape[1]
    S = lu4.solve(np.hstack([J3h, sys.B2]))
    S3, SB = S[:, :r], S[:, r:]
    return ReducedModel(J1h - J2h @ S3, B1h - J2h @ SB, C1h - sys.C2 @ S3, sys.Da - sys.C2 @ SB)


# ---------------------------------------------------------------- equations


class CrossGramianSolver:
    """Solves the two cross-Gramian equations for a fixed full system and band."""

    def __init__(self, sys, band=None, tol=1e-9, dense_cap=gramians.DENSE_LOG_CAP):
        self.sys = sys
        self.band = None if band is None or band.is_unbounded else band
        self.tol = tol
        if isinstance(sys, Index1System):
            self.B, self.C = sys.reduced_input(), sys.reduced_output()
            self.E = sys.E1
        else:
            self.B, self.C = sys.B, sys.C
            self.E = sys.E
        self.weights = gramians.weights_for(sys, self.band, dense_cap) if self.band else None

    def _sylv(self, a_hat, F, transpose):
        if isinstance(self.sys, Index1System):
            return solve_index1(self.sys, a_hat, F, tol=self.tol, transpose=transpose)
        return solve_semi_generalized(self.sys.A, self.sys.E, a_hat, F, tol=self.tol, transpose=transpose)

    def rhs(self, red, kind):
        if self.band is None:
            return self.B @ red.b_hat.T if kind == "controllability-cross" else -self.C.T @ red.c_hat
        rw = gramians.band_weights(red, self.band)
        return 2.0 * gramians.fl_rhs(self.sys, red, self.weights, rw, kind, B=self.B, C=self.C)

    def solve_m(self, red):
        """``A M + E M Â^T + F_c = 0``."""
        return self._sylv(red.a_hat, self.rhs(red, "controllability-cross"), False)

    def solve_n(self, red):
        """``A^T N + E^T N Â + F_o = 0`` (descriptor-form dual)."""
        return self._sylv(red.a_hat.T, self.rhs(red, "observability-cross"), True)

    def reduced_gramian(self, red, side="controllability"):
        if self.band is None:
            if side == "controllability":
                return solve_dense_lyapunov(red.a_hat, red.b_hat @ red.b_hat.T)
            return solve_dense_lyapunov(red.a_hat.T, red.c_hat.T @ red.c_hat)
        return gramians.fl_gramian(red, self.band, side)

    def objective(self, red, M):
        """Error functional up to the constant ``Tr(C P C^T)``: ``-2 Tr(C M Ĉ^T) + Tr(Ĉ P̂ Ĉ^T)``."""
        P_hat = self.reduced_gramian(red)
        return float(-2.0 * np.trace(self.C @ M @ red.c_hat.T) + np.trace(red.c_hat @ P_hat @ red.c_hat.T))


def spectral_change(old, new):
    """``max_k |lam_k(new) - lam_k(old)| / |lam_k(old)|`` with eigenvalues paired by minimal total distance."""
    lo, ln = old.eigenvalues(), new.eigenvalues()
    cost = np.abs(lo[:, None] - ln[None, :])
    i, j = linear_sum_assignment(cost)
    return float(np.max(cost[i, j] / np.maximum(np.abs(lo[i]), np.finfo(float).tiny)))


def wilson_residuals(sys, reduced: ReducedModel, pair: ProjectionPair = None, band=None, tol=1e-9):
    """Normalized residuals of the three Wilson conditions.

    ``M`` and ``N`` are the cross-Gramian blocks of the given reduced model
    (at a fixed point they span ``V`` and ``W``); ``N' = E^T N`` is the dual
    block of the standard-form system, giving

    ``Q̂ P̂ + N'^T M``, ``Q̂ B̂ + N'^T E^{-1} B`` (``= N^T B``) and ``Ĉ P̂ - C M``,

    each divided by the larger norm of its two terms. ``pair`` is accepted
    for symmetry with the other routines and only used for its shape check.
    """
    if not reduced.stable:
        raise TsiaError("Wilson residuals need a stable reduced model")
    if pair is not None and pair.r != reduced.r:
        raise ValueError("projection pair and reduced model orders differ")
    cs = CrossGramianSolver(sys, band, tol)
    M = cs.solve_m(reduced)
    N = cs.solve_n(reduced)
    P_hat = cs.reduced_gramian(reduced, "controllability")
    Q_hat = cs.reduced_gramian(reduced, "observability")
    Np = (cs.E.T @ N)

    def rel(X, Y):
        d = max(np.linalg.norm(X), np.linalg.norm(Y))
        return float(np.linalg.norm(X + Y) / d) if d > 0 else 0.0

    return WilsonResiduals(
        rel(Q_hat @ P_hat, Np.T @ M),
        rel(Q_hat @ reduced.b_hat, N.T @ cs.B),
        rel(reduced.c_hat @ P_hat, -cs.C @ M),
    )


# ---------------------------------------------------------------- iteration


def _repair_orth(X, r, rng, report):
    """``_orth(X)``, or when ``X`` is numerically rank deficient its independent
    directions padded with random ones (the next shifts then differ)."""
    try:
        return _orth(X)
    except BreakdownError:
        report.rank_repairs += 1
        log.info("Sylvester solution lost rank, padding the basis")
        return _basis_from_samples(X / np.linalg.norm(X, axis=0), r, rng, rank_tol=1e-12)


def _perturb(pair, rng, scale=1e-3):
    V = pair.v + scale * rng.standard_normal(pair.v.shape) / np.sqrt(pair.v.shape[0])
    W = pair.w + scale * rng.standard_normal(pair.w.shape) * np.linalg.norm(pair.w) / np.sqrt(pair.w.size)
    return biorthonormalize(ProjectionPair(_orth(V), _orth(W)))


def reflect_unstable(red: ReducedModel, collision_tol=1e-6):
    """Copy of ``red`` with eigenvalues ``lam`` of ``Â`` mapped to ``-|Re lam| + i Im lam``.

    The eigenvectors are kept unless a reflected eigenvalue lands within
    ``collision_tol`` (relative) of another eigenvalue. A repeated semisimple
    eigenvalue would make the Sylvester solutions rank deficient for
    single-input systems, so in that case the ordered real Schur form
    ``Â = Z [[T11, T12], [0, T22]] Z^T`` (unstable part in ``T11``) becomes
    ``Z [[-T11, T12], [0, T22]] Z^T`` and the coupling ``T12`` turns the
    collision into a Jordan block.
    """
    lam, X = np.linalg.eig(red.a_hat)
    unstable = lam.real >= 0
    mirrored = np.where(unstable, -np.abs(lam.real) + 1j * lam.imag, lam)
    gap = np.abs(mirrored[:, None] - mirrored[None, :]) + np.diag(np.full(lam.size, np.inf))
    close = gap <= collision_tol * np.maximum(np.abs(mirrored)[:, None], 1e-300)
    if not np.any(close[unstable]):
        A = (X * mirrored) @ np.linalg.inv(X)
        return ReducedModel(A.real, red.b_hat, red.c_hat, red.d_hat)
    T, Z, k = la.schur(red.a_hat, output="real", sort=lambda re, im: re >= 0)
    T = T.copy()
    T[:k, :k] *= -1.0
    return ReducedModel(Z @ T @ Z.T, red.b_hat, red.c_hat, red.d_hat)


def _initial(sys, n, r, band, mode, opts, e_lu):
    restarts, seed = 0, opts.seed
    while True:
        try:
            pair = initialize_projection(n, r, seed, mode, sys=sys, band=band)
            return pair, build_reduced(sys, pair, e_lu), restarts
        except BreakdownError as exc:
            restarts += 1
            if restarts > opts.restarts:
                raise TsiaError(f"initialization failed: {exc}") from exc
            seed += 1000


def _run(sys, r, band, opts: TsiaOptions):
    n = sys.n1 if isinstance(sys, Index1System) else sys.n
    if not 1 <= r < n:
        raise ValueError(f"need 1 <= r < n, got r={r}, n={n}")
    if opts.safeguard not in ("reflect", "perturb"):
        raise ValueError(f"unknown safeguard {opts.safeguard!r}")
    cs = CrossGramianSolver(sys, band, opts.sylvester_tol, opts.dense_cap)
    e_lu = factorize(cs.E, "E")
    report = TsiaReport(band=str(band) if band is not None else "unbounded")
    rng = np.random.default_rng([opts.seed, 7919])

    mode = opts.init
    if mode == "auto":
        mode = "random" if cs.band is None else "eigen-heuristic"
    report.init = mode
    pair, red, restarts = _initial(sys, n, r, band, mode, opts, e_lu)
    if opts.callback:
        opts.callback(0, red, pair)
    if opts.max_iter == 0:
        report.restarts_used = restarts
        return red, pair, report

    # best = (model, pair, iteration); unstable iterates never qualify. The
    # latest iterate within BEST_RTOL of the running minimum wins, so ties
    # decided by rounding do not make equivalent runs diverge.
    best, best_j = None, np.inf
    since_best = 0
    it = 0
    while True:
        eff = red if red.stable else reflect_unstable(red)
        M = cs.solve_m(eff)
        J = cs.objective(red, M) if red.stable else np.inf
        report.error_estimates.append(J)
        slack = BEST_RTOL * max(abs(J), abs(best_j)) if np.isfinite(J) and np.isfinite(best_j) else 0.0
        if np.isfinite(J) and J <= best_j + slack:
            best = (red, pair, it)
        # only iterates clearly worse than the best count towards stagnation
        since_best = since_best + 1 if not J <= best_j + slack else 0
        best_j = min(best_j, J)
        if it == opts.max_iter or report.status != "max-iter":
            break
        N = cs.solve_n(eff)
        try:
            new_pair = biorthonormalize(ProjectionPair(_repair_orth(M, r, rng, report), _repair_orth(cs.E.T @ N, r, rng, report)))
            new_red = build_reduced(sys, new_pair, e_lu)
        except BreakdownError as exc:
            new_red, new_pair, last_error = None, None, exc
            log.info("iteration %d: %s", it + 1, exc)
        attempts = 0
        while new_red is None or (opts.safeguard == "perturb" and not new_red.stable):
            restarts += 1
            attempts += 1
            if restarts > opts.restarts:
                why = f" ({last_error}; the cross-Gramian may have numerical rank below r, try a smaller r)" if new_red is None else ""
                raise TsiaError(f"unstable or broken-down iterate persisted after {opts.restarts} restarts{why}")
            new_pair = _perturb(pair, rng, 1e-3 * attempts)
            new_red = build_reduced(sys, new_pair, e_lu)
        metric = spectral_change(red, new_red)
        report.convergence_history.append(metric)
        red, pair = new_red, new_pair
        it += 1
        report.iterations = it
        if opts.callback:
            opts.callback(it, red, pair)
        log.debug("iteration %d: spectral change %.3e, objective %.6e", it, metric, J)
        if metric < opts.tol and red.stable:
            report.status = "converged"
        elif since_best >= opts.patience:
            report.status = "stagnated"

    if best is None:
        raise NoStableIterateError(f"no stable iterate in {report.iterations} iterations")
    report.best_iteration = best[2]
    report.restarts_used = restarts
    return best[0], best[1], report


def tsia(sys, r, opts: TsiaOptions = None):
    """Unlimited-band two-sided iteration; returns ``(reduced, pair, report)``."""
    opts = opts or TsiaOptions()
    red, pair, report = _run(sys, r, None, opts)
    if red.stable:
        report.wilson_residuals = wilson_residuals(sys, red, pair, None, opts.sylvester_tol)
    return red, pair, report


def tsia_frequency_limited(sys, r, band: FrequencyBand, opts: TsiaOptions = None):
    """Two-sided iteration with band-weighted cross-Gramian equations.

    The unbounded band reproduces :func:`tsia` exactly (the weights reduce
    to the unlimited right-hand sides).
    """
    opts = opts or TsiaOptions()
    if band.is_degenerate:
        raise ValueError("frequency-limited reduction needs a band of positive width")
    try:
        red, pair, report = _run(sys, r, band, opts)
    except NoStableIterateError:
        if opts.init != "auto":
            raise
        # band-sampled starts can sit in the basin of an unstable fixed point
        log.info("no stable iterate from the band-sampled start, retrying from a random basis")
        red, pair, report = _run(sys, r, band, dataclasses.replace(opts, init="random"))
    if red.stable:
        report.wilson_residuals = wilson_residuals(sys, red, pair, band, opts.sylvester_tol)
    return red, pair, report
