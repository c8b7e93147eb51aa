"""Frequency-limited Gramians and their matrix-logarithm band weights.

Bands are read as the symmetric set ``±[w1, w2]``. The complex weights
``Bw = (i/2pi) ln((A + i w2 E)(A + i w1 E)^{-1})`` and
``Cw = (i/2pi) ln((A + i w1 E)^{-1}(A + i w2 E))`` are the resolvent
integrals over one half of the band; the mirrored half contributes the
complex conjugate, so every right-hand side below is the real part of the
half-band product and the Gramian equations carry it twice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.integrate import quad_vec

from flmor.sylvester import solve_dense_lyapunov, solve_generalized_lyapunov
from flmor.systems import FrequencyBand, Index1System, ReducedModel, factorize

DENSE_LOG_CAP = 2000
ORACLE_CAP = 200
QUAD_RTOL = 1e-9

# Gauss-Legendre on [0, 1] for the diagonal Pade approximant of log(1 + x)
_PADE_DEGREE = 8
_PADE_THETA = 0.25


class BranchError(ArithmeticError):
    """Matrix has an eigenvalue on (or numerically at) the closed negative real axis."""


class QuadratureError(ArithmeticError):
    pass


class ConsistencyError(ValueError):
    pass


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def _sqrtm_triangular(T):
    """Principal square root of an upper-triangular matrix, one column at a time."""
    n = T.shape[0]
    R = np.zeros_like(T)
    d = np.sqrt(np.diag(T))
    for j in range(n):
        R[j, j] = d[j]
        if j:
            R[:j, j] = la.solve_triangular(R[:j, :j] + d[j] * np.eye(j), T[:j, j])
    return R


def matrix_log_principal(m, branch_tol=1e-12):
    """Principal logarithm by inverse scaling and squaring.

    Complex Schur form, repeated triangular square roots until
    ``||T - I||_1 <= 0.25``, then a degree-8 diagonal Pade approximant
    evaluated in partial fractions (Gauss-Legendre nodes).
    """
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError(f"matrix logarithm needs a square matrix, got {m.shape}")
    T, U = la.schur(m, output="complex")
    T = np.triu(T)
    lam = np.diag(T)
    scale = max(np.max(np.abs(lam)), np.finfo(float).tiny)
    if np.any(np.abs(lam) <= 1e-14 * scale) or np.any(lam == 0):
        raise ArithmeticError("matrix logarithm of a singular matrix")
    on_cut = (lam.real < 0) & (np.abs(lam.imag) <= branch_tol * np.abs(lam))
    if np.any(on_cut):
        raise BranchError(
            f"eigenvalue {lam[on_cut][0]!r} lies on the branch cut; perturb the band endpoints"
        )
    eye = np.eye(n)
    s = 0
    while np.linalg.norm(T - eye, 1) > _PADE_THETA:
        T = _sqrtm_triangular(T)
        s += 1
        if s > 64:
            raise ArithmeticError("matrix logarithm: square-root iteration did not converge")
    X = T - eye
    nodes, weights = np.polynomial.legendre.leggauss(_PADE_DEGREE)
    nodes, weights = 0.5 * (nodes + 1.0), 0.5 * weights
    L = np.zeros_like(X)
    for x, w in zip(nodes, weights):
        L += w * la.solve_triangular(eye + x * X, X)
    L *= 2.0**s
    return U @ L @ U.conj().T


@dataclass(frozen=True, eq=False)
class BandWeights:
    """Half-band weights ``Bw`` and ``Cw`` (dense, complex)."""

    b_omega: np.ndarray
    c_omega: np.ndarray
    band: FrequencyBand

    def apply_b(self, X):
        """``Bw @ X``."""
        return self.b_omega @ X

    def apply_ct(self, X):
        """``Cw^T @ X``."""
        return self.c_omega.T @ X


@dataclass(frozen=True)
class GramianPair:
    p: np.ndarray
    q: np.ndarray
    band: FrequencyBand


def _pencil(sys):
    if isinstance(sys, ReducedModel):
        return sys.a_hat, np.eye(sys.r)
    if isinstance(sys, Index1System):
        raise ValueError("dense band weights need an explicit pencil; use implicit_band_weights for index-1 systems")
    return _dense(sys.A), _dense(sys.E)


def band_weights(sys, band: FrequencyBand, cap=DENSE_LOG_CAP):
    """Dense ``Bw``, ``Cw`` for a generalized system or reduced model (``E = I``).

    The unbounded sentinel returns the limit of the real parts, ``I/4``; the
    imaginary parts diverge and never enter a real right-hand side.
    """
    A, E = _pencil(sys)
    n = A.shape[0]
    if n > cap:
        raise ValueError(f"dense band weights refused: n = {n} exceeds cap {cap}; use implicit_band_weights")
    if band.is_degenerate:
        Z = np.zeros((n, n), dtype=complex)
        return BandWeights(Z, Z.copy(), band)
    if band.is_unbounded:
        W = 0.25 * np.eye(n, dtype=complex)
        return BandWeights(W, W.copy(), band)
    if band.is_high_pass:
        # real parts of [w1, inf) = [0, inf) minus [0, w1]; imaginary parts diverge
        low = band_weights(sys, FrequencyBand(0.0, band.omega1), cap)
        W = 0.25 * np.eye(n)
        return BandWeights(W - low.b_omega.real, W - low.c_omega.real, band)
    M1 = A + 1j * band.omega1 * E
    M2 = A + 1j * band.omega2 * E
    lu1 = la.lu_factor(M1)
    left = la.lu_solve(lu1, M2.T, trans=1).T  # M2 M1^{-1}
    right = la.lu_solve(lu1, M2)  # M1^{-1} M2
    c = 1j / (2 * math.pi)
    return BandWeights(c * matrix_log_principal(left), c * matrix_log_principal(right), band)


class _ShiftedResolvent:
    """Solves with ``A + i nu E`` (or its transpose) for generalized and index-1 systems."""

    def __init__(self, sys, transpose=False):
        self.sys = sys
        self.transpose = transpose
        self.trans = "T" if transpose else "N"

    def E_times(self, Y):
        E = self.sys.E1 if isinstance(self.sys, Index1System) else self.sys.E
        return (E.T if self.transpose else E) @ Y

    def solve(self, nu, X):
        s = self.sys
        if isinstance(s, Index1System):
            lu = factorize(s.augmented(1j * nu), "augmented index-1 matrix")
            rhs = np.vstack([X, np.zeros((s.n2, X.shape[1]))]).astype(complex)
            return lu.solve(rhs, self.trans)[: s.n1]
        A, E = s.A, s.E
        M = A + 1j * nu * E
        lu = factorize(sp.csc_matrix(M) if sp.issparse(M) else np.asarray(M), "A + i nu E")
        return lu.solve(X.astype(complex), self.trans)


def _breakpoints(w1, w2):
    lo = max(w1, 1e-3 * w2, 1e-8)
    if w2 / lo <= 100:
        return None
    pts = np.geomspace(lo, w2, int(np.ceil(np.log10(w2 / lo))) + 1)[1:-1]
    pts = pts[(pts > w1) & (pts < w2)]
    return list(pts) if len(pts) else None


def _integrate(f, w1, w2, rtol, shape, limit=2000, atol=0.0):
    res, err, info = quad_vec(
        lambda nu: f(nu).ravel(), w1, w2, epsrel=rtol, epsabs=atol, norm="max",
        points=None if math.isinf(w2) else _breakpoints(w1, w2), limit=limit, full_output=True,
    )
    scale = np.max(np.abs(res)) if res.size else 0.0
    if not info.success and err > max(10 * rtol * scale, 10 * atol, np.finfo(float).tiny):
        raise QuadratureError(f"quadrature did not converge: estimated error {err:.2e} (scale {scale:.2e})")
    return res.reshape(shape), err


def band_weight_action(sys, band: FrequencyBand, x, transpose=False, rtol=1e-10):
    """``Bw @ x`` (or ``Cw^T @ x`` with ``transpose=True``) without forming the weight.

    Uses ``Bw = -(1/2pi) int_{w1}^{w2} E (A + i nu E)^{-1} d nu`` and
    ``Cw^T = -(1/2pi) int Eᵀ (Aᵀ + i nu Eᵀ)^{-1} d nu``, integrated by
    adaptive Gauss-Kronrod panels; each node costs one sparse solve.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if not np.any(x) or band.is_degenerate:
        return np.zeros(x.shape, dtype=complex)
    if band.is_unbounded:
        return 0.25 * x.astype(complex)
    if band.is_high_pass:
        low = band_weight_action(sys, FrequencyBand(0.0, band.omega1), x, transpose, rtol)
        return 0.25 * x - low.real
    res = _ShiftedResolvent(sys, transpose)

    def integrand(nu):
        return res.E_times(res.solve(nu, x))

    val, _ = _integrate(integrand, band.omega1, band.omega2, rtol, x.shape)
    return -val / (2 * math.pi)


class ImplicitBandWeights:
    """Band weights available only through their action (large or index-1 systems).

    Products are cached per operand identity because the iteration applies
    them to the same ``B`` and ``C^T`` repeatedly.
    """

    def __init__(self, sys, band, rtol=1e-10):
        self.sys = sys
        self.band = band
        self.rtol = rtol
        self._cache = {}

    def _cached(self, key, X, transpose):
        k = (key, X.shape, X.tobytes())
        if k not in self._cache:
            self._cache[k] = band_weight_action(self.sys, self.band, X, transpose, self.rtol)
        return self._cache[k]

    def apply_b(self, X):
        return self._cached("b", np.asarray(X, dtype=float), False)

    def apply_ct(self, X):
        return self._cached("c", np.asarray(X, dtype=float), True)


def implicit_band_weights(sys, band, rtol=1e-10):
    return ImplicitBandWeights(sys, band, rtol)


def weights_for(sys, band, cap=DENSE_LOG_CAP):
    """Dense weights when affordable, otherwise the implicit action form."""
    if isinstance(sys, ReducedModel) or (not isinstance(sys, Index1System) and sys.n <= cap):
        return band_weights(sys, band, cap)
    return implicit_band_weights(sys, band)


def _io_blocks(sys):
    """Eliminated ``B`` and ``C`` (index-1 systems expose them implicitly)."""
    if isinstance(sys, Index1System):
        return sys.reduced_input(), sys.reduced_output()
    return sys.B, sys.C


def fl_rhs(sys, reduced, weights, reduced_weights, kind, B=None, C=None):
    """Real half-band right-hand side ``F`` of ``... + F = 0``.

    kind
        ``"controllability-cross"``: ``Re(Bw B B̂^T + B B̂^T B̂w^*)`` for the
        ``A M + E M Â^T`` equation; ``"observability-cross"``:
        ``-Re(Cw^* C^T Ĉ + C^T Ĉ Ĉw)`` for ``A^T N + E^T N Â``;
        ``"full"`` / ``"full-observability"``: ``Re(Bw B B^T + B B^T Bw^*)`` and
        ``Re(Cw^* C^T C + C^T C Cw)`` for the Gramian equations of ``sys``.

    The symmetric band contributes twice this matrix.
    """
    if kind not in ("controllability-cross", "observability-cross", "full", "full-observability"):
        raise ValueError(f"unknown right-hand side kind {kind!r}")
    if kind in ("controllability-cross", "observability-cross"):
        if reduced_weights is None or weights.band != reduced_weights.band:
            raise ConsistencyError("full and reduced band weights were computed for different bands")
    if B is None or C is None:
        B0, C0 = _io_blocks(sys)
        B = B0 if B is None else B
        C = C0 if C is None else C
    if kind == "full":
        WB = weights.apply_b(B).real
        return WB @ B.T + B @ WB.T
    if kind == "full-observability":
        WC = weights.apply_ct(np.ascontiguousarray(C.T)).real
        return WC @ C + C.T @ WC.T
    b_hat, c_hat = reduced.b_hat, reduced.c_hat
    if kind == "controllability-cross":
        WB = weights.apply_b(B).real
        WBh = reduced_weights.apply_b(b_hat).real
        return WB @ b_hat.T + B @ WBh.T
    WC = weights.apply_ct(np.ascontiguousarray(C.T)).real
    WCh = reduced_weights.apply_ct(np.ascontiguousarray(c_hat.T)).real
    return -(WC @ c_hat + C.T @ WCh.T)


def fl_gramian(sys, band: FrequencyBand, side="controllability", cap=DENSE_LOG_CAP):
    """Frequency-limited Gramian from its Lyapunov equation (dense, ``n <= cap``)."""
    W = band_weights(sys, band, cap)
    A, E = _pencil(sys)
    if side == "controllability":
        F = fl_rhs(sys, None, W, None, "full")
        if isinstance(sys, ReducedModel):
            return solve_dense_lyapunov(A, 2.0 * F)
        return solve_generalized_lyapunov(A, E, 2.0 * F)
    if side == "observability":
        F = fl_rhs(sys, None, W, None, "full-observability")
        if isinstance(sys, ReducedModel):
            return solve_dense_lyapunov(A.T, 2.0 * F)
        return solve_generalized_lyapunov(A, E, 2.0 * F, transpose=True)
    raise ValueError(f"unknown side {side!r}")


def fl_gramians(sys, band, cap=DENSE_LOG_CAP):
    return GramianPair(fl_gramian(sys, band, "controllability", cap), fl_gramian(sys, band, "observability", cap), band)


def fl_gramian_quadrature(sys, band: FrequencyBand, side="controllability", rtol=QUAD_RTOL, cap=ORACLE_CAP):
    """Frequency-limited Gramian by direct quadrature of the resolvent integral.

    ``Pw = (1/pi) Re int_{w1}^{w2} (i nu E - A)^{-1} B B^T (i nu E - A)^{-H} d nu``
    (conjugate symmetry folds the negative half band). Independent of the
    logarithm route; dense, for ``n <= cap``.
    """
    A, E = _pencil(sys)
    n = A.shape[0]
    if n > cap:
        raise ValueError(f"quadrature oracle refused: n = {n} exceeds cap {cap}")
    if band.is_degenerate:
        return np.zeros((n, n))
    if side == "controllability":
        K = np.asarray(sys.B, dtype=float)
        if not np.any(K):
            return np.zeros((n, n))

        def f(nu):
            Y = np.linalg.solve(1j * nu * E - A, K)
            return (Y @ Y.conj().T).real

    elif side == "observability":
        K = np.asarray(sys.C, dtype=float).T
        if not np.any(K):
            return np.zeros((n, n))

        def f(nu):
            Y = np.linalg.solve((1j * nu * E - A).conj().T, K)
            return (Y @ Y.conj().T).real

    else:
        raise ValueError(f"unknown side {side!r}")
    val, _ = _integrate(f, band.omega1, band.omega2, rtol, (n, n))
    G = val / math.pi
    return 0.5 * (G + G.T)
