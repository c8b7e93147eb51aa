"""Semi-generalized Sylvester and dense Lyapunov solvers.

The large equation ``A X + E X Â^T + F = 0`` (``A``, ``E`` sparse ``n x n``,
``Â`` dense ``r x r``) is solved column by column after a complex Schur
reduction of ``Â^T``; each column costs one sparse shifted solve.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from flmor.systems import FactorizationError, Index1System, factorize

KRONECKER_CAP = 10_000


class SolvabilityError(ArithmeticError):
    """The equation has no unique solution (singular shift, unstable coefficient)."""


class AccuracyError(ArithmeticError):
    pass


class AccuracyWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class SchurForm:
    """Complex Schur form ``source = q s q^H`` with ``s`` upper triangular."""

    q: np.ndarray
    s: np.ndarray
    source: np.ndarray

    @property
    def eigenvalues(self):
        return np.diag(self.s)


def schur_decompose(m):
    m = np.atleast_2d(np.asarray(m))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"Schur decomposition needs a square matrix, got {m.shape}")
    s, q = la.schur(m.astype(complex), output="complex")
    s = np.triu(s)
    return SchurForm(q, s, m)


def _norm(M):
    return spla.norm(M) if sp.issparse(M) else np.linalg.norm(M)


class _ShiftCache:
    """One factorization of ``A + s E`` per distinct shift.

    Conjugate shifts reuse the cached factor through
    ``(A + conj(s) E)^{-1} b = conj((A + s E)^{-1} conj(b))`` (real ``A``, ``E``).
    """

    def __init__(self, build, enabled=True, rtol=1e-14):
        self.build = build
        self.enabled = enabled
        self.rtol = rtol
        self.entries = []
        self.factorizations = 0

    def _lookup(self, s):
        for s0, lu in self.entries:
            scale = self.rtol * max(1.0, abs(s0))
            if abs(s - s0) <= scale:
                return lu, False
            if abs(s - np.conj(s0)) <= scale:
                return lu, True
        return None, False

    def solve(self, s, rhs, trans="N"):
        lu, conj = self._lookup(s) if self.enabled else (None, False)
        if lu is None:
            try:
                lu = self.build(s)
            except FactorizationError as exc:
                raise SolvabilityError(f"shifted matrix singular for shift {s!r}: {exc}") from None
            self.factorizations += 1
            if self.enabled:
                self.entries.append((s, lu))
        if conj:
            return np.conj(lu.solve(np.conj(rhs), trans))
        return lu.solve(rhs.astype(complex), trans)


def _recurrence(solve_shift, apply_E, a_hat, F, schur=None):
    """Core column recurrence; returns the complex back-transformed solution."""
    if schur is None:
        schur = schur_decompose(np.asarray(a_hat).T)
    Q, S = schur.q, schur.s
    r = S.shape[0]
    Ft = np.asarray(F) @ Q
    Xt = np.zeros(Ft.shape, dtype=complex)
    for j in range(r):
        rhs = -Ft[:, j]
        if j:
            rhs = rhs - apply_E(Xt[:, :j] @ S[:j, j])
        Xt[:, j] = solve_shift(S[j, j], rhs)
    return Xt @ Q.conj().T, Xt


# Imaginary residue scales with the conditioning of the Schur basis of a
# nearly defective reduced matrix; the residual check judges accuracy, this
# guard only catches a genuinely complex result.
IMAG_RTOL = 1e-6


def _realify(X, what):
    nrm = np.linalg.norm(X)
    imag = np.linalg.norm(X.imag)
    if imag > IMAG_RTOL * max(nrm, np.finfo(float).tiny):
        raise AccuracyError(f"{what}: imaginary part {imag:.2e} of a real solution (norm {nrm:.2e})")
    return np.ascontiguousarray(X.real)


def _check_residual(residual, scale, tol, what):
    res = residual / scale if scale > 0 else residual
    if res > tol:
        warnings.warn(f"{what}: relative residual {res:.2e} exceeds tolerance {tol:.0e}", AccuracyWarning, stacklevel=3)
    return res


def _dump_columns(path, A_apply, E_apply, X, a_hat, F):
    R = A_apply(X) + E_apply(X @ a_hat.T) + F
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["column", "residual_norm"])
        for j in range(X.shape[1]):
            w.writerow([j, repr(float(np.linalg.norm(R[:, j])))])


def solve_semi_generalized(A, E, a_hat, F, tol=1e-9, cache=True, transpose=False, dump=None, return_info=False):
    """Solve ``A X + E X Â^T + F = 0`` for real ``X`` (``n x r``).

    With ``transpose=True`` the dual ``A^T X + E^T X Â^T + F = 0`` is solved
    using the same factorizations of ``A + s E``.

    ``dump`` names a CSV file receiving per-column residual norms.
    """
    a_hat = np.atleast_2d(np.asarray(a_hat, dtype=float))
    F = np.asarray(F, dtype=float).reshape(A.shape[0], a_hat.shape[0])
    if not np.any(F):
        X = np.zeros_like(F)
        return (X, {"residual": 0.0, "factorizations": 0}) if return_info else X
    trans = "T" if transpose else "N"
    sparse = sp.issparse(A)

    def build(s):
        M = A + s * E
        if sparse:
            return factorize(sp.csc_matrix(M), "A + sE")
        return factorize(np.asarray(M), "A + sE")

    shifts = _ShiftCache(build, enabled=cache)
    Et = E.T if transpose else E
    At = A.T if transpose else A
    Xc, _ = _recurrence(lambda s, b: shifts.solve(s, b, trans), lambda y: Et @ y, a_hat, F)
    X = _realify(Xc, "semi-generalized Sylvester")
    R = At @ X + Et @ (X @ a_hat.T) + F
    scale = _norm(A) * np.linalg.norm(X) + _norm(E) * np.linalg.norm(X) * np.linalg.norm(a_hat) + np.linalg.norm(F)
    res = _check_residual(np.linalg.norm(R), scale, tol, "semi-generalized Sylvester")
    if dump:
        _dump_columns(dump, lambda Y: At @ Y, lambda Y: Et @ Y, X, a_hat, F)
    if return_info:
        return X, {"residual": res, "factorizations": shifts.factorizations}
    return X


class Index1Operator:
    """Implicit eliminated pencil of an index-1 system.

    Products with ``A = J1 - J2 J4^{-1} J3`` (and its transpose) use a
    single sparse factorization of ``J4``; nothing dense is formed.
    """

    def __init__(self, sys: Index1System):
        self.sys = sys
        self.lu4 = sys.j4_lu()
        self.n1 = sys.n1

    def apply_A(self, X, transpose=False):
        s = self.sys
        if transpose:
            return s.J1.T @ X - s.J3.T @ self.lu4.solve(s.J2.T @ X, "T")
        return s.J1 @ X - s.J2 @ self.lu4.solve(s.J3 @ X)

    def apply_E(self, X, transpose=False):
        return (self.sys.E1.T if transpose else self.sys.E1) @ X

    def norm_A_estimate(self, probes=8):
        """Stochastic Frobenius-norm estimate ``E||A g||^2 = ||A||_F^2`` (fixed probes)."""
        G = np.random.default_rng(0).standard_normal((self.n1, probes))
        return float(np.linalg.norm(self.apply_A(G)) / np.sqrt(probes))


def solve_index1(sys: Index1System, a_hat, F, tol=1e-9, cache=True, transpose=False, dump=None, return_info=False):
    """Solve ``A X + E1 X Â^T + F = 0`` for the eliminated index-1 pencil without eliminating.

    Each column solves the sparse augmented system
    ``[[J1 + s E1, J2], [J3, J4]] [x; g] = [f; 0]`` and keeps ``x``.
    ``transpose=True`` solves the dual with ``A^T``, ``E1^T`` using the
    transposed factors.
    """
    a_hat = np.atleast_2d(np.asarray(a_hat, dtype=float))
    n1, n2 = sys.n1, sys.n2
    F = np.asarray(F, dtype=float).reshape(n1, a_hat.shape[0])
    if not np.any(F):
        X = np.zeros_like(F)
        return (X, {"residual": 0.0, "factorizations": 0}) if return_info else X
    trans = "T" if transpose else "N"
    op = Index1Operator(sys)

    def build(s):
        return factorize(sys.augmented(s), "augmented index-1 matrix")

    shifts = _ShiftCache(build, enabled=cache)
    pad = np.zeros(n2, dtype=complex)

    def solve_shift(s, b):
        return shifts.solve(s, np.concatenate([b, pad]), trans)[:n1]

    Xc, _ = _recurrence(solve_shift, lambda y: op.apply_E(y, transpose), a_hat, F)
    X = _realify(Xc, "index-1 Sylvester")
    R = op.apply_A(X, transpose) + op.apply_E(X @ a_hat.T, transpose) + F
    E1n = spla.norm(sys.E1)
    scale = op.norm_A_estimate() * np.linalg.norm(X) + E1n * np.linalg.norm(X) * np.linalg.norm(a_hat) + np.linalg.norm(F)
    res = _check_residual(np.linalg.norm(R), scale, tol, "index-1 Sylvester")
    if dump:
        _dump_columns(dump, lambda Y: op.apply_A(Y, transpose), lambda Y: op.apply_E(Y, transpose), X, a_hat, F)
    if return_info:
        return X, {"residual": res, "factorizations": shifts.factorizations}
    return X


def solve_dense_lyapunov(a_hat, rhs, tol=1e-10):
    """Solve ``Â P + P Â^T + rhs = 0`` for stable ``Â`` (Bartels-Stewart, complex Schur).

    With ``Â = U T U^H`` and ``Y = U^H P U`` the equation becomes
    ``T Y + Y T^H + G = 0``; columns of ``Y`` are obtained last to first by
    triangular solves.
    """
    a_hat = np.atleast_2d(np.asarray(a_hat, dtype=float))
    rhs = np.atleast_2d(np.asarray(rhs, dtype=float))
    r = a_hat.shape[0]
    if not np.any(rhs):
        return np.zeros((r, r))
    sf = schur_decompose(a_hat)
    T, U = sf.s, sf.q
    lam = np.diag(T)
    if np.max(lam.real) >= 0:
        raise SolvabilityError(f"Lyapunov coefficient is not stable (spectral abscissa {np.max(lam.real):.3e})")
    G = U.conj().T @ rhs @ U
    Y = np.zeros((r, r), dtype=complex)
    Tc = T.conj()
    for j in range(r - 1, -1, -1):
        b = -G[:, j]
        if j + 1 < r:
            b = b - Y[:, j + 1 :] @ Tc[j, j + 1 :]
        Y[:, j] = la.solve_triangular(T + Tc[j, j] * np.eye(r), b)
    P = (U @ Y @ U.conj().T).real
    P = 0.5 * (P + P.T)
    scale = 2 * np.linalg.norm(a_hat) * np.linalg.norm(P) + np.linalg.norm(rhs)
    _check_residual(np.linalg.norm(a_hat @ P + P @ a_hat.T + rhs), scale, tol, "dense Lyapunov")
    return P


def solve_generalized_lyapunov(A, E, rhs, transpose=False, tol=1e-10):
    """Dense solve of ``A P E^T + E P A^T + rhs = 0``.

    ``transpose=True`` solves ``A^T Q E + E^T Q A + rhs = 0`` instead. The
    pencil is brought to standard form ``E^{-1} A`` (dense, ``n`` within the
    dense cap).
    """
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
    Ed = E.toarray() if sp.issparse(E) else np.asarray(E)
    rhs = np.asarray(rhs, dtype=float)
    lu = la.lu_factor(Ed)
    if transpose:
        # (A E^{-1})^T Q + Q (A E^{-1}) + E^{-T} rhs E^{-1} = 0
        At = la.lu_solve(lu, Ad.T, trans=1)
        R = la.lu_solve(lu, la.lu_solve(lu, rhs, trans=1).T, trans=1).T
    else:
        # (E^{-1} A) P + P (E^{-1} A)^T + E^{-1} rhs E^{-T} = 0
        At = la.lu_solve(lu, Ad)
        R = la.lu_solve(lu, la.lu_solve(lu, rhs).T).T
    return solve_dense_lyapunov(At, 0.5 * (R + R.T), tol)


def kronecker_oracle(A, E, a_hat, F, cap=KRONECKER_CAP):
    """Dense solve of ``(Â ⊗ E + I ⊗ A) vec(X) = -vec(F)`` (column-major ``vec``)."""
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    Ed = E.toarray() if sp.issparse(E) else np.asarray(E, dtype=float)
    a_hat = np.atleast_2d(np.asarray(a_hat, dtype=float))
    n, r = Ad.shape[0], a_hat.shape[0]
    if n * r > cap:
        raise ValueError(f"Kronecker oracle refused: n*r = {n * r} exceeds cap {cap}")
    K = np.kron(a_hat, Ed) + np.kron(np.eye(r), Ad)
    F = np.asarray(F, dtype=float).reshape(n, r)
    x = np.linalg.solve(K, -F.reshape(-1, order="F"))
    return x.reshape((n, r), order="F")
