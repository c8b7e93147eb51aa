"""System realizations, loaders, benchmark generators and index-1 elimination."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from flmor import mmio

VERIFY_CAP = 500
ELIMINATION_CAP = 6000


class ValidationError(ValueError):
    """Structural or validation problem with a system realization."""


class FactorizationError(ValidationError):
    pass


def _as_operator(mat):
    """Sparse inputs become CSC, dense ones stay dense float arrays."""
    if sp.issparse(mat):
        return sp.csc_matrix(mat, dtype=float)
    return np.atleast_2d(np.asarray(mat, dtype=float))


def _dense(mat):
    return mat.toarray() if sp.issparse(mat) else np.asarray(mat)


def _as_2d(mat, rows=None, cols=None):
    """Dense 2-D copy; 1-D input becomes a column, ``None`` a ``rows x cols`` zero block."""
    if mat is None:
        return np.zeros((rows, cols))
    arr = _dense(mat).astype(float)
    return arr.reshape(-1, 1) if arr.ndim == 1 else np.atleast_2d(arr)


def splu(mat, what="matrix"):
    """Sparse LU that reports singularity as :class:`FactorizationError`."""
    try:
        return spla.splu(sp.csc_matrix(mat))
    except RuntimeError as exc:
        raise FactorizationError(f"{what} is singular ({exc})") from None


class _DenseLU:
    def __init__(self, mat, what="matrix"):
        self.lu = la.lu_factor(mat, check_finite=False)
        if np.any(np.abs(np.diag(self.lu[0])) == 0):
            raise FactorizationError(f"{what} is singular (zero pivot)")

    def solve(self, rhs, trans="N"):
        return la.lu_solve(self.lu, rhs, trans={"N": 0, "T": 1, "H": 2}[trans], check_finite=False)


def factorize(mat, what="matrix"):
    """Factor a sparse or dense square matrix; returns an object with ``solve``."""
    if sp.issparse(mat):
        return _SparseLU(splu(mat, what))
    return _DenseLU(np.asarray(mat), what)


class _SparseLU:
    def __init__(self, lu):
        self.lu = lu

    def solve(self, rhs, trans="N"):
        rhs = np.asarray(rhs)
        # SuperLU keeps the dtype of its input; real factors must also accept complex rhs.
        if np.iscomplexobj(rhs) and self.lu.L.dtype.kind != "c":
            return self.lu.solve(np.ascontiguousarray(rhs.real), trans) + 1j * self.lu.solve(
                np.ascontiguousarray(rhs.imag), trans
            )
        return self.lu.solve(rhs, trans)


@dataclass(frozen=True)
class FrequencyBand:
    """Frequency interval ``[omega1, omega2]`` (rad/s), read as the symmetric set ``±[omega1, omega2]``.

    ``[0, inf]`` is the unbounded sentinel (the whole imaginary axis);
    ``[w1, inf]`` with ``w1 > 0`` is a high-pass band. A degenerate band
    ``omega1 == omega2`` is accepted and has zero measure.
    """

    omega1: float
    omega2: float

    def __post_init__(self):
        w1, w2 = float(self.omega1), float(self.omega2)
        if math.isnan(w1) or math.isnan(w2) or w1 < 0 or math.isinf(w1) or w2 < w1:
            raise ValueError(f"invalid band [{self.omega1}, {self.omega2}]; need 0 <= omega1 <= omega2")
        object.__setattr__(self, "omega1", w1)
        object.__setattr__(self, "omega2", w2)

    @classmethod
    def unbounded(cls):
        return cls(0.0, math.inf)

    @classmethod
    def parse(cls, text):
        text = str(text).strip().lower()
        if text in ("unbounded", "inf", "none", ""):
            return cls.unbounded()
        parts = text.replace("[", "").replace("]", "").replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"cannot parse band {text!r}; use 'w1,w2' or 'unbounded'")
        return cls(float(parts[0]), float(parts[1]))

    @property
    def is_unbounded(self):
        return self.omega1 == 0 and math.isinf(self.omega2)

    @property
    def is_high_pass(self):
        return self.omega1 > 0 and math.isinf(self.omega2)

    @property
    def is_degenerate(self):
        return self.omega1 == self.omega2

    def __str__(self):
        if self.is_unbounded:
            return "unbounded"
        return f"{self.omega1!r},{'inf' if math.isinf(self.omega2) else repr(self.omega2)}"


@dataclass(frozen=True, eq=False)
class GeneralizedSystem:
    """Sparse realization ``E x' = A x + B u, y = C x + D u`` with nonsingular ``E``.

    ``E`` and ``A`` may be sparse (stored CSC) or dense; the latter occurs for
    eliminated index-1 systems.
    """

    E: object
    A: object
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = None

    def __post_init__(self):
        E, A = _as_operator(self.E), _as_operator(self.A)
        n = A.shape[0]
        B = _as_2d(self.B, rows=n)
        C = np.atleast_2d(_dense(self.C).astype(float))
        D = _as_2d(self.D, C.shape[0], B.shape[1])
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        bad = []
        if A.shape != (n, n):
            bad.append(f"A {A.shape}")
        if E.shape != (n, n):
            bad.append(f"E {E.shape} (expected {(n, n)})")
        if B.shape[0] != n:
            bad.append(f"B {B.shape} (expected {n} rows)")
        if C.shape[1] != n:
            bad.append(f"C {C.shape} (expected {n} columns)")
        if D.shape != (C.shape[0], B.shape[1]):
            bad.append(f"D {D.shape} (expected {(C.shape[0], B.shape[1])})")
        if bad:
            raise ValidationError("inconsistent block dimensions: " + ", ".join(bad))
        for M in (B, C, D):
            M.setflags(write=False)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.B.shape[1]

    @property
    def m(self):
        return self.C.shape[0]

    @property
    def is_sparse(self):
        return sp.issparse(self.A)

    def eigenvalues(self):
        return la.eigvals(_dense(self.A), _dense(self.E))

    def validate(self, cap=VERIFY_CAP):
        """Check nonsingular ``E`` and, for ``n <= cap``, stability of ``(A, E)``."""
        factorize(self.E, "E")
        if self.n <= cap:
            lam = self.eigenvalues()
            if not np.all(np.isfinite(lam)) or np.max(lam.real) >= 0:
                raise ValidationError(f"pencil (A, E) is not stable: spectral abscissa {np.max(lam.real):.3e}")
        return self

    def transfer(self, s):
        """Evaluate ``C (sE - A)^{-1} B + D`` at a complex point ``s``."""
        K = s * self.E - self.A
        X = factorize(sp.csc_matrix(K) if sp.issparse(K) else K, "sE - A").solve(self.B.astype(complex))
        return self.C @ X + self.D

    def solve_E(self, rhs, trans="N"):
        return factorize(self.E, "E").solve(rhs, trans)

    def to_dense(self):
        return GeneralizedSystem(_dense(self.E), _dense(self.A), self.B, self.C, self.D)


@dataclass(frozen=True, eq=False)
class Index1System:
    """Semi-explicit index-1 DAE.

    ``E1 x' = J1 x + J2 z + B1 u``, ``0 = J3 x + J4 z + B2 u``,
    ``y = C1 x + C2 z + Da u``.
    """

    E1: object
    J1: object
    J2: object
    J3: object
    J4: object
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    Da: np.ndarray = None

    def __post_init__(self):
        for name in ("E1", "J1", "J2", "J3", "J4"):
            object.__setattr__(self, name, sp.csc_matrix(getattr(self, name), dtype=float))
        n1, n2 = self.J1.shape[0], self.J4.shape[0]
        B1 = _as_2d(self.B1, rows=n1)
        B2 = _as_2d(self.B2, rows=n2)
        C1 = np.atleast_2d(_dense(self.C1).astype(float))
        C2 = np.atleast_2d(_dense(self.C2).astype(float))
        Da = _as_2d(self.Da, C1.shape[0], B1.shape[1])
        for name, val in (("B1", B1), ("B2", B2), ("C1", C1), ("C2", C2), ("Da", Da)):
            object.__setattr__(self, name, val)
        expect = {
            "E1": (n1, n1), "J1": (n1, n1), "J2": (n1, n2), "J3": (n2, n1), "J4": (n2, n2),
            "B1": (n1, B1.shape[1]), "B2": (n2, B1.shape[1]),
            "C1": (C1.shape[0], n1), "C2": (C1.shape[0], n2), "Da": (C1.shape[0], B1.shape[1]),
        }
        bad = [f"{k} {getattr(self, k).shape} (expected {v})" for k, v in expect.items() if getattr(self, k).shape != v]
        if bad:
            raise ValidationError("inconsistent index-1 blocks: " + ", ".join(bad))

    @property
    def n1(self):
        return self.J1.shape[0]

    @property
    def n2(self):
        return self.J4.shape[0]

    @property
    def n(self):
        return self.n1

    @property
    def p(self):
        return self.B1.shape[1]

    @property
    def m(self):
        return self.C1.shape[0]

    def j4_lu(self):
        return factorize(self.J4, "J4")

    def validate(self, cap=VERIFY_CAP):
        factorize(self.E1, "E1")
        self.j4_lu()
        return self

    @property
    def E(self):
        return self.E1

    def augmented(self, shift):
        """Sparse ``[[J1 + shift*E1, J2], [J3, J4]]``."""
        return sp.bmat([[self.J1 + shift * self.E1, self.J2], [self.J3, self.J4]], format="csc")

    def transfer(self, s):
        K = sp.bmat([[s * self.E1 - self.J1, -self.J2], [-self.J3, -self.J4]], format="csc")
        rhs = np.vstack([self.B1, self.B2]).astype(complex)
        X = factorize(K, "augmented pencil").solve(rhs)
        return self.C1 @ X[: self.n1] + self.C2 @ X[self.n1 :] + self.Da

    def reduced_input(self):
        """Eliminated ``B = B1 - J2 J4^{-1} B2`` (dense n1 x p)."""
        return self.B1 - self.J2 @ self.j4_lu().solve(self.B2)

    def reduced_output(self):
        """Eliminated ``C = C1 - C2 J4^{-1} J3`` computed as ``C1 - (J3^T J4^{-T} C2^T)^T``."""
        return self.C1 - (self.J3.T @ self.j4_lu().solve(np.ascontiguousarray(self.C2.T), "T")).T

    def feedthrough(self):
        return self.Da - self.C2 @ self.j4_lu().solve(self.B2)


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """Dense reduced model ``x' = Â x + B̂ u, y = Ĉ x + D̂ u`` (identity descriptor)."""

    a_hat: np.ndarray
    b_hat: np.ndarray
    c_hat: np.ndarray
    d_hat: np.ndarray = None
    stable: bool = field(init=False)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a_hat, dtype=float))
        b = np.asarray(self.b_hat, dtype=float).reshape(a.shape[0], -1)
        c = np.asarray(self.c_hat, dtype=float).reshape(-1, a.shape[0])
        d = np.zeros((c.shape[0], b.shape[1])) if self.d_hat is None else np.asarray(self.d_hat, dtype=float).reshape(c.shape[0], b.shape[1])
        object.__setattr__(self, "a_hat", a)
        object.__setattr__(self, "b_hat", b)
        object.__setattr__(self, "c_hat", c)
        object.__setattr__(self, "d_hat", d)
        object.__setattr__(self, "stable", bool(np.max(np.linalg.eigvals(a).real) < 0))

    @property
    def r(self):
        return self.a_hat.shape[0]

    @property
    def n(self):
        return self.r

    @property
    def p(self):
        return self.b_hat.shape[1]

    @property
    def m(self):
        return self.c_hat.shape[0]

    @property
    def E(self):
        return np.eye(self.r)

    @property
    def A(self):
        return self.a_hat

    @property
    def B(self):
        return self.b_hat

    @property
    def C(self):
        return self.c_hat

    @property
    def D(self):
        return self.d_hat

    def eigenvalues(self):
        return np.linalg.eigvals(self.a_hat)

    def transfer(self, s):
        X = np.linalg.solve(s * np.eye(self.r) - self.a_hat, self.b_hat.astype(complex))
        return self.c_hat @ X + self.d_hat

    def as_system(self):
        return GeneralizedSystem(sp.identity(self.r, format="csc"), sp.csc_matrix(self.a_hat), self.b_hat, self.c_hat, self.d_hat)


# ---------------------------------------------------------------- loading

GENERALIZED_ROLES = ("E", "A", "B", "C", "D")
INDEX1_ROLES = ("E1", "J1", "J2", "J3", "J4", "B1", "B2", "C1", "C2", "Da")


def load_system(paths, kind="generalized", validate=True, cap=VERIFY_CAP):
    """Assemble a system from Matrix Market files.

    ``paths`` is a role -> path mapping, or the path of a manifest file
    (``role = file`` lines, optionally ``kind = index1``). A missing ``E``
    defaults to the identity and a missing ``D``/``Da`` to zero.
    """
    if isinstance(paths, (str, Path)):
        p = Path(paths)
        if p.suffix == ".mat":
            return load_mat(p, validate=validate, cap=cap)
        paths = mmio.read_manifest(p)
    paths = dict(paths)
    kind = paths.pop("kind", kind)
    roles = INDEX1_ROLES if kind == "index1" else GENERALIZED_ROLES
    unknown = sorted(set(paths) - set(roles))
    if unknown:
        raise ValidationError(f"unknown block roles for {kind} system: {unknown}")
    mats = {}
    for role, path in paths.items():
        try:
            mats[role] = mmio.mmread(path)
        except FileNotFoundError:
            raise FileNotFoundError(f"block {role}: file not found: {path}") from None
    if kind == "index1":
        missing = [r for r in INDEX1_ROLES[:-1] if r not in mats]
        if missing:
            raise ValidationError(f"index-1 system is missing blocks {missing}")
        sys = Index1System(**mats)
    else:
        missing = [r for r in ("A", "B", "C") if r not in mats]
        if missing:
            raise ValidationError(f"generalized system is missing blocks {missing}")
        if "E" not in mats:
            mats["E"] = sp.identity(mats["A"].shape[0], format="csc")
        for role in ("E", "A"):
            if not sp.issparse(mats[role]):
                mats[role] = sp.csc_matrix(mats[role])
        sys = GeneralizedSystem(**mats)
    return sys.validate(cap) if validate else sys


def load_mat(path, validate=True, cap=VERIFY_CAP):
    """Load a MATLAB ``.mat`` benchmark file holding ``A``, ``B``, ``C`` (and optionally ``E``, ``D``)."""
    from scipy.io import loadmat

    data = loadmat(str(path))
    mats = {k: data[k] for k in GENERALIZED_ROLES if k in data}
    if "E" not in mats:
        mats["E"] = sp.identity(mats["A"].shape[0], format="csc")
    for role in ("E", "A"):
        mats[role] = sp.csc_matrix(mats[role])
    sys = GeneralizedSystem(**mats)
    return sys.validate(cap) if validate else sys


def save_system(sys, directory, prefix=""):
    """Write every block as Matrix Market plus a ``manifest.txt``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(sys, Index1System):
        roles, entries = INDEX1_ROLES, {"kind": "index1"}
    else:
        roles, entries = GENERALIZED_ROLES, {"kind": "generalized"}
    for role in roles:
        name = f"{prefix}{role}.mtx"
        mmio.mmwrite(directory / name, getattr(sys, role))
        entries[role] = name
    manifest = directory / f"{prefix}manifest.txt"
    mmio.write_manifest(manifest, entries)
    return manifest


# ------------------------------------------------------------- generators


def _sym_bound(M):
    """Upper bound on the largest eigenvalue of ``(M + M^T)/2`` (Gershgorin)."""
    S = (M + M.T) * 0.5
    S = sp.csr_matrix(S)
    d = S.diagonal()
    off = np.asarray(abs(S).sum(axis=1)).ravel() - np.abs(d)
    return float(np.max(d + off)) if S.shape[0] else 0.0


def _norm2_bound(M):
    M = sp.csr_matrix(M)
    if M.nnz == 0:
        return 0.0
    n1 = float(np.max(np.asarray(abs(M).sum(axis=0))))
    ninf = float(np.max(np.asarray(abs(M).sum(axis=1))))
    return math.sqrt(n1 * ninf)


def _random_sparse(rng, rows, cols, density):
    nnz = max(1, int(round(density * rows * cols)))
    if density >= 1.0:
        return sp.csc_matrix(rng.standard_normal((rows, cols)))
    flat = rng.choice(rows * cols, size=min(nnz, rows * cols), replace=False)
    flat.sort()
    vals = rng.standard_normal(flat.size)
    return sp.csc_matrix((vals, (flat // cols, flat % cols)), shape=(rows, cols))


def _random_banded(rng, rows, cols, k, bandwidth):
    """``k`` random entries per row, columns within ``bandwidth`` of the scaled diagonal."""
    ri, ci = [], []
    for i in range(rows):
        c = int(round(i * (cols - 1) / max(rows - 1, 1)))
        lo, hi = max(0, c - bandwidth), min(cols, c + bandwidth + 1)
        pick = rng.choice(np.arange(lo, hi), size=min(k, hi - lo), replace=False)
        ri.extend([i] * pick.size)
        ci.extend(pick)
    vals = rng.standard_normal(len(ri))
    return sp.csc_matrix((vals, (ri, ci)), shape=(rows, cols))


def generate_random_stable(n, p=1, m=1, density=0.1, seed=0, margin=0.5):
    """Deterministic random sparse stable system.

    ``E`` is sparse symmetric positive definite (``E >= I``) and ``A`` is
    shifted so that the generalized spectral abscissa is at most
    ``-margin`` (always below -0.1). The shift is computed from the exact
    spectrum for ``n <= VERIFY_CAP`` and from a Gershgorin bound otherwise.
    """
    if min(n, p, m) < 1:
        raise ValueError("n, p, m must be positive")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    if margin <= 0.1:
        raise ValueError("margin must exceed 0.1")
    rng = np.random.default_rng(seed)
    A0 = _random_sparse(rng, n, n, density)
    R = _random_sparse(rng, n, n, min(density, 2.0 / n))
    E = sp.identity(n, format="csc") + 0.1 * (R @ R.T)
    E = sp.csc_matrix((E + E.T) * 0.5)
    B = rng.standard_normal((n, p))
    C = rng.standard_normal((m, n))
    if n <= VERIFY_CAP:
        alpha = float(np.max(la.eigvals(A0.toarray(), E.toarray()).real))
        shift = alpha + margin
    else:
        # Re(lambda) <= max(sym bound, 0) / lambda_min(E) with lambda_min(E) >= 1
        shift = max(_sym_bound(A0), 0.0) + margin
    A = sp.csc_matrix(A0 - shift * E)
    return GeneralizedSystem(E, A, B, C)


@dataclass(frozen=True)
class TripleChainParams:
    """Triple chain oscillator parameters.

    Defaults (unit masses and springs, Rayleigh damping ``0.1 M + 0.1 K``)
    are declared values; the original benchmark setup is not recoverable.
    """

    masses: tuple = (1.0, 1.0, 1.0)
    stiffness: tuple = (1.0, 1.0, 1.0)
    mass0: float = 1.0
    stiffness0: float = 1.0
    alpha: float = 0.1
    beta: float = 0.1


def triple_chain_matrices(n_masses, params=TripleChainParams()):
    """Mass, damping and stiffness matrices of the triple chain (size ``3 n_masses + 1``)."""
    if n_masses < 1:
        raise ValueError("n_masses must be positive")
    values = list(params.masses) + list(params.stiffness) + [params.mass0, params.stiffness0, params.alpha, params.beta]
    if any(v <= 0 for v in values):
        raise ValueError("triple chain parameters must be positive")
    n = n_masses
    N = 3 * n + 1
    center = 3 * n
    rows, cols, vals = [], [], []
    for c, k in enumerate(params.stiffness):
        off = c * n
        for j in range(n):
            i = off + j
            rows.append(i), cols.append(i), vals.append(2.0 * k)
            if j + 1 < n:
                rows += [i, i + 1]
                cols += [i + 1, i]
                vals += [-k, -k]
        last = off + n - 1
        rows += [last, center]
        cols += [center, last]
        vals += [-k, -k]
    rows.append(center), cols.append(center), vals.append(sum(params.stiffness) + params.stiffness0)
    K = sp.csc_matrix((vals, (rows, cols)), shape=(N, N))
    M = sp.diags(np.concatenate([np.full(n, mc) for mc in params.masses] + [[params.mass0]]), format="csc")
    Dm = sp.csc_matrix(params.alpha * M + params.beta * K)
    return M, Dm, K


def generate_triple_chain(n_masses, params=TripleChainParams()):
    """First-order triple chain oscillator of order ``2 (3 n_masses + 1)``.

    State ``[q; v]`` with ``E = diag(I, M)``, ``A = [[0, I], [-K, -D]]``; the
    input forces every mass and the output is the summed velocity, so
    ``B = C^T``.
    """
    M, Dm, K = triple_chain_matrices(n_masses, params)
    N = M.shape[0]
    I = sp.identity(N, format="csc")
    E = sp.block_diag([I, M], format="csc")
    A = sp.bmat([[None, I], [-K, -Dm]], format="csc")
    b = np.concatenate([np.zeros(N), np.ones(N)]).reshape(-1, 1)
    return GeneralizedSystem(E, A, b, b.T.copy())


def generate_structural(n_modes, p=3, m=3, damping=0.02, freq_range=(0.5, 80.0), seed=0, rolloff=1.0):
    """Lightly damped modal structure in first-order form (``E = I``).

    Used as a stand-in for flexible-structure benchmarks; modal frequencies
    are log-spaced over ``freq_range`` and actuator/sensor shapes are random,
    with modal input gains scaled by ``(w / w_min)^-rolloff``.
    """
    rng = np.random.default_rng(seed)
    freqs = np.geomspace(*freq_range, n_modes)
    blocks = [np.array([[0.0, w], [-w, -2.0 * damping * w]]) for w in freqs]
    A = sp.block_diag(blocks, format="csc")
    n = 2 * n_modes
    B = np.zeros((n, p))
    C = np.zeros((m, n))
    B[1::2] = rng.standard_normal((n_modes, p)) * (freqs / freqs[0])[:, None] ** -rolloff
    C[:, 0::2] = rng.standard_normal((m, n_modes))
    return GeneralizedSystem(sp.identity(n, format="csc"), A, B, C)


def generate_random_index1(
    n1, n2, p=1, m=1, nnz_per_row=3, seed=0, margin=0.5, coupling=1.0, decades=0.0, bandwidth=0
):
    """Deterministic sparse index-1 system whose eliminated pencil is stable.

    ``J4`` is strictly diagonally dominant (hence nonsingular), ``E1`` a
    positive diagonal >= I, and ``J1`` is shifted using a norm bound on
    ``J2 J4^{-1} J3`` so the eliminated ``A`` has negative definite symmetric
    part. ``decades > 0`` scales the diagonal shift of each row by a
    log-uniform factor in ``[1, 10**decades]``, spreading the spectrum.
    ``bandwidth > 0`` keeps every block's entries within that distance of
    its (scaled) diagonal, the local coupling of grid-like models; with
    the default 0 the pattern is unstructured and sparse LU fills in badly.
    """
    if min(n1, n2, p, m) < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)

    def rand(rows, cols, k):
        if bandwidth > 0:
            return _random_banded(rng, rows, cols, k, bandwidth)
        return _random_sparse(rng, rows, cols, min(1.0, k / cols))

    J1_0 = rand(n1, n1, nnz_per_row)
    J2 = coupling * rand(n1, n2, nnz_per_row)
    J3 = coupling * rand(n2, n1, nnz_per_row)
    off = rand(n2, n2, nnz_per_row)
    off = off - sp.diags(off.diagonal())
    rowsum = np.asarray(abs(off).sum(axis=1)).ravel()
    colsum = np.asarray(abs(off).sum(axis=0)).ravel()
    dom = np.maximum(rowsum, colsum) + 1.0 + rng.uniform(0, 1, n2)
    J4 = sp.csc_matrix(off - sp.diags(dom))
    # ||J4^{-1}||_2 <= 1/min(dom - max(rowsum, colsum)) for matrices dominant by rows and columns
    inv_bound = 1.0 / np.min(dom - np.maximum(rowsum, colsum))
    shift = max(_sym_bound(J1_0), 0.0) + _norm2_bound(J2) * inv_bound * _norm2_bound(J3) + margin
    E1 = sp.diags(1.0 + rng.uniform(0, 1, n1), format="csc")
    scale = 10.0 ** rng.uniform(0, decades, n1) if decades > 0 else np.ones(n1)
    J1 = sp.csc_matrix(J1_0 - sp.diags(shift * scale))
    B1 = rng.standard_normal((n1, p))
    B2 = rng.standard_normal((n2, p))
    C1 = rng.standard_normal((m, n1))
    C2 = rng.standard_normal((m, n2))
    return Index1System(E1, J1, J2, J3, J4, B1, B2, C1, C2)


def eliminate_algebraic(sys, cap=ELIMINATION_CAP):
    """Dense generalized system obtained by eliminating the algebraic variables.

    ``A = J1 - J2 J4^{-1} J3`` and friends; refused above ``cap`` because the
    result is dense (use the implicit index-1 routines instead).
    """
    if sys.n1 + sys.n2 > cap:
        raise ValidationError(
            f"elimination refused: n1 + n2 = {sys.n1 + sys.n2} exceeds cap {cap}; "
            "use the structured index-1 path (solve_index1/build_reduced_index1)"
        )
    lu = sys.j4_lu()
    X3 = lu.solve(sys.J3.toarray())
    XB = lu.solve(sys.B2)
    A = sys.J1.toarray() - sys.J2 @ X3
    B = sys.B1 - sys.J2 @ XB
    C = sys.C1 - sys.C2 @ X3
    D = sys.Da - sys.C2 @ XB
    return GeneralizedSystem(sys.E1.toarray(), np.asarray(A), B, C, D)
