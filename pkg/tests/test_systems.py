import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from conftest import rel, scalar_index1
from flmor.systems import (
    FactorizationError,
    FrequencyBand,
    GeneralizedSystem,
    Index1System,
    ValidationError,
    eliminate_algebraic,
    generate_random_index1,
    generate_random_stable,
    generate_structural,
    generate_triple_chain,
    load_system,
    save_system,
)


def _same(a, b):
    a = a.toarray() if sp.issparse(a) else np.asarray(a)
    b = b.toarray() if sp.issparse(b) else np.asarray(b)
    return a.shape == b.shape and np.array_equal(a, b)


# ---------------------------------------------------------------- band


def test_band_parse_and_str():
    assert FrequencyBand.parse("1,2") == FrequencyBand(1.0, 2.0)
    assert FrequencyBand.parse("[0.5, 8]") == FrequencyBand(0.5, 8.0)
    assert FrequencyBand.parse("unbounded").is_unbounded
    assert str(FrequencyBand(1.0, 2.0)) == "1.0,2.0"
    assert FrequencyBand.parse(str(FrequencyBand(3.0, float("inf")))).is_high_pass


@pytest.mark.parametrize("w1,w2", [(-1, 2), (3, 2), (float("nan"), 1), (float("inf"), float("inf"))])
def test_band_rejects_invalid(w1, w2):
    with pytest.raises(ValueError):
        FrequencyBand(w1, w2)


def test_band_equality_is_exact():
    assert FrequencyBand(1, 2) == FrequencyBand(1.0, 2.0)
    assert FrequencyBand(1, 2) != FrequencyBand(1, 2 + 1e-15)


# ---------------------------------------------------------------- generators


def test_random_stable_is_deterministic():
    a, b = generate_random_stable(20, 2, 2, seed=7), generate_random_stable(20, 2, 2, seed=7)
    for role in "EABCD":
        assert _same(getattr(a, role), getattr(b, role))


def test_random_stable_abscissa():
    s = generate_random_stable(40, seed=1)
    assert np.max(s.eigenvalues().real) < -0.1


def test_random_stable_full_density():
    s = generate_random_stable(5, density=1.0)
    assert s.A.nnz == 25


@given(st.integers(2, 30), st.integers(1, 3), st.integers(1, 3), st.integers(0, 10_000))
def test_random_stable_property(n, p, m, seed):
    s = generate_random_stable(n, p, m, density=0.3, seed=seed)
    assert (s.n, s.p, s.m) == (n, p, m)
    E = s.E.toarray()
    assert np.allclose(E, E.T)
    assert np.min(np.linalg.eigvalsh(E)) >= 1.0 - 1e-12
    assert np.max(s.eigenvalues().real) < -0.1


def test_triple_chain_small():
    s = generate_triple_chain(1)
    assert s.n == 8 and s.p == 1 and s.m == 1
    assert np.max(s.eigenvalues().real) < 0
    assert np.array_equal(s.B, s.C.T)


def test_triple_chain_order_formula():
    assert generate_triple_chain(1666).n == 9998
    with pytest.raises(ValueError):
        generate_triple_chain(0)


def test_structural_is_stable():
    s = generate_structural(20, 2, 3)
    assert (s.n, s.p, s.m) == (40, 2, 3)
    assert np.max(s.eigenvalues().real) < 0


# ---------------------------------------------------------------- index-1


def test_eliminate_scalar():
    el = eliminate_algebraic(scalar_index1())
    assert np.asarray(el.A)[0, 0] == pytest.approx(-0.5, abs=1e-15)
    assert el.B[0, 0] == 1.0 and el.C[0, 0] == 1.0 and el.D[0, 0] == 0.0


def test_eliminate_decoupled():
    rng = np.random.default_rng(0)
    J1 = sp.csc_matrix(-np.eye(3) - 0.1 * rng.random((3, 3)))
    J4 = sp.csc_matrix(-2 * np.eye(2))
    C2, B2 = rng.standard_normal((1, 2)), rng.standard_normal((2, 1))
    s = Index1System(sp.identity(3), J1, sp.csc_matrix((3, 2)), sp.csc_matrix((2, 3)), J4,
                     np.ones((3, 1)), B2, np.ones((1, 3)), C2, np.array([[0.3]]))
    el = eliminate_algebraic(s)
    assert np.allclose(np.asarray(el.A), J1.toarray())
    assert np.allclose(el.D, 0.3 - C2 @ np.linalg.solve(J4.toarray(), B2))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_eliminate_transfer_agreement(seed):
    s = generate_random_index1(6, 4, p=2, m=2, seed=seed)
    el = eliminate_algebraic(s)
    for nu in np.geomspace(1e-2, 1e3, 20):
        assert rel(el.transfer(1j * nu), s.transfer(1j * nu)) <= 1e-10


def test_eliminate_spectrum_matches():
    s = generate_random_index1(8, 5, seed=3)
    el = eliminate_algebraic(s)
    assert np.max(el.eigenvalues().real) < 0


def test_singular_j4_rejected():
    s = scalar_index1()
    with pytest.raises(ValidationError):
        Index1System(s.E1, s.J1, s.J2, s.J3, sp.csc_matrix([[0.0]]), s.B1, s.B2, s.C1, s.C2).validate()


def test_index1_shape_mismatch():
    s = scalar_index1()
    with pytest.raises(ValidationError, match="J2"):
        Index1System(s.E1, s.J1, sp.csc_matrix((1, 2)), s.J3, s.J4, s.B1, s.B2, s.C1, s.C2)


def test_banded_index1_has_local_pattern():
    s = generate_random_index1(200, 100, bandwidth=3, seed=1)
    rows, cols = s.J1.nonzero()
    assert np.max(np.abs(rows - cols)) <= 3


# ---------------------------------------------------------------- files


def test_identity_files_default_zero_d(tmp_path):
    from flmor import mmio

    for role, mat in (("E", np.eye(2)), ("A", -np.eye(2)), ("B", np.eye(2)), ("C", np.eye(2))):
        mmio.mmwrite(tmp_path / f"{role}.mtx", mat)
    s = load_system({r: str(tmp_path / f"{r}.mtx") for r in "EABC"})
    assert s.n == 2 and np.array_equal(s.D, np.zeros((2, 2)))


def test_generalized_round_trip(tmp_path):
    s = generate_random_stable(12, 2, 3, seed=4)
    manifest = save_system(s, tmp_path)
    t = load_system(manifest)
    for role in "EABCD":
        assert _same(getattr(s, role), getattr(t, role))


def test_index1_round_trip(tmp_path):
    s = generate_random_index1(7, 3, p=2, m=1, seed=5)
    t = load_system(save_system(s, tmp_path))
    assert isinstance(t, Index1System)
    for role in ("E1", "J1", "J2", "J3", "J4", "B1", "B2", "C1", "C2", "Da"):
        assert _same(getattr(s, role), getattr(t, role))


def test_singular_j4_from_files(tmp_path):
    s = scalar_index1()
    s = Index1System(s.E1, s.J1, s.J2, s.J3, sp.csc_matrix((1, 1)), s.B1, s.B2, s.C1, s.C2)
    with pytest.raises(ValidationError):
        load_system(save_system(s, tmp_path))


def test_dimension_mismatch_lists_blocks(tmp_path):
    from flmor import mmio

    mmio.mmwrite(tmp_path / "A.mtx", -np.eye(3))
    mmio.mmwrite(tmp_path / "B.mtx", np.ones((2, 1)))
    mmio.mmwrite(tmp_path / "C.mtx", np.ones((1, 3)))
    with pytest.raises(ValidationError, match="B"):
        load_system({r: str(tmp_path / f"{r}.mtx") for r in "ABC"})


def test_unstable_pencil_rejected():
    with pytest.raises(ValidationError, match="not stable"):
        GeneralizedSystem(sp.identity(2), sp.identity(2), np.ones((2, 1)), np.ones((1, 2))).validate()


def test_singular_e_rejected():
    with pytest.raises(FactorizationError):
        GeneralizedSystem(sp.csc_matrix((2, 2)), -sp.identity(2), np.ones((2, 1)), np.ones((1, 2))).validate()
