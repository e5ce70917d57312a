import numpy as np
import pytest

from koopman_lattice.dynamics import (
    AffineContraction, CircleRotation, Composition, Doubling, Logistic, MarkovChain,
    apply_map, compose, exact_eigenpairs, load_markov_chain, markov_koopman_matrix,
)
from koopman_lattice.errors import DomainError, InvariantError, NoCatalogError


def test_apply_map_examples():
    assert apply_map(CircleRotation(0.25), 0.9) == pytest.approx(0.15, abs=1e-15)
    assert apply_map(Doubling(), 0.6) == pytest.approx(0.2, abs=1e-15)
    assert apply_map(AffineContraction(0.5, 0.0), 2.0) == 1.0


def test_circle_reduction_never_returns_one():
    T = CircleRotation(-1e-17)
    assert apply_map(T, 0.0) == 0.0
    out = T(np.linspace(0, 1, 1000, endpoint=False))
    assert np.all((out >= 0) & (out < 1))


@pytest.mark.parametrize("T, x", [
    (CircleRotation(0.1), 1.0),
    (Doubling(), -0.2),
    (Logistic(3.9), 1.5),
    (AffineContraction(0.5), np.inf),
])
def test_states_outside_domain(T, x):
    with pytest.raises(DomainError):
        apply_map(T, x)


def test_contraction_tag():
    with pytest.raises(InvariantError):
        AffineContraction(1.5)
    assert apply_map(AffineContraction(1.5, contraction=False), 2.0) == 3.0


def test_multidimensional_affine_map():
    T = AffineContraction((0.5, -0.25), (1.0, 0.0))
    assert apply_map(T, np.array([2.0, 4.0])).tolist() == [2.0, -1.0]


@pytest.mark.parametrize("T", [CircleRotation(np.sqrt(2) - 1), Doubling(), Logistic(3.7),
                               AffineContraction(0.3), Composition((Doubling(), CircleRotation(0.3)))])
def test_composition_consistency(T):
    rng = np.random.default_rng(0)
    x = rng.random(200) if T.space != "real" else rng.standard_normal(200)
    twice = compose(T, T)
    assert np.array_equal(apply_map(twice, x), apply_map(T, apply_map(T, x)))


def test_composition_needs_common_space():
    with pytest.raises(InvariantError):
        Composition((Doubling(), AffineContraction(0.5)))


def test_rotation_catalog():
    only_const = exact_eigenpairs(CircleRotation(0.3), 0)
    assert len(only_const) == 1 and only_const[0].eigenvalue == 1
    assert only_const[0].eigenfunction(0.37) == 1
    pairs = exact_eigenpairs(CircleRotation(0.25), 1)
    assert [p.order for p in pairs] == [0, 1, -1]
    assert pairs[1].eigenvalue == pytest.approx(1j, abs=1e-15)
    # e^{2 pi i (x + alpha)} = e^{2 pi i alpha} e^{2 pi i x}
    x = 0.123
    assert pairs[1].eigenfunction(x + 0.25) == pytest.approx(1j * pairs[1].eigenfunction(x), abs=1e-15)


def test_contraction_catalog():
    pairs = exact_eigenpairs(AffineContraction(0.5), 2)
    assert [p.eigenvalue for p in pairs] == [1.0, 0.5, 0.25]
    x = np.array([0.3, -1.7, 2.0])
    assert np.array_equal(pairs[2].eigenfunction(x), x ** 2)


@pytest.mark.parametrize("T", [Doubling(), Logistic(3.5), AffineContraction(0.5, 1.0)])
def test_no_catalog_is_signalled(T):
    with pytest.raises(NoCatalogError):
        exact_eigenpairs(T, 3)


@pytest.mark.parametrize("T, order", [(CircleRotation(np.sqrt(2) - 1), 8), (AffineContraction(0.7), 6)])
def test_catalog_identity_on_1000_states(T, order):
    rng = np.random.default_rng(42)
    x = rng.random(1000) if T.space == "circle" else 2 * rng.standard_normal(1000)
    for p in exact_eigenpairs(T, order):
        fx = p.eigenfunction(x)
        gap = np.abs(p.eigenfunction(apply_map(T, x)) - p.eigenvalue * fx)
        assert np.all(gap <= 1e-10 * (1 + np.abs(fx))), p.label


def test_markov_koopman_matrix_examples():
    assert np.array_equal(markov_koopman_matrix(MarkovChain(np.eye(2))), np.eye(2))
    P = [[0.9, 0.1], [0.5, 0.5]]
    assert np.array_equal(markov_koopman_matrix(MarkovChain(P)), np.array(P))
    U = markov_koopman_matrix(MarkovChain(np.full((4, 4), 0.25)))
    assert np.linalg.matrix_rank(U) == 1
    assert np.allclose(U.sum(axis=1), 1.0)


@pytest.mark.parametrize("P", [
    [[0.9, 0.0], [0.5, 0.5]],
    [[1.1, -0.1], [0.5, 0.5]],
    [[1.0]],
    [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0]],
])
def test_markov_invariants(P):
    with pytest.raises(InvariantError):
        MarkovChain(P)


def test_row_error_names_row():
    with pytest.raises(InvariantError, match="row 1"):
        MarkovChain([[0.5, 0.5], [0.45, 0.45]])


def test_constant_vector_is_fixed():
    rng = np.random.default_rng(3)
    for m in (2, 5, 9):
        P = rng.random((m, m))
        P /= P.sum(axis=1, keepdims=True)
        K = markov_koopman_matrix(MarkovChain(P))
        assert np.max(np.abs(K @ np.ones(m) - np.ones(m))) <= 1e-12


def test_markov_action_matches_matrix_product():
    from koopman_lattice.observables import StateVector, koopman_apply
    P = np.array([[0.9, 0.1], [0.5, 0.5]])
    f = StateVector((2.0, -1.0))
    Kf = koopman_apply(MarkovChain(P), f)
    assert np.array_equal(Kf(np.array([1.0, 2.0])), P @ np.array([2.0, -1.0]))


def test_load_matrix_file(tmp_path):
    path = tmp_path / "P.txt"
    path.write_text("0.9 0.1\n0.5 0.5\n")
    assert np.array_equal(load_markov_chain(path).transition_matrix, [[0.9, 0.1], [0.5, 0.5]])
