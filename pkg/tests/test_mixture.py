import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphglass.geometry import DiscretePath
from sphglass.mixture import (
    MixtureSpec,
    delta_increments,
    theta_matrix,
    xi_matrix,
    xi_prime_matrix,
    xi_scalar,
)

from conftest import random_constraint, random_path


def test_xi_scalar_single_term():
    spec = MixtureSpec(2, {2: [1.0, 1.0]})
    assert xi_scalar(spec, 1, 2, 0.5) == pytest.approx(0.25, abs=0)


def test_xi_scalar_at_zero():
    spec = MixtureSpec(2, {2: [0.7, 0.4], 4: [0.2, 0.1]})
    assert xi_scalar(spec, 1, 2, 0.0) == 0.0


def test_xi_scalar_sums_squared_coefficients_at_one():
    spec = MixtureSpec(1, {2: [0.3], 4: [0.1]})
    assert xi_scalar(spec, 1, 1, 1.0) == pytest.approx(0.10, rel=1e-15)


def test_xi_scalar_index_out_of_range():
    spec = MixtureSpec(2, {2: [1.0, 1.0]})
    with pytest.raises(IndexError):
        xi_scalar(spec, 0, 1, 0.5)
    with pytest.raises(IndexError):
        xi_scalar(spec, 1, 3, 0.5)


def test_xi_matrix_entrywise_square():
    spec = MixtureSpec(2, {2: [1.0, 1.0]})
    a = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert np.allclose(xi_matrix(spec, a), [[1.0, 0.25], [0.25, 1.0]], atol=0)


def test_xi_matrix_zero_mixture():
    a = np.array([[1.0, 0.3], [0.3, 1.0]])
    assert np.array_equal(xi_matrix(MixtureSpec.zero(2), a), np.zeros((2, 2)))


def test_xi_matrix_asymmetric_temperatures():
    # brute-force entrywise sum over p for beta_2 = (1, 2)
    spec = MixtureSpec(2, {2: [1.0, 2.0]})
    a = np.array([[1.0, 0.5], [0.5, 1.0]])
    expected = np.array(
        [[xi_scalar(spec, j + 1, k + 1, a[j, k]) for k in range(2)] for j in range(2)]
    )
    assert np.allclose(expected, [[1.0, 0.5], [0.5, 4.0]], atol=0)
    assert np.allclose(xi_matrix(spec, a), expected, atol=0)


def test_xi_matrix_dimension_mismatch():
    spec = MixtureSpec(2, {2: [1.0, 1.0]})
    with pytest.raises(ValueError):
        xi_matrix(spec, np.eye(3))


def test_xi_prime_examples():
    spec = MixtureSpec(2, {2: [1.0, 1.0]})
    a = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert xi_prime_matrix(spec, a)[0, 1] == pytest.approx(1.0, abs=0)
    assert np.array_equal(xi_prime_matrix(spec, np.zeros((2, 2))), np.zeros((2, 2)))
    spec1 = MixtureSpec(1, {2: [0.3], 4: [0.1]})
    assert xi_prime_matrix(spec1, np.array([[1.0]]))[0, 0] == pytest.approx(0.22, rel=1e-14)


def test_theta_pure_two_spin():
    spec = MixtureSpec(1, {2: [1.0]})
    assert theta_matrix(spec, np.array([[0.5]]))[0, 0] == pytest.approx(0.25, abs=0)


def test_theta_at_zero():
    spec = MixtureSpec(2, {2: [0.5, 0.4], 4: [0.2, 0.3]})
    assert np.array_equal(theta_matrix(spec, np.zeros((2, 2))), np.zeros((2, 2)))


def test_theta_pure_four_spin():
    # oracle: theta(x) = 3 beta^2 x^4 for the pure 4-spin kernel
    spec = MixtureSpec(1, {4: [1.0]})
    assert theta_matrix(spec, np.array([[0.5]]))[0, 0] == pytest.approx(3 * 0.5**4, rel=1e-15)


def test_delta_scalar():
    spec = MixtureSpec(1, {2: [1.0]})
    path = DiscretePath(xs=[0.0, 0.5, 1.0], qs=[[[0.0]], [[1.0]]])
    (delta,) = delta_increments(spec, path)
    assert delta[0, 0] == pytest.approx(2.0, abs=0)


def test_delta_zero_for_equal_levels():
    spec = MixtureSpec(2, {2: [0.8, 0.6]})
    q = np.array([[1.0, 0.4], [0.4, 1.0]])
    path = DiscretePath(xs=[0.0, 0.3, 0.7, 1.0], qs=np.stack([np.zeros((2, 2)), q, q]))
    deltas = delta_increments(spec, path)
    assert np.array_equal(deltas[1], np.zeros((2, 2)))


def test_delta_eigenvalues_oracle():
    # direct eigendecomposition of Delta_2 = 2 (Q_2 - Q_1)
    spec = MixtureSpec(2, {2: [1.0, 1.0]})
    q1 = np.array([[0.4, 0.2], [0.2, 0.4]])
    q2 = np.array([[1.0, 0.5], [0.5, 1.0]])
    path = DiscretePath(xs=[0.0, 0.3, 0.7, 1.0], qs=np.stack([np.zeros((2, 2)), q1, q2]))
    deltas = delta_increments(spec, path)
    eigs = np.linalg.eigvalsh(deltas[1])
    assert np.allclose(eigs, [0.6, 1.8], atol=1e-12)
    assert np.allclose(deltas[1], 2 * (q2 - q1), atol=0)


def test_delta_rejects_nonmonotone_chain():
    spec = MixtureSpec(2, {2: [1.0, 1.0]})
    q1 = np.array([[0.9, 0.0], [0.0, 0.1]])
    q2 = np.array([[1.0, 0.5], [0.5, 1.0]])  # q2 - q1 indefinite
    path = DiscretePath(xs=[0.0, 0.3, 0.7, 1.0], qs=np.stack([np.zeros((2, 2)), q1, q2]))
    with pytest.raises(ValueError, match="increment 2"):
        delta_increments(spec, path)


def test_odd_degree_rejected_at_construction():
    with pytest.raises(ValueError, match="even"):
        MixtureSpec(1, {3: [1.0]})
    with pytest.raises(ValueError):
        MixtureSpec(1, {1: [1.0]})


def test_wrong_beta_length_rejected():
    with pytest.raises(ValueError):
        MixtureSpec(2, {2: [1.0]})


@given(
    x=st.floats(-1.0, 1.0),
    b2=st.floats(0.0, 2.0),
    b4=st.floats(0.0, 1.0),
)
@settings(max_examples=50, deadline=None)
def test_matrix_matches_scalar_entrywise(x, b2, b4):
    spec = MixtureSpec(2, {2: [b2, 0.5 * b2], 4: [b4, b4]})
    a = np.array([[x, 0.5 * x], [0.5 * x, x]])
    mat = xi_matrix(spec, a)
    for j in range(2):
        for k in range(2):
            assert mat[j, k] == pytest.approx(xi_scalar(spec, j + 1, k + 1, a[j, k]), rel=1e-14, abs=1e-300)


@given(x=st.floats(-0.99, 0.99), b2=st.floats(0.1, 2.0), b4=st.floats(0.0, 1.0))
@settings(max_examples=50, deadline=None)
def test_derivative_matches_finite_difference(x, b2, b4):
    spec = MixtureSpec(1, {2: [b2], 4: [b4]})
    hstep = 1e-5
    fd = (xi_scalar(spec, 1, 1, x + hstep) - xi_scalar(spec, 1, 1, x - hstep)) / (2 * hstep)
    exact = xi_prime_matrix(spec, np.array([[x]]))[0, 0]
    # third-derivative bound on [-1, 1] for p <= 4 with these coefficients
    c = 24 * (b2 * b2 + b4 * b4) + 1.0
    assert abs(exact - fd) <= c * hstep**2


def test_diagonal_convexity_on_grid():
    spec = MixtureSpec(1, {2: [0.8], 4: [0.5]})
    xs = np.linspace(-1.0, 1.0, 101)
    vals = np.array([xi_scalar(spec, 1, 1, float(x)) for x in xs])
    second = vals[:-2] - 2 * vals[1:-1] + vals[2:]
    assert np.all(second >= -1e-12)


def test_schur_psd_on_random_chains(rng):
    for _ in range(10):
        n = int(rng.integers(1, 5))
        q = random_constraint(rng, n)
        path = random_path(rng, q.matrix, int(rng.integers(1, 4)))
        terms = {2: rng.uniform(0.1, 1.0, size=n), 4: rng.uniform(0.0, 0.5, size=n)}
        deltas = delta_increments(MixtureSpec(n, terms), path)
        for d in deltas:
            assert np.linalg.eigvalsh(d)[0] >= -1e-10 * max(1.0, np.abs(d).max())


def test_symmetry_preserved(rng):
    spec = MixtureSpec(3, {2: rng.uniform(0.1, 1.0, 3), 4: rng.uniform(0.0, 0.4, 3)})
    g = rng.uniform(-1.0, 1.0, (3, 3))
    a = (g + g.T) / 2.0
    for fn in (xi_matrix, xi_prime_matrix, theta_matrix):
        out = fn(spec, a)
        assert np.array_equal(out, out.T)
