import numpy as np
import pytest

from sphglass.cascade import (
    CascadeSpec,
    cascade_free_energy_mc,
    nested_recursion_mc,
    sample_finite_cascade,
    theta_cascade_value,
    _weighted_logsumexp,
)
from sphglass.functional import closed_form_Y0, logdet_pd, theta_term
from sphglass.geometry import DiscretePath
from sphglass.mixture import MixtureSpec, delta_increments

from conftest import random_constraint, random_mixture, random_multiplier, random_path


def scalar_path(x0: float = 0.9) -> DiscretePath:
    return DiscretePath(xs=[0.0, x0, 1.0], qs=[[[0.0]], [[1.0]]])


def test_cascade_spec_validates_covariances(rng):
    q = random_constraint(rng, 2)
    path = random_path(rng, q.matrix, 2)
    spec = random_mixture(rng, 2)
    lam = random_multiplier(rng, path, spec)
    deltas = delta_increments(spec, path)
    CascadeSpec(path=path, spec=spec, lam=lam, h=np.zeros(2), increment_covariances=tuple(deltas))
    with pytest.raises(ValueError):
        CascadeSpec(
            path=path,
            spec=spec,
            lam=lam,
            h=np.zeros(2),
            increment_covariances=tuple(d + 0.1 for d in deltas),
        )


def test_nested_mc_zero_mixture_exact(rng):
    q = random_constraint(rng, 2)
    path = DiscretePath.simple(q.matrix, 0.5)
    spec = MixtureSpec.zero(2)
    lam = random_multiplier(rng, path, spec)
    h = np.array([0.4, -0.2])
    cs = CascadeSpec(path=path, spec=spec, lam=lam, h=h)
    res = nested_recursion_mc(cs, [64], seed=1)
    expected = -0.5 * logdet_pd(lam) + 0.5 * float(h @ np.linalg.solve(lam, h))
    assert res.estimate == pytest.approx(expected, rel=1e-13)
    assert res.stderr == 0.0


def test_nested_mc_single_level_closed_form():
    spec = MixtureSpec(1, {2: [0.3]})
    path = scalar_path(0.9)
    lam = np.array([[1.18]])
    cs = CascadeSpec(path=path, spec=spec, lam=lam, h=np.zeros(1))
    res = nested_recursion_mc(cs, [200_000], seed=7)
    target = closed_form_Y0(lam, path, np.zeros(1), spec)
    assert abs(res.estimate - target) <= 3 * res.stderr
    assert res.stderr < 5e-3


def test_nested_mc_two_levels_closed_form(rng):
    q = random_constraint(rng, 2)
    path = random_path(rng, q.matrix, 2)
    spec = random_mixture(rng, 2, scale=0.4)
    lam = random_multiplier(rng, path, spec, margin=0.6)
    h = rng.uniform(-0.3, 0.3, size=2)
    cs = CascadeSpec(path=path, spec=spec, lam=lam, h=h)
    res = nested_recursion_mc(cs, [2000, 2000], seed=13)
    target = closed_form_Y0(lam, path, h, spec)
    assert abs(res.estimate - target) <= 3 * max(res.stderr, 1e-4)
    assert res.stderr < 5e-3


def test_nested_mc_three_levels(rng):
    q = random_constraint(rng, 2)
    path = random_path(rng, q.matrix, 3)
    spec = random_mixture(rng, 2, scale=0.35)
    lam = random_multiplier(rng, path, spec, margin=0.7)
    h = np.array([0.1, -0.2])
    cs = CascadeSpec(path=path, spec=spec, lam=lam, h=h)
    res = nested_recursion_mc(cs, [200, 150, 100], seed=3)
    target = closed_form_Y0(lam, path, h, spec)
    assert abs(res.estimate - target) <= 4 * res.stderr


def test_nested_mc_leaf_budget_guard(rng):
    q = random_constraint(rng, 2)
    path = random_path(rng, q.matrix, 3)
    spec = random_mixture(rng, 2)
    lam = random_multiplier(rng, path, spec)
    cs = CascadeSpec(path=path, spec=spec, lam=lam, h=np.zeros(2))
    with pytest.raises(ValueError, match="leaf limit"):
        nested_recursion_mc(cs, [400, 300, 200], seed=0)


def test_cascade_free_energy_worker_invariance():
    path = scalar_path(0.6)
    spec = MixtureSpec(1, {2: [0.3]})
    cs = CascadeSpec(path=path, spec=spec, lam=np.array([[1.3]]), h=np.zeros(1))
    fc = sample_finite_cascade(path, 300, seed=1)
    a = cascade_free_energy_mc(fc, cs, 8.0, 120, seed=9, workers=1)
    b = cascade_free_energy_mc(fc, cs, 8.0, 120, seed=9, workers=3)
    assert a.estimate == b.estimate and a.stderr == b.stderr


def test_nested_mc_reproducible_bit_exact():
    spec = MixtureSpec(1, {2: [0.4]})
    path = scalar_path(0.7)
    lam = np.array([[1.5]])
    cs = CascadeSpec(path=path, spec=spec, lam=lam, h=np.zeros(1))
    a = nested_recursion_mc(cs, [5000], seed=123)
    b = nested_recursion_mc(cs, [5000], seed=123)
    assert a.estimate == b.estimate and a.stderr == b.stderr


def test_nested_mc_budget_validation(rng):
    q = random_constraint(rng, 2)
    path = random_path(rng, q.matrix, 2)
    spec = random_mixture(rng, 2)
    lam = random_multiplier(rng, path, spec)
    cs = CascadeSpec(path=path, spec=spec, lam=lam, h=np.zeros(2))
    with pytest.raises(ValueError):
        nested_recursion_mc(cs, [100], seed=0)  # wrong level count
    with pytest.raises(ValueError):
        nested_recursion_mc(cs, [0, 10], seed=0)


def test_theta_cascade_zero_mixture(rng):
    q = random_constraint(rng, 2)
    path = random_path(rng, q.matrix, 2)
    assert theta_cascade_value(path, MixtureSpec.zero(2)) == 0.0


def test_theta_cascade_single_increment():
    beta = 0.7
    spec = MixtureSpec(1, {2: [beta]})
    for x0 in (0.3, 0.9):
        assert theta_cascade_value(scalar_path(x0), spec) == pytest.approx(
            0.5 * x0 * beta**2, rel=1e-14
        )


def test_theta_cascade_equals_theta_term(rng):
    for _ in range(10):
        n = int(rng.integers(1, 4))
        q = random_constraint(rng, n)
        path = random_path(rng, q.matrix, int(rng.integers(1, 4)))
        spec = random_mixture(rng, n)
        tt = theta_term(path, spec)
        tc = theta_cascade_value(path, spec)
        assert tc == pytest.approx(tt, rel=1e-13, abs=1e-15)


def test_finite_cascade_weights_normalized_and_deterministic():
    path = scalar_path(0.5)
    a = sample_finite_cascade(path, 500, seed=3)
    b = sample_finite_cascade(path, 500, seed=3)
    assert np.array_equal(a.weights, b.weights)
    assert a.weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(a.weights > 0)


def test_finite_cascade_rejects_small_k():
    with pytest.raises(ValueError):
        sample_finite_cascade(scalar_path(0.5), 50, seed=0)


def test_finite_cascade_second_moment_identity():
    # Poisson-Dirichlet: E sum v^2 = 1 - x_0
    path = scalar_path(0.5)
    second = [
        float(np.sum(sample_finite_cascade(path, 10_000, seed=1000 + rep).weights ** 2))
        for rep in range(200)
    ]
    assert np.mean(second) == pytest.approx(0.5, abs=0.02)


def test_finite_cascade_two_levels_structure():
    path = DiscretePath(xs=[0.0, 0.3, 0.7, 1.0], qs=[[[0.0]], [[0.5]], [[1.0]]])
    fc = sample_finite_cascade(path, 120, seed=5)
    assert fc.depth == 2 and fc.weights.size == 120**2
    assert fc.weights.sum() == pytest.approx(1.0, abs=1e-14)
    anc = fc.ancestor_index(1)
    assert anc[0] == 0 and anc[-1] == 119


def test_weighted_logsumexp_shift_correctness(rng):
    logw = np.log(rng.dirichlet(np.ones(1000)))
    values = rng.standard_normal(1000)
    base = _weighted_logsumexp(logw, values)
    for shift in (1e3, 1e6):
        shifted = _weighted_logsumexp(logw, values + shift)
        assert shifted - shift == pytest.approx(base, abs=1e-12 * max(1.0, shift / 1e3))


def test_cascade_free_energy_zero_mixture():
    path = scalar_path(0.5)
    spec = MixtureSpec.zero(1)
    cs = CascadeSpec(path=path, spec=spec, lam=np.array([[2.0]]), h=np.zeros(1))
    fc = sample_finite_cascade(path, 200, seed=2)
    res = cascade_free_energy_mc(fc, cs, m_effective=8.0, reps=100, seed=3)
    assert res.estimate == pytest.approx(0.0, abs=1e-15)
    assert res.stderr == pytest.approx(0.0, abs=1e-15)


def test_cascade_free_energy_near_rs_smoke():
    beta = 0.3
    spec = MixtureSpec(1, {2: [beta]})
    path = DiscretePath(xs=[0.0, 1.0 - 1e-6, 1.0], qs=[[[0.0]], [[1.0]]])
    target = theta_cascade_value(path, spec)
    cs = CascadeSpec(path=path, spec=spec, lam=np.array([[1 + 2 * beta**2]]), h=np.zeros(1))
    fc = sample_finite_cascade(path, 4000, seed=5)
    res = cascade_free_energy_mc(fc, cs, m_effective=16.0, reps=120, seed=21)
    assert abs(res.estimate - target) <= 0.15 * target


def test_cascade_free_energy_truncation_stability():
    # doubling K moves the estimate by less than its standard error
    beta = 0.3
    spec = MixtureSpec(1, {2: [beta]})
    path = DiscretePath(xs=[0.0, 1.0 - 1e-6, 1.0], qs=[[[0.0]], [[1.0]]])
    cs = CascadeSpec(path=path, spec=spec, lam=np.array([[1 + 2 * beta**2]]), h=np.zeros(1))
    small = cascade_free_energy_mc(sample_finite_cascade(path, 5000, seed=5), cs, 16.0, 300, seed=41)
    large = cascade_free_energy_mc(sample_finite_cascade(path, 10000, seed=5), cs, 16.0, 300, seed=41)
    assert abs(large.estimate - small.estimate) <= max(small.stderr, large.stderr)


def test_cascade_free_energy_validations():
    path = scalar_path(0.5)
    spec = MixtureSpec(1, {2: [0.3]})
    cs = CascadeSpec(path=path, spec=spec, lam=np.array([[1.5]]), h=np.zeros(1))
    fc = sample_finite_cascade(path, 200, seed=1)
    with pytest.raises(ValueError):
        cascade_free_energy_mc(fc, cs, m_effective=100.0, reps=100, seed=0)
    with pytest.raises(ValueError):
        cascade_free_energy_mc(fc, cs, m_effective=8.0, reps=10, seed=0)
