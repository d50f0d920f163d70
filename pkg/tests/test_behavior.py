import math

import numpy as np
import pytest
from hypothesis import given, settings

from behavior import contains, decompose, orientation_signs, project_behavior, project_subspace, sample_members
from benchmarks import system_document
from helpers import decomposition, random_pair, scalar_integrator, seeds, small_dims, static_gain
from system_model import lift, random_system, validate
from transfer import constrained_projection_oracle

BASIS_TOL = 1e-10
AFFINE_TOL = 1e-9
AFFINE_DRAWS = 100


@pytest.mark.parametrize("g", [0.0, 1.0, -2.5, 3.0])
def test_static_gain_basis_is_normalized_graph(g):
    dec = decomposition(static_gain(g))
    expected = np.array([[1.0], [g]]) / math.sqrt(1.0 + g * g)
    assert np.allclose(dec.H, expected, atol=1e-15)
    assert np.array_equal(dec.w_off, np.zeros(2))


def test_scalar_integrator_basis():
    dec = decomposition(scalar_integrator())
    M = dec.lifted.constraint_matrix
    assert dec.H.shape == (4, 2)
    assert np.allclose(M @ dec.H, 0.0, atol=BASIS_TOL)
    assert np.allclose(dec.H.T @ dec.H, np.eye(2), atol=BASIS_TOL)
    stacked = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [1.0, 0.0]])
    assert np.allclose(dec.H @ dec.H.T, stacked @ np.linalg.pinv(stacked), atol=1e-12)


def test_host_offset_is_free_response():
    host = validate(dict(system_document("sigma1"), T=25))
    dec = decomposition(host)
    outputs = dec.w_off[25:]
    assert np.array_equal(dec.w_off[:25], np.zeros(25))
    assert np.allclose(outputs, lift(host).L @ host.x0, atol=0.0)
    # y(0) = C x0 vanishes; y(1) = C A(0) x0 and y(2) = C A(1) A(0) x0
    assert outputs[0] == 0.0
    assert outputs[1] == pytest.approx(1.02 * math.sqrt(2.0), abs=1e-12)
    assert outputs[2] == pytest.approx(1.02 * (2.0 - 2.45 * math.sqrt(2.0)), abs=1e-12)


def test_orientation_signs_make_the_peak_positive():
    matrix = np.array([[0.5, -1.0, 2.0], [-3.0, 1.0, -2.0]])
    assert np.array_equal(orientation_signs(matrix), np.array([-1.0, -1.0, 1.0]))


def test_contains_examples():
    dec = decomposition(scalar_integrator())
    member = contains(dec, dec.w_off)
    assert member.admissible and member.residual == 0.0
    assert contains(dec, np.array([1.0, 0.0, 0.0, 1.0])).admissible
    assert not contains(dec, np.array([1.0, 0.0, 0.0, 0.0])).admissible
    with pytest.raises(ValueError, match="expected length 4"):
        contains(dec, np.zeros(3))


def test_project_subspace_examples():
    dec = decomposition(static_gain(1.0))
    inside = 3.0 * dec.H[:, 0]
    assert np.allclose(project_subspace(dec.H, inside), inside, atol=1e-12)
    assert np.allclose(project_subspace(dec.H, np.array([1.0, -1.0])), 0.0, atol=1e-15)


def test_project_behavior_examples():
    dec = decomposition(static_gain(1.0))
    assert np.allclose(project_behavior(dec, np.array([1.0, -1.0])), 0.0, atol=1e-15)
    member = np.array([2.0, 2.0])
    assert np.allclose(project_behavior(dec, member), member, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(seed=seeds, dims=small_dims)
def test_decomposition_invariants(seed, dims):
    rng = np.random.default_rng(seed)
    system = random_system(rng, **dims)
    dec = decomposition(system)
    n_free = system.n_u * system.T
    assert dec.H.shape == (system.n_w * system.T, n_free)
    assert np.max(np.abs(dec.H.T @ dec.H - np.eye(n_free))) <= BASIS_TOL
    assert np.max(np.abs(dec.lifted.constraint_matrix @ dec.H)) <= BASIS_TOL
    assert np.array_equal(dec.lifted.constraint_matrix @ dec.w_off, dec.rhs)


@settings(max_examples=50, deadline=None)
@given(seed=seeds, dims=small_dims)
def test_affine_combinations_stay_admissible(seed, dims):
    rng = np.random.default_rng(seed)
    dec = decomposition(random_system(rng, **dims))
    first = sample_members(dec, rng, AFFINE_DRAWS)
    second = sample_members(dec, rng, AFFINE_DRAWS)
    alphas = np.concatenate([[-1.0, 0.3, 2.0], rng.uniform(-2.0, 3.0, AFFINE_DRAWS - 3)])
    for alpha, w1, w2 in zip(alphas, first, second):
        assert contains(dec, alpha * w1 + (1.0 - alpha) * w2, tol=AFFINE_TOL).admissible


@settings(max_examples=50, deadline=None)
@given(seed=seeds, dims=small_dims)
def test_pivoted_basis_spans_the_same_subspace(seed, dims):
    rng = np.random.default_rng(seed)
    system = random_system(rng, **dims)
    plain = decomposition(system)
    pivoted = decomposition(system, pivoting=True)
    assert np.max(np.abs(plain.H @ plain.H.T - pivoted.H @ pivoted.H.T)) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=seeds, dims=small_dims)
def test_projection_properties(seed, dims):
    rng, system, _ = random_pair(seed, dims)
    dec = decomposition(system)
    x = rng.standard_normal(dec.ambient_dim) * 3.0

    projected = project_subspace(dec.H, x)
    assert np.allclose(project_subspace(dec.H, projected), projected, atol=1e-12)
    pythagoras = np.linalg.norm(x - projected) ** 2 + np.linalg.norm(projected) ** 2
    assert pythagoras == pytest.approx(np.linalg.norm(x) ** 2, rel=1e-10)

    closest = project_behavior(dec, x)
    assert contains(dec, closest, tol=1e-9).admissible
    oracle = constrained_projection_oracle(dec.lifted, dec.x0, x)
    assert np.linalg.norm(closest - oracle) <= 1e-8 * (1.0 + np.linalg.norm(oracle))

    others = sample_members(dec, rng, 1000)
    assert np.linalg.norm(x - closest) <= np.min(np.linalg.norm(others - x, axis=1)) + 1e-9


def test_decompose_rejects_wrong_initial_state_length():
    with pytest.raises(ValueError, match="x0"):
        decompose(lift(scalar_integrator()), np.zeros(2))
