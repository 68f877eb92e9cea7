import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affinepr import (
    SeedSpec,
    check_decomposition,
    lifted_distance_check,
    moment_bound_check,
    phase_align,
    sparse_convex_decompose,
)
from affinepr.lemmas import batch_lifted_distance_check, moment_bounds


def admissible_vector(rng, n, k, theta):
    v = rng.standard_normal(n) * theta
    v = np.clip(v, -theta, theta)
    l1 = np.sum(np.abs(v))
    if l1 > k * theta:
        v *= (k * theta / l1) * (1 - 1e-9)
    return v


def test_decompose_sparse_input_single_atom():
    v = np.array([0.0, 2.0, 0.0, -1.0])
    dec = sparse_convex_decompose(v, 2, 2.0)
    assert dec.weights == [1.0]
    assert np.array_equal(dec.atoms[0], v)


def test_decompose_hand_example():
    dec = sparse_convex_decompose(np.array([1.0, 1.0]), 1, 2.0)
    check_decomposition(dec, np.array([1.0, 1.0]), 1, 2.0)
    assert len(dec.weights) == 2


def test_decompose_preconditions():
    with pytest.raises(ValueError):
        sparse_convex_decompose(np.array([3.0]), 1, 2.0)  # sup norm
    with pytest.raises(ValueError):
        sparse_convex_decompose(np.array([1.0, 1.0, 1.0]), 1, 1.0)  # l1 budget


def test_decompose_random_sweep():
    rng = np.random.default_rng(50)
    for _ in range(300):
        n = int(rng.integers(1, 33))
        k = int(rng.integers(1, n + 1))
        theta = float(rng.uniform(0.1, 2.0))
        v = admissible_vector(rng, n, k, theta)
        dec = sparse_convex_decompose(v, k, theta)
        check_decomposition(dec, v, k, theta)
        assert len(dec.atoms) <= 2 * n + 1


@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_decompose_property(n, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n + 1))
    theta = float(rng.uniform(0.05, 3.0))
    v = admissible_vector(rng, n, k, theta)
    dec = sparse_convex_decompose(v, k, theta)
    check_decomposition(dec, v, k, theta)


def test_decompose_boundary_saturated():
    # ||v||_1 == k * theta exactly
    v = np.array([1.0, 1.0, 1.0, 1.0])
    dec = sparse_convex_decompose(v, 2, 2.0)
    check_decomposition(dec, v, 2, 2.0)


def test_phase_align_examples():
    u = np.array([1.0, 2.0])
    v = np.array([0.5, 1.0])
    assert np.array_equal(phase_align(u, v), v)
    uc = np.array([1.0 + 0j, 0.0])
    assert np.allclose(phase_align(uc, 1j * uc), uc, atol=1e-15)
    z = np.zeros(2)
    assert np.array_equal(phase_align(z, v), v)


def test_phase_align_makes_inner_product_real():
    rng = np.random.default_rng(51)
    for _ in range(200):
        u = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        w = phase_align(u, v)
        inner = np.vdot(u, w)
        assert inner.real >= 0
        assert abs(inner.imag) <= 1e-14 * np.linalg.norm(u) * np.linalg.norm(v)


def test_lifted_distance_examples():
    u = np.array([1.0 + 0j, 0.0])
    lhs, rhs, holds = lifted_distance_check(u, u)
    assert (lhs, rhs, holds) == (0.0, 0.0, True)
    lhs, rhs, holds = lifted_distance_check(u, np.array([0.0, 1.0 + 0j]))
    assert lhs == pytest.approx(math.sqrt(2))
    assert rhs == pytest.approx(1.0)
    assert holds


def test_lifted_distance_precondition():
    u = np.array([1.0 + 0j, 0.0])
    with pytest.raises(ValueError):
        lifted_distance_check(u, -u)


def test_lifted_distance_closed_form_matches_outer_products():
    rng = np.random.default_rng(52)
    for _ in range(50):
        n = int(rng.integers(1, 9))
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v = phase_align(u, rng.standard_normal(n) + 1j * rng.standard_normal(n))
        lhs, rhs, holds = lifted_distance_check(u, v)
        explicit = np.linalg.norm(np.outer(u, u.conj()) - np.outer(v, v.conj()), "fro")
        assert lhs == pytest.approx(explicit, abs=1e-10)
        assert holds


def test_lifted_distance_randomized_sweep():
    rng = np.random.default_rng(53)
    count = 200_000
    n = 8
    U = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    V = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    inner = np.sum(np.conj(U) * V, axis=1)
    V = V * np.where(np.abs(inner) > 0, np.exp(-1j * np.angle(inner)), 1.0)[:, None]
    _, _, holds = batch_lifted_distance_check(U, V)
    assert int(np.sum(~holds)) == 0


def test_moment_bounds_zero_case():
    mean, lo, hi, ok = moment_bound_check(
        np.zeros((3, 3), dtype=complex), np.zeros(3, dtype=complex), 0.0, 10_000, SeedSpec(54)
    )
    assert (mean, lo, hi) == (0.0, 0.0, 0.0)
    assert ok


def test_moment_bounds_closed_form_projector():
    u = np.array([1.0 + 0j, 0.0, 0.0])
    H = np.outer(u, u.conj())
    mean, lo, hi, ok = moment_bound_check(H, np.zeros(3, dtype=complex), 0.0, 100_000, SeedSpec(55))
    assert lo == pytest.approx(1 / 3)
    assert hi == pytest.approx(2 * math.sqrt(3))
    assert abs(mean - 1.0) <= 5 / math.sqrt(100_000) * 1.2
    assert ok


def test_moment_bounds_rejects_bad_inputs():
    rng = np.random.default_rng(56)
    M = rng.standard_normal((4, 4))
    H_full = M @ M.T + np.eye(4)  # rank 4
    with pytest.raises(ValueError):
        moment_bound_check(H_full.astype(complex), np.zeros(4, dtype=complex), 0.0, 10_000, SeedSpec(57))
    u = np.array([1.0 + 0j, 0.0])
    with pytest.raises(ValueError):
        moment_bound_check(np.outer(u, u.conj()), np.zeros(2, dtype=complex), 0.0, 10, SeedSpec(58))


def test_moment_bounds_random_sweep():
    rng = np.random.default_rng(59)
    for i in range(10):
        n = int(rng.integers(2, 9))
        q, _ = np.linalg.qr(rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2)))
        lam = rng.standard_normal(2) * 2
        H = lam[0] * np.outer(q[:, 0], q[:, 0].conj()) + lam[1] * np.outer(q[:, 1], q[:, 1].conj())
        h = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        b = complex(rng.standard_normal() + 1j * rng.standard_normal())
        mean, lo, hi, ok = moment_bound_check(H, h, b, 50_000, SeedSpec(60, (i,)))
        assert ok
        assert lo <= hi


def test_moment_bounds_reproducible():
    rng = np.random.default_rng(61)
    q, _ = np.linalg.qr(rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)))
    H = 1.5 * np.outer(q[:, 0], q[:, 0].conj()) - 0.5 * np.outer(q[:, 1], q[:, 1].conj())
    h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    one = moment_bound_check(H, h, 0.7 + 0.1j, 20_000, SeedSpec(62))
    two = moment_bound_check(H, h, 0.7 + 0.1j, 20_000, SeedSpec(62))
    assert one == two


def test_moment_bound_uses_modulus_of_bias():
    rng = np.random.default_rng(63)
    q, _ = np.linalg.qr(rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)))
    H = np.outer(q[:, 0], q[:, 0].conj())
    h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    a = moment_bounds(H, h, 2.0)
    b = moment_bounds(H, h, -2.0)
    c = moment_bounds(H, h, 2.0j)
    assert a == b == c
