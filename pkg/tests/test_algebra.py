import numpy as np
import pytest

from conftest import random_interior_simplex, random_symmetric_model, random_tangent
from crossdiff import (
    InteractionMatrix,
    ReducedPoint,
    SimplexPoint,
    TangentVector,
    coercivity_bounds,
    diffusion_matrix,
    dissipation_form,
    dual_to_primal,
    find_indefinite_witness,
    hessian_entropy,
    lift,
    mobility,
    primal_to_dual,
    project,
    reduced_coercivity,
    reduced_diffusion,
    reduced_hessian,
    reduced_mobility,
    validate_hypotheses,
)
from crossdiff.algebra import lift_tangent, reduced_dissipation_matrix
from crossdiff.errors import NotTangent, SingularAtBoundary


def three_species_model():
    return validate_hypotheses([[0, 1, 2], [1, 0, 3], [2, 3, 0]])[0]


def test_diffusion_matrix_hand_value():
    A = diffusion_matrix(three_species_model(), SimplexPoint([0.2, 0.3, 0.5]))
    expected = [[1.3, -0.2, -0.4], [-0.3, 1.7, -0.9], [-1.0, -1.5, 1.3]]
    np.testing.assert_allclose(A, expected, atol=1e-14)


def test_diffusion_matrix_vanishing_species_row():
    model = three_species_model()
    u = np.array([0.0, 0.4, 0.6])
    A = diffusion_matrix(model, u)
    # Row 0 keeps only the diagonal entry once u_0 = 0.
    assert A[0, 1] == 0.0 and A[0, 2] == 0.0
    assert A[0, 0] == pytest.approx(model.K[0] @ u)


def test_zero_rates_give_zero_matrices():
    model = InteractionMatrix(np.zeros((3, 3)))
    u = SimplexPoint([0.2, 0.3, 0.5])
    assert np.all(diffusion_matrix(model, u) == 0.0)
    assert np.all(mobility(model, u) == 0.0)


def test_mobility_hand_value():
    model, _ = validate_hypotheses([[0, 2], [2, 0]])
    M = mobility(model, SimplexPoint([0.25, 0.75]))
    np.testing.assert_allclose(M, [[0.375, -0.375], [-0.375, 0.375]], atol=1e-15)


def test_mobility_vanishes_at_vertices():
    model = three_species_model()
    M = mobility(model, np.array([1.0, 0.0, 0.0]))
    assert np.all(M == 0.0)
    assert np.linalg.matrix_rank(M) == 0


def test_mobility_factorization_and_kernel(rng):
    for _ in range(100):
        n = int(rng.integers(1, 6))
        model = random_symmetric_model(rng, n)
        u = random_interior_simplex(rng, n + 1)
        M = mobility(model, u)
        A = diffusion_matrix(model, u)
        np.testing.assert_allclose(M, A @ np.diag(u), atol=1e-14)
        np.testing.assert_allclose(M, M.T, atol=1e-14)
        np.testing.assert_allclose(M @ np.ones(n + 1), 0.0, atol=1e-13)


def test_mobility_kernel_on_boundary(rng):
    model = three_species_model()
    u = np.array([0.0, 0.35, 0.65])
    M = mobility(model, u)
    np.testing.assert_allclose(M @ np.ones(3), 0.0, atol=1e-15)


def test_hessians_hand_values():
    np.testing.assert_allclose(
        reduced_hessian(ReducedPoint([0.2, 0.3])),
        [[7.0, 2.0], [2.0, 1.0 / 0.3 + 2.0]],
        atol=1e-12,
    )
    H = hessian_entropy(np.full(4, 0.25))
    np.testing.assert_allclose(H, 4.0 * np.eye(4), atol=1e-13)


def test_hessians_reject_boundary():
    with pytest.raises(SingularAtBoundary):
        hessian_entropy(np.array([0.0, 1.0]))
    with pytest.raises(SingularAtBoundary):
        reduced_hessian(np.array([0.4, 0.6]))  # vacancy 0


def test_reduced_diffusion_two_species_is_constant(rng):
    for k in (0.5, 1.0, 3.7):
        model, _ = validate_hypotheses([[0, k], [k, 0]])
        for U in rng.uniform(0.05, 0.95, size=5):
            np.testing.assert_allclose(reduced_diffusion(model, [U]), [[k]], atol=1e-14)


def test_reduced_diffusion_zero_rates():
    model = InteractionMatrix(np.zeros((4, 4)))
    assert np.all(reduced_diffusion(model, [0.1, 0.2, 0.3]) == 0.0)


def test_reduced_diffusion_factorizes(rng):
    for _ in range(200):
        n = int(rng.integers(1, 6))
        model = random_symmetric_model(rng, n, zero_fraction=0.2)
        U = random_interior_simplex(rng, n + 1)[1:]
        Ahat = reduced_diffusion(model, U)
        MH = reduced_mobility(model, U) @ reduced_hessian(U)
        scale = max(1.0, np.abs(Ahat).max())
        assert np.abs(Ahat - MH).max() <= 1e-12 * scale


def test_reduced_mobility_hand_value():
    model, _ = validate_hypotheses([[0, 2], [2, 0]])
    np.testing.assert_allclose(reduced_mobility(model, [0.25]), [[0.375]], atol=1e-15)


def test_reduced_mobility_positive_definite_inside(rng):
    model = three_species_model()
    for _ in range(200):
        U = rng.uniform(0.05, 0.6, size=2)
        if 1.0 - U.sum() < 0.05:
            continue
        eigs = np.linalg.eigvalsh(reduced_mobility(model, U))
        assert eigs.min() > 0.0


def test_lift_project_roundtrip(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        full = rng.dirichlet(np.ones(n + 1))
        U = ReducedPoint(full[1:])
        assert np.array_equal(project(lift(U)).U, U.U)
    p = lift(ReducedPoint(np.zeros(3)))
    np.testing.assert_array_equal(p.u, [1.0, 0.0, 0.0, 0.0])


def test_dissipation_form_hand_value_and_saturation():
    model, _ = validate_hypotheses([[0, 2], [2, 0]])
    u = SimplexPoint([0.25, 0.75])
    xi = np.array([1.0, -1.0])
    value = dissipation_form(model, u, xi)
    assert value == pytest.approx(32.0 / 3.0, rel=1e-12)
    # Two species saturate the uniform coercivity bound.
    bounds = coercivity_bounds(model, u, xi)
    assert bounds.uniform_bound == pytest.approx(value, rel=1e-12)
    assert bounds.per_species_bound == pytest.approx(value, rel=1e-12)


def test_dissipation_form_zero_direction():
    model = three_species_model()
    assert dissipation_form(model, SimplexPoint([0.2, 0.3, 0.5]), np.zeros(3)) == 0.0


def test_dissipation_form_two_paths_agree(rng):
    for _ in range(300):
        n = int(rng.integers(1, 6))
        model = random_symmetric_model(rng, n, zero_fraction=0.2)
        u = random_interior_simplex(rng, n + 1)
        xi = random_tangent(rng, n + 1)
        a = dissipation_form(model, u, xi, path="sum")
        b = dissipation_form(model, u, xi, path="matrix")
        assert abs(a - b) <= 1e-12 * max(abs(a), abs(b), 1.0)


def test_dissipation_form_boundary_conventions():
    # A vanishing rate silences the undefined pair entirely.
    model, _ = validate_hypotheses([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
    u = np.array([0.5, 0.5, 0.0])
    xi = np.array([1.0, -1.0, 0.0])
    value = dissipation_form(model, u, xi)
    assert np.isfinite(value) and value > 0.0
    # A positive rate against a vanishing density with mass moving in it blows up.
    xi_bad = np.array([1.0, 0.0, -1.0])
    model2, _ = validate_hypotheses([[0, 1, 1], [1, 0, 0], [1, 0, 0]])
    assert dissipation_form(model2, u, xi_bad) == np.inf
    with pytest.raises(SingularAtBoundary):
        dissipation_form(model2, u, xi, path="matrix")


def test_coercivity_bounds_hold(rng):
    for _ in range(500):
        n = int(rng.integers(1, 6))
        model = random_symmetric_model(rng, n, zero_fraction=0.3)
        u = random_interior_simplex(rng, n + 1)
        xi = random_tangent(rng, n + 1)
        b = coercivity_bounds(model, u, xi)
        slack = 1e-10 * max(1.0, abs(b.lhs))
        assert b.lhs >= b.per_species_bound - slack
        assert b.lhs >= b.uniform_bound - slack
        assert b.per_species_bound >= b.uniform_bound - slack


def test_coercivity_zero_direction_and_tangency():
    model = three_species_model()
    u = SimplexPoint([0.2, 0.3, 0.5])
    b = coercivity_bounds(model, u, np.zeros(3))
    assert b.lhs == b.per_species_bound == b.uniform_bound == 0.0
    with pytest.raises(NotTangent):
        coercivity_bounds(model, u, np.array([1.0, 0.0, 0.0]))
    with pytest.raises(SingularAtBoundary):
        coercivity_bounds(model, np.array([0.0, 0.5, 0.5]), np.array([1.0, -1.0, 0.0]))


def test_reduced_matches_full_quadratic_form(rng):
    for _ in range(500):
        n = int(rng.integers(1, 6))
        model = random_symmetric_model(rng, n, zero_fraction=0.2)
        u = random_interior_simplex(rng, n + 1)
        zeta = rng.standard_normal(n)
        lhs = float(zeta @ reduced_dissipation_matrix(model, u[1:]) @ zeta)
        full = dissipation_form(model, u, lift_tangent(zeta))
        assert abs(lhs - full) <= 1e-12 * max(abs(lhs), abs(full), 1.0)


def test_reduced_coercivity_bound(rng):
    for _ in range(300):
        n = int(rng.integers(1, 6))
        model = random_symmetric_model(rng, n, zero_fraction=0.3)
        u = random_interior_simplex(rng, n + 1)
        zeta = rng.standard_normal(n)
        rb = reduced_coercivity(model, u[1:], zeta)
        assert rb.lhs >= rb.bound - 1e-10 * max(1.0, abs(rb.lhs))


def test_dual_map_hand_values():
    p = dual_to_primal(np.zeros(2))
    np.testing.assert_allclose(p.U, [1.0 / 3.0, 1.0 / 3.0], atol=1e-15)
    assert p.v == pytest.approx(1.0 / 3.0)
    q = dual_to_primal([np.log(2.0), 0.0])
    np.testing.assert_allclose(q.U, [0.5, 0.25], atol=1e-15)
    np.testing.assert_allclose(primal_to_dual(q), [np.log(2.0), 0.0], atol=1e-13)


def test_dual_map_roundtrip_and_range(rng):
    worst = 0.0
    for _ in range(2000):
        n = int(rng.integers(1, 6))
        w = rng.uniform(-30.0, 30.0, size=n)
        p = dual_to_primal(w)
        assert np.all(p.U > 0.0) and p.v > 0.0
        worst = max(worst, np.abs(primal_to_dual(p) - w).max())
    assert worst <= 1e-10


def test_dual_map_saturates():
    values = [dual_to_primal([w, 0.0]).U[0] for w in (0.0, 5.0, 10.0, 20.0, 30.0)]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] < 1.0 + 1e-15


def test_primal_to_dual_rejects_boundary():
    with pytest.raises(SingularAtBoundary):
        primal_to_dual(np.array([0.0, 0.5]))
    with pytest.raises(SingularAtBoundary):
        primal_to_dual(np.array([0.4, 0.6]))


def test_tangent_vector_validation():
    TangentVector(np.array([1.0, -0.5, -0.5]))
    with pytest.raises(NotTangent):
        TangentVector(np.array([1.0, 0.0, 0.0]))


def test_indefinite_witness_found_for_negative_entry(rng):
    K = np.array([[0, 1.0, -0.5], [1.0, 0, 2.0], [-0.5, 2.0, 0]])
    hit = find_indefinite_witness(K, samples=2000, rng=rng)
    assert hit is not None
    u, xi, value = hit
    assert value < 0.0
    d = xi / u
    diff = d[:, None] - d[None, :]
    direct = 0.5 * np.sum(K * np.outer(u, u) * diff**2)
    assert direct == pytest.approx(value, rel=1e-10)


def test_no_witness_for_nonnegative_rates(rng):
    model = random_symmetric_model(rng, 2, zero_fraction=0.3)
    assert find_indefinite_witness(np.array(model.K), samples=3000, rng=rng) is None
