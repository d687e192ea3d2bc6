import numpy as np
import pytest

from conftest import random_symmetric_model
from crossdiff import (
    FaceFluxes,
    Field,
    Grid1D,
    InteractionMatrix,
    apply_divergence,
    assemble_fluxes,
    init_field,
    read_snapshot,
    validate_hypotheses,
    write_snapshot,
)
from crossdiff.errors import (
    DegenerateProfile,
    GridMismatch,
    NegativeProfile,
    SimplexViolation,
)


def test_grid_basics():
    grid = Grid1D(L=2.0, m=4)
    assert grid.dx == 0.5
    np.testing.assert_allclose(grid.centers, [0.25, 0.75, 1.25, 1.75])
    with pytest.raises(GridMismatch):
        Grid1D(L=-1.0, m=4)
    with pytest.raises(GridMismatch):
        Grid1D(L=1.0, m=1)


def test_field_validation():
    Field(np.array([[0.5, 0.5], [0.2, 0.8]]))
    with pytest.raises(SimplexViolation):
        Field(np.array([[0.5, 0.6]]))
    with pytest.raises(SimplexViolation):
        Field(np.array([[-0.2, 1.2]]))


def test_init_field_constant_and_cosine():
    grid = Grid1D(1.0, 16)
    fld = init_field(grid, lambda x: np.array([0.2, 0.3, 0.5]))
    assert np.allclose(fld.values, [0.2, 0.3, 0.5])

    fld2 = init_field(
        grid,
        lambda x: np.stack([1.0 - (0.5 + 0.1 * np.cos(np.pi * x)), 0.5 + 0.1 * np.cos(np.pi * x)], axis=1),
    )
    assert fld2.values.min() > 0.0
    np.testing.assert_allclose(fld2.values.sum(axis=1), 1.0, atol=1e-15)


def test_init_field_per_species_callables():
    grid = Grid1D(1.0, 8)
    fld = init_field(grid, [lambda x: 1.0 + x, lambda x: 2.0 - x])
    np.testing.assert_allclose(fld.values.sum(axis=1), 1.0, atol=1e-15)
    np.testing.assert_allclose(fld.species(0), (1.0 + grid.centers) / 3.0)


def test_init_field_rejects_bad_profiles():
    grid = Grid1D(1.0, 8)
    with pytest.raises(NegativeProfile):
        init_field(grid, lambda x: np.stack([x - 0.5, 1.0 - x], axis=1))
    with pytest.raises(DegenerateProfile):
        init_field(grid, lambda x: np.zeros((x.size, 2)))


def test_constant_field_has_zero_fluxes():
    model, _ = validate_hypotheses([[0, 1, 2], [1, 0, 3], [2, 3, 0]])
    grid = Grid1D(1.0, 10)
    fld = init_field(grid, lambda x: np.array([0.2, 0.3, 0.5]))
    F = assemble_fluxes(model, fld, grid)
    assert np.all(F.values == 0.0)
    assert np.all(apply_divergence(F, grid) == 0.0)


def test_two_cell_flux_reduces_to_linear_diffusion():
    # With two species the pairwise flux collapses to k * du / dx exactly.
    k = 2.5
    model, _ = validate_hypotheses([[0, k], [k, 0]])
    grid = Grid1D(1.0, 2)
    a, b = 0.3, 0.5
    fld = Field(np.array([[1 - a, a], [1 - b, b]]))
    F = assemble_fluxes(model, fld, grid)
    assert F.values[1, 1] == pytest.approx(k * (b - a) / grid.dx, rel=1e-14)
    assert F.values[1, 0] == pytest.approx(-k * (b - a) / grid.dx, rel=1e-14)
    # The rate moves mass from the rich cell to the poor cell.
    rates = apply_divergence(F, grid)
    assert rates[0, 1] > 0.0 and rates[1, 1] < 0.0


def test_face_fluxes_cancel_across_species(rng):
    for _ in range(50):
        n = int(rng.integers(1, 5))
        model = random_symmetric_model(rng, n, zero_fraction=0.3)
        grid = Grid1D(2.0, 12)
        fld = Field(rng.dirichlet(np.ones(n + 1), size=12))
        F = assemble_fluxes(model, fld, grid)
        scale = max(1.0, np.abs(F.values).max())
        assert np.abs(F.values.sum(axis=1)).max() <= 1e-12 * scale


def test_face_fluxes_type_checks():
    with pytest.raises(GridMismatch):
        FaceFluxes(np.array([[1.0, -1.0], [0.0, 0.0], [0.0, 0.0]]))  # boundary not zero
    with pytest.raises(GridMismatch):
        FaceFluxes(np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]]))  # species do not cancel


def test_apply_divergence_single_face():
    grid = Grid1D(1.0, 4)
    F = np.zeros((5, 2))
    F[2] = [1.0, -1.0]
    rates = apply_divergence(FaceFluxes(F), grid)
    np.testing.assert_allclose(rates[1], [4.0, -4.0])
    np.testing.assert_allclose(rates[2], [-4.0, 4.0])
    assert np.all(rates[[0, 3]] == 0.0)


def test_divergence_telescopes(rng):
    grid = Grid1D(1.5, 20)
    F = np.zeros((21, 3))
    F[1:-1] = rng.standard_normal((19, 3))
    F[1:-1, 2] = -F[1:-1, 0] - F[1:-1, 1]
    rates = apply_divergence(FaceFluxes(F), grid)
    totals = rates.sum(axis=0) * grid.dx
    assert np.abs(totals).max() <= 1e-13 * max(1.0, np.abs(F).max())


def test_explicit_euler_conserves(rng):
    model, _ = validate_hypotheses([[0, 1, 0.5], [1, 0, 2], [0.5, 2, 0]])
    grid = Grid1D(1.0, 32)
    fld = init_field(
        grid,
        lambda x: np.stack(
            [0.3 + 0.1 * np.cos(np.pi * x), 0.35 - 0.05 * np.cos(2 * np.pi * x),
             0.35 - 0.1 * np.cos(np.pi * x) + 0.05 * np.cos(2 * np.pi * x)],
            axis=1,
        ),
    )
    tau = 1e-4
    rates = apply_divergence(assemble_fluxes(model, fld, grid), grid)
    updated = fld.values + tau * rates
    np.testing.assert_allclose(updated.sum(axis=1), 1.0, atol=1e-13)
    mass_before = fld.values.sum(axis=0) * grid.dx
    mass_after = updated.sum(axis=0) * grid.dx
    np.testing.assert_allclose(mass_after, mass_before, atol=1e-15)


def test_flux_equivariance_under_relabelling(rng):
    model = random_symmetric_model(rng, 2)
    grid = Grid1D(1.0, 10)
    vals = rng.dirichlet(np.ones(3), size=10)
    perm = [1, 0, 2]
    K_perm = InteractionMatrix(np.array(model.K)[np.ix_(perm, perm)])
    F = assemble_fluxes(model, Field(vals), grid)
    F_perm = assemble_fluxes(K_perm, Field(vals[:, perm]), grid)
    np.testing.assert_allclose(F_perm.values, F.values[:, perm], atol=1e-13)


def test_snapshot_roundtrip(tmp_path, rng):
    grid = Grid1D(1.0, 8)
    fld = Field(rng.dirichlet(np.ones(3), size=8))
    path = tmp_path / "snap.csv"
    write_snapshot(path, fld, grid)
    # The 17-digit format reproduces every double exactly.
    raw = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(raw[:, 0], grid.centers)
    np.testing.assert_array_equal(raw[:, 1:], fld.values)
    x, fld2 = read_snapshot(path)
    np.testing.assert_array_equal(x, grid.centers)
    np.testing.assert_allclose(fld2.values, fld.values, rtol=0, atol=1e-15)
    header = path.read_text().splitlines()[0]
    assert header == "x,u_0,u_1,u_2"
