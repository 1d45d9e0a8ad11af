"""Grid and density-field tests."""
import numpy as np
import pytest

import elo_kinetics as ek
from conftest import gaussian_blob


def test_grid_geometry():
    g = ek.Grid2D(0.0, 1.0, -1.0, 2.0, 10, 30)
    assert g.h_rho == pytest.approx(0.1)
    assert g.h_R == pytest.approx(0.1)
    assert g.rho_centers[0] == pytest.approx(0.05)
    assert len(g.rho_faces) == 11 and len(g.R_faces) == 31
    assert g.cell_area == pytest.approx(0.01)


def test_grid_validation():
    with pytest.raises(ValueError):
        ek.Grid2D(1.0, 0.0, 0.0, 1.0, 10, 10)
    with pytest.raises(ValueError):
        ek.Grid2D(0.0, 1.0, 0.0, 1.0, 0, 10)


def test_density_shape_and_finiteness():
    g = ek.Grid2D.unit_square(4)
    with pytest.raises(ValueError):
        ek.DensityField(g, np.zeros((4, 5)))
    with pytest.raises(ValueError):
        ek.DensityField(g, np.full((4, 4), np.nan))


def test_mass_trivials():
    g = ek.Grid2D.unit_square(20)
    assert ek.DensityField.uniform(g).mass() == pytest.approx(1.0, abs=1e-14)
    assert ek.DensityField.point_mass(g, 0.3, 0.7).mass() == pytest.approx(1.0, abs=1e-14)
    f = ek.DensityField.uniform(g)
    assert f.copy_with(2.0 * f.values).mass() == pytest.approx(2.0, abs=1e-14)


def test_center_of_mass_trivials():
    g = ek.Grid2D.unit_square(2)  # cell centers at 0.25 and 0.75
    assert ek.DensityField.uniform(g).center_of_mass() == pytest.approx((0.5, 0.5))
    pm = ek.DensityField.point_mass(g, 0.25, 0.75)
    assert pm.center_of_mass() == pytest.approx((0.25, 0.75))
    mix = pm.copy_with(0.5 * pm.values
                       + 0.5 * ek.DensityField.point_mass(g, 0.75, 0.25).values)
    assert mix.center_of_mass() == pytest.approx((0.5, 0.5))
    with pytest.raises(ValueError):
        pm.copy_with(np.zeros_like(pm.values)).center_of_mass()


def test_weighted_integral_trivials():
    g = ek.Grid2D.unit_square(30)
    f = gaussian_blob(g, (0.4, 0.6), 0.2)
    assert f.weighted_integral(lambda r, R: np.ones_like(r)) == pytest.approx(f.mass())
    w0 = ek.LyapunovWeight(0.0, 1.0)
    assert f.weighted_integral(lambda r, R: ek.phi_beta(r, R, w0)) == \
        pytest.approx(f.mass(), abs=1e-14)
    u = ek.DensityField.uniform(g)
    assert u.weighted_integral(lambda r, R: r) == pytest.approx(0.5, abs=1e-14)


def test_weighted_integral_linearity():
    g = ek.Grid2D.unit_square(15)
    rng = np.random.default_rng(3)
    f = ek.DensityField(g, rng.random((15, 15)))
    h = ek.DensityField(g, rng.random((15, 15)))
    w = lambda r, R: np.cos(r) + R
    combo = f.copy_with(2.0 * f.values + 3.0 * h.values)
    assert combo.weighted_integral(w) == pytest.approx(
        2.0 * f.weighted_integral(w) + 3.0 * h.weighted_integral(w), rel=1e-12)


def test_marginals_trivials():
    g = ek.Grid2D(0.0, 1.0, 0.0, 2.0, 10, 20)
    u = ek.DensityField.uniform(g)
    mr, mR = u.marginals()
    assert np.allclose(mr, 1.0) and np.allclose(mR, 0.5)
    # product density -> marginals proportional to the factors
    gr = np.exp(-g.rho_centers)
    qR = 1.0 + g.R_centers
    f = ek.DensityField(g, np.outer(gr, qR))
    mr, mR = f.marginals()
    assert np.allclose(mr / mr[0], gr / gr[0])
    assert np.allclose(mR / mR[0], qR / qR[0])
    # both marginal sums recover the mass
    assert mr.sum() * g.h_rho == pytest.approx(f.mass(), rel=1e-13)
    assert mR.sum() * g.h_R == pytest.approx(f.mass(), rel=1e-13)


def test_marginals_commute_with_cell_shift():
    g = ek.Grid2D.unit_square(12)
    f = gaussian_blob(g, (0.5, 0.5), 0.1)
    mr, _ = f.marginals()
    mr_shifted, _ = f.copy_with(np.roll(f.values, 2, axis=0)).marginals()
    assert np.array_equal(np.roll(mr, 2), mr_shifted)


def test_normalized():
    g = ek.Grid2D.unit_square(8)
    f = ek.DensityField.uniform(g, mass=3.0)
    assert f.normalized().mass() == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        f.copy_with(np.zeros_like(f.values)).normalized()


def test_csv_roundtrip(tmp_path):
    g = ek.Grid2D(0.0, 1.0, -1.0, 2.0, 5, 7)
    rng = np.random.default_rng(11)
    f = ek.DensityField(g, rng.random((5, 7)))
    path = tmp_path / "field.csv"
    f.to_csv(path)
    assert path.read_text().splitlines()[0] == "rho,R,f"
    back = ek.DensityField.from_csv(path)
    assert back.grid.n_rho == 5 and back.grid.n_R == 7
    assert back.grid.rho_min == pytest.approx(0.0, abs=1e-12)
    assert back.grid.R_max == pytest.approx(2.0, abs=1e-12)
    assert np.array_equal(back.values, f.values)  # 17 sig digits roundtrips exactly
