import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphgas import PhysParams, build_mass_grid, lagrangian_radius_of_mass, radius_from_volume


class TestPhysParams:
    def test_defaults_admissible(self):
        p = PhysParams()
        assert p.beta == 2 * p.mu + p.lam > 0
        assert p.gamma == 1 + p.R / p.cv

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"mu": 0.0},
            {"mu": -1.0},
            {"lam": -1.1, "n": 2},  # 2mu + n lam = -0.2
            {"R": 0.0},
            {"cv": -2.0},
            {"kappa": 0.0},
            {"n": 1},
        ],
    )
    def test_inadmissible_rejected(self, kwargs):
        with pytest.raises(ValueError):
            PhysParams(**kwargs)

    def test_negative_lambda_admissible_when_bulk_positive(self):
        p = PhysParams(mu=1.0, lam=-0.9, n=2)
        assert p.beta > 0


class TestBuildMassGrid:
    def test_uniform_partition(self):
        g = build_mass_grid(1.0, 4)
        assert np.array_equal(g.x_edges, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_uniform_widths(self):
        g = build_mass_grid(2.0, 4)
        assert np.allclose(g.cell_widths, 0.5)
        assert g.x_max == 2.0

    def test_geometric_ratio(self):
        g = build_mass_grid(1.0, 4, grading=1.1)
        # hand oracle: widths w0 * 1.1^i normalised by the geometric series
        w0 = 1.0 / sum(1.1**i for i in range(4))
        expect = w0 * 1.1 ** np.arange(4)
        assert np.allclose(g.cell_widths, expect, rtol=1e-14)
        assert g.x_edges[-1] == 1.0

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            build_mass_grid(0.0, 10)
        with pytest.raises(ValueError):
            build_mass_grid(-1.0, 10)
        with pytest.raises(ValueError):
            build_mass_grid(1.0, 3)
        with pytest.raises(ValueError):
            build_mass_grid(1.0, 10, grading=1.5)
        with pytest.raises(ValueError):
            build_mass_grid(1.0, 10, grading="log")

    @given(
        x_max=st.floats(0.5, 100),
        n_cells=st.integers(4, 200),
        ratio=st.floats(1.0, 1.2),
    )
    @settings(max_examples=50, deadline=None)
    def test_partition_properties(self, x_max, n_cells, ratio):
        g = build_mass_grid(x_max, n_cells, grading=ratio)
        assert g.n_cells == n_cells
        assert g.x_edges[0] == 0.0
        assert np.all(g.cell_widths > 0)
        assert np.isclose(g.cell_widths.sum(), x_max, rtol=1e-12)


class TestRadiusFromVolume:
    def test_constant_volume_n3(self):
        g = build_mass_grid(7.0, 70)
        r = radius_from_volume(g, np.ones(70), 3)
        assert r[-1] == pytest.approx(22.0 ** (1 / 3), rel=1e-14)

    def test_inner_edge_is_one(self, grid):
        r = radius_from_volume(grid, np.full(grid.n_cells, 0.7), 2)
        assert r[0] == 1.0

    def test_constant_volume_n2(self):
        g = build_mass_grid(1.0, 10)
        r = radius_from_volume(g, np.full(10, 2.0), 2)
        assert r[-1] == pytest.approx(np.sqrt(5.0), rel=1e-14)

    def test_rejects_nonpositive_volume(self, grid):
        v = np.ones(grid.n_cells)
        v[3] = 0.0
        with pytest.raises(ValueError):
            radius_from_volume(grid, v, 2)

    def test_monotone_and_above_one(self, grid):
        rng = np.random.default_rng(7)
        for _ in range(20):
            v = rng.uniform(0.2, 3.0, grid.n_cells)
            r = radius_from_volume(grid, v, 3)
            assert np.all(np.diff(r) > 0)
            assert np.all(r >= 1.0)

    def test_doubling_volume_doubles_rn_minus_one(self, grid):
        """r^n - 1 is linear in v; the doubled accumulator is exact, the
        round trip through the n-th root costs only rounding."""
        rng = np.random.default_rng(3)
        v = rng.uniform(0.5, 2.0, grid.n_cells)
        for n in (2, 3):
            a = radius_from_volume(grid, v, n) ** n - 1.0
            b = radius_from_volume(grid, 2.0 * v, n) ** n - 1.0
            assert np.allclose(2.0 * a, b, rtol=1e-13, atol=1e-13)


class TestLagrangianRadiusOfMass:
    def test_unit_density_closed_form(self):
        for x in (0.3, 1.0, 7.5):
            r0 = lagrangian_radius_of_mass(lambda y: 1.0, x, 2)
            assert r0 == pytest.approx(np.sqrt(1 + 2 * x), abs=1e-10)

    def test_zero_mass(self):
        assert lagrangian_radius_of_mass(lambda y: 1.0, 0.0, 3) == 1.0

    def test_inverse_radius_density(self):
        # integral_1^r0 y * (1/y) dy = r0 - 1 = 3  ->  r0 = 4
        r0 = lagrangian_radius_of_mass(lambda y: 1.0 / y, 3.0, 2)
        assert r0 == pytest.approx(4.0, abs=1e-10)

    def test_nonpositive_density_rejected(self):
        with pytest.raises(ValueError):
            lagrangian_radius_of_mass(lambda y: -1.0, 2.0, 2, rho_min=0.5)

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            lagrangian_radius_of_mass(lambda y: 1.0, -0.5, 2)

    def test_linear_density_closed_form(self):
        # rho0(y) = y, n = 2: integral_1^r0 y^2 dy = (r0^3 - 1)/3 = x
        for x in (0.5, 2.0, 9.0):
            r0 = lagrangian_radius_of_mass(lambda y: y, x, 2, rho_min=0.9)
            assert r0 == pytest.approx((1 + 3 * x) ** (1 / 3), abs=1e-10)

    def test_consistency_with_radius_from_volume(self):
        """The mass->radius map through a smooth density agrees with the
        quadrature radius of the corresponding volume field, and the gap
        shrinks at second order under grid refinement."""
        n = 2
        rho0 = lambda y: y  # r(x) = (1+3x)^{1/3}, v(x) = (1+3x)^{-1/3}
        gaps = []
        for n_cells in (25, 50, 100):
            g = build_mass_grid(5.0, n_cells)
            v = (1.0 + 3.0 * g.cell_centers) ** (-1.0 / 3.0)
            r_edges = radius_from_volume(g, v, n)
            r_exact = np.array(
                [lagrangian_radius_of_mass(rho0, float(x), n, rho_min=0.9)
                 for x in g.x_edges[1:]]
            )
            gaps.append(np.max(np.abs(r_edges[1:] - r_exact)))
        assert gaps[0] / gaps[1] > 3.0
        assert gaps[1] / gaps[2] > 3.0
