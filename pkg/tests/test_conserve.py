import numpy as np
import pytest

import fpl

from conftest import random_field


def conservative_field(cons, grid, rng):
    return cons.project(random_field(grid, rng))


class TestBuild:
    def test_mass_row_constant(self, cons8, grid8):
        assert np.all(cons8.a_rows[0] == grid8.cell_volume)

    def test_gram_mass_entry_closed_form(self, cons8, grid8):
        # direct-summation oracle: sum_n (dv^3)^2 = N^3 dv^6
        expected = grid8.n_modes**3 * grid8.cell_volume**2
        assert cons8.gram[0, 0] == pytest.approx(expected, rel=1e-13)

    def test_gram_odd_rows_orthogonal(self, cons8):
        g = cons8.gram
        scale = np.abs(g).max()
        for j in (1, 2, 3):
            assert abs(g[0, j]) <= 1e-12 * scale
            assert abs(g[4, j]) <= 1e-12 * scale
        # {1, |v|^2} block is genuinely coupled
        assert abs(g[0, 4]) > 1e-6 * scale

    def test_cholesky_residual(self, cons8):
        gram = cons8.gram
        L = cons8.gram_factor
        resid = np.abs(gram - L @ L.T).max()
        assert resid <= 1e-12 * np.abs(gram).max()


class TestProject:
    def test_defining_property(self, cons8, grid8, rng):
        x = random_field(grid8, rng)
        out = cons8.project(x)
        resid = np.abs(cons8.moments(out.values))
        row_norms = np.sqrt(np.sum(cons8.a_rows**2, axis=1))
        xnorm = np.sqrt(np.sum(x.values**2))
        assert np.all(resid <= 1e-12 * row_norms * xnorm)

    def test_fixed_point_on_conservative_input(self, cons8, grid8, rng):
        y = conservative_field(cons8, grid8, rng)
        out = cons8.project(y)
        assert np.abs(out.values - y.values).max() <= 1e-14 * np.abs(y.values).max()

    def test_invariant_field_annihilated(self, cons8, grid8):
        q = fpl.VelocityField(grid8, grid8.v_sq)
        out = cons8.project(q)
        resid = np.abs(cons8.moments(out.values))
        row_norms = np.sqrt(np.sum(cons8.a_rows**2, axis=1))
        qn = np.sqrt(np.sum(q.values**2))
        assert np.all(resid <= 1e-12 * row_norms * qn)

    def test_idempotent(self, cons8, grid8, rng):
        x = random_field(grid8, rng)
        once = cons8.project(x)
        twice = cons8.project(once)
        assert np.abs(twice.values - once.values).max() <= 1e-13 * np.abs(
            once.values
        ).max()

    def test_self_adjoint(self, cons8, grid8, rng):
        x = random_field(grid8, rng)
        y = random_field(grid8, rng)
        lhs = np.sum(cons8.project(x).values * y.values)
        rhs = np.sum(x.values * cons8.project(y).values)
        scale = np.sqrt(np.sum(x.values**2) * np.sum(y.values**2))
        assert abs(lhs - rhs) <= 1e-12 * scale

    def test_l2_optimal_among_conservative(self, cons8, grid8, rng):
        q = random_field(grid8, rng)
        best = q.values - cons8.project(q).values
        best_norm = np.sqrt(np.sum(best**2))
        for _ in range(100):
            y = conservative_field(cons8, grid8, rng)
            dist = np.sqrt(np.sum((q.values - y.values) ** 2))
            assert best_norm <= dist + 1e-12


class TestGamma:
    def test_conservative_input_zero_gamma(self, cons8, grid8, rng):
        y = conservative_field(cons8, grid8, rng)
        gammas, out = cons8.gamma_correction(y)
        ynorm = np.sqrt(np.sum(y.values**2))
        assert np.abs(gammas).max() <= 1e-13 * ynorm
        assert np.abs(out.values - y.values).max() <= 1e-13 * np.abs(y.values).max()

    def test_matches_projection(self, cons8, grid8, rng):
        q = random_field(grid8, rng)
        _, corrected = cons8.gamma_correction(q)
        proj = cons8.project(q)
        assert np.abs(corrected.values - proj.values).max() <= 1e-12 * np.abs(
            proj.values
        ).max()

    def test_mass_defect_reduced_system(self, cons8, grid8):
        # constant field: momentum multipliers vanish; (gamma_1, gamma_5) solve
        # the 2x2 {1, |v|^2} system assembled here by direct summation
        c = 0.8
        q = fpl.VelocityField(grid8, np.full((8, 8, 8), c))
        gammas, _ = cons8.gamma_correction(q)
        assert np.abs(gammas[1:4]).max() <= 1e-13 * abs(gammas[0])

        w = grid8.cell_volume
        vsq = grid8.v_sq.ravel()
        s0 = w * vsq.size
        s2 = w * vsq.sum()
        s4 = w * np.sum(vsq**2)
        G = np.array([[s0, s2], [s2, s4]])
        M = np.array([c * s0, c * s2])
        gam = 2.0 * np.linalg.solve(G, M)
        assert gammas[0] == pytest.approx(gam[0], rel=1e-12)
        assert gammas[4] == pytest.approx(gam[1], rel=1e-12)
        # mass/energy coupling makes both multipliers nonzero
        assert abs(gammas[0]) > 0 and abs(gammas[4]) > 0


class TestCorrectionNorm:
    def test_zero_for_conservative(self, cons8, grid8, rng):
        y = conservative_field(cons8, grid8, rng)
        ynorm = np.sqrt(np.sum(y.values**2) * grid8.cell_volume)
        assert cons8.correction_norm(y) <= 1e-13 * ynorm

    def test_absolute_homogeneity(self, cons8, grid8, rng):
        q = random_field(grid8, rng)
        base = cons8.correction_norm(q)
        scaled = cons8.correction_norm(fpl.VelocityField(grid8, -3.0 * q.values))
        assert scaled == pytest.approx(3.0 * base, rel=1e-12)
