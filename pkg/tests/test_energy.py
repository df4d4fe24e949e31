import numpy as np
import pytest

from symmin import (EnergyError, GridFunction, constraint_gradient,
                    critical_set_measure, cutoff, el_residual, energy,
                    energy_gradient, estimate_lambda, feasible_start,
                    make_domain, make_test_bank, polarize, preset,
                    sample_polarizers, schwarz_symmetrize)
from symmin.energy import TestFunction
from conftest import random_interior_function, smooth_bump


class TestCutoff:
    def test_plateau(self):
        assert cutoff(0.5, 1) == 1.0
        assert cutoff(-0.7, 1) == 1.0
        assert cutoff(1.0, 1) == 1.0

    def test_vanishes_outside(self):
        assert cutoff(3.0, 1) == 0.0
        assert cutoff(-2.0, 1) == 0.0
        assert cutoff(5.0, 2) == 0.0

    def test_scaling_with_k(self):
        assert cutoff(2.0, 2) == 1.0
        assert cutoff(4.5, 2) == 0.0
        assert cutoff(2.5, 1) == 0.0

    def test_derivative_bound_dense_sampling(self):
        s = np.linspace(-3, 3, 200_001)
        H = cutoff(s, 1)
        dH = np.diff(H) / np.diff(s)
        assert np.abs(dH).max() <= 2.0
        # the quintic transition actually peaks at 15/8
        assert np.abs(dH).max() == pytest.approx(15 / 8, abs=1e-3)

    def test_k_below_one_rejected(self):
        with pytest.raises(EnergyError):
            cutoff(0.5, 0.5)


class TestEnergy:
    def test_zero_function_gives_zero_breakdown(self, ball2d):
        m = preset("plaplace")
        bd = energy(GridFunction.zeros(ball2d), m)
        assert bd.J == bd.Fterm == bd.E == bd.W == 0.0

    def test_feasible_start_has_unit_constraint(self):
        m = preset("plaplace")
        dom = m.default_domain()
        bd = energy(feasible_start(m, 1.0, dom), m)
        assert abs(bd.W - 1.0) <= 1e-10

    def test_p_homogeneity_of_J(self, ball2d):
        m = preset("plaplace")
        u = random_interior_function(ball2d, 3)
        cu = GridFunction(ball2d, 2.0 * u.values, nonneg=True)
        assert energy(cu, m).J == pytest.approx(2 ** m.p * energy(u, m).J, rel=1e-12)

    def test_E_equals_J_minus_F(self, ball2d):
        m = preset("plaplace")
        bd = energy(random_interior_function(ball2d, 5), m)
        assert bd.E == bd.J - bd.Fterm

    def test_polarization_keeps_J_for_tp_and_raises_F(self, ball2d):
        m = preset("plaplace")
        u = random_interior_function(ball2d, 7)
        bd0 = energy(u, m)
        for P in sample_polarizers(ball2d, 17, 10).items:
            bd = energy(polarize(u, P), m)
            assert bd.J <= bd0.J + 1e-10 * abs(bd0.J)
            assert bd.Fterm >= bd0.Fterm - 1e-12 * max(abs(bd0.Fterm), 1.0)

    def test_rearrangements_never_raise_E_on_feasible_input(self, ball2d):
        from symmin import project_constraint
        m = preset("plaplace")
        for seed in range(5):
            u = project_constraint(random_interior_function(ball2d, 60 + seed), m)
            bd0 = energy(u, m)
            tol = 1e-8 * (abs(bd0.J) + abs(bd0.Fterm))
            assert energy(schwarz_symmetrize(u), m).E <= bd0.E + tol
            for P in sample_polarizers(ball2d, 70 + seed, 5).items:
                assert energy(polarize(u, P), m).E <= bd0.E + tol


CENTRAL_STEP = 1e-6


def _central_fd(u, model, cells):
    out = {}
    for ij in cells:
        vp = u.values.copy()
        vm = u.values.copy()
        vp[ij] += CENTRAL_STEP
        vm[ij] -= CENTRAL_STEP
        Ep = energy(GridFunction(u.domain, vp), model).E
        Em = energy(GridFunction(u.domain, vm), model).E
        out[ij] = (Ep - Em) / (2 * CENTRAL_STEP)
    return out


class TestEnergyGradient:
    def test_zero_function_zero_gradient_for_J(self, ball2d):
        m = preset("eigen3d")
        m2 = preset("plaplace")
        for model in (m2,):
            g = energy_gradient(GridFunction.zeros(ball2d), model)
            assert np.all(g.values == 0.0)

    @pytest.mark.parametrize("name", ["plaplace", "quasilinear"])
    @pytest.mark.parametrize("h", [0.25, 0.125])
    def test_matches_central_differences(self, name, h):
        model = preset(name)
        dom = make_domain(2, "ball", 1.0 + h, h, radius=1.0)
        u = random_interior_function(dom, 11)
        grad = energy_gradient(u, model).values
        cells = [tuple(ij) for ij in np.argwhere(dom.mask)[::7]]
        fd = _central_fd(u, model, cells)
        sup = np.abs(grad).max()
        worst = max(abs(fd[ij] - grad[ij]) for ij in cells)
        assert worst / sup <= 1e-5

    def test_masked_cells_have_zero_gradient(self, small_ball):
        m = preset("plaplace")
        u = random_interior_function(small_ball, 13)
        g = energy_gradient(u, m)
        assert np.all(g.values[~small_ball.mask] == 0.0)

    def test_constraint_gradient_is_scaled_g(self, ball2d):
        m = preset("plaplace")
        u = random_interior_function(ball2d, 17)
        cg = constraint_gradient(u, m).values
        expect = ball2d.h ** 2 * np.asarray(m.constraint.g(u.values))
        expect[~ball2d.mask] = 0.0
        assert np.allclose(cg, expect, rtol=1e-14)


class TestELResidual:
    def test_zero_function_zero_residuals(self, ball2d):
        m = preset("eigen3d")
        m = preset("plaplace")
        z = GridFunction.zeros(ball2d)
        v = smooth_bump(ball2d, (0.1, 0.0), 0.4)
        tests = [TestFunction.realize(v, 1.0, z)]
        rep = el_residual(z, 0.0, m, tests)
        assert rep.residuals == (0.0,)

    def test_duplicate_path_oracle(self, ball2d):
        # A(phi) - lam B(phi) computed by quadrature equals the inner product
        # with the assembled gradient fields
        m = preset("quasilinear")
        u = random_interior_function(ball2d, 19)
        lam = 0.37
        bank = make_test_bank(u, m, count=5, seed=23)
        rep = el_residual(u, lam, m, bank)
        gE = energy_gradient(u, m).values
        gW = constraint_gradient(u, m).values
        for tf, r in zip(bank, rep.residuals):
            inner = float(np.sum((gE - lam * gW) * tf.phi.values))
            assert abs(inner - r) <= 1e-10 * max(abs(r), 1.0)

    def test_linear_in_lambda(self, ball2d):
        m = preset("plaplace")
        u = random_interior_function(ball2d, 29)
        bank = make_test_bank(u, m, count=3, seed=31)
        r0 = el_residual(u, 0.0, m, bank)
        r1 = el_residual(u, 1.0, m, bank)
        r2 = el_residual(u, 2.0, m, bank)
        for a, b, c in zip(r0.residuals, r1.residuals, r2.residuals):
            assert c - b == pytest.approx(b - a, rel=1e-9, abs=1e-12)

    def test_empty_bank_rejected(self, ball2d):
        m = preset("plaplace")
        with pytest.raises(EnergyError):
            el_residual(random_interior_function(ball2d, 1), 0.0, m, [])


class TestEstimateLambda:
    def test_single_test_exact_ratio(self, ball2d):
        m = preset("plaplace")
        u = random_interior_function(ball2d, 37)
        bank = make_test_bank(u, m, count=1, seed=41)
        lam, diag = estimate_lambda(u, m, bank)
        assert diag["used"] == 1
        assert lam == pytest.approx(diag["per_test_lambda"][0], rel=1e-15)

    def test_euler_identity_oracle(self, ball2d):
        # with phi = u, exact discrete homogeneity gives
        # A(u) = p J - sigma Fterm and B(u) = p W
        m = preset("plaplace")
        u = random_interior_function(ball2d, 43)
        bd = energy(u, m)
        tf = TestFunction.realize(u, max(1.0, float(u.values.max())), u)
        from symmin.energy import _pairing
        A, B = _pairing(u, m, tf.phi)
        p, sigma = 1.5, 2.0
        assert A == pytest.approx(p * bd.J - sigma * bd.Fterm, rel=1e-10)
        assert B == pytest.approx(p * bd.W, rel=1e-10)

    def test_degenerate_denominators_rejected(self, ball2d):
        m = preset("plaplace")
        u = random_interior_function(ball2d, 47)
        # a test function supported only where u = 0 gives B below the guard
        far = GridFunction.zeros(ball2d)
        tf = TestFunction.realize(far, 1.0, u)
        with pytest.raises(EnergyError):
            estimate_lambda(u, m, [tf])


class TestCriticalSet:
    def test_strictly_decreasing_radial_has_empty_set(self, ball2d):
        u = schwarz_symmetrize(random_interior_function(ball2d, 53))
        vals = np.sort(np.unique(u.values[ball2d.mask]))
        min_gap = np.diff(vals).min()
        measure = critical_set_measure(u, eps_grad=0.5 * min_gap / ball2d.h,
                                       eps_val=0.0)
        assert measure == 0.0

    def test_builtin_plateau_measured(self):
        # a plateau over a full radial annulus: interior annulus cells have
        # all neighbors at the same value, so |Du*| = 0 there
        dom = make_domain(2, "ball", 18 / 17, 1 / 17, radius=1.0)
        r = np.sqrt(dom.radius_sq)
        vals = np.where(dom.mask, np.exp(-2.0 * r ** 2), 0.0)
        band = dom.mask & (r >= 0.35) & (r <= 0.65)
        vals[band] = vals[band].min()
        u = GridFunction(dom, vals, nonneg=True)
        u = schwarz_symmetrize(u)
        measure = critical_set_measure(u, eps_grad=1e-9 / dom.h, eps_val=1e-6)
        assert measure > 0
        assert measure <= np.count_nonzero(band) * dom.h ** 2
