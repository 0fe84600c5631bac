import numpy as np
import pytest

from cutslab.core import manufactured_problem
from cutslab.geometry import build_slab_geometry
from cutslab.norms import anorm_sq, lls_slope, xnorm_error
from cutslab.solver import march
from cutslab.spaces import SlabSolution, SpaceTimeSolution, build_slab_space

from conftest import make_setup, random_discrete
from oracles import oracle_bnorm_sq


def _zero_solution(setup):
    slabs = []
    for n in range(1, setup.disc.n_slabs + 1):
        geom = build_slab_geometry(setup, n)
        space = build_slab_space(geom, setup.disc.q)
        slabs.append(SlabSolution(geom, space, np.zeros(space.n_cols)))
    return SpaceTimeSolution(setup=setup, slabs=tuple(slabs))


class TestAnorm:
    def test_zero_function(self):
        setup = make_setup(n0=8, nG=2, N=1, mu=0.0, a0=0.15)
        geom = build_slab_geometry(setup, 1)
        fn = lambda x, side, deriv: np.zeros_like(np.asarray(x, dtype=float))
        assert anorm_sq(fn, geom, 0.5) == 0.0

    def test_affine_hand_value(self):
        # globally affine beta*x + alpha: broken gradient beta^2 over |0,1|,
        # average flux beta at both interfaces, no jumps, no stabilization:
        # total = beta^2 * (1 + 2 h)
        setup = make_setup(n0=8, nG=2, N=1, mu=0.0, a0=0.15)
        geom = build_slab_geometry(setup, 1)
        beta = 1.7

        def fn(x, side, deriv):
            x = np.asarray(x, dtype=float)
            return beta * x + 0.4 if deriv == "value" else np.full_like(x, beta)

        expected = beta**2 * (1.0 + 2.0 * geom.h_bg)
        assert anorm_sq(fn, geom, 0.5) == pytest.approx(expected, rel=1e-12)

    def test_moving_weight(self):
        # with motion the interface terms scale by sqrt(mu^2 + 1)
        setup = make_setup(n0=8, nG=2, N=2, mu=0.6)
        geom = build_slab_geometry(setup, 1)
        beta = 1.0

        def fn(x, side, deriv):
            x = np.asarray(x, dtype=float)
            return beta * x if deriv == "value" else np.full_like(x, beta)

        mu_bar = np.hypot(0.6, 1.0)
        expected = beta**2 * (1.0 + 2.0 * mu_bar * geom.h_bg)
        assert anorm_sq(fn, geom, 0.2) == pytest.approx(expected, rel=1e-12)

    def test_homogeneity(self, rng):
        setup = make_setup(n0=8, nG=2, N=2, mu=0.6)
        geom = build_slab_geometry(setup, 1)
        space = build_slab_space(geom, 0)
        slab = SlabSolution(geom, space, rng.standard_normal(space.n_cols))
        t = 0.23
        fn = lambda x, side, deriv: slab.eval(x, t, side=side, deriv=deriv)
        base = anorm_sq(fn, geom, t)
        scaled = anorm_sq(
            lambda x, side, deriv: 3.0 * slab.eval(x, t, side=side, deriv=deriv), geom, t
        )
        assert scaled == pytest.approx(9.0 * base, rel=1e-12)


class TestXnormError:
    def test_zero_solution_zero_data(self):
        setup = make_setup(n0=8, nG=2, N=2, mu=0.6, zero=True)
        bd = xnorm_error(_zero_solution(setup))
        assert bd.x_sq == 0.0 and bd.b_sq == 0.0

    def test_b_below_x(self, rng):
        setup = make_setup(n0=8, nG=2, N=2, mu=0.6, q=1, zero=True)
        bd = xnorm_error(random_discrete(setup, rng))
        assert bd.b_sq <= bd.x_sq
        assert bd.x_sq > 0.0

    def test_scaling(self, rng):
        setup = make_setup(n0=8, nG=2, N=2, mu=0.6, q=1, zero=True)
        sol = random_discrete(setup, rng)
        bd = xnorm_error(sol)
        bd2 = xnorm_error(sol.scaled(2.0))
        assert bd2.x_sq == pytest.approx(4.0 * bd.x_sq, rel=1e-12)
        assert bd2.moving_jump_sq == pytest.approx(4.0 * bd.moving_jump_sq, rel=1e-12)
        assert bd2.stab_sq == pytest.approx(4.0 * bd.stab_sq, rel=1e-12)

    def test_stationary_has_no_moving_term(self, rng):
        setup = make_setup(n0=8, nG=2, N=2, mu=0.0, a0=0.2, zero=True)
        bd = xnorm_error(random_discrete(setup, rng))
        assert bd.moving_jump_sq == 0.0
        assert bd.stab_sq > 0.0  # interfaces cut cells, so the jump term is live

    @pytest.mark.parametrize("q", [0, 1])
    def test_bnorm_matches_oracle(self, q, rng):
        # the event-panel quadrature must be exact for discrete functions:
        # compare with a from-scratch high-order integrator
        setup = make_setup(n0=6, nG=2, N=2, mu=0.6, a0=0.1, q=q, zero=True)
        sol = random_discrete(setup, rng)
        bd = xnorm_error(sol)
        ref = oracle_bnorm_sq(sol)
        assert bd.b_sq == pytest.approx(ref, rel=1e-11)

    def test_quadrature_refinement_consistency(self):
        # measuring a smooth error: the default quadrature must already be
        # close to a heavily refined one
        setup = make_setup(n0=8, nG=2, N=4, mu=0.6, q=1)
        u_h = march(setup.problem, setup.overlap, setup.disc)
        exact = manufactured_problem().exact
        base = xnorm_error(u_h, exact)
        fine = xnorm_error(u_h, exact, time_refine=8, space_refine=8)
        assert base.x == pytest.approx(fine.x, rel=1e-5)

    def test_error_of_discrete_solution_is_moderate(self):
        setup = make_setup(n0=16, nG=4, N=8, mu=0.6, q=1)
        u_h = march(setup.problem, setup.overlap, setup.disc)
        bd = xnorm_error(u_h, manufactured_problem().exact)
        assert 0.0 < bd.x < 1.0


class TestLlsSlope:
    def test_exact_first_order(self):
        assert lls_slope([(1, 10), (10, 100)]) == pytest.approx(1.0)

    def test_exact_second_order(self):
        assert lls_slope([(1, 2), (2, 8), (4, 32)]) == pytest.approx(2.0)

    def test_window_is_one_based_inclusive(self):
        pts = [(1, 1), (2, 4), (4, 16), (8, 300)]
        assert lls_slope(pts, window=(1, 3)) == pytest.approx(2.0)

    def test_bad_window(self):
        with pytest.raises(ValueError):
            lls_slope([(1, 1), (2, 2)], window=(2, 5))

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            lls_slope([(1, 0.0), (2, 1.0)])

    def test_single_point_rejected(self):
        with pytest.raises(ValueError):
            lls_slope([(1, 1)])
