import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdg.dg import DGSolution, InitialFunction, ProblemData, solve
from fracdg.errors import DomainError
from fracdg.fem import assemble, build_interval_mesh, interpolate
from fracdg.frac_ops import ScalarStepFunction, TimeGrid, hgamma_seminorm
from fracdg.metrics import (
    ErrorReport,
    ErrorRow,
    difference_slabs,
    e1_l2l2,
    e2_fractional,
    frac_derivative_energy,
    interpolate_left,
    interpolate_right,
    nodal_error,
    observed_orders,
)
from fracdg.reference import FineReference, SpectralReference


def sine(x):
    return np.sin(np.pi * x)


def const_in_time(space, grid, vec, alpha=0.4):
    return DGSolution(alpha, space, grid, np.tile(vec, (grid.J, 1)), vec)


def brute_step_energy(values, nodes, gamma):
    r"""\int_0^T |D^gamma e|^2 for a scalar step function, by tanh-sinh quadrature per slab.

    On each slab ``t = lo + (hi - lo) v^p`` with ``p = 1/(1 - 2 gamma)``
    removes the endpoint singularity of the squared integrand.
    """
    jumps = np.diff(np.concatenate([[0.0], values]))
    p = 1.0 / (1.0 - 2.0 * gamma)
    total = mpmath.mpf(0)
    with mpmath.workdps(25):
        g = mpmath.gamma(1 - gamma)
        for m in range(len(values)):
            lo, hi = mpmath.mpf(nodes[m]), mpmath.mpf(nodes[m + 1])

            def integrand(v, m=m, lo=lo, hi=hi):
                s = (hi - lo) * v**p
                d = jumps[m] * s ** (-gamma) + sum(
                    jumps[i] * (lo + s - nodes[i]) ** (-gamma) for i in range(m))
                return d * d * p * (hi - lo) * v ** (p - 1)

            total += mpmath.quad(integrand, [0, 1])
    return float(total / g**2)


def brute_space_time_l2(U, ref: SpectralReference, nt=10, nx=8):
    """Point-sampled L2L2 error with Gauss rules per slab and per cell."""
    xg, wg = np.polynomial.legendre.leggauss(nx)
    tg, tw = np.polynomial.legendre.leggauss(nt)
    verts = U.space.mesh.vertices[:, 0]
    cells = np.sort(verts)
    x = np.concatenate([0.5 * (a + b) + 0.5 * (b - a) * xg for a, b in zip(cells[:-1], cells[1:])])
    wx = np.concatenate([0.5 * (b - a) * wg for a, b in zip(cells[:-1], cells[1:])])
    total = 0.0
    for j in range(1, U.J + 1):
        a, b = U.grid.slab(j)
        uh = U.space.evaluate(U.slabs[j - 1], x[:, None])
        for s, w in zip(0.5 * (a + b) + 0.5 * (b - a) * tg, 0.5 * (b - a) * tw):
            total += w * np.sum(wx * (ref(x, s) - uh) ** 2)
    return math.sqrt(total)


# {{{ E1 and nodal errors


class TestE1:
    def test_identical_is_zero(self):
        space = assemble(build_interval_mesh(16))
        U = solve(ProblemData(0.4, 1.0, InitialFunction(sine)), space, TimeGrid.uniform(1.0, 8))
        assert e1_l2l2(U, U) == 0.0
        assert e1_l2l2(U, FineReference(U, 4, 3)) == 0.0

    def test_sine_against_zero(self):
        coarse = assemble(build_interval_mesh(64))
        fine = assemble(build_interval_mesh(128))
        U = const_in_time(coarse, TimeGrid.uniform(1.0, 4), interpolate(coarse, sine))
        Z = DGSolution(0.4, fine, TimeGrid.uniform(1.0, 16), np.zeros((16, fine.N)), np.zeros(fine.N))
        assert e1_l2l2(U, Z) == pytest.approx(1 / math.sqrt(2), rel=1e-3)
        assert difference_slabs(U, Z).shape == (16, fine.N)

    def test_triangle_inequality_and_symmetry(self, rng):
        space = assemble(build_interval_mesh(8))
        grid = TimeGrid.uniform(1.0, 4)
        A, B, C = (DGSolution(0.4, space, grid, rng.standard_normal((4, space.N)), np.zeros(space.N))
                   for _ in range(3))
        assert e1_l2l2(A, B) == pytest.approx(e1_l2l2(B, A), rel=1e-12)
        assert e1_l2l2(A, C) <= e1_l2l2(A, B) + e1_l2l2(B, C) + 1e-14

    def test_not_nested(self):
        space = assemble(build_interval_mesh(8))
        U = const_in_time(space, TimeGrid.uniform(1.0, 4), np.ones(space.N))
        V = const_in_time(space, TimeGrid.uniform(1.0, 6), np.ones(space.N))
        with pytest.raises(DomainError):
            e1_l2l2(U, V)

    def test_spectral_route(self):
        space = assemble(build_interval_mesh(8))
        U = solve(ProblemData(0.4, 1.0, InitialFunction(sine)), space, TimeGrid.uniform(1.0, 4))
        ref = SpectralReference.from_function(0.4, 1.0, lambda x: sine(x) + 0.3 * np.sin(3 * np.pi * x),
                                              K=4)
        # the first slab carries the t^alpha layer of every mode
        assert e1_l2l2(U, ref) == pytest.approx(brute_space_time_l2(U, ref, nt=1000), rel=1e-5)

    def test_spectral_route_smooth_in_time(self):
        space = assemble(build_interval_mesh(8))
        ref = SpectralReference.from_function(0.9, 1.0, sine, K=2)
        U = const_in_time(space, TimeGrid.uniform(1.0, 4), 0.1 * interpolate(space, sine))
        assert e1_l2l2(U, ref) == pytest.approx(brute_space_time_l2(U, ref, nt=600), rel=1e-8)


class TestNodal:
    def test_spectral_matches_point_sampling(self):
        space = assemble(build_interval_mesh(16))
        U = solve(ProblemData(0.4, 1.0, InitialFunction(sine)), space, TimeGrid.uniform(1.0, 8))
        ref = SpectralReference.from_function(0.4, 1.0, sine, K=2)
        xg, wg = np.polynomial.legendre.leggauss(8)
        x = np.concatenate([(i + 0.5 + 0.5 * xg) / 16 for i in range(16)])
        w = np.tile(wg / 32, 16)
        manual = max(math.sqrt(np.sum(w * (ref(x, t) - space.evaluate(U.slabs[j], x[:, None])) ** 2))
                     for j, t in enumerate(U.grid.nodes[1:]))
        assert nodal_error(U, ref) == pytest.approx(manual, rel=1e-8)

    def test_fine_reads_slab_ending_at_node(self):
        space = assemble(build_interval_mesh(4))
        fine_grid = TimeGrid.uniform(1.0, 4)
        slabs = np.outer([1.0, 2.0, 3.0, 4.0], np.ones(space.N))
        R = DGSolution(0.4, space, fine_grid, slabs, np.zeros(space.N))
        U = const_in_time(space, TimeGrid.uniform(1.0, 2), np.zeros(space.N))
        # nodes 1/2 and 1 read fine slabs 2 and 4; the L2 norm of the constant
        # nodal vector c is c times that of the interior hat sum
        unit = space.l2_norm(np.ones(space.N))
        assert nodal_error(U, R) == pytest.approx(4.0 * unit, rel=1e-14)


# }}}

# {{{ E2


class TestE2:
    @pytest.mark.parametrize("gamma", [0.05, 0.3, 0.45])
    def test_uniform_against_brute_force(self, gamma, rng):
        grid = TimeGrid.uniform(1.0, 8)
        values = rng.standard_normal(8)
        oracle = brute_step_energy(values, grid.nodes, gamma)
        A = np.array([[1.0]])
        for method in ("fft", "direct"):
            got = frac_derivative_energy(values[:, None], grid, gamma, A, method=method)
            assert got == pytest.approx(oracle, rel=1e-8)

    @pytest.mark.parametrize("gamma", [0.2, 0.45])
    def test_graded_against_brute_force(self, gamma, rng):
        grid = TimeGrid(np.linspace(0.0, 1.0, 9) ** 3)
        values = rng.standard_normal(8)
        got = frac_derivative_energy(values[:, None], grid, gamma, np.array([[1.0]]))
        assert got == pytest.approx(brute_step_energy(values, grid.nodes, gamma), rel=1e-6)

    def test_fft_matches_direct_large(self, rng):
        grid = TimeGrid.uniform(1.0, 300)
        E = np.cumsum(rng.standard_normal((300, 5)), axis=0)
        A = np.diag([1.0, 2.0, 3.0, 4.0, 5.0])
        a = frac_derivative_energy(E, grid, 0.3, A, method="fft")
        b = frac_derivative_energy(E, grid, 0.3, A, method="direct")
        assert a == pytest.approx(b, rel=1e-10)

    def test_single_step_closed_form(self):
        # e = 1 on (0, T): int_0^T t^(-2 gamma) / Gamma(1-gamma)^2
        g = 0.3
        got = frac_derivative_energy(np.ones((1, 1)), TimeGrid.uniform(2.0, 1), g, np.eye(1))
        assert got == pytest.approx(2.0 ** (1 - 2 * g) / (1 - 2 * g) / math.gamma(1 - g) ** 2, rel=1e-14)

    @given(c=st.floats(-1e3, 1e3).filter(lambda c: abs(c) >= 1e-2), seed=st.integers(0, 2**16))
    @settings(max_examples=25)
    def test_homogeneous(self, c, seed):
        rng = np.random.default_rng(seed)
        grid = TimeGrid.uniform(1.0, 16)
        E = rng.standard_normal((16, 3))
        A = np.eye(3)
        base = frac_derivative_energy(E, grid, 0.3, A)
        assert frac_derivative_energy(c * E, grid, 0.3, A) == pytest.approx(c * c * base, rel=1e-10)

    @given(seed=st.integers(0, 2**16), gamma=st.sampled_from([0.1, 0.3, 0.45]),
           J=st.integers(1, 24))
    @settings(max_examples=20)
    def test_bounds_seminorm_from_below(self, seed, gamma, J):
        # int_0^T |D^gamma e|^2 >= cos(gamma pi) |e|_{H^gamma}^2, with 15% estimator slack
        values = np.random.default_rng(seed).standard_normal(J)
        grid = TimeGrid.uniform(1.0, J)
        energy = frac_derivative_energy(values[:, None], grid, gamma, np.eye(1))
        semi = hgamma_seminorm(gamma, ScalarStepFunction(grid, values))
        assert energy >= 0.85 * math.cos(gamma * math.pi) * semi**2

    @pytest.mark.parametrize("kwargs", [dict(gamma=0.5), dict(gamma=0.0), dict(method="nope"),
                                        dict(method="fft", graded=True)])
    def test_invalid(self, kwargs):
        grid = TimeGrid(np.linspace(0, 1, 5) ** 2) if kwargs.pop("graded", False) else TimeGrid.uniform(1.0, 4)
        args = dict(gamma=0.3)
        args.update(kwargs)
        with pytest.raises(DomainError):
            frac_derivative_energy(np.ones((4, 1)), grid, args.pop("gamma"), np.eye(1), **args)

    def test_e2_requires_fine_reference(self):
        space = assemble(build_interval_mesh(4))
        U = const_in_time(space, TimeGrid.uniform(1.0, 2), np.ones(space.N))
        with pytest.raises(DomainError):
            e2_fractional(U, SpectralReference.from_function(0.4, 1.0, sine, K=2))

    def test_e2_zero_and_scaling(self):
        space = assemble(build_interval_mesh(8))
        grid = TimeGrid.uniform(1.0, 8)
        U = solve(ProblemData(0.4, 1.0, InitialFunction(sine)), space, grid)
        assert e2_fractional(U, U) == 0.0
        Z = DGSolution(0.4, space, grid, np.zeros_like(U.slabs), U.initial)
        twice = DGSolution(0.4, space, grid, 2 * U.slabs, U.initial)
        assert e2_fractional(twice, Z) == pytest.approx(2 * e2_fractional(U, Z), rel=1e-12)


# }}}

# {{{ interpolants and orders


class TestInterpolants:
    def test_identity_two_slabs(self):
        grid = TimeGrid.uniform(1.0, 2)
        np.testing.assert_array_equal(interpolate_right(lambda t: t, grid).values, [0.5, 1.0])
        np.testing.assert_array_equal(interpolate_left(lambda t: t, grid).values, [0.0, 0.5])

    def test_rough_rate(self):
        # || t^p - Pi t^p ||_{L^2(0,1)} decays like tau^(p + 1/2) for small p
        p = 0.1

        def err(J):
            nodes = np.linspace(0.0, 1.0, J + 1)
            c = interpolate_right(lambda t: t**p, TimeGrid.uniform(1.0, J)).values
            a, b = nodes[:-1], nodes[1:]
            sq = ((b ** (2 * p + 1) - a ** (2 * p + 1)) / (2 * p + 1)
                  - 2 * c * (b ** (p + 1) - a ** (p + 1)) / (p + 1) + c * c * (b - a))
            return math.sqrt(sq.sum())

        rates = observed_orders([err(2**k) for k in range(6, 13)])
        assert rates[-1] == pytest.approx(0.55, abs=0.15)


class TestOrders:
    @pytest.mark.parametrize("errs, expected", [
        ((4.0, 1.0), 2.0),
        ((1.0, 1.0), 0.0),
        ((1.04e-4, 5.71e-5), 0.86507),
    ])
    def test_examples(self, errs, expected):
        assert observed_orders(errs)[1] == pytest.approx(expected, abs=1e-4)

    def test_edge_cases(self):
        assert observed_orders([]) == []
        assert observed_orders([1.0]) == [None]
        out = observed_orders([1.0, 0.0, 1.0])
        assert math.isnan(out[1]) and math.isnan(out[2])
        assert observed_orders([9.0, 1.0], ratio=3.0)[1] == pytest.approx(2.0)

    @given(errs=st.lists(st.floats(1e-12, 1e3), min_size=2, max_size=6), c=st.floats(1e-6, 1e6))
    def test_scale_invariant(self, errs, c):
        a = observed_orders(errs)[1:]
        b = observed_orders([c * e for e in errs])[1:]
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_report(self):
        rows = (ErrorRow(3, 0.125, 4e-2, 1.0), ErrorRow(4, 0.0625, 1e-2, 0.5))
        rep = ErrorReport("h", rows)
        assert rep.values("e1") == [4e-2, 1e-2]
        assert rep.orders("e1")[1] == pytest.approx(2.0)
        assert rep.orders("nodal") == [None, None]


# }}}
