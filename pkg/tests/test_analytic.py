import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hs
from scipy import integrate, special

from reset_sde import (
    DomainError,
    NonhomogeneousPoissonClock,
    PoissonClock,
    ProcessSpec,
    SpecError,
    marginal_samples,
)
from reset_sde import analytic
from reset_sde.analytic import (
    ConvergenceError,
    DensityCurve,
    char_fn,
    classify_regime,
    density_curve,
    gaussian_moment,
    kummer_phi,
    laplace_moment,
    laplace_pdf,
    mean,
    mgf,
    moment_from_mgf,
    moment_table,
    normal_laplace_conv,
    npp_char_fn,
    npp_density_curve,
    npp_msd,
    npp_pdf,
    nth_moment,
    pdf,
    stationary_pdf,
    sum_moment,
)
from reset_sde import stats


def spec_poisson(rate=1.0, x0=0.0, xr=0.0, d=0.5):
    return ProcessSpec(d, x0, xr, PoissonClock(rate))


def spec_npp(rate=1.0, p=0.0, d=0.5):
    return ProcessSpec(d, 0.0, 0.0, NonhomogeneousPoissonClock(rate, p))


class TestMgf:
    def test_normalised_at_zero(self):
        for t in (0.0, 0.3, 5.0):
            assert mgf(spec_poisson(2.0, 0.0, 1.0), 0.0, t) == pytest.approx(1.0)

    def test_no_resetting_reduces_to_brownian_mgf(self):
        spec = spec_poisson(0.0, x0=0.3)
        assert mgf(spec, 0.7, 1.3) == pytest.approx(
            math.exp(0.7 * 0.3 + 1.3 * 0.7 ** 2 / 2), rel=1e-14)

    def test_long_time_limit_is_laplace_mgf(self):
        spec = spec_poisson(2.0, 0.0, 1.0)
        limit = math.exp(1.0) / (1.0 - 1.0 / 4.0)
        assert mgf(spec, 1.0, 80.0) == pytest.approx(limit, rel=1e-12)

    def test_domain_error_at_and_beyond_edge(self):
        spec = spec_poisson(2.0)
        edge = math.sqrt(2 * 2.0)
        for s in (edge, edge + 0.5, -edge):
            with pytest.raises(DomainError, match="sqrt"):
                mgf(spec, s, 1.0)

    @given(s=hs.floats(-10.0, 10.0))
    @settings(max_examples=50, deadline=None)
    def test_domain_property(self, s):
        spec = spec_poisson(1.0)
        if abs(s) >= math.sqrt(2.0):
            with pytest.raises(DomainError):
                mgf(spec, s, 0.5)
        else:
            assert mgf(spec, s, 0.5) > 0

    def test_general_diffusivity_rescales_domain(self):
        # D=2: domain |s| < sqrt(r/D) = sqrt(1/2)
        spec = ProcessSpec(2.0, 0.0, 0.0, PoissonClock(1.0))
        assert mgf(spec, 0.7, 1.0) > 0
        with pytest.raises(DomainError):
            mgf(spec, 0.71, 1.0)


class TestCharFn:
    def test_normalised_at_zero(self):
        assert char_fn(spec_poisson(1.0, 0.0, 2.0), 0.0, 0.5) == 1.0 + 0.0j

    def test_bounded_by_one_on_grid(self):
        spec = spec_poisson(1.0, 0.0, 2.0)
        ss = np.linspace(-25, 25, 401)
        assert np.all(np.abs(char_fn(spec, ss, 0.4)) <= 1.0 + 1e-12)

    @given(s=hs.floats(-20, 20), t=hs.floats(0.01, 20.0))
    @settings(max_examples=80, deadline=None)
    def test_modulus_bound_property(self, s, t):
        assert abs(char_fn(spec_poisson(1.5, 0.3, -1.0), s, t)) <= 1.0 + 1e-12

    def test_equals_mgf_at_imaginary_argument(self):
        # phi(s) and M(i s) coincide where the MGF exists: check via the
        # analytic continuation identity M(s) evaluated on the real axis
        spec = spec_poisson(2.0, 0.5, 1.0)
        for s in (0.3, 1.0, 1.7):
            m_here = mgf(spec, s, 0.7)
            # reconstruct M(s) from the characteristic-function formula at -i s
            rate, t = 2.0, 0.7
            denom = rate - s * s / 2
            expected = rate * math.exp(s * 1.0) / denom \
                + (math.exp(s * 0.5) - rate * math.exp(s * 1.0) / denom) \
                * math.exp(-denom * t)
            assert m_here == pytest.approx(expected, rel=1e-12)

    def test_matches_empirical_cf(self):
        spec = spec_poisson(1.0, 0.0, 1.0)
        samples = marginal_samples(spec, 0.5, 100000, seed=50)
        for s in (-2.0, -1.0, 1.0, 2.0):
            est = stats.empirical_char_fn(samples, s)
            assert abs(est.value - char_fn(spec, s, 0.5)) < 3 * est.stderr

    def test_fourier_inversion_recovers_density(self):
        spec = spec_poisson(1.0, 0.0, 1.0)
        t = 0.7
        ss = np.arange(-2500.0, 2500.0, 0.01)
        phi = char_fn(spec, ss, t)
        for x in (-2.0, -0.5, 0.0, 0.8, 1.0, 2.5, 4.0):
            inv = float(np.real(np.trapezoid(np.exp(-1j * ss * x) * phi, ss))) / (2 * math.pi)
            assert inv == pytest.approx(pdf(spec, x, t), abs=1e-3)


class TestLaplacePdf:
    def test_value_at_center(self):
        assert laplace_pdf(1.0, 2.0, 1.0) == pytest.approx(1.0)

    def test_normalisation(self):
        val, _ = integrate.quad(lambda x: laplace_pdf(x, 2.0, 1.0),
                                -np.inf, np.inf)
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_variance_is_inverse_rate(self):
        var, _ = integrate.quad(lambda x: (x - 1.0) ** 2 * laplace_pdf(x, 2.0, 1.0),
                                -np.inf, np.inf)
        assert var == pytest.approx(1.0 / 2.0, rel=1e-9)


class TestNormalLaplaceConv:
    @pytest.mark.parametrize("t", [0.1, 1.0])
    @pytest.mark.parametrize("rate", [0.5, 2.0])
    def test_matches_direct_quadrature(self, t, rate):
        # the closed form is only trusted because of this oracle
        center = 0.5
        for x in (-3.0, 0.0, 0.5, 2.0, 8.0):
            direct, _ = integrate.quad(
                lambda u: math.exp(-(x - u) ** 2 / (2 * t))
                / math.sqrt(2 * math.pi * t) * laplace_pdf(u, rate, center),
                -np.inf, np.inf, limit=200)
            assert normal_laplace_conv(x, t, rate, center) == pytest.approx(
                direct, abs=1e-8)

    def test_normalisation(self):
        val, _ = integrate.quad(lambda x: normal_laplace_conv(x, 0.3, 1.0, 0.0),
                                -np.inf, np.inf, limit=200)
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_short_time_collapses_to_laplace(self):
        for x in (-1.0, 0.2, 0.8):
            assert normal_laplace_conv(x, 1e-12, 2.0, 0.0) == pytest.approx(
                laplace_pdf(x, 2.0, 0.0), rel=1e-5)

    def test_far_tail_stays_finite_and_positive(self):
        # large rate*t once overflowed naive erfc formulations
        val = normal_laplace_conv(50.0, 30.0, 5.0, 0.0)
        assert 0 < val < 1e-15


class TestPdf:
    def test_no_resetting_is_gaussian(self):
        spec = spec_poisson(0.0, x0=0.5)
        xs = np.linspace(-4, 5, 101)
        gauss = np.exp(-(xs - 0.5) ** 2 / (2 * 0.7)) / math.sqrt(2 * math.pi * 0.7)
        assert np.allclose(pdf(spec, xs, 0.7), gauss, rtol=1e-12)

    def test_long_time_limit_is_stationary(self):
        spec = spec_poisson(1.0, 0.0, 3.0)
        xs = np.linspace(-5, 11, 801)
        sup = np.max(np.abs(pdf(spec, xs, 50.0) - stationary_pdf(spec, xs)))
        assert sup < 1e-6

    def test_mass_and_positivity(self):
        spec = spec_poisson(1.0, 0.0, 3.0)
        for t in (0.05, 0.5, 3.0):
            mass, _ = integrate.quad(lambda x: pdf(spec, x, t), -np.inf, np.inf,
                                     limit=300)
            assert mass == pytest.approx(1.0, abs=1e-8)
        xs = np.linspace(-30, 30, 4001)
        assert np.all(pdf(spec, xs, 0.1) >= 0.0)

    def test_exponential_approach_to_stationarity(self):
        # sup-norm gap decays like exp(-r t): log-slope within 10% of -r
        spec = spec_poisson(1.0, 0.0, 1.0)
        xs = np.linspace(-7, 9, 1201)
        ts = np.linspace(10.0, 20.0, 6)
        gaps = [np.max(np.abs(pdf(spec, xs, t) - stationary_pdf(spec, xs)))
                for t in ts]
        slope = np.polyfit(ts, np.log(gaps), 1)[0]
        assert slope == pytest.approx(-1.0, abs=0.1)

    def test_general_diffusivity_follows_scaling(self):
        spec_d = ProcessSpec(2.0, 0.0, 1.0, PoissonClock(1.0))
        samples = marginal_samples(spec_d, 0.6, 100000, seed=31)
        ks = stats.ks_distance(samples, lambda v: stats.analytic_cdf(spec_d, v, 0.6))
        assert ks < 0.01


class TestMean:
    def test_boundary_values(self):
        spec = spec_poisson(1.0, x0=1.5, xr=5.0)
        assert mean(spec, 0.0) == pytest.approx(1.5)
        assert mean(spec, 200.0) == pytest.approx(5.0)

    def test_matches_monte_carlo_at_figure_settings(self):
        spec = spec_poisson(1.0, 0.0, 5.0)
        for t in (0.1, 0.5, 1.5):
            xs = marginal_samples(spec, t, 100000, seed=int(1000 * t))
            assert abs(xs.mean() - mean(spec, t)) \
                < 3 * xs.std() / math.sqrt(len(xs))


class TestMomentPieces:
    def test_laplace_moments(self):
        assert laplace_moment(2, 0.5) == pytest.approx(2.0)
        assert laplace_moment(3, 1.0) == 0.0
        quad, _ = integrate.quad(lambda x: x ** 4 * laplace_pdf(x, 1.0, 0.0),
                                 -np.inf, np.inf)
        assert laplace_moment(4, 1.0) == pytest.approx(quad, rel=1e-9)
        assert laplace_moment(4, 1.0) == pytest.approx(6.0)

    def test_kummer_basics(self):
        assert kummer_phi(0.3, 1.7, 0.0) == 1.0
        for c in (2.5, -1.5, 7.0):
            assert kummer_phi(1.0, 1.0, c) == pytest.approx(math.exp(c), rel=1e-11)
        z = 0.7
        assert kummer_phi(-1.0, 0.5, -z) == pytest.approx(1 + 2 * z, rel=1e-12)

    def test_kummer_against_scipy(self):
        rng = np.random.default_rng(14)
        for _ in range(150):
            a = rng.uniform(-3, 3)
            b = rng.uniform(0.3, 4.0)
            c = rng.uniform(-8, 8)
            ref = special.hyp1f1(a, b, c)
            assert kummer_phi(a, b, c) == pytest.approx(ref, rel=1e-9, abs=1e-12)

    def test_kummer_pole_and_budget(self):
        with pytest.raises(DomainError):
            kummer_phi(1.0, 0.0, 0.5)
        with pytest.raises(DomainError):
            kummer_phi(1.0, -2.0, 0.5)
        with pytest.raises(ConvergenceError):
            kummer_phi(0.5, 1.5, 800.0)
        with pytest.raises(ConvergenceError, match="did not converge"):
            kummer_phi(0.5, 1.5, 400.0)

    def test_gaussian_moments(self):
        assert gaussian_moment(2, 0.0, 3.0) == pytest.approx(3.0)
        assert gaussian_moment(1, 2.0, 1.0) == pytest.approx(2.0)
        assert gaussian_moment(3, 0.0, 1.0) == 0.0
        for n, x0, t in ((4, 1.0, 0.5), (6, 1.3, 0.8), (5, -0.7, 2.0)):
            quad, _ = integrate.quad(
                lambda x: x ** n * math.exp(-(x - x0) ** 2 / (2 * t))
                / math.sqrt(2 * math.pi * t), -np.inf, np.inf)
            assert gaussian_moment(n, x0, t) == pytest.approx(quad, rel=1e-10)

    def test_sum_moments(self):
        assert sum_moment(2, 1.0, 0.5) == pytest.approx(3.0)
        assert sum_moment(3, 1.0, 1.0) == 0.0
        direct, _ = integrate.dblquad(
            lambda l, w: (w + l) ** 4
            * math.exp(-w ** 2 / 2) / math.sqrt(2 * math.pi)
            * laplace_pdf(l, 1.0, 0.0),
            -np.inf, np.inf, -np.inf, np.inf)
        assert sum_moment(4, 1.0, 1.0) == pytest.approx(direct, rel=1e-6)


class TestNthMoment:
    def test_first_moment_consistency_with_mean(self):
        assert nth_moment(spec_poisson(1.0, 0.0, 0.0), 1, 1.0) == 0.0
        spec = spec_poisson(1.0, 2.0, 0.0)
        assert nth_moment(spec, 1, 1.0) == pytest.approx(2 * math.exp(-1.0), rel=1e-12)
        assert nth_moment(spec, 1, 1.0) == pytest.approx(mean(spec, 1.0), rel=1e-12)

    def test_long_time_second_moment_is_stationary_variance(self):
        assert nth_moment(spec_poisson(1.0), 2, 60.0) == pytest.approx(1.0, rel=1e-12)

    def test_triangle_closed_quadrature_mgf(self):
        spec = spec_poisson(1.0, 1.0, 0.0)
        for n in range(1, 7):
            closed = nth_moment(spec, n, 0.7)
            quad, _ = integrate.quad(lambda x: x ** n * pdf(spec, x, 0.7),
                                     -np.inf, np.inf, limit=300)
            assert closed == pytest.approx(quad, rel=1e-6)
            assert closed == pytest.approx(moment_from_mgf(spec, n, 0.7), rel=1e-4)

    def test_nonzero_reset_point_is_rejected_towards_quadrature(self):
        with pytest.raises(DomainError, match="quadrature"):
            nth_moment(spec_poisson(1.0, 0.0, 2.0), 2, 1.0)

    def test_moment_table_invariants(self):
        table = moment_table(spec_poisson(1.0, 0.0, 0.0), 1.0, 6)
        assert table.values[0] == 1.0
        assert np.all(table.values[1::2] == 0.0)


class TestNppTransforms:
    def test_normalised_at_zero(self):
        for p in (-0.5, 0.7):
            assert npp_char_fn(spec_npp(1.0, p), 0.0, 2.3) == pytest.approx(1.0 + 0j)

    def test_constant_exponent_reduces_to_homogeneous(self):
        hom = spec_poisson(1.0)
        npp = spec_npp(1.0, 0.0)
        for s in (0.3, 1.0, 2.5):
            for t in (0.2, 1.0, 5.0):
                assert abs(npp_char_fn(npp, s, t) - char_fn(hom, s, t)) < 1e-8

    def test_large_time_laplace_asymptote(self):
        spec = spec_npp(1.0, -0.5)
        t = 400.0
        for s in (0.5, 1.0, 2.0):
            asym = 1.0 / (1.0 + s * s / (2.0 * (t + 1.0) ** -0.5))
            assert npp_char_fn(spec, s, t).real == pytest.approx(asym, rel=0.02)

    def test_requires_centered_process(self):
        bad = ProcessSpec(0.5, 1.0, 0.0, NonhomogeneousPoissonClock(1.0, 0.5))
        with pytest.raises(DomainError, match="x0"):
            npp_char_fn(bad, 1.0, 1.0)
        with pytest.raises(SpecError):
            npp_char_fn(spec_poisson(1.0), 1.0, 1.0)


class TestNppPdf:
    def test_constant_exponent_matches_homogeneous_density(self):
        xs = np.linspace(-6, 6, 41)
        diff = np.abs(npp_pdf(spec_npp(1.0, 0.0), xs, 1.0)
                      - pdf(spec_poisson(1.0), xs, 1.0))
        assert np.max(diff) < 1e-6

    @pytest.mark.parametrize("p", [-0.5, 0.5])
    @pytest.mark.parametrize("t", [1.0, 10.0])
    def test_normalisation(self, p, t):
        spec = spec_npp(1.0, p)
        xs = np.linspace(-12.0, 12.0, 4001)
        assert np.trapezoid(npp_pdf(spec, xs, t), xs) == pytest.approx(1.0, abs=1e-4)

    def test_matches_monte_carlo(self):
        spec = spec_npp(1.0, -0.5)
        samples = marginal_samples(spec, 5.0, 30000, seed=8)
        curve = npp_density_curve(spec, 5.0, np.linspace(-10, 10, 1601))
        ks = stats.ks_distance(samples, stats.cdf_from_density_curve(curve))
        assert ks < 0.02


class TestNppMsd:
    def test_constant_exponent_closed_form(self):
        spec = spec_npp(1.0, 0.0)
        for t in (0.5, 2.0, 10.0):
            assert npp_msd(spec, t) == pytest.approx(1 - math.exp(-t), rel=1e-10)

    def test_log_intensity_closed_form(self):
        assert npp_msd(spec_npp(1.0, -1.0), 9.0) == pytest.approx(4.95, rel=1e-12)
        # quadrature cross-check of the closed form
        direct, _ = integrate.quad(
            lambda w: math.exp(math.log1p(w) - math.log1p(9.0)), 0.0, 9.0)
        assert direct == pytest.approx(4.95, rel=1e-10)

    def test_growing_intensity_scaling_limit(self):
        spec = spec_npp(1.0, 0.5)
        t = 200.0
        assert npp_msd(spec, t) * (t + 1.0) ** 0.5 == pytest.approx(1.0, rel=0.05)

    def test_diffusivity_scaling(self):
        unit = spec_npp(1.0, -0.5)
        doubled = ProcessSpec(1.0, 0.0, 0.0, NonhomogeneousPoissonClock(1.0, -0.5))
        assert npp_msd(doubled, 3.0) == pytest.approx(2.0 * npp_msd(unit, 3.0),
                                                      rel=1e-12)


class TestRegimes:
    @pytest.mark.parametrize("p,exponent,law", [
        (0.5, -0.5, "degenerate"),
        (0.0, 0.0, "laplace-stationary"),
        (-0.5, 0.5, "laplace-nonstationary"),
        (-1.0, 1.0, "laplace-nonstationary"),
        (-2.0, 1.0, "gaussian-laplace"),
    ])
    def test_regime_table(self, p, exponent, law):
        info = classify_regime(p)
        assert info.exponent == pytest.approx(exponent)
        assert info.law == law
        assert info.as_json() == {"exponent": info.exponent, "law": law}


class TestCurves:
    def test_density_curve_mass_invariant(self):
        curve = density_curve(spec_poisson(1.0, 0.0, 3.0), 0.5)
        assert abs(curve.mass() - 1.0) < 1e-3
        assert curve.provenance == "analytic"

    def test_stationary_curve_matches_laplace(self):
        spec = spec_poisson(2.0, 0.0, 1.0)
        curve = analytic.stationary_curve(spec)
        assert np.allclose(curve.values, stationary_pdf(spec, curve.xs))

    def test_curve_csv(self, tmp_path):
        curve = density_curve(spec_poisson(1.0), 1.0)
        path = tmp_path / "c.csv"
        curve.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x,value"
        assert len(lines) == len(curve.xs) + 1

    def test_provenance_is_checked(self):
        with pytest.raises(ValueError):
            DensityCurve(np.array([0.0]), np.array([1.0]), 0.0, "guess")
