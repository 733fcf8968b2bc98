"""Closed-form distributional results for diffusion with resetting.

Everything is derived at unit diffusivity (D = 1/2, standard Brownian
noise) and mapped to general D through the exact spatial scaling
x -> sqrt(2D) x provided by :func:`reset_sde.core.rescale_to_unit`.

Homogeneous Poisson resetting at rate r admits fully explicit formulas:
the moment generating function

    M_t(s) = r e^{s b} / (r - s^2/2)
             + (e^{s a} - r e^{s b} / (r - s^2/2)) e^{-(r - s^2/2) t}

(a = start, b = reset point, valid for |s| < sqrt(2r)), the
characteristic function M_t(i s), a density that combines a Laplace
density, a Gaussian density, and their convolution, and moments built
from Laplace moments, Gaussian moments (via Kummer's confluent
hypergeometric function) and a binomial cross term.

Power-law nonhomogeneous resetting (intensity r (t+1)^p, start = reset
point = 0) gets its characteristic function, density and mean squared
displacement by one-dimensional adaptive quadrature, with substitutions
that keep every integrand bounded by e^{-u} so nothing overflows.
"""

from dataclasses import dataclass
import csv
import math

import numpy as np
from scipy import integrate, special

from .core import (
    DomainError,
    NonhomogeneousPoissonClock,
    NumericalError,
    PoissonClock,
    ProcessSpec,
    SpecError,
    rescale_to_unit,
    validate_spec,
)
from .clocks import IntensityFunction, cumulative_intensity, inverse_cumulative_intensity


class ConvergenceError(NumericalError):
    """A series or quadrature failed to reach its tolerance."""


_NEGATIVE_DENSITY_FLOOR = -1e-12


# ---------------------------------------------------------------------------
# Tabulated results
# ---------------------------------------------------------------------------

_PROVENANCES = ("analytic", "fpe", "histogram")


@dataclass(frozen=True)
class DensityCurve:
    """A density tabulated on an ascending grid."""
    xs: np.ndarray
    values: np.ndarray
    t: float
    provenance: str

    def __post_init__(self):
        if self.provenance not in _PROVENANCES:
            raise ValueError(f"provenance must be one of {_PROVENANCES}")

    def mass(self) -> float:
        return float(np.trapezoid(self.values, self.xs))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "value"])
            for x, v in zip(self.xs, self.values):
                writer.writerow([repr(float(x)), repr(float(v))])


@dataclass(frozen=True)
class MomentTable:
    """Moments of orders 0..n_max at one time point."""
    orders: np.ndarray
    values: np.ndarray
    t: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["order", "value"])
            for n, v in zip(self.orders, self.values):
                writer.writerow([int(n), repr(float(v))])


# ---------------------------------------------------------------------------
# Clock guards and frame helpers
# ---------------------------------------------------------------------------

def _poisson_rate(spec: ProcessSpec) -> float:
    if not isinstance(spec.clock, PoissonClock):
        raise SpecError(f"this operation requires a homogeneous Poisson clock; "
                        f"got {type(spec.clock).__name__}")
    return spec.clock.rate


def _npp_params(spec: ProcessSpec):
    if not isinstance(spec.clock, NonhomogeneousPoissonClock):
        raise SpecError(f"this operation requires a nonhomogeneous Poisson "
                        f"clock; got {type(spec.clock).__name__}")
    if spec.x0 != 0.0 or spec.x_reset != 0.0:
        raise DomainError("nonhomogeneous results are derived for "
                          "x0 = xR = 0 only")
    return spec.clock.rate, spec.clock.exponent


def _unit(spec: ProcessSpec):
    scaled, mapping = rescale_to_unit(spec)
    return scaled.x0, scaled.x_reset, mapping.factor


def _norm_pdf(x, mean, var):
    return np.exp(-((x - mean) ** 2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


# ---------------------------------------------------------------------------
# MGF and characteristic function
# ---------------------------------------------------------------------------

def mgf(spec: ProcessSpec, s: float, t: float) -> float:
    """Moment generating function E exp(s X_t); Poisson clock only.

    Defined for |s| < sqrt(2r) in the unit frame (sqrt(r/D) in general).
    """
    validate_spec(spec)
    rate = _poisson_rate(spec)
    if t < 0:
        raise ValueError("t must be nonnegative")
    a, b, c = _unit(spec)
    return _mgf_unit(a, b, rate, c * s, t)


def _mgf_unit(x0, xr, rate, s, t):
    if rate == 0.0:
        return math.exp(s * x0 + 0.5 * t * s * s)
    if abs(s) >= math.sqrt(2.0 * rate):
        raise DomainError(
            "the moment generating function diverges for |s| >= sqrt(2r); "
            f"|{s:g}| is outside the domain for rate {rate:g}")
    denom = rate - 0.5 * s * s
    stationary = rate * math.exp(s * xr) / denom
    return stationary + (math.exp(s * x0) - stationary) * math.exp(-denom * t)


def char_fn(spec: ProcessSpec, s, t: float) -> complex:
    """Characteristic function E exp(i s X_t); Poisson clock only."""
    validate_spec(spec)
    rate = _poisson_rate(spec)
    if t < 0:
        raise ValueError("t must be nonnegative")
    a, b, c = _unit(spec)
    s = np.asarray(s, dtype=float) * c
    if rate == 0.0:
        out = np.exp(1j * s * a - 0.5 * t * s * s)
    else:
        denom = rate + 0.5 * s * s
        stationary = rate * np.exp(1j * s * b) / denom
        out = stationary + (np.exp(1j * s * a) - stationary) * np.exp(-denom * t)
    return complex(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

def _laplace_pdf_arr(x, rate, center):
    return math.sqrt(rate / 2.0) * np.exp(-math.sqrt(2.0 * rate) * np.abs(x - center))


def laplace_pdf(x, rate: float, center: float):
    """Laplace density with scale (2 rate)^(-1/2): the unit-frame
    stationary law of resetting diffusion."""
    if not rate > 0:
        raise DomainError("rate must be positive")
    out = _laplace_pdf_arr(np.asarray(x, dtype=float), rate, center)
    return float(out) if out.ndim == 0 else out


def _exp_times_erfcx(gauss_exp, arg, tail_exp):
    """exp(gauss_exp) * erfcx(arg), stable for arg of either sign.

    ``tail_exp`` must equal gauss_exp + arg**2, supplied in closed form by
    the caller so no catastrophic cancellation occurs.  For arg < 0 the
    reflection erfcx(-z) = 2 e^{z^2} - erfcx(z) is used; tail_exp is then
    always negative, so nothing overflows.
    """
    gauss_exp, arg, tail_exp = np.broadcast_arrays(
        np.asarray(gauss_exp, dtype=float), np.asarray(arg, dtype=float),
        np.asarray(tail_exp, dtype=float))
    out = np.empty(arg.shape)
    neg = arg < 0
    pos = ~neg
    out[pos] = np.exp(gauss_exp[pos]) * special.erfcx(arg[pos])
    out[neg] = (2.0 * np.exp(tail_exp[neg])
                - np.exp(gauss_exp[neg]) * special.erfcx(-arg[neg]))
    return out


def normal_laplace_conv(x, t: float, rate: float, center: float):
    """Density of the sum of a Normal(0, t) and an independent Laplace
    (center, scale (2 rate)^(-1/2)) random variable, in closed form.

    Written with scaled complementary error functions so large rate*t
    never overflows.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if not rate > 0:
        raise DomainError("rate must be positive")
    x = np.asarray(x, dtype=float)
    lam = math.sqrt(2.0 * rate)
    y = x - center
    root = math.sqrt(2.0 * t)
    gauss_exp = -(y * y) / (2.0 * t)
    left = _exp_times_erfcx(gauss_exp, (lam * t - y) / root, 0.5 * lam * lam * t - lam * y)
    right = _exp_times_erfcx(gauss_exp, (lam * t + y) / root, 0.5 * lam * lam * t + lam * y)
    out = 0.25 * lam * (left + right)
    return float(out) if out.ndim == 0 else out


def pdf(spec: ProcessSpec, x, t: float):
    """Density of the resetting process at time t; Poisson clock only.

    Laplace part plus an exponentially damped correction: the Gaussian
    started at x0 minus the Gaussian-Laplace convolution.
    """
    validate_spec(spec)
    rate = _poisson_rate(spec)
    if not t > 0:
        raise ValueError("t must be positive")
    a, b, c = _unit(spec)
    x = np.asarray(x, dtype=float)
    out = _pdf_unit(x / c, t, a, b, rate) / c
    return float(out) if out.ndim == 0 else out


def _pdf_unit(x, t, x0, xr, rate):
    if rate == 0.0:
        return _norm_pdf(x, x0, t)
    out = _laplace_pdf_arr(x, rate, xr) + math.exp(-rate * t) * (
        _norm_pdf(x, x0, t) - normal_laplace_conv(x, t, rate, xr))
    low = np.min(out)
    if low < _NEGATIVE_DENSITY_FLOOR:
        raise NumericalError(
            f"density evaluated to {low:g}, beyond the rounding floor")
    return np.clip(out, 0.0, None)


def stationary_pdf(spec: ProcessSpec, x):
    """Long-time density: Laplace centred at the reset point."""
    validate_spec(spec)
    rate = _poisson_rate(spec)
    if rate <= 0:
        raise DomainError("no stationary law without resetting (rate 0)")
    a, b, c = _unit(spec)
    x = np.asarray(x, dtype=float)
    out = _laplace_pdf_arr(x / c, rate, b) / c
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

def mean(spec: ProcessSpec, t) -> float:
    """E X_t = xR + exp(-r t) (x0 - xR); exact for any diffusivity."""
    validate_spec(spec)
    rate = _poisson_rate(spec)
    t = np.asarray(t, dtype=float)
    out = spec.x_reset + np.exp(-rate * t) * (spec.x0 - spec.x_reset)
    return float(out) if out.ndim == 0 else out


def laplace_moment(n: int, rate: float) -> float:
    """n-th moment of the centred Laplace law with scale (2 rate)^(-1/2):
    (2 rate)^(-n/2) n! for even n, zero for odd n."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not rate > 0:
        raise DomainError("rate must be positive")
    if n % 2:
        return 0.0
    return (2.0 * rate) ** (-n / 2.0) * math.factorial(n)


def kummer_phi(a: float, b: float, c: float,
               rel_tol: float = 1e-12, max_terms: int = 500) -> float:
    """Kummer's confluent hypergeometric series sum_k (a)_k/(b)_k c^k/k!.

    Negative arguments are routed through the transformation
    phi(a, b; c) = e^c phi(b - a, b; -c), whose series has no sign
    cancellation.  Raises ConvergenceError when the term budget runs out.
    """
    if b <= 0 and b == int(b):
        raise DomainError(f"b = {b:g} is a non-positive integer (series pole)")
    if c < 0:
        return math.exp(c) * kummer_phi(b - a, b, -c, rel_tol, max_terms)
    term = 1.0
    total = 1.0
    small_streak = 0
    for k in range(max_terms):
        term *= (a + k) / (b + k) * c / (k + 1)
        total += term
        if not math.isfinite(total):
            raise ConvergenceError(
                f"Kummer series overflowed after {k + 1} terms "
                f"(a={a:g}, b={b:g}, c={c:g})")
        if abs(term) <= rel_tol * max(abs(total), 1e-300):
            small_streak += 1
            if small_streak >= 2:
                return total
        else:
            small_streak = 0
    raise ConvergenceError(
        f"Kummer series did not converge within {max_terms} terms "
        f"(a={a:g}, b={b:g}, c={c:g}, last term {term:g})")


def _double_factorial(n: int) -> int:
    out = 1
    for k in range(n, 1, -2):
        out *= k
    return out


def gaussian_moment(n: int, x0: float, t: float) -> float:
    """n-th raw moment of a Normal(x0, t) random variable.

    Even and odd orders use the Kummer-function closed forms; at x0 = 0
    the even case collapses to t^(n/2) (n-1)!! and odd orders vanish.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not t > 0:
        raise DomainError("t must be positive")
    if n == 0:
        return 1.0
    if x0 == 0.0:
        if n % 2:
            return 0.0
        return t ** (n / 2.0) * _double_factorial(n - 1)
    z = -x0 * x0 / (2.0 * t)
    if n % 2 == 0:
        return (math.sqrt(2.0 * t) ** n * math.gamma((n + 1) / 2.0)
                / math.sqrt(math.pi) * kummer_phi(-n / 2.0, 0.5, z))
    return (x0 * math.sqrt(t) ** (n - 1) * 2.0 ** ((n + 1) / 2.0)
            * math.gamma(n / 2.0 + 1.0) / math.sqrt(math.pi)
            * kummer_phi((1.0 - n) / 2.0, 1.5, z))


def sum_moment(n: int, t: float, rate: float) -> float:
    """n-th moment of W + L for independent W ~ Normal(0, t) and centred
    Laplace L: a binomial sum over even orders; zero for odd n."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n % 2:
        return 0.0
    total = 0.0
    for k in range(0, n + 1, 2):
        total += (math.comb(n, k) * gaussian_moment(k, 0.0, t)
                  * laplace_moment(n - k, rate))
    return total


def nth_moment(spec: ProcessSpec, n: int, t: float) -> float:
    """n-th raw moment E X_t^n for reset point 0.

    Combines the Laplace, Gaussian and sum moments:
    E L^n + exp(-r t)(E W^n - E (W+L)^n).  For a nonzero reset point no
    closed form is implemented; integrate x^n against :func:`pdf` instead.
    """
    validate_spec(spec)
    rate = _poisson_rate(spec)
    if spec.x_reset != 0.0:
        raise DomainError(
            "closed-form moments require reset point 0; integrate the "
            "density by quadrature for other reset points")
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not t > 0:
        raise DomainError("t must be positive")
    a, _, c = _unit(spec)
    if rate == 0.0:
        return c ** n * gaussian_moment(n, a, t)
    unit = (laplace_moment(n, rate)
            + math.exp(-rate * t) * (gaussian_moment(n, a, t) - sum_moment(n, t, rate)))
    return c ** n * unit


def _fd_weights(offsets: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for the given derivative order at 0
    (Fornberg's recursion)."""
    n = len(offsets)
    if order >= n:
        raise ValueError("need more stencil points than the derivative order")
    weights = np.zeros((n, order + 1))
    weights[0, 0] = 1.0
    c1 = 1.0
    c4 = offsets[0]
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = offsets[i]
        for j in range(i):
            c3 = offsets[i] - offsets[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    weights[i, k] = c1 * (k * weights[i - 1, k - 1]
                                          - c5 * weights[i - 1, k]) / c2
                weights[i, 0] = -c1 * c5 * weights[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                weights[j, k] = (c4 * weights[j, k] - k * weights[j, k - 1]) / c3
            weights[j, 0] = c4 * weights[j, 0] / c3
        c1 = c2
    return weights[:, order]


def moment_from_mgf(spec: ProcessSpec, n: int, t: float,
                    step: float = None, points: int = 13) -> float:
    """n-th moment as the n-th derivative of the MGF at s = 0, by a
    high-order central finite-difference stencil.

    This is the independent cross-check route for :func:`nth_moment`.
    """
    validate_spec(spec)
    rate = _poisson_rate(spec)
    if points <= n:
        raise ValueError("stencil must have more points than the order")
    if step is None:
        step = 0.05
        if rate > 0:
            c = math.sqrt(2.0 * spec.diffusivity)
            s_max = math.sqrt(2.0 * rate) / c
            step = min(step, 0.8 * s_max / (points - 1))
    offsets = (np.arange(points) - (points - 1) / 2.0) * step
    values = np.array([mgf(spec, s, t) for s in offsets])
    return float(_fd_weights(offsets, n) @ values)


# ---------------------------------------------------------------------------
# Nonhomogeneous Poisson resetting
# ---------------------------------------------------------------------------

_QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-8, limit=200)
_EXP_CUTOFF = 700.0  # e^{-700} is below double precision


def npp_char_fn(spec: ProcessSpec, s, t: float) -> complex:
    """Characteristic function under power-law resetting intensity.

    The defining integral is taken in the exhausted-intensity variable
    u = R(t) - R(w), which bounds the integrand by e^{-u} uniformly in
    (rate, exponent, s, t).  Requires x0 = xR = 0; the result is real.
    """
    validate_spec(spec)
    rate, p = _npp_params(spec)
    if not t >= 0:
        raise ValueError("t must be nonnegative")
    _, _, c = _unit(spec)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float)) * c
    out = np.array([_npp_cf_unit(rate, p, si, t) for si in s_arr], dtype=complex)
    return complex(out[0]) if np.ndim(s) == 0 else out


def _npp_cf_unit(rate, p, s, t) -> float:
    if t == 0.0:
        return 1.0
    f = IntensityFunction(rate, p)
    total = cumulative_intensity(f, t)
    half_s2 = 0.5 * s * s

    def integrand(u):
        w = inverse_cumulative_intensity(f, total - u)
        return math.exp(-u + (w - t) * half_s2)

    upper = min(total, _EXP_CUTOFF)
    tail, _ = integrate.quad(integrand, 0.0, upper, **_QUAD_OPTS)
    head = -total - t * half_s2
    head = math.exp(head) if head > -_EXP_CUTOFF else 0.0
    return head + tail


def npp_pdf(spec: ProcessSpec, x, t: float):
    """Density under power-law resetting intensity, x0 = xR = 0.

    The time integral is regularised by the substitution w = t - v^2,
    which removes the square-root singularity where the Gaussian kernel
    collapses at the upper endpoint.
    """
    validate_spec(spec)
    rate, p = _npp_params(spec)
    if not t > 0:
        raise ValueError("t must be positive")
    _, _, c = _unit(spec)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float)) / c
    out = np.array([_npp_pdf_unit(rate, p, xi, t) for xi in x_arr]) / c
    return float(out[0]) if np.ndim(x) == 0 else out


def _npp_pdf_unit(rate, p, x, t) -> float:
    f = IntensityFunction(rate, p)
    total = cumulative_intensity(f, t)
    half_x2 = 0.5 * x * x
    front = 2.0 / math.sqrt(2.0 * math.pi)

    def integrand(v):
        if v == 0.0:
            return front * float(f(t)) if x == 0.0 else 0.0
        w = t - v * v
        expo = cumulative_intensity(f, w) - total - half_x2 / (v * v)
        if expo < -_EXP_CUTOFF:
            return 0.0
        return front * float(f(w)) * math.exp(expo)

    top = math.sqrt(t)
    layer = 1.0 / math.sqrt(float(f(t)) + 1.0)
    breaks = sorted(b for b in {layer, top / 2.0} if 0.0 < b < top)
    tail, _ = integrate.quad(integrand, 0.0, top,
                             points=breaks or None, **_QUAD_OPTS)
    head_exp = -total - half_x2 / t
    head = math.exp(head_exp) / math.sqrt(2.0 * math.pi * t) if head_exp > -_EXP_CUTOFF else 0.0
    return head + tail


def npp_msd(spec: ProcessSpec, t: float) -> float:
    """Mean squared displacement under power-law resetting, x0 = xR = 0.

    Same exhausted-intensity substitution as the characteristic function;
    at exponent -1 the closed form (t+1)/(r+1) - (t+1)^(-r)/(r+1) is used
    directly.  Scales as 2 D times the unit-frame value.
    """
    validate_spec(spec)
    rate, p = _npp_params(spec)
    if not t >= 0:
        raise ValueError("t must be nonnegative")
    return 2.0 * spec.diffusivity * _npp_msd_unit(rate, p, t)


def _npp_msd_unit(rate, p, t) -> float:
    if t == 0.0:
        return 0.0
    if p == -1.0:
        return (t + 1.0) / (rate + 1.0) - (t + 1.0) ** (-rate) / (rate + 1.0)
    f = IntensityFunction(rate, p)
    total = cumulative_intensity(f, t)

    def integrand(u):
        w = inverse_cumulative_intensity(f, total - u)
        return math.exp(-u) / float(f(w))

    upper = min(total, _EXP_CUTOFF)
    out, _ = integrate.quad(integrand, 0.0, upper, **_QUAD_OPTS)
    return out


# ---------------------------------------------------------------------------
# Long-time regimes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeInfo:
    """Large-time behaviour for a power-law intensity exponent."""
    exponent: float      # MSD ~ t^exponent as t grows
    law: str             # limiting distribution family

    def as_json(self) -> dict:
        return {"exponent": self.exponent, "law": self.law}


def classify_regime(p: float) -> RegimeInfo:
    """Map the intensity exponent to (MSD power, limiting law).

    Increasing intensity collapses the law onto the reset point; constant
    intensity gives the stationary Laplace law; gently decaying intensity
    gives a spreading Laplace law; intensity decaying faster than 1/t
    leaves a diffusive Gaussian-Laplace mixture.
    """
    if p > 0:
        return RegimeInfo(exponent=-p, law="degenerate")
    if p == 0:
        return RegimeInfo(exponent=0.0, law="laplace-stationary")
    if p > -1:
        return RegimeInfo(exponent=-p, law="laplace-nonstationary")
    if p == -1:
        return RegimeInfo(exponent=1.0, law="laplace-nonstationary")
    return RegimeInfo(exponent=1.0, law="gaussian-laplace")


# ---------------------------------------------------------------------------
# Curve builders (CLI plumbing)
# ---------------------------------------------------------------------------

def spatial_scale(spec: ProcessSpec, t: float) -> float:
    """Max of the diffusive and stationary standard scales."""
    scale = math.sqrt(2.0 * spec.diffusivity * t)
    rate = _base_positive_rate(spec)
    if rate:
        scale = max(scale, math.sqrt(spec.diffusivity / rate))
    return scale


def _base_positive_rate(spec):
    clock = spec.clock
    if isinstance(clock, (PoissonClock, NonhomogeneousPoissonClock)) and clock.rate > 0:
        return clock.rate
    return None


def default_support(spec: ProcessSpec, t: float, span: float = 8.0,
                    points: int = 1001) -> np.ndarray:
    scale = spatial_scale(spec, t)
    lo = min(spec.x0, spec.x_reset) - span * scale
    hi = max(spec.x0, spec.x_reset) + span * scale
    return np.linspace(lo, hi, points)


def density_curve(spec: ProcessSpec, t: float, xs=None) -> DensityCurve:
    if xs is None:
        xs = default_support(spec, t)
    return DensityCurve(xs=np.asarray(xs, dtype=float),
                        values=np.asarray(pdf(spec, xs, t)),
                        t=t, provenance="analytic")


def stationary_curve(spec: ProcessSpec, xs=None) -> DensityCurve:
    if xs is None:
        xs = default_support(spec, 0.0)
    return DensityCurve(xs=np.asarray(xs, dtype=float),
                        values=np.asarray(stationary_pdf(spec, xs)),
                        t=math.inf, provenance="analytic")


def npp_density_curve(spec: ProcessSpec, t: float, xs=None) -> DensityCurve:
    if xs is None:
        xs = default_support(spec, t)
    return DensityCurve(xs=np.asarray(xs, dtype=float),
                        values=np.asarray(npp_pdf(spec, xs, t)),
                        t=t, provenance="analytic")


def moment_table(spec: ProcessSpec, t: float, n_max: int) -> MomentTable:
    orders = np.arange(n_max + 1)
    values = np.array([nth_moment(spec, int(n), t) for n in orders])
    return MomentTable(orders=orders, values=values, t=t)
