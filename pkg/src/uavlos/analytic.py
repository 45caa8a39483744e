"""Static line-of-sight probability for one ground-to-air link.

The link from a user at ``g`` to a platform at ``u`` is clear when the first
building across the user's street stays below the link at the contact point
and no later block along either axis reaches up to it.  Writing ``s`` for the
contact's fractional position along the projected link, the probability
factors into

    P = F(h_u * s) * exp(rate_x * |x_u - x0| + rate_y * |y_u - y0|)

where ``F`` is the building height CDF and each rate is the (nonpositive)
density-weighted void integral of ``1 - F`` along that axis.  For Rayleigh
heights both rates collapse to a difference of error functions and the whole
expression is closed form; any other height law takes the quadrature path
(absolute tolerance 1e-10, delegated to an adaptive routine run well below
that).

``math.erf`` is used directly: CPython's implementation is correctly rounded
to well under 1e-15 absolute error over the whole real line, which the test
suite pins against high precision reference values.  The difference of two
nearly equal erf values is the one cancellation-prone spot, so ``erf_diff``
switches to a midpoint series there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from scipy.integrate import quad

from .env import PARALLEL_Y, FirstBlockSide, Uav, model_first_contact

_SQRT2 = math.sqrt(2.0)
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


@dataclass
class RayleighHeights:
    """Rayleigh building height law with scale ``sigma`` (mode, not mean)."""

    sigma: float

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def cdf(self, h: float) -> float:
        if h <= 0:
            return 0.0
        if math.isinf(h):
            return 1.0
        return -math.expm1(-(h * h) / (2.0 * self.sigma * self.sigma))

    @property
    def mean(self) -> float:
        return self.sigma * math.sqrt(math.pi / 2.0)


@dataclass
class CdfHeights:
    """Arbitrary building height law given by its CDF."""

    cdf_fn: Callable[[float], float]

    def cdf(self, h: float) -> float:
        if math.isinf(h):
            return 1.0
        return min(max(float(self.cdf_fn(h)), 0.0), 1.0)


HeightModel = RayleighHeights | CdfHeights


def erf_diff(a: float, b: float) -> float:
    """erf(a) - erf(b), safe against cancellation when a is close to b.

    For |a - b| below 1e-5 the direct difference loses relative accuracy, so
    the integral of exp(-t^2) over [b, a] is expanded around the midpoint;
    the kept terms leave a relative error below 1e-12 there.
    """
    h = a - b
    if abs(h) >= 1e-5:
        return math.erf(a) - math.erf(b)
    m = 0.5 * (a + b)
    c2 = 2.0 * m * m - 1.0
    return _TWO_OVER_SQRT_PI * math.exp(-m * m) * h * (1.0 + c2 * h * h / 12.0)


@dataclass
class LosCoefficients:
    """Per-axis exponential decay rates (1/m) of the void probabilities.

    Both are nonpositive; each multiplies the full horizontal span along its
    axis in the exponent.  When the contact point lies on the projected link
    the two rates coincide.
    """

    x_rate: float
    y_rate: float


def _axis_ratio(c: float, p0: float, p1: float) -> float | None:
    """Fractional position of c between p0 and p1, None when the span is 0."""
    span = p1 - p0
    if span == 0.0:
        return None
    return (c - p0) / span


def contact_ratio(contact: FirstBlockSide, g: tuple[float, float], u: Uav) -> float | None:
    """Fraction of the projected link at which the contact point sits.

    Uses whichever axis has horizontal extent.  Returns None when the user
    stands right under the platform (no 2D extent, nothing can intervene),
    or when the contact does not fall strictly inside the link (behind the
    user or past the platform), which also means no relevant contact.
    """
    sx = _axis_ratio(contact.x, g[0], u.x)
    sy = _axis_ratio(contact.y, g[1], u.y)
    s = sx if sx is not None else sy
    if s is None:
        return None
    if abs(u.x - g[0]) < abs(u.y - g[1]) and sy is not None:
        s = sy  # better conditioned axis
    if not (0.0 < s <= 1.0):
        return None
    return s


def los_height_at(contact: FirstBlockSide, g: tuple[float, float], u: Uav) -> float:
    """Height of the link above the contact point.

    Computed from the fractional position along the link; the X and Y forms
    agree whenever the contact lies on the projected segment.  Returns inf
    when the user stands under the platform, where no height is defined and
    nothing can block.
    """
    s = contact_ratio(contact, g, u)
    if s is None:
        return math.inf
    return u.height * s


def p0_los(h1: float, model: HeightModel) -> float:
    """Probability that the first contact building passes under the link."""
    return model.cdf(h1)


def _rayleigh_rate(s: float, lam: float, sigma: float, height: float) -> float:
    """Closed-form void rate: -lam * sqrt(pi/2) * (sigma/h) * [erf(c) - erf(c*s)]."""
    c = height / (_SQRT2 * sigma)
    return -lam * math.sqrt(math.pi / 2.0) * (sigma / height) * erf_diff(c, c * s)


def los_coefficients(
    g: tuple[float, float], u: Uav, contact: FirstBlockSide, lam: float, sigma: float
) -> LosCoefficients:
    """Rayleigh closed-form decay rates for the given contact geometry."""
    s = contact_ratio(contact, g, u)
    if s is None:
        return LosCoefficients(0.0, 0.0)
    r = _rayleigh_rate(s, lam, sigma, u.height)
    return LosCoefficients(r, r)


def _generic_rate(s: float, lam: float, model: HeightModel, height: float) -> float:
    """Void rate for an arbitrary height CDF, by adaptive quadrature.

    Integrates 1 - F(height * q) for q in [s, 1]; tolerance comfortably under
    the documented 1e-10 absolute.
    """
    val, _ = quad(
        lambda q: 1.0 - model.cdf(height * q), s, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200
    )
    return -lam * val


def void_rate(s: float, lam: float, model: HeightModel, height: float) -> float:
    """Nonpositive decay rate of the void probabilities past the contact at s."""
    if isinstance(model, RayleighHeights):
        return _rayleigh_rate(s, lam, model.sigma, height)
    return _generic_rate(s, lam, model, height)


def wall_contact(g: tuple[float, float], u: Uav, wall_x: float) -> FirstBlockSide | None:
    """Contact of the projected link with the vertical wall at x = wall_x.

    The crossing is recomputed exactly on the segment, so its X and Y
    fractional positions coincide.  None when the link never reaches the
    wall (wall behind the user or past the platform).
    """
    s = _axis_ratio(wall_x, g[0], u.x)
    if s is None or not (0.0 < s <= 1.0):
        return None
    return FirstBlockSide(wall_x, g[1] + (u.y - g[1]) * s, PARALLEL_Y)


def p_los_static(
    g: tuple[float, float],
    u: Uav,
    street_width: float | None,
    lam: float,
    model: HeightModel,
    contact: FirstBlockSide | None = None,
) -> float:
    """Probability that the link from g to u is unobstructed, right now.

    The contact defaults to the crossing of the building front line across
    the user's street (street_width may be None only when a contact is passed
    explicitly, as a caller tracking a west wall during a street-gap sweep
    does).  No contact at all means nothing can obstruct: probability 1.
    """
    if contact is None:
        if street_width is None:
            raise ValueError("need a street width or an explicit contact")
        contact = model_first_contact(g, u, street_width)
        if contact is None:
            return 1.0
    s = contact_ratio(contact, g, u)
    if s is None:
        return 1.0
    p0 = p0_los(u.height * s, model)
    if p0 == 0.0:
        return 0.0
    rate = void_rate(s, lam, model, u.height)
    exponent = rate * (abs(u.x - g[0]) + abs(u.y - g[1]))
    return p0 * math.exp(exponent)
