"""Closed-form predictions for the perturbed operator ``hD + g + delta Q``.

Everything exponentially large or small (``e^{-S/h}``, ``1/delta``) is carried
as a natural logarithm; ``exp`` is applied only when composing the final
density, with clamps so that ``h = 2e-3`` does not underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import (
    NoInteriorMax,
    NoRoot,
    OnSpectrum,
    OutOfStrip,
    RegimeViolation,
    TooCloseToBoundary,
    TooCloseToLine,
)
from .symbol import (
    STRIP_MARGIN,
    TWO_PI,
    FourierSymbol,
    action,
    bisect,
    boundary_distance,
    bracket_factor,
    max_action,
    turning_gap,
    turning_points,
)

LOG_PI = math.log(math.pi)
EXP_CLAMP = 700.0
LINE_GUARD = 0.05  # validity zone |Im z - <Im g>| > 1/C for the near-line formulas
SPECTRUM_SNAP = 1e-12  # |Re(z - <g>)/h - k| below this counts as on the spectrum
WKB_BOUNDARY_FACTOR = 2.0


@dataclass(frozen=True)
class ModelParams:
    """Semiclassical parameter ``h`` and coupling ``delta = sqrt(h) exp(-epsilon0/h)``."""

    h: float
    delta: float
    epsilon0: float

    @classmethod
    def from_delta(cls, h: float, delta: float, symbol: FourierSymbol | None = None) -> "ModelParams":
        return cls(h=float(h), delta=float(delta), epsilon0=epsilon0_from_delta(h, delta, symbol))

    @classmethod
    def from_epsilon0(cls, h: float, epsilon0: float, symbol: FourierSymbol | None = None) -> "ModelParams":
        if h <= 0:
            raise ValueError("h must be positive")
        delta = math.sqrt(h) * math.exp(-epsilon0 / h)
        if delta <= 0:
            raise RegimeViolation(f"delta = sqrt(h) exp(-{epsilon0}/{h}) underflows")
        if symbol is not None:
            _check_regime(symbol, epsilon0)
        return cls(h=float(h), delta=delta, epsilon0=float(epsilon0))

    @property
    def log_delta(self) -> float:
        return 0.5 * math.log(self.h) - self.epsilon0 / self.h


def _check_regime(symbol: FourierSymbol, epsilon0: float) -> None:
    s_max = max_action(symbol)
    if epsilon0 >= s_max:
        raise RegimeViolation(f"epsilon0 = {epsilon0!r} must stay below S(<Im g>) = {s_max!r}")


def epsilon0_from_delta(h: float, delta: float, symbol: FourierSymbol | None = None) -> float:
    """Invert ``delta = sqrt(h) exp(-epsilon0/h)``."""
    if h <= 0 or delta <= 0:
        raise ValueError("h and delta must be positive")
    eps0 = -h * (math.log(delta) - 0.5 * math.log(h))
    if symbol is not None:
        _check_regime(symbol, eps0)
    return eps0


class PhiFactor(NamedTuple):
    re_phi: float
    abs_one_minus_exp: float


def _phi_parts(symbol: FourierSymbol, h: float, z: complex) -> tuple[float, float, float]:
    """``(Re Phi, ln|1 - e^Phi|, |1 - e^Phi|)`` with the below-line branch on the line."""
    z = complex(z)
    w = z - symbol.mean
    re_phi = -(TWO_PI / h) * abs(w.imag)
    t = w.real / h
    frac = t - round(t)
    if abs(frac) <= SPECTRUM_SNAP:
        frac = 0.0
    # |1 - e^{r + i theta}|^2 = (1 - e^r)^2 + 4 e^r sin^2(theta / 2), theta = -+2 pi t
    if re_phi < -745.0:
        return re_phi, 0.0, 1.0
    er = math.exp(re_phi)
    sq = math.expm1(re_phi) ** 2 + 4.0 * er * math.sin(math.pi * frac) ** 2
    if sq == 0.0:
        return re_phi, -math.inf, 0.0
    return re_phi, 0.5 * math.log(sq), math.sqrt(sq)


def phi_factor(symbol: FourierSymbol, params: ModelParams, z: complex) -> PhiFactor:
    """Real part of ``Phi(z, h)`` and ``|1 - e^{Phi}|``; the latter vanishes exactly on
    the unperturbed spectrum ``<g> + hZ``."""
    re_phi, _, mag = _phi_parts(symbol, params.h, z)
    return PhiFactor(re_phi, mag)


def log_t0(symbol: FourierSymbol, params: ModelParams, z: complex) -> float:
    """ln of the predicted smallest singular value ``t0(z) = 1/||(P_h - z)^{-1}||``."""
    z = complex(z)
    h = params.h
    _, log_abs, _ = _phi_parts(symbol, h, z)
    if log_abs == -math.inf:
        raise OnSpectrum(f"z = {z!r} is an eigenvalue of the unperturbed operator")
    s = action(symbol, z.imag)
    w = bracket_factor(symbol, z.imag)
    return 0.5 * math.log(h) + 0.25 * math.log(w) + log_abs - s.s / h - 0.5 * LOG_PI


def log_resolvent_norm(symbol: FourierSymbol, params: ModelParams, z: complex) -> float:
    return -log_t0(symbol, params, z)


@dataclass(frozen=True)
class DensityValue:
    psi1: float
    log_psi2: float
    log_theta: float
    density: float
    theta: float

    @property
    def log_density(self) -> float:
        """ln of the density, finite even where ``density`` underflows to 0."""
        return float(np.logaddexp(math.log(self.psi1), self.log_psi2)) - LOG_PI - self.theta


def _clamped_exp(x: float) -> float:
    if x < -EXP_CLAMP:
        return 0.0
    return math.exp(min(x, EXP_CLAMP))


def compose_density(psi1: float, log_psi2: float, log_theta: float) -> DensityValue:
    theta = math.exp(log_theta) if log_theta < 709.0 else math.inf
    cutoff = 0.0 if theta > EXP_CLAMP else math.exp(-theta)
    psi2 = _clamped_exp(log_psi2)
    density = (psi1 + psi2) * cutoff / math.pi
    return DensityValue(psi1=psi1, log_psi2=log_psi2, log_theta=log_theta, density=density, theta=theta)


def density_components(
    symbol: FourierSymbol,
    params: ModelParams,
    z: complex,
    phi_corrections: bool = True,
) -> DensityValue:
    """Average eigenvalue density ``(1/pi)(Psi1 + Psi2) exp(-Theta)`` at ``z``.

    ``Psi1`` is the Weyl term ``(1/2h) d^2S/dy^2``, ``Psi2`` the tunneling term
    ``|(e0|f0)|^2/delta^2`` and ``Theta = t0^2/delta^2``.  With
    ``phi_corrections`` the near-line factors in ``e^{Phi}`` are kept.
    """
    z = complex(z)
    h = params.h
    smp = action(symbol, z.imag)
    w = bracket_factor(symbol, z.imag)
    re_phi, log_abs, _ = _phi_parts(symbol, h, z)
    two_log_delta = 2.0 * params.log_delta
    abs_ds = abs(smp.ds)

    psi1 = smp.d2s / (2.0 * h)
    log_psi2 = 0.5 * math.log(w) - LOG_PI - math.log(h) - two_log_delta - 2.0 * smp.s / h + 2.0 * math.log(abs_ds)
    log_theta = math.log(h) + 0.5 * math.log(w) - LOG_PI - two_log_delta - 2.0 * smp.s / h
    if phi_corrections:
        if re_phi > -745.0:
            log_psi2 += 2.0 * math.log1p((TWO_PI - abs_ds) / abs_ds * math.exp(re_phi))
        log_theta += 2.0 * log_abs
    return compose_density(psi1, log_psi2, log_theta)


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle ``[re0, re1] x [im0, im1]`` in the z-plane."""

    re0: float
    re1: float
    im0: float
    im1: float

    def __post_init__(self):
        if self.re1 < self.re0 or self.im1 < self.im0:
            raise ValueError(f"inverted box {self}")

    @property
    def width(self) -> float:
        return self.re1 - self.re0

    @property
    def height(self) -> float:
        return self.im1 - self.im0

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_list(self) -> list[float]:
        return [self.re0, self.re1, self.im0, self.im1]


def weyl_count(symbol: FourierSymbol, params: ModelParams | float, box: Box) -> float:
    """Expected number of eigenvalues in ``box`` under the Weyl law
    ``(1/2 pi h) p_*(dxi ^ dx)``.

    Edges within the strip margin of the boundary are allowed (gap 0 or 2pi).
    """
    h = params.h if isinstance(params, ModelParams) else float(params)
    for y in (box.im0, box.im1):
        if not (symbol.im_min - STRIP_MARGIN <= y <= symbol.im_max + STRIP_MARGIN):
            raise OutOfStrip(f"box edge Im z = {y!r} outside the strip")
    gap1 = turning_gap(symbol, min(max(box.im1, symbol.im_min), symbol.im_max))
    gap0 = turning_gap(symbol, min(max(box.im0, symbol.im_min), symbol.im_max))
    return box.width / (TWO_PI * h) * (gap1 - gap0)


def y_levels(symbol: FourierSymbol, params: ModelParams) -> tuple[float, float]:
    """Levels ``y_-(h) < <Im g> < y_+(h)`` where ``S(y) = epsilon0``."""
    eps0 = params.epsilon0
    if eps0 <= 0:
        raise RegimeViolation("epsilon0 must be positive for the level curves to exist")
    _check_regime(symbol, eps0)
    f = lambda y: action(symbol, y).s - eps0  # noqa: E731
    lo_edge = symbol.im_min + STRIP_MARGIN
    hi_edge = symbol.im_max - STRIP_MARGIN
    mean = symbol.mean_im
    y_minus = lo_edge if f(lo_edge) >= 0 else bisect(f, lo_edge, mean, 1e-14)
    y_plus = hi_edge if f(hi_edge) >= 0 else bisect(f, mean, hi_edge, 1e-14)
    return y_minus, y_plus


def _side_interval(symbol: FourierSymbol, side: int) -> tuple[float, float]:
    if side not in (-1, 1):
        raise ValueError("side must be -1 (below the line) or +1 (above)")
    mean = symbol.mean_im
    if side < 0:
        return symbol.im_min + STRIP_MARGIN, mean
    return mean + 1e-12, symbol.im_max - STRIP_MARGIN


def gamma_im(symbol: FourierSymbol, params: ModelParams, re_z: float, side: int) -> float:
    """Im of the curve where the predicted ``t0`` equals ``delta``, on one side of the line.

    Scans toward the line for the last downward crossing of ``ln delta`` and
    refines it by bisection.
    """
    lo, hi = _side_interval(symbol, side)
    target = params.log_delta
    f = lambda y: log_t0(symbol, params, complex(re_z, y)) - target  # noqa: E731
    ys = np.linspace(lo, hi, 401)
    if side > 0:
        ys = ys[::-1]  # edge -> line
    vals = []
    for y in ys:
        try:
            vals.append(f(float(y)))
        except OnSpectrum:
            vals.append(-math.inf)
    crossing = None
    for k in range(len(ys) - 1):
        if vals[k] > 0 >= vals[k + 1]:
            crossing = k
    if crossing is None:
        raise NoRoot(f"predicted log t0 never crosses ln delta on side {side:+d}")
    a, b = float(ys[crossing]), float(ys[crossing + 1])
    return bisect(f, min(a, b), max(a, b), 1e-13)


def edge_scale(params: ModelParams) -> float:
    """Natural width ``h / epsilon0^{1/3}`` of the accumulation zone."""
    return params.h / params.epsilon0 ** (1.0 / 3.0)


def _log_density_at(symbol, params, re_z, y, phi_corrections=True) -> float:
    try:
        return density_components(symbol, params, complex(re_z, y), phi_corrections).log_density
    except OnSpectrum:
        return -math.inf


def golden_max(f, a: float, b: float, tol: float = 1e-10) -> float:
    """Golden-section search for the maximizer of a unimodal ``f`` on ``[a, b]``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def Gamma_im(
    symbol: FourierSymbol,
    params: ModelParams,
    re_z: float,
    side: int,
    phi_corrections: bool = True,
) -> float:
    """Im of the curve where the predicted density peaks on the vertical line ``Re z = re_z``."""
    lo, hi = _side_interval(symbol, side)
    y_level = y_levels(symbol, params)[0 if side < 0 else 1]
    half = 10.0 * edge_scale(params)
    a, b = max(lo, y_level - half), min(hi, y_level + half)
    ys = np.linspace(a, b, 801)
    vals = np.array([_log_density_at(symbol, params, re_z, float(y), phi_corrections) for y in ys])
    k = int(np.argmax(vals))
    if k == 0 or k == len(ys) - 1:
        raise NoInteriorMax(f"density maximum at bracket endpoint Im z = {ys[k]!r}")
    f = lambda y: _log_density_at(symbol, params, re_z, y, phi_corrections)  # noqa: E731
    return golden_max(f, float(ys[k - 1]), float(ys[k + 1]))


class CurvePoint(NamedTuple):
    re: float
    im: float
    kind: str  # "yLevel" | "gamma" | "GammaMax"


def curve_points(symbol: FourierSymbol, params: ModelParams, re_values) -> list[CurvePoint]:
    out = []
    y_minus, y_plus = y_levels(symbol, params)
    for re in re_values:
        re = float(re)
        out.append(CurvePoint(re, y_minus, "yLevel"))
        out.append(CurvePoint(re, y_plus, "yLevel"))
        for side in (-1, 1):
            out.append(CurvePoint(re, gamma_im(symbol, params, re, side), "gamma"))
            out.append(CurvePoint(re, Gamma_im(symbol, params, re, side), "GammaMax"))
    return out


def tunneling_overlap_prediction(symbol: FourierSymbol, params: ModelParams, z: complex) -> float:
    """ln of the predicted overlap ``|(e0|f0)|`` of the lowest right/left singular vectors."""
    z = complex(z)
    if abs(z.imag - symbol.mean_im) <= LINE_GUARD:
        raise TooCloseToLine(f"|Im z - <Im g>| must exceed {LINE_GUARD}")
    h = params.h
    smp = action(symbol, z.imag)
    w = bracket_factor(symbol, z.imag)
    return 0.25 * math.log(w) - 0.5 * math.log(math.pi * h) + math.log(abs(smp.ds)) - smp.s / h


# --- WKB quasimodes -------------------------------------------------------

_BUMP_T = np.linspace(0.0, 1.0, 20001)


def _bump_raw(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0) & (t < 1)
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (ti * (1.0 - ti)))
    return out


_BUMP_CUM = cumulative_trapezoid(_bump_raw(_BUMP_T), _BUMP_T, initial=0.0)
_BUMP_MASS = _BUMP_CUM[-1]


def bump(t):
    """Smooth bump supported in ``]0, 1[`` with unit integral."""
    return _bump_raw(t) / _BUMP_MASS


def bump_cdf(t):
    return np.interp(np.asarray(t, dtype=float), _BUMP_T, _BUMP_CUM / _BUMP_MASS, left=0.0, right=1.0)


def cutoff(x, left: float, right: float, width: float):
    """``chi`` rising from 0 to 1 on ``[left, left+width]`` and falling on ``[right-width, right]``."""
    return bump_cdf((x - left) / width) - 1.0 + bump_cdf((right - x) / width)


def cutoff_derivative(x, left: float, right: float, width: float):
    return (bump((x - left) / width) - bump((right - x) / width)) / width


class WkbSample(NamedTuple):
    x: np.ndarray
    e_wkb: np.ndarray
    f_wkb: np.ndarray
    residual_bound: float


def wkb_sample(symbol: FourierSymbol, params: ModelParams, z: complex, grid_size: int) -> WkbSample:
    """WKB quasimodes for ``P_h - z`` and its adjoint on ``[x_- - 2pi, x_-)``.

    Normalization is by trapezoidal quadrature instead of the stationary-phase
    expansion.  ``residual_bound`` is ``||(P_h - z) e_wkb||``, which only sees the
    support of the cutoff derivative.
    """
    z = complex(z)
    h = params.h
    if boundary_distance(symbol, z) < WKB_BOUNDARY_FACTOR * h ** (2.0 / 3.0):
        raise TooCloseToBoundary(f"need d(z) >= {WKB_BOUNDARY_FACTOR} h^(2/3)")
    tp = turning_points(symbol, z)
    xp, xm = tp.x_plus, tp.x_minus
    dx = TWO_PI / grid_size
    x = xm - TWO_PI + dx * np.arange(grid_size)
    width = math.sqrt(h)
    G = symbol.antiderivative
    Gx = np.array([G(float(t)) for t in x])

    phase_e = z * (x - xp) - (Gx - G(xp))
    chi_e = cutoff(x, xm - TWO_PI, xm, width)
    amp_e = np.exp(1j * phase_e / h)
    e = chi_e * amp_e
    norm_e = math.sqrt(float(np.sum(np.abs(e) ** 2)) * dx)
    e /= norm_e
    res = (h / 1j) * cutoff_derivative(x, xm - TWO_PI, xm, width) * amp_e / norm_e
    residual = math.sqrt(float(np.sum(np.abs(res) ** 2)) * dx)

    xt = np.where(x >= xp, x, x + TWO_PI)
    Gxt = Gx + symbol.mean * (xt - x)  # G(x + 2pi) = G(x) + 2 pi <g>
    phase_f = np.conj(z * (xt - xm) - (Gxt - G(xm)))
    chi_f = cutoff(xt, xp, xp + TWO_PI, width)
    f = chi_f * np.exp(1j * phase_f / h)
    f /= math.sqrt(float(np.sum(np.abs(f) ** 2)) * dx)
    return WkbSample(x=x, e_wkb=e, f_wkb=f, residual_bound=residual)


def wkb_overlap(sample: WkbSample) -> complex:
    """``(e_wkb | f_wkb) = int e conj(f) dx`` by the periodic trapezoid rule."""
    dx = TWO_PI / len(sample.x)
    return complex(np.sum(sample.e_wkb * np.conj(sample.f_wkb)) * dx)


class TheoryProfile(NamedTuple):
    """Bin averages over ``[edges[i], edges[i+1]] x [re, re + h)`` (the density is h-periodic in Re z)."""

    psi1: np.ndarray
    log_psi2: np.ndarray
    log_theta: np.ndarray
    density: np.ndarray
    weyl_cumulative: np.ndarray  # Weyl count per unit Re-width from the strip bottom to each upper edge


def theory_profile(
    symbol: FourierSymbol,
    params: ModelParams,
    edges,
    re0: float = 0.0,
    nodes: int = 4,
    re_samples: int = 8,
) -> TheoryProfile:
    """Density averaged over each Im-bin with Gauss-Legendre nodes in Im z and
    equispaced samples across one period in Re z.

    ``psi1``, ``log_psi2`` and ``log_theta`` are reported at the bin center and
    ``Re z = re0 + h/2`` (between two unperturbed eigenvalues).
    """
    edges = np.asarray(edges, dtype=float)
    h = params.h
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    res = re0 + h * (np.arange(re_samples) + 0.5) / re_samples
    nb = len(edges) - 1
    psi1 = np.empty(nb)
    lp2 = np.empty(nb)
    lth = np.empty(nb)
    dens = np.empty(nb)
    for i in range(nb):
        a, b = edges[i], edges[i + 1]
        ys = 0.5 * (a + b) + 0.5 * (b - a) * gx
        total = 0.0
        for y, w in zip(ys, gw):
            total += 0.5 * w * sum(density_components(symbol, params, complex(re, y)).density for re in res) / re_samples
        dens[i] = total
        mid = density_components(symbol, params, complex(re0 + 0.5 * h, 0.5 * (a + b)))
        psi1[i], lp2[i], lth[i] = mid.psi1, mid.log_psi2, mid.log_theta
    gaps = np.array([turning_gap(symbol, min(max(e, symbol.im_min), symbol.im_max)) for e in edges[1:]])
    base = turning_gap(symbol, min(max(edges[0], symbol.im_min), symbol.im_max))
    return TheoryProfile(psi1, lp2, lth, dens, (gaps - base) / (TWO_PI * h))
