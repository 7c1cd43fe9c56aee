"""Fourier symbols g(x) on the circle and their phase-space geometry.

A symbol is a finite Fourier series ``g(x) = sum_m c_m exp(i m x)``.  Every
quantity derived here (turning points, the action ``S``, its derivatives in
``Im z``, the Poisson-bracket factor) is computed from the coefficients in
closed form; the only numerics are bisections for roots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import DegenerateSymbol, MultipleCritical, OutOfStrip

TWO_PI = 2.0 * math.pi
SCAN_POINTS = 4096
STRIP_MARGIN = 1e-8
BISECT_WIDTH = 1e-13


def bisect(f: Callable[[float], float], lo: float, hi: float, width: float = BISECT_WIDTH) -> float:
    """Root of ``f`` in ``[lo, hi]``; ``f(lo)`` and ``f(hi)`` must differ in sign."""
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if (flo < 0) == (fhi < 0):
        raise ValueError("bisect: no sign change on bracket")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return float(0.5 * (lo + hi))


@dataclass(frozen=True)
class TurningPair:
    x_plus: float
    x_minus: float
    xi_plus: float
    xi_minus: float


@dataclass(frozen=True)
class ActionSample:
    s: float
    ds: float
    d2s: float
    y: float


class FourierSymbol:
    """Symbol ``g`` given by Fourier coefficients ``{m: c_m}``.

    Construction checks that ``Im g`` has exactly one minimum ``a`` and one
    maximum ``b`` (scan on a 4096-point grid) and caches them.
    """

    def __init__(self, coeffs: Mapping[int, complex]):
        clean = {int(m): complex(c) for m, c in coeffs.items() if complex(c) != 0}
        if not clean:
            raise DegenerateSymbol("symbol is identically zero")
        self.coeffs = dict(sorted(clean.items()))
        self.order = max(abs(m) for m in self.coeffs)
        self._m = np.array(list(self.coeffs), dtype=float)
        self._c = np.array(list(self.coeffs.values()), dtype=complex)
        self.mean = self.coeffs.get(0, 0j)
        self.a, self.b = self._find_critical_points()
        self.im_min = self.eval(self.a).imag
        self.im_max = self.eval(self.b).imag
        if not self.im_min < self.im_max:
            raise DegenerateSymbol("min Im g is not below max Im g")

    @classmethod
    def from_triples(cls, triples: Iterable) -> "FourierSymbol":
        """Build from ``(m, re, im)`` triples as found in config files."""
        coeffs: dict[int, complex] = {}
        for m, re, im in triples:
            if int(m) != m:
                raise ValueError(f"Fourier index must be an integer, got {m!r}")
            coeffs[int(m)] = coeffs.get(int(m), 0j) + complex(re, im)
        return cls(coeffs)

    def to_triples(self) -> list[list[float]]:
        return [[m, c.real, c.imag] for m, c in self.coeffs.items()]

    def __repr__(self) -> str:
        return f"FourierSymbol({self.coeffs!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FourierSymbol) and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(tuple(self.coeffs.items()))

    def coefficient(self, m: int) -> complex:
        return self.coeffs.get(m, 0j)

    @property
    def mean_im(self) -> float:
        return self.mean.imag

    def eval(self, x, order: int = 0):
        """``g``, ``g'`` or ``g''`` at ``x`` (scalar or array) by direct summation."""
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        c = self._c * (1j * self._m) ** order
        x_arr = np.asarray(x, dtype=float)
        vals = np.exp(1j * np.multiply.outer(x_arr, self._m)) @ c
        return complex(vals) if vals.ndim == 0 else vals

    def antiderivative(self, x: float) -> complex:
        """Primitive ``c_0 x + sum_{m != 0} c_m e^{imx} / (im)``."""
        total = self.mean * x
        for m, c in self.coeffs.items():
            if m:
                total += c * complex(math.cos(m * x), math.sin(m * x)) / (1j * m)
        return total

    def _im_g(self, x: float) -> float:
        return float(np.dot(self._c, np.exp(1j * self._m * x)).imag)

    def _im_dg(self, x: float) -> float:
        return float(np.dot(self._c * (1j * self._m), np.exp(1j * self._m * x)).imag)

    def _find_critical_points(self) -> tuple[float, float]:
        grid = TWO_PI * np.arange(SCAN_POINTS) / SCAN_POINTS
        dg = self.eval(grid, order=1).imag
        if np.all(np.abs(dg) <= 1e-14 * max(1.0, float(np.abs(self._c).sum()))):
            raise DegenerateSymbol("Im g is constant: the strip is degenerate")
        pos = dg >= 0
        flips = np.nonzero(pos != np.roll(pos, -1))[0]
        if len(flips) > 2:
            raise MultipleCritical(f"Im g' changes sign {len(flips)} times")
        if len(flips) < 2:
            raise DegenerateSymbol("Im g has no interior min/max pair")
        a = b = None
        for k in flips:
            lo = float(grid[k])
            hi = lo + TWO_PI / SCAN_POINTS
            root = bisect(self._im_dg, lo, hi) % TWO_PI
            if pos[k]:  # + to -: maximum
                b = root
            else:
                a = root
        if a is None or b is None:
            raise DegenerateSymbol("could not separate minimum and maximum")
        if b < a:
            b += TWO_PI
        return a, b


def evaluate(symbol: FourierSymbol, x, order: int = 0):
    """``g``, ``g'`` or ``g''`` at ``x``."""
    return symbol.eval(x, order)


def critical_points(symbol: FourierSymbol) -> tuple[float, float]:
    """``(a, b)`` with ``Im g(a) = min``, ``Im g(b) = max`` and ``a < b < a + 2pi``."""
    return symbol.a, symbol.b


def _check_inside(symbol: FourierSymbol, y: float) -> None:
    if not (symbol.im_min + STRIP_MARGIN <= y <= symbol.im_max - STRIP_MARGIN):
        raise OutOfStrip(
            f"Im z = {y!r} not inside ({symbol.im_min!r}, {symbol.im_max!r}) with margin {STRIP_MARGIN}"
        )


def _turning_x(symbol: FourierSymbol, y: float) -> tuple[float, float]:
    _check_inside(symbol, y)
    f = lambda x: symbol._im_g(x) - y  # noqa: E731
    x_minus = bisect(f, symbol.a, symbol.b)
    x_plus = bisect(f, symbol.b, symbol.a + TWO_PI) - TWO_PI
    return x_plus, x_minus


def turning_points(symbol: FourierSymbol, z: complex) -> TurningPair:
    """Solutions ``rho_pm = (x_pm, xi_pm)`` of ``z = xi + g(x)``.

    Representatives satisfy ``x_minus - 2pi < x_plus < x_minus``.
    """
    z = complex(z)
    x_plus, x_minus = _turning_x(symbol, z.imag)
    return TurningPair(
        x_plus=float(x_plus),
        x_minus=float(x_minus),
        xi_plus=z.real - symbol.eval(x_plus).real,
        xi_minus=z.real - symbol.eval(x_minus).real,
    )


def turning_gap(symbol: FourierSymbol, y: float) -> float:
    """Continuous gap ``x_minus - x_plus`` in ``(0, 2pi)``; 0 / 2pi at the strip edges."""
    if abs(y - symbol.im_min) <= STRIP_MARGIN:
        return 0.0
    if abs(y - symbol.im_max) <= STRIP_MARGIN:
        return TWO_PI
    x_plus, x_minus = _turning_x(symbol, y)
    return x_minus - x_plus


def action(symbol: FourierSymbol, y: float) -> ActionSample:
    """Action ``S(y)`` and its first two derivatives in ``Im z``.

    ``S = min(Im int_{x+}^{x-} (z - g), Im int_{x+}^{x- - 2pi} (z - g))``; the
    two branches differ by ``2pi (y - <Im g>)``, so the lower one is chosen by
    comparing ``y`` with the mean.  On the line itself the first branch wins.
    """
    y = float(y)
    x_plus, x_minus = _turning_x(symbol, y)
    below = y <= symbol.mean_im
    x_end = x_minus if below else x_minus - TWO_PI
    G = symbol.antiderivative
    s = y * (x_end - x_plus) - (G(x_end) - G(x_plus)).imag
    d2s = 1.0 / symbol._im_dg(x_minus) - 1.0 / symbol._im_dg(x_plus)
    return ActionSample(s=max(float(s), 0.0), ds=float(x_end - x_plus), d2s=float(d2s), y=y)


def branch_integrals(symbol: FourierSymbol, y: float) -> tuple[float, float]:
    """Both candidate integrals entering the minimum that defines ``S``."""
    x_plus, x_minus = _turning_x(symbol, y)
    G = symbol.antiderivative
    one = y * (x_minus - x_plus) - (G(x_minus) - G(x_plus)).imag
    two = y * (x_minus - TWO_PI - x_plus) - (G(x_minus - TWO_PI) - G(x_plus)).imag
    return one, two


def bracket_factor(symbol: FourierSymbol, y: float) -> float:
    """``W = (-Im g'(x_plus)) * Im g'(x_minus)``, i.e. the product of the two
    half Poisson brackets ``(i/2){p, pbar}(rho_+) (i/2){pbar, p}(rho_-)``."""
    x_plus, x_minus = _turning_x(symbol, float(y))
    return -symbol._im_dg(x_plus) * symbol._im_dg(x_minus)


def boundary_distance(symbol: FourierSymbol, z: complex) -> float:
    y = complex(z).imag
    return min(y - symbol.im_min, symbol.im_max - y)


def max_action(symbol: FourierSymbol) -> float:
    """``S(<Im g>)``, the maximum of the action over the strip."""
    return action(symbol, symbol.mean_im).s


def exp_minus_ix() -> FourierSymbol:
    """The model symbol ``g(x) = exp(-ix)``."""
    return FourierSymbol({-1: 1.0})
