"""Probe kernels and compactly supported test functions for pairing sweeps.

Two kernel families can drive a pairing sweep:

* the directing construction from :mod:`asymptotica.mollifier` (certified
  membership, but its dilation recursion suppresses every higher moment by
  powers of the dilation factor, pushing decay signals below double
  precision), and
* polynomial-modulated probe kernels built here: even, unit mass, support
  radius 1, exact vanishing moments through order n, and an O(0.1) first
  surviving moment, so decay exponents are measurable across a sweep.

Probe kernels trade away the tight L1 bound of the directing class (they
oscillate), which does not affect decay-rate measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._bump import bump_deriv
from .quadrature import PanelAntiderivative, integrate_piecewise


@lru_cache(maxsize=None)
def _raw_moment(k: int) -> float:
    """Integral of x^k exp(-1/(1-x^2)) over [-1, 1]."""
    if k % 2 == 1:
        return 0.0
    val = integrate_piecewise(lambda x: x ** k * bump_deriv(x, 0),
                              [-1.0, 0.0, 1.0], tol=1e-14)
    return float(np.real(val))


def _binom(n: int, k: int) -> int:
    return math.comb(n, k)


class ProbeKernel:
    """Even kernel (c_0 + c_1 x^2 + ... + c_K x^2K) * exp(-1/(1-x^2)).

    The coefficients solve unit mass and zero even moments 2..2K, with
    K = floor(n/2); odd moments vanish by symmetry, so moments 1..n all
    vanish while the next even moment stays O(0.1).
    """

    def __init__(self, n: int):
        if n < 0:
            raise ValueError("level must be >= 0")
        self.level = n
        k = n // 2
        rows = [[_raw_moment(2 * (i + j)) for j in range(k + 1)]
                for i in range(k + 1)]
        rhs = [1.0] + [0.0] * k
        self.coeffs = np.linalg.solve(np.array(rows), np.array(rhs))
        self._cum: PanelAntiderivative | None = None

    @property
    def radius(self) -> float:
        return 1.0

    def feature_radii(self) -> list[float]:
        return [1.0]

    def _poly(self, x: np.ndarray, j: int) -> np.ndarray:
        """j-th derivative of the even modulation polynomial."""
        out = np.zeros_like(x)
        for i, c in enumerate(self.coeffs):
            p = 2 * i
            if p >= j:
                fall = math.prod(range(p - j + 1, p + 1))
                out = out + c * fall * x ** (p - j)
        return out

    def eval(self, x, alpha=0) -> np.ndarray:
        k = alpha if isinstance(alpha, int) else sum(alpha)
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(np.atleast_1d(x))
        xi = np.atleast_1d(x)
        for j in range(k + 1):
            out = out + _binom(k, j) * self._poly(xi, j) * bump_deriv(xi, k - j)
        return float(out[0]) if x.ndim == 0 else out

    def cumulative(self, x):
        if self._cum is None:
            self._cum = PanelAntiderivative.build(
                lambda t: self.eval(t, 0), -1.0, 1.0, n_panels=64, deg=24)
        return self._cum.eval(x)

    def moment(self, k: int) -> float:
        if k % 2 == 1:
            return 0.0
        return float(sum(c * _raw_moment(2 * i + k)
                         for i, c in enumerate(self.coeffs)))


@lru_cache(maxsize=None)
def probe_kernel(n: int) -> ProbeKernel:
    return ProbeKernel(n)


@dataclass(frozen=True)
class ScaledKernel:
    """A prototype kernel rescaled to width eps with unit mass (d = 1)."""

    proto: object
    eps: float

    @property
    def radius(self) -> float:
        return self.eps * self.proto.radius

    def phi(self, x, k: int = 0):
        return self.proto.eval(np.asarray(x, dtype=float) / self.eps, k) \
            * self.eps ** (-1 - k)

    def cum(self, x):
        return self.proto.cumulative(np.asarray(x, dtype=float) / self.eps)

    def breakpoints(self) -> list[float]:
        pts = {0.0}
        for r in self.proto.feature_radii():
            s = self.eps * r
            pts.update((-s, s))
        return sorted(pts)


# -- test functions -----------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """x^power-weighted translated bump with closed-form derivatives.

    tau(x) = u^power * exp(1 - 1/(1 - u^2)),  u = (x - center)/radius;
    the plain bump (power 0) peaks at 1.
    """

    name: str
    center: float = 0.0
    radius: float = 1.0
    power: int = 0

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.radius, self.center + self.radius)

    def __call__(self, x):
        return self.deriv(x, 0)

    def deriv(self, x, k: int = 0):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        u = (np.atleast_1d(x) - self.center) / self.radius
        out = np.zeros_like(u)
        for j in range(k + 1):
            p = self.power
            if p >= j:
                fall = math.prod(range(p - j + 1, p + 1))
                out = out + _binom(k, j) * fall * u ** (p - j) * bump_deriv(u, k - j)
        out *= math.e / self.radius ** k
        return float(out[0]) if scalar else out

    @property
    def mass(self) -> float:
        """Integral over the support (cached per parameters)."""
        return _tau_mass(self.center, self.radius, self.power)

    def integral_from(self, a: float) -> float:
        """Integral of tau over [a, support end]."""
        lo, hi = self.support
        a = max(a, lo)
        if a >= hi:
            return 0.0
        val = integrate_piecewise(lambda x: self.deriv(x, 0),
                                  [a, min(max(self.center, a), hi), hi], tol=1e-14)
        return float(np.real(val))


@lru_cache(maxsize=None)
def _tau_mass(center: float, radius: float, power: int) -> float:
    tau = TestFunction("tmp", center, radius, power)
    lo, hi = tau.support
    val = integrate_piecewise(lambda x: tau.deriv(x, 0), [lo, center, hi], tol=1e-14)
    return float(np.real(val))


@dataclass(frozen=True)
class ProductTau:
    """A test function multiplied by a smooth factor (same duck interface)."""

    factor: object  # SmoothFn-like: deriv(x, k)
    base: TestFunction

    @property
    def name(self) -> str:
        return f"{self.factor.name}*{self.base.name}"

    @property
    def support(self) -> tuple[float, float]:
        return self.base.support

    def __call__(self, x):
        return self.factor.deriv(x, 0) * self.base(x)

    def deriv(self, x, k: int = 0):
        out = 0.0
        for j in range(k + 1):
            out = out + _binom(k, j) * self.factor.deriv(x, j) * self.base.deriv(x, k - j)
        return out

    def integral_from(self, a: float) -> float:
        lo, hi = self.support
        a = max(a, lo)
        if a >= hi:
            return 0.0
        val = integrate_piecewise(lambda x: self(x), [a, hi], tol=1e-14)
        return float(np.real(val))


def default_catalog() -> list[TestFunction]:
    """The default finite test-function catalog for weak verdicts."""
    return [
        TestFunction("bump", 0.0, 1.0, 0),
        TestFunction("xbump", 0.0, 1.0, 1),
        TestFunction("x2bump", 0.0, 1.0, 2),
        TestFunction("bump_r07_c03", 0.3, 0.7, 0),
        TestFunction("bump_r05_cm04", -0.4, 0.5, 0),
    ]


def decay_probe_tau() -> TestFunction:
    """Sharp off-center bump for decay-rate sweeps.

    Off center so that no derivative vanishes at the origin (a centered even
    bump has tau'(0) = 0, which zeroes the pairing signal for odd-order
    sources); sharp so that high derivatives at 0 are large enough to keep
    the decay signal above the quadrature floor for several scales.
    """
    return TestFunction("probe_tau", 0.03, 0.12, 0)


def catalog_by_name(name: str) -> TestFunction:
    for tau in default_catalog() + [decay_probe_tau()]:
        if tau.name == name:
            return tau
    raise KeyError(f"unknown test function {name!r}")
