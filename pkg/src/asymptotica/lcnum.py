"""Truncated Levi-Civita arithmetic: the computable asymptotic scalar.

An ``LCNumber`` is a finite series  sum_i  c_i * rho^(q_i)  with exact
rational exponents q_i (strictly increasing) and complex double
coefficients, truncated at a rational order: exponents at or above the
truncation order are discarded and the value is flagged as truncated.

Exponent arithmetic is exact, so valuation laws (v(ab) = v(a) + v(b),
ultrametric inequalities, order compatibility) hold exactly; coefficient
arithmetic is ordinary floating point with a relative cleanup threshold
that keeps roundoff dust from corrupting valuations.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

INFINITY = math.inf

DEFAULT_TRUNCATION = Fraction(12)

# relative coefficient magnitude below which a term is considered noise
CLEANUP_REL = 1e-14


class NegativeOperand(ValueError):
    """Square root of a negative real series was requested."""


class NotFinite(ArithmeticError):
    """Standard part of an infinitely large number was requested."""


class Unresolvable(ArithmeticError):
    """Root refinement failed to converge on one Newton-polygon branch."""

    def __init__(self, message: str, slope=None):
        super().__init__(message)
        self.slope = slope


def _as_fraction(q) -> Fraction:
    if isinstance(q, Fraction):
        return q
    if isinstance(q, int):
        return Fraction(q)
    if isinstance(q, float) and q.is_integer():
        return Fraction(int(q))
    return Fraction(q)


class LCNumber:
    """Immutable truncated series over the formal positive infinitesimal rho."""

    __slots__ = ("terms", "truncation_order", "truncated")

    def __init__(self, terms: Iterable[tuple[Fraction, complex]] = (),
                 truncation_order=DEFAULT_TRUNCATION, *, truncated: bool = False,
                 _canonical: bool = False):
        trunc = _as_fraction(truncation_order)
        if _canonical:
            tms = tuple(terms)
        else:
            tms, dropped = _canonicalize(terms, trunc)
            truncated = truncated or dropped
        object.__setattr__(self, "terms", tms)
        object.__setattr__(self, "truncation_order", trunc)
        object.__setattr__(self, "truncated", truncated)

    def __setattr__(self, name, value):
        raise AttributeError("LCNumber is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, c, truncation_order=DEFAULT_TRUNCATION) -> "LCNumber":
        return cls([(Fraction(0), complex(c))], truncation_order)

    @classmethod
    def rho(cls, q=1, coeff=1.0, truncation_order=DEFAULT_TRUNCATION) -> "LCNumber":
        """Monomial coeff * rho^q."""
        return cls([(_as_fraction(q), complex(coeff))], truncation_order)

    @classmethod
    def zero(cls, truncation_order=DEFAULT_TRUNCATION) -> "LCNumber":
        return cls((), truncation_order)

    # -- basic structure ---------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_real(self, rel_tol: float = 1e-12) -> bool:
        if not self.terms:
            return True
        scale = max(abs(c) for _, c in self.terms)
        return all(abs(c.imag) <= rel_tol * scale for _, c in self.terms)

    def real_part(self) -> "LCNumber":
        return LCNumber([(q, complex(c.real, 0.0)) for q, c in self.terms],
                        self.truncation_order, truncated=self.truncated)

    def leading(self) -> tuple[Fraction, complex]:
        if not self.terms:
            raise ZeroDivisionError("zero series has no leading term")
        return self.terms[0]

    def coefficient(self, q) -> complex:
        q = _as_fraction(q)
        for e, c in self.terms:
            if e == q:
                return c
            if e > q:
                break
        return 0.0

    def prune(self, abs_tol: float) -> "LCNumber":
        """Drop terms with |coefficient| <= abs_tol (noise removal for tests)."""
        return LCNumber([(q, c) for q, c in self.terms if abs(c) > abs_tol],
                        self.truncation_order, truncated=self.truncated)

    def retruncate(self, truncation_order) -> "LCNumber":
        return LCNumber(self.terms, truncation_order, truncated=self.truncated)

    # -- equality / hashing -------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, LCNumber):
            other = _coerce(other, self.truncation_order)
            if other is NotImplemented:
                return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other, self.truncation_order)
        if other is NotImplemented:
            return NotImplemented
        trunc = min(self.truncation_order, other.truncation_order)
        merged = list(self.terms) + list(other.terms)
        return LCNumber(merged, trunc,
                        truncated=self.truncated or other.truncated)

    __radd__ = __add__

    def __neg__(self):
        return LCNumber([(q, -c) for q, c in self.terms], self.truncation_order,
                        truncated=self.truncated, _canonical=True)

    def __sub__(self, other):
        other = _coerce(other, self.truncation_order)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other, self.truncation_order)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _coerce(other, self.truncation_order)
        if other is NotImplemented:
            return NotImplemented
        trunc = min(self.truncation_order, other.truncation_order)
        if not self.terms or not other.terms:
            return LCNumber((), trunc,
                            truncated=self.truncated or other.truncated)
        acc: dict[Fraction, complex] = {}
        dropped = False
        for qa, ca in self.terms:
            for qb, cb in other.terms:
                q = qa + qb
                if q >= trunc:
                    dropped = True
                    break  # other.terms ascending: rest only larger
                acc[q] = acc.get(q, 0.0) + ca * cb
        return LCNumber(acc.items(), trunc,
                        truncated=dropped or self.truncated or other.truncated)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other, self.truncation_order)
        if other is NotImplemented:
            return NotImplemented
        return self * inverse(other)

    def __rtruediv__(self, other):
        other = _coerce(other, self.truncation_order)
        if other is NotImplemented:
            return NotImplemented
        return other * inverse(self)

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return inverse(self.__pow__(-n))
        out = LCNumber.constant(1.0, self.truncation_order)
        base = self
        k = n
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def __abs__(self) -> "LCNumber":
        """Field absolute value for real series: a * sign(a)."""
        s = sign(self)
        return self if s >= 0 else -self

    # -- display / serialization --------------------------------------------

    def __repr__(self):
        return f"LCNumber({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for q, c in self.terms:
            parts.append(_format_term(q, c, first=not parts))
        s = " ".join(parts)
        if self.truncated:
            s += f" + O(rho^{_format_exponent(self.truncation_order)})"
        return s

    def to_json(self) -> dict:
        return {
            "terms": [[q.numerator, q.denominator, c.real, c.imag]
                      for q, c in self.terms],
            "trunc": [self.truncation_order.numerator,
                      self.truncation_order.denominator],
        }

    @classmethod
    def from_json(cls, data: dict) -> "LCNumber":
        terms = [(Fraction(n, d), complex(re, im))
                 for n, d, re, im in data["terms"]]
        trunc = Fraction(data["trunc"][0], data["trunc"][1])
        return cls(terms, trunc)


def _coerce(x, trunc: Fraction):
    if isinstance(x, LCNumber):
        return x
    if isinstance(x, (int, float, complex, Fraction)):
        c = complex(x)
        if c == 0:
            return LCNumber((), trunc)
        return LCNumber([(Fraction(0), c)], trunc)
    return NotImplemented


def _canonicalize(terms, trunc: Fraction):
    acc: dict[Fraction, complex] = {}
    dropped = False
    for q, c in terms:
        q = _as_fraction(q)
        if q >= trunc:
            dropped = True
            continue
        acc[q] = acc.get(q, 0.0) + complex(c)
    if not acc:
        return (), dropped
    scale = max(abs(c) for c in acc.values())
    floor = CLEANUP_REL * scale
    kept = sorted((q, c) for q, c in acc.items() if c != 0 and abs(c) > floor)
    return tuple(kept), dropped


def _format_exponent(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"({q})"


def _format_term(q: Fraction, c: complex, first: bool) -> str:
    if c.imag == 0.0:
        mag, sgn = abs(c.real), c.real < 0
        coeff = f"{mag:.12g}"
        lead = "-" if (sgn and first) else ""
        joiner = "- " if sgn else "+ "
    else:
        coeff = f"({c.real:.12g}{c.imag:+.12g}j)"
        lead = ""
        joiner = "+ "
    if q == 0:
        body = coeff
    else:
        var = "rho" if q == 1 else f"rho^{_format_exponent(q)}"
        body = var if coeff == "1" else f"{coeff}*{var}"
    return (lead + body) if first else (joiner + body)


# -- field operations --------------------------------------------------------

def arith(a: LCNumber, b: LCNumber, op: str) -> LCNumber:
    """Dispatch add/sub/mul; results are re-truncated and canonical."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def valuation(a: LCNumber):
    """Leading exponent as an exact Fraction; INFINITY for zero."""
    if not a.terms:
        return INFINITY
    return a.terms[0][0]


def ultra_norm(a: LCNumber) -> float:
    v = valuation(a)
    return 0.0 if v is INFINITY else math.exp(-float(v))


def ultra_metric(a: LCNumber, b: LCNumber) -> float:
    return ultra_norm(a - b)


def sign(a: LCNumber) -> int:
    """Sign of a real series: the sign of its leading coefficient."""
    if not a.terms:
        return 0
    c = a.terms[0][1]
    return 1 if c.real > 0 else (-1 if c.real < 0 else 0)


def compare(a: LCNumber, b) -> int:
    """Total-order comparison of real series: sign(a - b)."""
    return sign(a - b)


def classify(a: LCNumber) -> str:
    v = valuation(a)
    if v is INFINITY or v > 0:
        return "infinitesimal"
    if v == 0:
        return "finite"
    return "infinitely_large"


def standard_part(a: LCNumber) -> complex:
    if classify(a) == "infinitely_large":
        raise NotFinite(f"no standard part: {a} is infinitely large")
    return a.coefficient(0)


def inverse(a: LCNumber) -> LCNumber:
    """Multiplicative inverse by leading-monomial factorization + Newton.

    The result preserves the relative depth of the input: it carries
    truncation ``T - v(a)``, i.e. it knows as many orders past its own
    leading exponent ``-v(a)`` as the input did past ``v(a)``.  That depth
    makes the residual  a * inverse(a) - 1  vanish identically after
    re-truncation, so its valuation meets ``>= T - 2 v(a)`` for ``v(a) <= 0``
    and ``>= T`` otherwise (as INFINITY, up to coefficient roundoff dust).
    """
    if not a.terms:
        raise ZeroDivisionError("inverse of zero LCNumber")
    T = a.truncation_order
    v, c0 = a.leading()
    out_trunc = T - 2 * v if v > 0 else T - v
    # u = a / (c0 rho^v) - 1 has positive valuation; invert 1 + u by Newton.
    # The unit series is computed exactly as deep as the output needs: deeper
    # series grow geometrically in coefficient size and defeat the cleanup.
    depth = min(out_trunc + v, T - v)
    u = LCNumber([(q - v, c / c0) for q, c in a.terms[1:]], depth,
                 truncated=a.truncated)
    inv_unit = _invert_one_plus(u, depth)
    return LCNumber([(q - v, c / c0) for q, c in inv_unit.terms], out_trunc,
                    truncated=a.truncated or inv_unit.truncated)


def _invert_one_plus(u: LCNumber, depth: Fraction) -> LCNumber:
    """(1 + u)^-1 for v(u) > 0, exact modulo rho^depth."""
    one = LCNumber.constant(1.0, depth)
    if u.is_zero():
        return one
    x = one - u
    target = one + u
    for _ in range(64):
        r = one - target * x
        if r.is_zero():
            break
        x = x + x * r
    return x


def sqrt_nonneg(a: LCNumber) -> LCNumber:
    """Square root of a non-negative real series.

    Leading exponent of the result is v(a)/2.  The residual result^2 - a
    vanishes identically after re-truncation, so its valuation meets
    ``>= T - v(a)`` (as INFINITY, up to coefficient roundoff dust).
    """
    s = sign(a)
    if s < 0:
        raise NegativeOperand(f"sqrt of negative series {a}")
    T = a.truncation_order
    if not a.terms:
        return LCNumber.zero(T)
    v, c0 = a.leading()
    out_trunc = T - v / 2
    depth = T - v
    u = LCNumber([(q - v, c / c0.real) for q, c in a.terms[1:]], depth,
                 truncated=a.truncated)
    root_unit = _sqrt_one_plus(u, depth)
    lead = math.sqrt(c0.real)
    return LCNumber([(q + v / 2, lead * c) for q, c in root_unit.terms],
                    out_trunc, truncated=a.truncated or root_unit.truncated)


def _sqrt_one_plus(u: LCNumber, depth: Fraction) -> LCNumber:
    """(1 + u)^(1/2) for v(u) > 0 via Newton on the inverse square root."""
    one = LCNumber.constant(1.0, depth)
    if u.is_zero():
        return one
    target = one + u
    z = one - 0.5 * u  # seed for 1/sqrt(1+u)
    half = 0.5
    for _ in range(64):
        r = one - target * z * z
        if r.is_zero():
            break
        z = z + half * (z * r)
    return target * z


# -- polynomial roots ---------------------------------------------------------

# Numerical roots of an exact r-fold root scatter like eps^(1/r), so the
# first pass clusters generously; recursive recenterings shrink the tolerance
# down to the 1e-12 discriminant tolerance at which clusters count as exact.
_CLUSTER_TOLS = (1e-3, 1e-6, 1e-9, 1e-12)
_MAX_BRANCH_DEPTH = 32


def poly_roots(coeffs: Sequence[LCNumber], *, _depth: int = 0) -> list[LCNumber]:
    """All roots (with multiplicity) of a polynomial with LCNumber coefficients.

    ``coeffs`` is ascending: coeffs[i] multiplies x^i.  The polynomial is
    normalized to monic internally.  Initial root exponents come from the
    lower Newton polygon of (i, v(c_i)); each branch is seeded with the
    roots of the reduced complex polynomial of its segment and polished by
    Newton iteration in LCNumber arithmetic.  Root clusters closer than the
    splitting tolerance are separated by recentering and recursing.

    Guarantee checked by the test suite: each returned root r satisfies
    v(P(r)) >= T - margin with margin = (deg - 1) * max(0, -min segment
    slope), the loss coming from the spread of the other roots.
    """
    coeffs = list(coeffs)
    while coeffs and coeffs[-1].is_zero():
        coeffs.pop()
    if len(coeffs) < 2:
        raise ValueError("polynomial degree must be >= 1 with nonzero leading coefficient")
    T = min(c.truncation_order for c in coeffs)
    degree = len(coeffs) - 1

    lead = coeffs[-1]
    if lead != 1:
        inv_lead = inverse(lead)
        coeffs = [c * inv_lead for c in coeffs[:-1]] + [LCNumber.constant(1.0, T)]

    if _depth == 0:
        # small elevation protects the final retruncation; deeper elevation is
        # counterproductive (series coefficients grow geometrically with depth
        # and overwhelm the relative cleanup threshold)
        work = T + 2
        coeffs = [c.retruncate(work) for c in coeffs]
        roots = poly_roots(coeffs, _depth=1)
        return [r.retruncate(T) for r in roots]

    if _depth > _MAX_BRANCH_DEPTH:
        raise Unresolvable("root cluster failed to separate", slope=None)

    work = min(c.truncation_order for c in coeffs)

    roots: list[LCNumber] = []
    # exact zero roots: strip vanishing low coefficients
    k = 0
    while k < degree and coeffs[k].is_zero():
        k += 1
    if k:
        roots.extend(LCNumber.zero(work) for _ in range(k))
        coeffs = coeffs[k:]
        degree -= k
    if degree == 0:
        return roots
    if degree == 1:
        roots.append(-coeffs[0])
        return roots

    for lam, _span in _polygon_segments(coeffs):
        reduced = _reduced_polynomial(coeffs, lam)
        for y0, mult in _clustered_roots(reduced, _depth):
            if mult == 1:
                # recentering separates the branch: the shifted polynomial has
                # a valuation-0 derivative at 0, where term-by-term lifting is
                # unconditionally stable (a direct Newton seed on the original
                # polynomial is not, when other roots sit at lower valuations)
                shifted = _recenter(coeffs, lam, y0)
                z = _lift_from_zero(shifted, lam)
                y = z + y0
                roots.append(LCNumber([(q + lam, c) for q, c in y.terms], work,
                                      truncated=y.truncated))
            else:
                y0 = _snap_center(reduced, y0, mult)
                shifted = _prune_coeffs(_recenter(coeffs, lam, y0))
                branch = poly_roots(shifted, _depth=_depth + 1)
                picked = sorted((r for r in branch if valuation(r) > 0),
                                key=lambda r: (float(valuation(r)) if r.terms else math.inf))
                if len(picked) < mult:
                    raise Unresolvable(
                        f"expected {mult} sub-roots on branch, found {len(picked)}",
                        slope=lam)
                for z in picked[:mult]:
                    y = z + y0
                    roots.append(LCNumber([(q + lam, c) for q, c in y.terms], work,
                                          truncated=y.truncated))
    return roots


def _polygon_segments(coeffs):
    """(root valuation, multiplicity span) per lower Newton-polygon segment."""
    pts = [(i, valuation(c)) for i, c in enumerate(coeffs) if not c.is_zero()]
    hull = _lower_hull(pts)
    return [((v1 - v2) / (i2 - i1), i2 - i1)
            for (i1, v1), (i2, v2) in zip(hull, hull[1:])]


def _recenter(coeffs, lam: Fraction, y0: complex) -> list[LCNumber]:
    """Coefficients in z of P(rho^lam * (y0 + z)), renormalized to monic."""
    p = len(coeffs) - 1
    scaled = [LCNumber([(q + (i - p) * lam, c) for q, c in coeffs[i].terms],
                       coeffs[i].truncation_order, truncated=coeffs[i].truncated)
              for i in range(len(coeffs))]
    # Taylor shift by y0 via repeated synthetic division
    b = list(scaled)
    y = complex(y0)
    for k in range(p):
        for j in range(p - 1, k - 1, -1):
            b[j] = b[j] + y * b[j + 1]
    return b


def _lower_hull(pts):
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (p[0] - x1) >= (p[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def _reduced_polynomial(coeffs, lam: Fraction) -> list[complex]:
    """Leading complex coefficients along the polygon segment of slope -lam."""
    mu = min(valuation(c) + i * lam for i, c in enumerate(coeffs) if not c.is_zero())
    out = []
    for i, c in enumerate(coeffs):
        if not c.is_zero() and valuation(c) + i * lam == mu:
            out.append(c.leading()[1])
        else:
            out.append(0.0)
    return out


def _clustered_roots(reduced: list[complex], depth: int):
    lo = 0
    while lo < len(reduced) and reduced[lo] == 0.0:
        lo += 1
    hi = len(reduced) - 1
    while hi > lo and reduced[hi] == 0.0:
        hi -= 1
    core = reduced[lo:hi + 1]
    if len(core) < 2:
        return []
    tol = _CLUSTER_TOLS[min(max(depth - 1, 0), len(_CLUSTER_TOLS) - 1)]
    raw = sorted(np.roots(core[::-1]), key=lambda z: (z.real, z.imag))
    scale = max(1.0, max(abs(z) for z in raw))
    clusters: list[list[complex]] = []
    for z in raw:
        for cl in clusters:
            if abs(z - cl[0]) <= tol * scale:
                cl.append(z)
                break
        else:
            clusters.append([complex(z)])
    return [(sum(cl) / len(cl), len(cl)) for cl in clusters]


_SPLIT_TOL = 1e-12  # standard-part tolerance below which a root cluster is exact


def _snap_center(reduced: list[complex], y0: complex, mult: int) -> complex:
    """Refine a multiplicity-``mult`` cluster center to machine precision.

    The center is a simple root of the (mult-1)-th derivative of the reduced
    polynomial, where plain Newton converges quadratically.
    """
    c = np.array(reduced, dtype=complex)
    for _ in range(mult - 1):
        c = np.polynomial.polynomial.polyder(c)
    d = np.polynomial.polynomial.polyder(c)
    y = complex(y0)
    for _ in range(20):
        dv = np.polynomial.polynomial.polyval(y, d)
        if dv == 0:
            break
        step = np.polynomial.polynomial.polyval(y, c) / dv
        y -= step
        if abs(step) < 1e-15 * max(1.0, abs(y)):
            break
    return y


def _prune_coeffs(coeffs: list[LCNumber]) -> list[LCNumber]:
    scale = max((max((abs(c) for _, c in f.terms), default=0.0) for f in coeffs),
                default=0.0)
    if scale == 0.0:
        return coeffs
    return [f.prune(_SPLIT_TOL * scale) for f in coeffs]


def _poly_eval(coeffs, x: LCNumber) -> LCNumber:
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * x + c
    return acc


def _lift_from_zero(coeffs, lam) -> LCNumber:
    """Lift the positive-valuation root of a separated branch from z = 0.

    Only the leading term of each Newton correction is applied.  Full
    corrections carry a speculative deep tail whose coefficients grow
    geometrically; evaluating the polynomial at such an iterate squares the
    tail and the resulting spread defeats the relative coefficient cleanup.
    Term-by-term lifting keeps every iterate's coefficients at the scale of
    the true root.  The fixed point is exact: once corrections fall below
    the cleanup threshold the iterate stops changing.
    """
    dcoeffs = [i * c for i, c in enumerate(coeffs)][1:]
    stop = min(c.truncation_order for c in coeffs)
    x = LCNumber.zero(stop)
    last_v = None
    stall = 0
    for _ in range(400):
        px = _poly_eval(coeffs, x)
        if px.is_zero():
            return x
        dpx = _poly_eval(dcoeffs, x)
        if dpx.is_zero():
            raise Unresolvable("vanishing derivative during branch lifting", slope=lam)
        # leading term of the Newton correction px/dpx, without the full
        # series inverse (whose deep tail has geometrically large
        # coefficients that defeat the relative cleanup)
        pq, pc = px.leading()
        dq, dc = dpx.leading()
        lead_q = pq - dq
        if lead_q >= stop:
            return x
        lead_c = pc / dc
        if lead_q <= 0 and abs(lead_c) > 1e-6:
            # a large correction at exponent <= 0 means the branch seed was
            # wrong; small ones are roundoff refinements of the seed center
            raise Unresolvable("branch lifting left the positive-valuation cone",
                               slope=lam)
        nxt = x - LCNumber([(lead_q, lead_c)], x.truncation_order, _canonical=True)
        if nxt == x:
            return x
        if last_v is not None and lead_q <= last_v:
            stall += 1
            if stall >= 4:
                return x  # corrections no longer gain depth: noise floor
        else:
            stall = 0
        last_v = lead_q
        x = nxt
    raise Unresolvable("branch lifting did not converge", slope=lam)
