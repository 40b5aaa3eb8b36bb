"""Construction and certification of vanishing-moment mollifiers.

A mollifier is an expression tree over the normalized smooth bump
(nodes: dilation, scaling, sum, tensor product, epsilon-rescale) together
with level metadata.  The generator kills moments recursively: at level k
it combines ``a * phi_{k-1}(x) + b * phi_{k-1}(m x)`` with

    a = -1 / (m^k - 1),      b = m^(k+1) / (m^k - 1),

which preserves unit mass and zeroes the k-th moment (odd moments vanish
by symmetry).  Tensorization produces d-dimensional kernels and the final
epsilon-rescale shrinks the support below 1/n while preserving mass and
moments, giving a member of the level-n mollifier class: real, even,
support radius <= 1/n, unit mass, vanishing moments through order n,
L1 norm <= 1 + 1/n, and derivative sups bounded by R^(-2(|alpha|+d)).

The certifier measures each condition by quadrature or dense sampling and
reports measured value vs bound; it never trusts construction metadata
for the analytic conditions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from ._bump import bump_deriv, bump_sup_deriv
from .quadrature import PanelAntiderivative, integrate_piecewise

MAX_LEVEL_TIMES_DIM = 8


class BadDilation(ValueError):
    """Dilation factor must exceed 2 for the derivative estimates to close."""


class LevelTooDeep(ValueError):
    """epsilon underflows double precision beyond n * d = 8."""


# -- the normalized base bump -------------------------------------------------

_BUMP_MASS: float | None = None
_F0: PanelAntiderivative | None = None
_SUP_CACHE: dict[int, float] = {}


def bump_mass() -> float:
    """Integral of exp(-1/(1-x^2)) over [-1, 1], by adaptive quadrature."""
    global _BUMP_MASS
    if _BUMP_MASS is None:
        _BUMP_MASS = float(np.real(integrate_piecewise(
            lambda x: bump_deriv(x, 0), [-1.0, 0.0, 1.0], tol=1e-14)))
    return _BUMP_MASS


def _f0() -> PanelAntiderivative:
    global _F0
    if _F0 is None:
        c = bump_mass()
        _F0 = PanelAntiderivative.build(lambda x: bump_deriv(x, 0) / c,
                                        -1.0, 1.0, n_panels=64, deg=24)
    return _F0


def base_sup(k: int) -> float:
    """Sampled supremum of the k-th derivative of the normalized bump."""
    if k not in _SUP_CACHE:
        _SUP_CACHE[k] = bump_sup_deriv(k) / bump_mass()
    return _SUP_CACHE[k]


# -- expression tree ----------------------------------------------------------

class Node:
    dim: int

    def eval(self, x: np.ndarray, alpha) -> np.ndarray:
        raise NotImplementedError

    @property
    def radius(self) -> float:
        raise NotImplementedError

    def feature_radii(self) -> list[float]:
        """Support radii of nested components (1-d trees only)."""
        raise NotImplementedError

    def cumulative(self, x):
        """Integral from -infinity to x (1-d trees only)."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _scalar_alpha(alpha) -> int:
    if isinstance(alpha, (tuple, list)):
        if len(alpha) != 1:
            raise ValueError("1-d tree evaluated with multi-index of wrong length")
        return int(alpha[0])
    return int(alpha)


@dataclass(frozen=True)
class BaseBump(Node):
    """exp(-1/(1-x^2)) / c on [-1, 1]; unit mass, radius exactly 1."""

    dim: int = field(default=1, init=False)

    def eval(self, x, alpha):
        return bump_deriv(np.asarray(x, dtype=float), _scalar_alpha(alpha)) / bump_mass()

    @property
    def radius(self):
        return 1.0

    def feature_radii(self):
        return [1.0]

    def cumulative(self, x):
        return _f0().eval(x)

    def to_dict(self):
        return {"kind": "base_bump"}


@dataclass(frozen=True)
class Dilate(Node):
    """x -> child(m x); support shrinks by 1/m."""

    m: float
    child: Node
    dim: int = field(default=1, init=False)

    def eval(self, x, alpha):
        k = _scalar_alpha(alpha)
        return self.m ** k * self.child.eval(np.asarray(x, dtype=float) * self.m, k)

    @property
    def radius(self):
        return self.child.radius / self.m

    def feature_radii(self):
        return [r / self.m for r in self.child.feature_radii()]

    def cumulative(self, x):
        return self.child.cumulative(np.asarray(x, dtype=float) * self.m) / self.m

    def to_dict(self):
        return {"kind": "dilate", "m": self.m, "child": self.child.to_dict()}


@dataclass(frozen=True)
class Scale(Node):
    """Pointwise multiplication by a real constant."""

    c: float
    child: Node

    @property
    def dim(self):
        return self.child.dim

    def eval(self, x, alpha):
        return self.c * self.child.eval(x, alpha)

    @property
    def radius(self):
        return self.child.radius

    def feature_radii(self):
        return self.child.feature_radii()

    def cumulative(self, x):
        return self.c * self.child.cumulative(x)

    def to_dict(self):
        return {"kind": "scale", "c": self.c, "child": self.child.to_dict()}


@dataclass(frozen=True)
class Sum(Node):
    children: tuple[Node, ...]

    def __init__(self, children: Iterable[Node]):
        object.__setattr__(self, "children", tuple(children))
        if len({c.dim for c in self.children}) != 1:
            raise ValueError("summands must share a dimension")

    @property
    def dim(self):
        return self.children[0].dim

    def eval(self, x, alpha):
        out = self.children[0].eval(x, alpha)
        for c in self.children[1:]:
            out = out + c.eval(x, alpha)
        return out

    @property
    def radius(self):
        return max(c.radius for c in self.children)

    def feature_radii(self):
        rs: set[float] = set()
        for c in self.children:
            rs.update(c.feature_radii())
        return sorted(rs)

    def cumulative(self, x):
        out = self.children[0].cumulative(x)
        for c in self.children[1:]:
            out = out + c.cumulative(x)
        return out

    def to_dict(self):
        return {"kind": "sum", "children": [c.to_dict() for c in self.children]}


@dataclass(frozen=True)
class TensorProduct(Node):
    factors: tuple[Node, ...]

    def __init__(self, factors: Iterable[Node]):
        object.__setattr__(self, "factors", tuple(factors))
        if any(f.dim != 1 for f in self.factors):
            raise ValueError("tensor factors must be 1-d")

    @property
    def dim(self):
        return len(self.factors)

    def eval(self, x, alpha):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1 and self.dim == 1:
            x = x[:, None]
        if isinstance(alpha, int):
            alpha = (alpha,) * self.dim
        out = self.factors[0].eval(x[..., 0], alpha[0])
        for i, f in enumerate(self.factors[1:], start=1):
            out = out * f.eval(x[..., i], alpha[i])
        return out

    @property
    def radius(self):
        return math.sqrt(sum(f.radius ** 2 for f in self.factors))

    def feature_radii(self):
        if self.dim == 1:
            return self.factors[0].feature_radii()
        raise NotImplementedError("per-axis features only for d >= 2")

    def cumulative(self, x):
        if self.dim == 1:
            return self.factors[0].cumulative(x)
        raise NotImplementedError("cumulative only defined for 1-d trees")

    def to_dict(self):
        return {"kind": "tensor", "factors": [f.to_dict() for f in self.factors]}


@dataclass(frozen=True)
class EpsilonScale(Node):
    """x -> child(x / eps) / eps^d: mass-preserving support shrink."""

    eps: float
    child: Node

    @property
    def dim(self):
        return self.child.dim

    def eval(self, x, alpha):
        d = self.dim
        if isinstance(alpha, int) and d > 1:
            alpha = (alpha,) * d
        order = alpha if isinstance(alpha, int) else sum(alpha)
        return self.eps ** (-d - order) * self.child.eval(
            np.asarray(x, dtype=float) / self.eps, alpha)

    @property
    def radius(self):
        return self.eps * self.child.radius

    def feature_radii(self):
        return [self.eps * r for r in self.child.feature_radii()]

    def cumulative(self, x):
        if self.dim != 1:
            raise NotImplementedError("cumulative only defined for 1-d trees")
        return self.child.cumulative(np.asarray(x, dtype=float) / self.eps)

    def to_dict(self):
        return {"kind": "eps_scale", "eps": self.eps, "child": self.child.to_dict()}


_NODE_KINDS = {"base_bump", "dilate", "scale", "sum", "tensor", "eps_scale"}


def node_from_dict(data: dict) -> Node:
    kind = data["kind"]
    if kind == "base_bump":
        return BaseBump()
    if kind == "dilate":
        return Dilate(float(data["m"]), node_from_dict(data["child"]))
    if kind == "scale":
        return Scale(float(data["c"]), node_from_dict(data["child"]))
    if kind == "sum":
        return Sum([node_from_dict(c) for c in data["children"]])
    if kind == "tensor":
        return TensorProduct([node_from_dict(f) for f in data["factors"]])
    if kind == "eps_scale":
        return EpsilonScale(float(data["eps"]), node_from_dict(data["child"]))
    raise ValueError(f"unknown node kind {kind!r}")


# -- the mollifier value ------------------------------------------------------

@dataclass(frozen=True)
class Mollifier:
    """An expression tree with level metadata; immutable after construction."""

    dim: int
    level: int
    expr: Node
    meta: dict = field(default_factory=dict)

    @property
    def radius(self) -> float:
        return self.expr.radius

    def eval(self, x, alpha=0):
        """Exact-expression evaluation of the alpha-derivative at x.

        Returns 0 outside the support.  ``x`` is scalar or ndarray for
        d = 1, or an (n, d) array otherwise; ``alpha`` is an int or a
        length-d multi-index.
        """
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        vals = self.expr.eval(np.atleast_1d(x), alpha)
        return float(vals[0]) if scalar else vals

    def cumulative(self, x):
        return self.expr.cumulative(x)

    def feature_radii(self):
        return self.expr.feature_radii()

    def to_json(self) -> dict:
        return {"dim": self.dim, "level": self.level, "radius": self.radius,
                "meta": dict(self.meta), "expr": self.expr.to_dict()}

    @classmethod
    def from_json(cls, data: dict) -> "Mollifier":
        return cls(dim=int(data["dim"]), level=int(data["level"]),
                   expr=node_from_dict(data["expr"]), meta=dict(data.get("meta", {})))


def base_bump() -> Mollifier:
    """The normalized bump: dim 1, level 0, unit mass, support radius 1."""
    return Mollifier(dim=1, level=0, expr=BaseBump(), meta={})


def moment_killer(n: int, m: float) -> Mollifier:
    """Level-n one-dimensional kernel with vanishing moments 1..n.

    ``m`` must exceed 2; the recursion keeps support radius 1, unit mass,
    and an L1 norm at most exp(3/(m-1)).
    """
    if n < 1:
        raise ValueError("level must be >= 1")
    if not m > 2:
        raise BadDilation(f"dilation factor must exceed 2, got {m}")
    expr: Node = BaseBump()
    for k in range(1, n + 1):
        a = -1.0 / (m ** k - 1.0)
        b = m ** (k + 1) / (m ** k - 1.0)
        expr = Sum([Scale(a, expr), Scale(b, Dilate(m, expr))])
    return Mollifier(dim=1, level=n, expr=expr, meta={"m": float(m), "n": n})


def tensorize(phi: Mollifier, d: int) -> Mollifier:
    """d-fold tensor product of a one-dimensional kernel."""
    if phi.dim != 1:
        raise ValueError("tensorize expects a 1-d mollifier")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d == 1:
        return phi
    expr = TensorProduct([phi.expr] * d)
    return Mollifier(dim=d, level=phi.level, expr=expr, meta=dict(phi.meta))


def prescribed_dilation(n: int, d: int) -> float:
    return float(9 * d * n)


def generate(n: int, d: int = 1, m: float | None = None) -> Mollifier:
    """Level-n, dimension-d member of the mollifier class, ready to certify."""
    if m is None:
        m = prescribed_dilation(n, d)
    return scale_to_level(tensorize(moment_killer(n, m), d), n)


def scale_to_level(psi: Mollifier, n: int) -> Mollifier:
    """Shrink a tensorized kernel's support below 1/n, preserving mass/moments.

    The rescale factor is

        eps = 1 / (2 d M (2m)^(d n)),    M = max(1, max_{|a|<=n} C_a),

    with C_a the product over axes of the sampled sup of the base bump's
    derivatives.  The extra factor 2 guards against the sampled sups
    underestimating the true maxima; shrinking eps strengthens every
    certified condition.
    """
    d = psi.dim
    if psi.level < n:
        raise ValueError(f"kernel kills moments to order {psi.level}, need {n}")
    if n * d > MAX_LEVEL_TIMES_DIM:
        raise LevelTooDeep(
            f"n*d = {n * d} exceeds {MAX_LEVEL_TIMES_DIM}: the rescale factor "
            "underflows double precision")
    m = float(psi.meta.get("m", prescribed_dilation(n, d)))
    caps = [base_sup(k) for k in range(n + 1)]
    M = 1.0
    for alpha in _multi_indices(d, n):
        c_alpha = math.prod(caps[a] for a in alpha)
        M = max(M, c_alpha)
    eps = 1.0 / (2.0 * d * M * (2.0 * m) ** (d * n))
    expr = EpsilonScale(eps, psi.expr)
    meta = dict(psi.meta)
    meta.update({"eps": eps, "M": M, "n": n})
    return Mollifier(dim=d, level=n, expr=expr, meta=meta)


def _multi_indices(d: int, max_order: int, min_order: int = 0):
    for total in range(min_order, max_order + 1):
        for alpha in itertools.product(range(total + 1), repeat=d):
            if sum(alpha) == total:
                yield alpha


# -- certification ------------------------------------------------------------

MOMENT_TOL = 1e-8
MASS_TOL = 1e-10
L1_SLACK = 1e-6
QUAD_TOL = 1e-12


@dataclass
class ConditionResult:
    name: str
    passed: bool
    measured: float
    bound: float
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": self.passed,
                "measured": self.measured, "bound": self.bound,
                "detail": self.detail}


@dataclass
class CertReport:
    level: int
    dim: int
    conditions: list[ConditionResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def to_dict(self):
        return {"level": self.level, "dim": self.dim, "passed": self.passed,
                "conditions": [c.to_dict() for c in self.conditions]}

    def __str__(self):
        lines = [f"certification against level {self.level} (dim {self.dim}): "
                 f"{'PASS' if self.passed else 'FAIL'}"]
        for c in self.conditions:
            mark = "ok " if c.passed else "FAIL"
            lines.append(f"  [{mark}] {c.name}: measured {c.measured:.6g} "
                         f"vs bound {c.bound:.6g} {c.detail}")
        return "\n".join(lines)


def _axis_trees(expr: Node) -> list[Node] | None:
    """Per-axis 1-d trees when the integrand factorizes exactly, else None."""
    if expr.dim == 1:
        return [expr]
    if isinstance(expr, TensorProduct):
        return list(expr.factors)
    if isinstance(expr, EpsilonScale):
        inner = _axis_trees(expr.child)
        if inner is not None:
            return [EpsilonScale(expr.eps, t) for t in inner]
    if isinstance(expr, Scale):
        inner = _axis_trees(expr.child)
        if inner is not None:
            return [Scale(expr.c, inner[0])] + inner[1:]
    return None


def _axis_breakpoints(tree: Node) -> list[float]:
    r = tree.radius
    pts = {-r, 0.0, r}
    for s in tree.feature_radii():
        pts.update((-s, s))
    return sorted(pts)


def _moment_1d(tree: Node, a: int, tol: float = QUAD_TOL) -> float:
    pts = _axis_breakpoints(tree)
    val = integrate_piecewise(lambda x: x ** a * tree.eval(x, 0), pts, tol=tol)
    return float(np.real(val))


def _l1_1d(tree: Node, tol: float = QUAD_TOL) -> float:
    pts = _axis_breakpoints(tree)
    val = integrate_piecewise(lambda x: np.abs(tree.eval(x, 0)), pts, tol=tol)
    return float(np.real(val))


def _sup_1d(tree: Node, k: int) -> float:
    """Dense sampling (4096/axis and per-feature subgrids) + one refinement."""
    r = tree.radius
    best_x, best_v = 0.0, 0.0
    step = r / 2048.0
    scales = sorted(set(tree.feature_radii()) | {r})
    for s in scales:
        grid = np.linspace(-s, s, 4097)
        vals = np.abs(tree.eval(grid, k))
        i = int(np.argmax(vals))
        if vals[i] > best_v:
            best_v, best_x = float(vals[i]), float(grid[i])
            step = grid[1] - grid[0]
    fine = np.linspace(best_x - 2 * step, best_x + 2 * step, 2049)
    vals = np.abs(tree.eval(fine, k))
    return max(best_v, float(np.max(vals)))


def _log_sup(expr: Node, alpha: tuple[int, ...]) -> float:
    """log of the sampled sup of |partial^alpha expr|, exact in structure.

    EpsilonScale and TensorProduct factors are composed in log space so that
    extreme rescales cannot overflow the comparison.
    """
    if isinstance(expr, EpsilonScale):
        d = expr.dim
        order = sum(alpha)
        return -(d + order) * math.log(expr.eps) + _log_sup(expr.child, alpha)
    if isinstance(expr, TensorProduct) and expr.dim > 1:
        return sum(_log_sup(f, (alpha[i],)) for i, f in enumerate(expr.factors))
    if expr.dim == 1:
        s = _sup_1d(expr, alpha[0])
        return math.log(s) if s > 0 else -math.inf
    raise NotImplementedError("sup sampling requires a factorizable tree for d >= 2")


def certify(phi: Mollifier, n: int, *, quad_tol: float = QUAD_TOL) -> CertReport:
    """Measure the seven membership conditions of the level-n class.

    Each condition is measured (quadrature or dense sampling), never taken
    from construction metadata; failures are report entries, not errors.
    """
    expr = phi.expr
    d = phi.dim
    R = phi.radius
    conditions: list[ConditionResult] = []

    axes = _axis_trees(expr)
    if axes is None:
        raise NotImplementedError(
            "certification requires a 1-d tree or a tensor-factorizable tree")

    # realness + evenness on a probe grid (per axis; the tensor structure
    # preserves both)
    probe_even = 0.0
    scale0 = 0.0
    for t in axes:
        grid = np.linspace(0.0, t.radius, 1024)
        vp = t.eval(grid, 0)
        vm = t.eval(-grid, 0)
        probe_even = max(probe_even, float(np.max(np.abs(vp - vm))))
        scale0 = max(scale0, float(np.max(np.abs(vp))))
    conditions.append(ConditionResult(
        "real_valued", True, 0.0, 0.0,
        "(tree coefficients and evaluator are real by construction)"))
    even_tol = 1e-12 * max(scale0, 1.0)
    conditions.append(ConditionResult(
        "even_symmetry", probe_even <= even_tol, probe_even, even_tol,
        "max |phi(x)-phi(-x)| on probe grid"))

    bound_r = 1.0 / n
    conditions.append(ConditionResult(
        "support_radius", R <= bound_r + 1e-15, R, bound_r, "radius vs 1/n"))

    # mass and moments factorize across axes exactly
    axis_cache: dict[tuple[int, int], float] = {}

    def axis_moment(i: int, a: int) -> float:
        key = (i, a)
        if key not in axis_cache:
            axis_cache[key] = _moment_1d(axes[i], a, tol=quad_tol)
        return axis_cache[key]

    mass = math.prod(axis_moment(i, 0) for i in range(d))
    conditions.append(ConditionResult(
        "unit_mass", abs(mass - 1.0) <= MASS_TOL, mass, 1.0,
        f"(tolerance {MASS_TOL:g})"))

    worst_moment = 0.0
    worst_alpha = None
    for alpha in _multi_indices(d, n, min_order=1):
        mom = math.prod(axis_moment(i, alpha[i]) for i in range(d))
        if abs(mom) > worst_moment:
            worst_moment, worst_alpha = abs(mom), alpha
    conditions.append(ConditionResult(
        "vanishing_moments", worst_moment <= MOMENT_TOL, worst_moment, MOMENT_TOL,
        f"worst |moment| at alpha={worst_alpha}"))

    l1 = math.prod(_l1_1d(t, tol=quad_tol) for t in axes)
    l1_bound = 1.0 + 1.0 / n + L1_SLACK
    conditions.append(ConditionResult(
        "l1_norm", l1 <= l1_bound, l1, 1.0 + 1.0 / n, f"(slack {L1_SLACK:g})"))

    worst_excess = -math.inf
    worst_alpha = None
    log_r = math.log(R)
    for alpha in _multi_indices(d, n):
        log_sup = _log_sup(expr, alpha)
        log_bound = -2.0 * (sum(alpha) + d) * log_r
        excess = log_sup - log_bound
        if excess > worst_excess:
            worst_excess, worst_alpha = excess, alpha
    conditions.append(ConditionResult(
        "derivative_sups", worst_excess <= 0.0, worst_excess, 0.0,
        f"worst log(sup) - log(bound) at alpha={worst_alpha} (sampled sups)"))

    return CertReport(level=n, dim=d, conditions=conditions)
