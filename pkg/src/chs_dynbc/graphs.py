"""Maximal monotone graphs, Yosida regularization, potentials and the coupling g.

A graph ``beta = d(beta_hat)`` is stored through its minimal section, its convex
antiderivative and its effective domain.  Everything here is vectorized over
numpy arrays and immutable once constructed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import xlogy

ArrayFn = Callable[[np.ndarray], np.ndarray]

RESOLVENT_MAXITER = 200


class DomainError(ValueError):
    """A value was requested outside the effective domain of a graph."""


class ResolventError(RuntimeError):
    """The scalar root-find behind a resolvent evaluation did not converge."""


@dataclass(frozen=True)
class MonotoneGraph:
    """Maximal monotone graph on the real line.

    ``kind`` is one of ``"smooth"``, ``"singular"`` (blows up at finite
    endpoints of an open domain) or ``"multivalued"`` (vertical branches at
    closed endpoints, e.g. the subdifferential of an indicator).
    """

    name: str
    domain_lo: float
    domain_hi: float
    minimal_section: ArrayFn
    antiderivative: ArrayFn
    slope: ArrayFn
    kind: str = "smooth"
    closed: bool = True
    exact_resolvent: Optional[Callable[[float, np.ndarray], np.ndarray]] = field(
        default=None, repr=False)
    exact_yosida_slope: Optional[Callable[[float, np.ndarray], np.ndarray]] = field(
        default=None, repr=False)

    def contains(self, r):
        r = np.asarray(r, dtype=float)
        if self.closed:
            return (r >= self.domain_lo) & (r <= self.domain_hi)
        return (r > self.domain_lo) & (r < self.domain_hi)

    def section(self, r):
        """Minimal section with a domain check."""
        r = np.asarray(r, dtype=float)
        if not np.all(self.contains(r)):
            raise DomainError(f"{self.name}: value outside D(beta) = "
                              f"{_interval_str(self)}")
        return self.minimal_section(r)

    def potential(self, r):
        """Antiderivative, +inf outside the domain."""
        r = np.asarray(r, dtype=float)
        inside = self.contains(r)
        out = np.full(r.shape, np.inf)
        out[inside] = self.antiderivative(r[inside])
        return out[()] if out.ndim == 0 else out

    @property
    def bounded(self) -> bool:
        return np.isfinite(self.domain_lo) and np.isfinite(self.domain_hi)


def _interval_str(graph: MonotoneGraph) -> str:
    left, right = ("[", "]") if graph.closed else ("(", ")")
    return f"{left}{graph.domain_lo}, {graph.domain_hi}{right}"


def domain_contains_domain(inner: MonotoneGraph, outer: MonotoneGraph) -> bool:
    """True if D(inner) is a subset of D(outer)."""
    lo_ok = inner.domain_lo > outer.domain_lo or (
        inner.domain_lo == outer.domain_lo
        and (outer.closed or not inner.closed or np.isinf(inner.domain_lo)))
    hi_ok = inner.domain_hi < outer.domain_hi or (
        inner.domain_hi == outer.domain_hi
        and (outer.closed or not inner.closed or np.isinf(inner.domain_hi)))
    return bool(lo_ok and hi_ok)


def domain_samples(graph: MonotoneGraph, n: int, margin: float = 1e-6,
                   span: float = 10.0) -> np.ndarray:
    """Equispaced samples inside the domain; unbounded sides are cut at ``span``."""
    lo = graph.domain_lo if np.isfinite(graph.domain_lo) else -span
    hi = graph.domain_hi if np.isfinite(graph.domain_hi) else span
    if not graph.closed:
        lo = lo + margin if np.isfinite(graph.domain_lo) else lo
        hi = hi - margin if np.isfinite(graph.domain_hi) else hi
    return np.linspace(lo, hi, n)


# ---------------------------------------------------------------------------
# canonical graphs

def cubic_graph(scale: float = 1.0) -> MonotoneGraph:
    """beta(r) = scale * r**3, the monotone part of the quartic double well."""
    return MonotoneGraph(
        name="cubic" if scale == 1.0 else f"{scale:g}*cubic",
        domain_lo=-np.inf, domain_hi=np.inf,
        minimal_section=lambda r: scale * r ** 3,
        antiderivative=lambda r: 0.25 * scale * r ** 4,
        slope=lambda r: 3.0 * scale * r ** 2,
        kind="smooth")


def logarithmic_graph() -> MonotoneGraph:
    """beta(r) = ln((1+r)/(1-r)) on (-1, 1)."""
    def section(r):
        with np.errstate(divide="ignore"):
            return 2.0 * np.arctanh(r)

    def slope(r):
        with np.errstate(divide="ignore"):
            return 2.0 / (1.0 - r * r)

    return MonotoneGraph(
        name="logarithmic", domain_lo=-1.0, domain_hi=1.0,
        minimal_section=section,
        antiderivative=lambda r: xlogy(1.0 + r, 1.0 + r) + xlogy(1.0 - r, 1.0 - r),
        slope=slope, kind="singular", closed=False)


def obstacle_graph() -> MonotoneGraph:
    """Subdifferential of the indicator of [-1, 1]."""
    def resolvent(eps, r):
        return np.clip(r, -1.0, 1.0)

    def ys(eps, r):
        return np.where(np.abs(r) > 1.0, 1.0 / eps, 0.0)

    return MonotoneGraph(
        name="obstacle", domain_lo=-1.0, domain_hi=1.0,
        minimal_section=lambda r: np.zeros_like(r),
        antiderivative=lambda r: np.zeros_like(r),
        slope=lambda r: np.zeros_like(r),
        kind="multivalued", closed=True,
        exact_resolvent=resolvent, exact_yosida_slope=ys)


def linear_graph(a: float = 1.0) -> MonotoneGraph:
    """beta(r) = a*r; its Yosida approximation is a*r/(1 + eps*a)."""
    if a < 0:
        raise ValueError("a linear monotone graph needs a >= 0")
    return MonotoneGraph(
        name="linear", domain_lo=-np.inf, domain_hi=np.inf,
        minimal_section=lambda r: a * r,
        antiderivative=lambda r: 0.5 * a * r * r,
        slope=lambda r: np.full_like(r, a),
        kind="smooth",
        exact_resolvent=lambda eps, r: r / (1.0 + eps * a),
        exact_yosida_slope=lambda eps, r: np.full_like(r, a / (1.0 + eps * a)))


def scaled_graph(graph: MonotoneGraph, factor: float) -> MonotoneGraph:
    """The graph ``factor * beta``; its resolvent at eps is beta's at factor*eps."""
    if factor <= 0:
        raise ValueError("factor must be positive")
    er = ey = None
    if graph.exact_resolvent is not None:
        er = lambda eps, r: graph.exact_resolvent(factor * eps, r)  # noqa: E731
    if graph.exact_yosida_slope is not None:
        ey = lambda eps, r: factor * graph.exact_yosida_slope(factor * eps, r)  # noqa: E731
    return MonotoneGraph(
        name=f"{factor:g}*{graph.name}",
        domain_lo=graph.domain_lo, domain_hi=graph.domain_hi,
        minimal_section=lambda r: factor * graph.minimal_section(r),
        antiderivative=lambda r: factor * graph.antiderivative(r),
        slope=lambda r: factor * graph.slope(r),
        kind=graph.kind, closed=graph.closed,
        exact_resolvent=er, exact_yosida_slope=ey)


# ---------------------------------------------------------------------------
# resolvent and Yosida approximation

def _scalar_out(x: np.ndarray):
    return x[()] if x.ndim == 0 else x


def resolvent(graph: MonotoneGraph, eps: float, r):
    """Evaluate (I + eps*beta)^{-1} r.

    Safeguarded Newton on the increasing map s -> s + eps*beta(s); the bracket
    [min(0, r), max(0, r)] (clipped to the domain) always holds the root since
    beta(0) = 0.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    r = np.asarray(r, dtype=float)
    if graph.exact_resolvent is not None:
        return _scalar_out(np.asarray(graph.exact_resolvent(eps, r), dtype=float))

    lo = np.minimum(r, 0.0)
    hi = np.maximum(r, 0.0)
    lo = np.maximum(lo, graph.domain_lo)
    hi = np.minimum(hi, graph.domain_hi)
    s = np.clip(r, lo, hi)
    done = np.zeros(r.shape, dtype=bool)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        for _ in range(RESOLVENT_MAXITER):
            f = s + eps * graph.minimal_section(s) - r
            # iterate to round-off: (r - s)/eps cancels badly for small r
            done = np.abs(f) <= 4.0 * np.finfo(float).eps * (np.abs(r) + np.abs(s))
            done |= (hi - lo) <= 4.0 * np.finfo(float).eps * (1.0 + np.abs(s))
            if np.all(done):
                break
            lo = np.where(f < 0, s, lo)
            hi = np.where(f > 0, s, hi)
            step = s - f / (1.0 + eps * graph.slope(s))
            bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
            s = np.where(done, s, np.where(bad, 0.5 * (lo + hi), step))
        else:
            raise ResolventError(
                f"{graph.name}: resolvent did not converge for "
                f"{int(np.sum(~done))} value(s)")
    return _scalar_out(s)


def yosida(graph: MonotoneGraph, eps: float, r):
    """Yosida approximation (r - resolvent(r)) / eps."""
    r = np.asarray(r, dtype=float)
    return _scalar_out((r - np.asarray(resolvent(graph, eps, r))) / eps)


def yosida_slope(graph: MonotoneGraph, eps: float, r):
    """Derivative of the Yosida map: beta'(J) / (1 + eps*beta'(J)), J = resolvent."""
    r = np.asarray(r, dtype=float)
    if graph.exact_yosida_slope is not None:
        return _scalar_out(np.asarray(graph.exact_yosida_slope(eps, r), dtype=float))
    s = np.asarray(resolvent(graph, eps, r))
    with np.errstate(divide="ignore"):
        out = 1.0 / (eps + 1.0 / graph.slope(s))
    return _scalar_out(out)


def yosida_parts(graph: MonotoneGraph, eps: float, r: np.ndarray):
    """(value, slope, antiderivative) of the Yosida map from one resolvent solve."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(resolvent(graph, eps, r))
    value = (r - s) / eps
    if graph.exact_yosida_slope is not None:
        slope = np.asarray(graph.exact_yosida_slope(eps, r), dtype=float)
    else:
        with np.errstate(divide="ignore"):
            slope = 1.0 / (eps + 1.0 / graph.slope(s))
    return value, slope, (r - s) ** 2 / (2.0 * eps) + graph.antiderivative(s)


def yosida_antiderivative(graph: MonotoneGraph, eps: float, r):
    """Integral of the Yosida map from 0 to r.

    Computed as the Moreau envelope (r - J)^2/(2 eps) + beta_hat(J), J the
    resolvent; the envelope is differentiable with derivative equal to the
    Yosida map and vanishes at 0.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(resolvent(graph, eps, r))
    return _scalar_out((r - s) ** 2 / (2.0 * eps) + graph.antiderivative(s))


# ---------------------------------------------------------------------------
# potentials

@dataclass(frozen=True)
class PotentialSplit:
    """Double-well potential W = beta_hat + pi_hat with W' = beta + pi."""

    name: str
    graph: MonotoneGraph
    perturbation: ArrayFn
    lipschitz: float
    perturbation_antiderivative: ArrayFn
    c: Optional[float] = None

    def W(self, r):
        r = np.asarray(r, dtype=float)
        return self.graph.potential(r) + self.perturbation_antiderivative(r)

    def W_prime(self, r):
        """Minimal-section derivative beta(r) + pi(r) (domain checked)."""
        return self.graph.section(r) + self.perturbation(np.asarray(r, dtype=float))

    @property
    def smooth(self) -> bool:
        return self.graph.kind != "multivalued"


def make_regular_split() -> PotentialSplit:
    """W(r) = (r^2 - 1)^2 / 4 with beta(r) = r^3 and pi(r) = -r."""
    return PotentialSplit(
        name="regular", graph=cubic_graph(),
        perturbation=lambda r: -np.asarray(r, dtype=float),
        lipschitz=1.0,
        perturbation_antiderivative=lambda r: 0.25 - 0.5 * np.asarray(r, dtype=float) ** 2)


def make_logarithmic_split(c: float) -> PotentialSplit:
    """W(r) = (1+r)ln(1+r) + (1-r)ln(1-r) - c r^2 on (-1, 1), c > 1."""
    if not c > 1:
        raise ValueError(f"logarithmic potential needs c > 1 to be nonconvex (got c={c})")
    return PotentialSplit(
        name="logarithmic", graph=logarithmic_graph(),
        perturbation=lambda r: -2.0 * c * np.asarray(r, dtype=float),
        lipschitz=2.0 * c,
        perturbation_antiderivative=lambda r: -c * np.asarray(r, dtype=float) ** 2,
        c=c)


def make_obstacle_split(c: float) -> PotentialSplit:
    """W(r) = I_[-1,1](r) - c r^2, c > 0."""
    if not c > 0:
        raise ValueError(f"double-obstacle potential needs c > 0 (got c={c})")
    return PotentialSplit(
        name="obstacle", graph=obstacle_graph(),
        perturbation=lambda r: -2.0 * c * np.asarray(r, dtype=float),
        lipschitz=2.0 * c,
        perturbation_antiderivative=lambda r: -c * np.asarray(r, dtype=float) ** 2,
        c=c)


def make_linear_split(a: float = 1.0) -> PotentialSplit:
    """Convex quadratic W(r) = a r^2 / 2 with no perturbation (test problems)."""
    return PotentialSplit(
        name="linear", graph=linear_graph(a),
        perturbation=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        lipschitz=0.0,
        perturbation_antiderivative=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        c=a)


def make_split(name: str, c: Optional[float] = None) -> PotentialSplit:
    if name == "regular":
        return make_regular_split()
    if name == "logarithmic":
        return make_logarithmic_split(2.0 if c is None else c)
    if name == "obstacle":
        return make_obstacle_split(1.0 if c is None else c)
    if name == "linear":
        return make_linear_split(1.0 if c is None else c)
    raise KeyError(f"unknown potential {name!r}")


# ---------------------------------------------------------------------------
# compatibility between bulk and boundary graphs

@dataclass
class DominationReport:
    eta: float
    c_gamma: float
    eps: Optional[float]
    samples: np.ndarray
    bulk_abs: np.ndarray
    bound: np.ndarray
    ok: np.ndarray
    yosida_bulk_abs: Optional[np.ndarray]
    yosida_bound: Optional[np.ndarray]
    yosida_ok: Optional[np.ndarray]
    domain_ok: bool

    @property
    def passed(self) -> bool:
        ok = self.domain_ok and bool(np.all(self.ok))
        if self.yosida_ok is not None:
            ok = ok and bool(np.all(self.yosida_ok))
        return ok

    def rows(self):
        for i, r in enumerate(self.samples):
            yield float(r), float(self.bulk_abs[i]), float(self.bound[i]), bool(self.ok[i])


def check_domination(bulk: MonotoneGraph, boundary: MonotoneGraph, eta: float,
                     c_gamma: float, samples, eps: Optional[float] = 0.01,
                     rtol: float = 1e-12) -> DominationReport:
    """Check |beta(r)| <= eta |beta_G(r)| + C_G on samples of D(beta_G).

    With ``eps`` given, the regularized inequality between beta at level eps
    and beta_G at level eps*eta is checked on the same samples.
    """
    if eta <= 0 or c_gamma < 0:
        raise ValueError("need eta > 0 and c_gamma >= 0")
    r = np.atleast_1d(np.asarray(samples, dtype=float))
    if not np.all(boundary.contains(r)):
        raise DomainError(f"samples must lie in D(beta_Gamma) = {_interval_str(boundary)}")
    domain_ok = domain_contains_domain(boundary, bulk)
    with np.errstate(invalid="ignore"):
        bulk_abs = np.abs(bulk.minimal_section(r)) if domain_ok else np.full(r.shape, np.inf)
        bulk_abs = np.where(bulk.contains(r), bulk_abs, np.inf)
    bound = eta * np.abs(boundary.minimal_section(r)) + c_gamma
    ok = bulk_abs <= bound * (1.0 + rtol) + rtol
    ya = yb = yok = None
    if eps is not None:
        ya = np.abs(np.asarray(yosida(bulk, eps, r)))
        yb = eta * np.abs(np.asarray(yosida(boundary, eps * eta, r))) + c_gamma
        yok = ya <= yb * (1.0 + 1e-9) + 1e-9
    return DominationReport(eta, c_gamma, eps, r, bulk_abs, bound, ok, ya, yb, yok, domain_ok)


# ---------------------------------------------------------------------------
# coupling function g

G_FLOOR = -1.0 / 3.0


@dataclass(frozen=True)
class CouplingFunction:
    """g on its native interval plus a C^1 bounded extension to the real line."""

    name: str
    native_lo: float
    native_hi: float
    g: ArrayFn
    g_prime: ArrayFn
    g_second: ArrayFn
    extended_g: ArrayFn
    extended_g_prime: ArrayFn


def extend_coupling(g: ArrayFn, g_prime: ArrayFn, g_second: Optional[ArrayFn] = None,
                    native: tuple = (-1.0, 1.0), name: str = "custom",
                    n_check: int = 401) -> CouplingFunction:
    """Validate g on its native interval and extend it to all reals.

    Beyond each finite endpoint, g continues as a quadratic whose slope decays
    linearly to zero over a band of unit width, then stays constant; the
    result is clipped below at -1/3 so that 1 + 2g >= 1/3 everywhere.
    """
    a, b = float(native[0]), float(native[1])
    lo = a if np.isfinite(a) else -1e3
    hi = b if np.isfinite(b) else 1e3
    x = np.linspace(lo, hi, n_check)
    gv = np.asarray(g(x), dtype=float)
    gp = np.asarray(g_prime(x), dtype=float)
    problems = []
    if not (np.all(np.isfinite(gv)) and np.all(np.isfinite(gp))):
        problems.append("g or g' not finite on the native domain")
    if np.any(gv < -1e-12):
        problems.append("g must be nonnegative on the native domain")
    second_diff = gv[:-2] - 2 * gv[1:-1] + gv[2:]
    if np.any(second_diff > 1e-10 * (1 + np.max(np.abs(gv)))):
        problems.append("g must be concave on the native domain")
    if problems:
        raise ValueError("(A5) violated: " + "; ".join(problems))
    if g_second is None:
        g_second = lambda r: np.zeros_like(np.asarray(r, dtype=float))  # noqa: E731

    ga, gb = (float(g(np.array(a))) if np.isfinite(a) else 0.0,
              float(g(np.array(b))) if np.isfinite(b) else 0.0)
    da, db = (float(g_prime(np.array(a))) if np.isfinite(a) else 0.0,
              float(g_prime(np.array(b))) if np.isfinite(b) else 0.0)

    bounded = np.isfinite(a) and np.isfinite(b)

    def unclipped(r):
        out = np.asarray(g(np.clip(r, lo, hi) if bounded else r), dtype=float)
        if np.isfinite(b):
            w = np.clip(r - b, 0.0, 1.0)
            out = np.where(r > b, gb + db * (w - 0.5 * w * w), out)
        if np.isfinite(a):
            w = np.clip(a - r, 0.0, 1.0)
            out = np.where(r < a, ga - da * (w - 0.5 * w * w), out)
        return out

    def ext(r):
        return np.maximum(unclipped(np.asarray(r, dtype=float)), G_FLOOR)

    def ext_prime(r):
        r = np.asarray(r, dtype=float)
        out = np.asarray(g_prime(np.clip(r, lo, hi) if bounded else r), dtype=float)
        if np.isfinite(b):
            out = np.where(r > b, db * (1.0 - np.clip(r - b, 0.0, 1.0)), out)
        if np.isfinite(a):
            out = np.where(r < a, da * (1.0 - np.clip(a - r, 0.0, 1.0)), out)
        # flat where the floor is active
        return np.where(unclipped(r) < G_FLOOR, 0.0, out)

    return CouplingFunction(name=name, native_lo=a, native_hi=b, g=g, g_prime=g_prime,
                            g_second=g_second, extended_g=ext, extended_g_prime=ext_prime)


def make_default_coupling() -> CouplingFunction:
    """g(r) = (1 + r)/2 on [-1, 1]."""
    return extend_coupling(
        lambda r: 0.5 * (1.0 + np.asarray(r, dtype=float)),
        lambda r: np.full_like(np.asarray(r, dtype=float), 0.5),
        name="default")


def make_zero_coupling() -> CouplingFunction:
    """g = 0: the mu-equation decouples into a heat equation."""
    zero = lambda r: np.zeros_like(np.asarray(r, dtype=float))  # noqa: E731
    return extend_coupling(zero, zero, zero, name="zero")


def make_coupling(name: str) -> CouplingFunction:
    if name == "default":
        return make_default_coupling()
    if name == "zero":
        return make_zero_coupling()
    raise KeyError(f"unknown coupling {name!r}")


def alpha(coupling: CouplingFunction, r):
    """(1 + 2 g(r))^{-1/2} with the extended g."""
    r = np.asarray(r, dtype=float)
    return _scalar_out((1.0 + 2.0 * np.asarray(coupling.extended_g(r))) ** -0.5)
