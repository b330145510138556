"""Domain types for the approximation laboratory.

Holds the geometric and analytic inputs everything else consumes:

* ``Hypersurface`` -- graph of a map g : U subset R^(n-1) -> R with exact
  value / gradient / Hessian evaluation (sparse polynomials, or builtin
  bodies that carry their own closed forms),
* ``Shift`` -- the inhomogeneous term composed with the graph chart,
* ``ApproxFunction`` -- multivariable decay laws on Z^n (power of the
  max-norm, weighted quasi-norm power, log-corrected power),
* ``DimensionFunction`` -- increasing f with f(0) = 0 together with its
  declared growth exponent s, plus the empirical growth-inequality check
  f(xy) <= const * x^s f(y) for y < 1 < x.

All objects are immutable after construction and every operation is a pure
function, so instances can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import ArgumentError, ConstructionError, DomainError

__all__ = [
    "Box",
    "Polynomial",
    "Hypersurface",
    "Shift",
    "ApproxFunction",
    "DimensionFunction",
    "CompactWindow",
    "ConditionIReport",
    "eval_surface",
    "eval_psi",
    "eval_f",
    "eval_F",
    "check_condition_I",
    "quasi_norm",
]


# ---------------------------------------------------------------------------
# Axis-aligned boxes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lower_i, upper_i] in R^d."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
            raise ConstructionError("box corners must be 1-d and of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ConstructionError("box corners must be finite")
        if np.any(hi <= lo):
            raise ConstructionError("box must have positive extent on every axis")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in hi))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    def contains(self, x, tol: float = 0.0):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def shrink(self, margin: float) -> "Box":
        lo = self.lo + margin
        hi = self.hi - margin
        if np.any(hi <= lo):
            raise ConstructionError("margin exceeds half the box width")
        return Box(tuple(lo), tuple(hi))

    def grid(self, res: int) -> np.ndarray:
        """Cell-center grid, res points per axis, shape (res^d, d)."""
        axes = [self.lo[i] + (self.hi[i] - self.lo[i]) * (np.arange(res) + 0.5) / res
                for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def corner_grid(self, per_axis: int = 3) -> np.ndarray:
        """Multistart points: {lo, ..., hi} per axis (3 -> lo/mid/hi)."""
        axes = [np.linspace(self.lo[i], self.hi[i], per_axis) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


# ---------------------------------------------------------------------------
# Sparse polynomials with exact differentiation
# ---------------------------------------------------------------------------

class Polynomial:
    """Sparse multivariate polynomial: map exponent tuple -> coefficient.

    Derivatives are produced coefficient-wise (exact), never by finite
    differences.  Evaluation is vectorized over leading axes of the input.
    """

    def __init__(self, coeffs: Mapping[tuple, float], nvars: int):
        if nvars < 1:
            raise ConstructionError("polynomial needs at least one variable")
        terms = []
        for exps, c in coeffs.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars:
                raise ConstructionError(
                    f"exponent tuple {exps} has length {len(exps)}, expected {nvars}")
            if any(e < 0 for e in exps):
                raise ConstructionError(f"negative exponent in {exps}")
            if c != 0.0:
                terms.append((exps, float(c)))
        terms.sort(key=lambda t: t[0])
        self.nvars = nvars
        if terms:
            self.exponents = np.array([t[0] for t in terms], dtype=np.int64)
            self.coefficients = np.array([t[1] for t in terms], dtype=float)
        else:
            self.exponents = np.zeros((0, nvars), dtype=np.int64)
            self.coefficients = np.zeros(0, dtype=float)
        self._grad: list[Polynomial] | None = None
        self._hess: list[list[Polynomial]] | None = None

    @property
    def degree(self) -> int:
        if self.coefficients.size == 0:
            return 0
        return int(self.exponents.sum(axis=1).max())

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.coefficients.size == 0:
            return np.zeros(x.shape[:-1])
        # (..., m, d) powers -> product over d -> weighted sum over m
        pows = x[..., None, :] ** self.exponents
        return pows.prod(axis=-1) @ self.coefficients

    __call__ = value

    def diff(self, i: int) -> "Polynomial":
        out: dict[tuple, float] = {}
        for exps, c in zip(self.exponents, self.coefficients):
            e = int(exps[i])
            if e == 0:
                continue
            key = tuple(exps - np.eye(self.nvars, dtype=np.int64)[i])
            out[key] = out.get(key, 0.0) + c * e
        return Polynomial(out, self.nvars)

    def _gradient_polys(self) -> list["Polynomial"]:
        if self._grad is None:
            self._grad = [self.diff(i) for i in range(self.nvars)]
        return self._grad

    def _hessian_polys(self) -> list[list["Polynomial"]]:
        if self._hess is None:
            grads = self._gradient_polys()
            self._hess = [[grads[i].diff(j) for j in range(self.nvars)]
                          for i in range(self.nvars)]
        return self._hess

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        gs = self._gradient_polys()
        return np.stack([g.value(x) for g in gs], axis=-1)

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        hs = self._hessian_polys()
        rows = [np.stack([hs[i][j].value(x) for j in range(self.nvars)], axis=-1)
                for i in range(self.nvars)]
        return np.stack(rows, axis=-2)

    def sup_bound(self, box: Box) -> float:
        """Rigorous (crude) bound: sum of per-monomial sups over the box."""
        if self.coefficients.size == 0:
            return 0.0
        amax = np.maximum(np.abs(box.lo), np.abs(box.hi))
        pows = amax[None, :] ** self.exponents
        return float(np.abs(self.coefficients) @ pows.prod(axis=1))

    @staticmethod
    def zero(nvars: int) -> "Polynomial":
        return Polynomial({}, nvars)


# ---------------------------------------------------------------------------
# Hypersurface and shift
# ---------------------------------------------------------------------------

class Hypersurface:
    """Graph surface: the set {(x, g(x)) : x in U} in R^n.

    ``body`` is either a :class:`Polynomial` in n-1 variables or a builtin
    evaluator exposing vectorized ``value``/``gradient``/``hessian`` (and
    optionally ``sup_gradient_bound``/``sup_hessian_bound``).

    n >= 2 is accepted so 1-d detector toys (the fat-Cantor surface) remain
    representable; the approximation pipeline enforces n >= 3 where the
    growth-exponent gate s < 2(n-2) requires it.
    """

    def __init__(self, n: int, domain: Box, body, name: str = "polynomial"):
        n = int(n)
        if n < 2:
            raise ConstructionError(f"ambient dimension must be >= 2, got {n}")
        if domain.dim != n - 1:
            raise ConstructionError(
                f"domain dimension {domain.dim} does not match n-1 = {n - 1}")
        if isinstance(body, Polynomial) and body.nvars != n - 1:
            raise ConstructionError(
                f"polynomial has {body.nvars} variables, expected {n - 1}")
        self.n = n
        self.domain = domain
        self.body = body
        self.name = name
        probe = self.value(domain.center)
        if not np.isfinite(probe):
            raise ConstructionError("surface evaluation not finite at the domain center")

    @property
    def dim(self) -> int:
        return self.n - 1

    def value(self, x) -> np.ndarray:
        return self.body.value(x)

    def gradient(self, x) -> np.ndarray:
        return self.body.gradient(x)

    def hessian(self, x) -> np.ndarray:
        return self.body.hessian(x)

    def graph(self, x) -> np.ndarray:
        """G(x) = (x, g(x)), vectorized."""
        x = np.asarray(x, dtype=float)
        return np.concatenate([x, self.value(x)[..., None]], axis=-1)

    def sup_gradient_bound(self, box: Box) -> float:
        if hasattr(self.body, "sup_gradient_bound"):
            return float(self.body.sup_gradient_bound(box))
        gs = self.body._gradient_polys()
        comp = np.array([g.sup_bound(box) for g in gs])
        return float(np.linalg.norm(comp))

    def sup_hessian_bound(self, box: Box) -> float:
        """Upper bound for sup over the box of the Hessian operator norm."""
        if hasattr(self.body, "sup_hessian_bound"):
            return float(self.body.sup_hessian_bound(box))
        hs = self.body._hessian_polys()
        d = self.dim
        entry = np.array([[hs[i][j].sup_bound(box) for j in range(d)] for i in range(d)])
        return float(np.linalg.norm(entry, 2))


class Shift:
    """Inhomogeneous term theta composed with the graph chart, as a
    polynomial over R^(n-1).  Default is the zero shift."""

    def __init__(self, body: Polynomial | None = None, nvars: int | None = None):
        if body is None:
            if nvars is None:
                raise ConstructionError("zero shift needs nvars")
            body = Polynomial.zero(nvars)
        self.body = body
        self.nvars = body.nvars

    @property
    def is_zero(self) -> bool:
        return self.body.coefficients.size == 0

    def value(self, x) -> np.ndarray:
        return self.body.value(x)

    def gradient(self, x) -> np.ndarray:
        return self.body.gradient(x)

    def hessian(self, x) -> np.ndarray:
        return self.body.hessian(x)

    def sup_gradient_bound(self, box: Box) -> float:
        comp = np.array([g.sup_bound(box) for g in self.body._gradient_polys()])
        return float(np.linalg.norm(comp)) if comp.size else 0.0

    def sup_hessian_bound(self, box: Box) -> float:
        hs = self.body._hessian_polys()
        d = self.nvars
        entry = np.array([[hs[i][j].sup_bound(box) for j in range(d)] for i in range(d)])
        return float(np.linalg.norm(entry, 2)) if d else 0.0

    @staticmethod
    def zero(nvars: int) -> "Shift":
        return Shift(nvars=nvars)


# ---------------------------------------------------------------------------
# Approximating functions on Z^n
# ---------------------------------------------------------------------------

def quasi_norm(x, v) -> np.ndarray:
    """Weighted quasi-norm max_i |x_i|^(1/v_i), vectorized over rows.

    Homogeneity: scaling coordinate i by t^(v_i) scales the result by t.
    """
    x = np.abs(np.asarray(x, dtype=float))
    v = np.asarray(v, dtype=float)
    return np.max(x ** (1.0 / v), axis=-1)


@dataclass(frozen=True)
class ApproxFunction:
    """Multivariable approximating function Psi on Z^n \\ {0}.

    Variants:
      power           Psi(q) = ||q||^-tau        (max-norm)
      quasi-norm-power  Psi(q) = ||q||_v^-tau, weights v_i > 0, sum v_i = n
      log-corrected   Psi(q) = ||q||^-tau * log(e + ||q||)^-exponent
    """

    variant: str
    tau: float
    weights: tuple = ()
    exponent: float = 0.0

    def __post_init__(self):
        if self.variant not in ("power", "quasi-norm-power", "log-corrected"):
            raise ConstructionError(f"unknown psi variant {self.variant!r}")
        if not (self.tau > 0):
            raise ConstructionError("tau must be positive")
        if self.variant == "quasi-norm-power":
            w = np.asarray(self.weights, dtype=float)
            if w.size == 0:
                raise ConstructionError("quasi-norm-power needs weights")
            if np.any(w <= 0):
                raise ConstructionError("weights must be positive")
            if abs(w.sum() - w.size) > 1e-12:
                raise ConstructionError(
                    f"weights must sum to n = {w.size}, got {w.sum()}")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        if self.variant == "log-corrected" and self.exponent < 0:
            raise ConstructionError("log exponent must be nonnegative")

    # -- constructors -------------------------------------------------------
    @staticmethod
    def power(tau: float) -> "ApproxFunction":
        return ApproxFunction("power", tau)

    @staticmethod
    def quasi_norm_power(tau: float, weights: Iterable) -> "ApproxFunction":
        return ApproxFunction("quasi-norm-power", tau, weights=tuple(weights))

    @staticmethod
    def log_corrected(tau: float, exponent: float) -> "ApproxFunction":
        return ApproxFunction("log-corrected", tau, exponent=exponent)

    # -- evaluation ---------------------------------------------------------
    @property
    def is_radial(self) -> bool:
        """True when Psi depends on q only through the max-norm."""
        if self.variant in ("power", "log-corrected"):
            return True
        return all(abs(v - 1.0) < 1e-15 for v in self.weights)

    def of_norm(self, t) -> np.ndarray:
        """psi(t) for the radial variants; t > 0."""
        t = np.asarray(t, dtype=float)
        if self.variant == "log-corrected":
            return t ** (-self.tau) * np.log(math.e + t) ** (-self.exponent)
        return t ** (-self.tau)

    def value(self, q) -> np.ndarray:
        q = np.asarray(q)
        norm = np.max(np.abs(q), axis=-1).astype(float)
        if self.variant == "quasi-norm-power":
            norm = quasi_norm(q, np.asarray(self.weights))
            return norm ** (-self.tau)
        return self.of_norm(norm)

    def shell_min(self, t) -> np.ndarray:
        """inf of Psi over the real max-norm sphere of radius t (t >= 1).

        For the radial variants this is psi(t) by construction.  For the
        quasi-norm variant the norm ||x||_v is maximized at the corner
        |x_i| = t for every i, giving ||x||_v = t^(1/min v) and hence
        Psi = (t^(1/min v))^-tau.
        """
        t = np.asarray(t, dtype=float)
        if self.variant == "quasi-norm-power":
            vmin = min(self.weights)
            return (t ** (1.0 / vmin)) ** (-self.tau)
        return self.of_norm(t)


# ---------------------------------------------------------------------------
# Dimension functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DimensionFunction:
    """Increasing continuous f with f(0) = 0 and a declared growth
    exponent s used by the growth-inequality gate.

    Variants:
      power      f(r) = r^s
      power-log  f(r) = r^s * ln(1/r)^exponent  for r < r0, continued as
                 c*r^s above r0 = exp(-max(1, exponent/s)) so that f stays
                 increasing on all of [0, inf).
    """

    variant: str
    s: float
    exponent: float = 0.0

    def __post_init__(self):
        if self.variant not in ("power", "power-log"):
            raise ConstructionError(f"unknown dimension function variant {self.variant!r}")
        if not (self.s > 0):
            raise ConstructionError("exponent s must be positive")
        if self.variant == "power-log" and self.exponent < 0:
            raise ConstructionError("log exponent must be nonnegative")

    @staticmethod
    def power(s: float) -> "DimensionFunction":
        return DimensionFunction("power", s)

    @staticmethod
    def power_log(s: float, exponent: float) -> "DimensionFunction":
        return DimensionFunction("power-log", s, exponent=exponent)

    @property
    def _r0(self) -> float:
        return math.exp(-max(1.0, self.exponent / self.s))

    def value(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ArgumentError("dimension function takes nonnegative input")
        if self.variant == "power":
            return r ** self.s
        r0 = self._r0
        c = math.log(1.0 / r0) ** self.exponent
        with np.errstate(divide="ignore"):
            low = np.where(r > 0, r, 1.0)
            body = low ** self.s * np.where(
                r < r0, np.log(1.0 / np.where(r < r0, low, 1.0)) ** self.exponent, c)
        return np.where(r > 0, body, 0.0)


def eval_f(f: DimensionFunction, r: float) -> float:
    """f(r) for r >= 0."""
    if r < 0:
        raise ArgumentError(f"negative input to dimension function: {r}")
    return float(f.value(r))


def eval_F(f: DimensionFunction, n: int, x: float) -> float:
    """Normalized cost F(x) = x^-(n-2) * f(x) for x > 0."""
    if x <= 0:
        raise ArgumentError(f"F requires positive input, got {x}")
    return float(x ** (-(n - 2)) * f.value(x))


# ---------------------------------------------------------------------------
# Surface / psi scalar entry points
# ---------------------------------------------------------------------------

def eval_surface(surface: Hypersurface, x):
    """Value, gradient and Hessian of g at a single point of closure(U).

    Derivatives are exact (coefficient-wise for polynomials, closed-form
    for builtins), never finite differences.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (surface.dim,):
        raise ArgumentError(f"point must have shape ({surface.dim},)")
    if not surface.domain.contains(x, tol=1e-12):
        raise DomainError(f"point {x.tolist()} outside the surface domain")
    value = float(surface.value(x))
    grad = np.asarray(surface.gradient(x), dtype=float)
    hess = np.asarray(surface.hessian(x), dtype=float)
    return value, grad, hess


def eval_psi(psi: ApproxFunction, q) -> float:
    """Psi(q) for a nonzero integer vector q."""
    q = np.asarray(q)
    if q.ndim != 1:
        raise ArgumentError("q must be a single integer vector")
    if not np.any(q):
        raise ArgumentError("q must be nonzero")
    return float(psi.value(q))


# ---------------------------------------------------------------------------
# Growth-inequality check (empirical)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionIReport:
    max_ratio: float
    bound: float
    verdict: str          # PASS | FAIL | REJECT
    worst: tuple = (0.0, 0.0)
    s: float = 0.0

    def __bool__(self) -> bool:
        return self.verdict == "PASS"


def check_condition_I(f: DimensionFunction, s: float,
                      x_samples=None, y_samples=None,
                      n: int | None = None, bound: float = 1.001) -> ConditionIReport:
    """Empirical check of f(xy) <= bound * x^s * f(y) over y < 1 < x.

    The inequality is asymptotic in the source analysis; here it is probed
    on a log-spaced grid (default x in [1.01, 1e3], y in [1e-6, 0.99]) with
    a fixed acceptance constant.  If ``n`` is given, the strictness gate
    s < 2(n-2) is applied first and a violation yields verdict REJECT
    before any sampling.
    """
    if n is not None and not (s < 2 * (n - 2)):
        return ConditionIReport(max_ratio=float("inf"), bound=bound,
                                verdict="REJECT", s=s)
    if x_samples is None:
        x_samples = np.geomspace(1.01, 1e3, 64)
    if y_samples is None:
        y_samples = np.geomspace(1e-6, 0.99, 64)
    x = np.asarray(x_samples, dtype=float)
    y = np.asarray(y_samples, dtype=float)
    if x.size == 0 or y.size == 0:
        raise ArgumentError("sample grid must be nonempty")
    if np.any(x <= 1) or np.any(y >= 1) or np.any(y <= 0):
        raise ArgumentError("samples must satisfy 0 < y < 1 < x")
    X, Y = np.meshgrid(x, y, indexing="ij")
    ratio = f.value(X * Y) / (X ** s * f.value(Y))
    idx = np.unravel_index(np.argmax(ratio), ratio.shape)
    verdict = "PASS" if ratio[idx] <= bound else "FAIL"
    return ConditionIReport(max_ratio=float(ratio[idx]), bound=bound, verdict=verdict,
                            worst=(float(X[idx]), float(Y[idx])), s=s)


# ---------------------------------------------------------------------------
# Compact window
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompactWindow:
    """Closed box K sitting strictly inside the surface domain U."""

    box: Box
    margin: float = field(default=0.0)

    @staticmethod
    def inside(domain: Box, margin: float) -> "CompactWindow":
        if margin <= 0:
            raise ConstructionError("window margin must be positive")
        return CompactWindow(domain.shrink(margin), margin)

    @staticmethod
    def from_box(box: Box, domain: Box) -> "CompactWindow":
        gaps = np.concatenate([box.lo - domain.lo, domain.hi - box.hi])
        margin = float(gaps.min())
        if margin <= 0:
            raise ConstructionError("window must sit strictly inside the domain")
        return CompactWindow(box, margin)

    @property
    def dim(self) -> int:
        return self.box.dim
