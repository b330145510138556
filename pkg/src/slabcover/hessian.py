"""Singular-Hessian analysis and the builtin example surfaces.

The set S = {x in U : det grad^2 g(x) = 0} controls whether the
f-dimensional cost hypothesis on the surface can hold.  This module
detects S on refinement grids, estimates whether its f-cost vanishes
under refinement, extracts unit kernel directions of the Hessian, and
traces the straight-line fibers that a everywhere-singular Hessian
forces through the graph.

Builtins:
  paraboloid(n)                 sum x_i^2, nonsingular everywhere
  degenerate-quadratic(b1..b6)  planar quadratic with b2^2 = 4 b1 b3
                                making the Hessian singular identically
  gordan-noether                the quintic-free cubic in five variables
                                whose Hessian determinant vanishes
                                identically without g dropping a variable
  fat-cantor(depth, fatness)    one-variable g built by integrating the
                                distance to a positive-measure nowhere-
                                dense set twice: g'' vanishes exactly on
                                that set (n = 2 detector toy)
  random-poly(n, degree, seed)  reproducible random coefficients
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ConstructionError, NoKernelError
from .model import Box, DimensionFunction, Hypersurface, Polynomial

__all__ = [
    "SingularReport",
    "ConditionIIReport",
    "KernelResult",
    "Fiber",
    "singular_fraction",
    "condition_II_check",
    "kernel_field",
    "trace_fiber",
    "make_builtin",
    "FatCantorBody",
    "nullity_grid",
    "usc_refinement_check",
]

_DET_CHUNK = 65536


# ---------------------------------------------------------------------------
# Singular-set detection
# ---------------------------------------------------------------------------

def _det_and_scale(surface: Hypersurface, pts: np.ndarray):
    """Determinant and Hadamard row-norm scale of the Hessian, chunked."""
    dets = np.empty(len(pts))
    scales = np.empty(len(pts))
    d = surface.dim
    for i in range(0, len(pts), _DET_CHUNK):
        H = surface.hessian(pts[i:i + _DET_CHUNK])
        if d == 1:
            dets[i:i + _DET_CHUNK] = H[..., 0, 0]
            scales[i:i + _DET_CHUNK] = np.abs(H[..., 0, 0])
        else:
            dets[i:i + _DET_CHUNK] = np.linalg.det(H)
            scales[i:i + _DET_CHUNK] = np.prod(np.linalg.norm(H, axis=-1), axis=-1)
    return dets, scales


def _mask_box_dimension(mask: np.ndarray, widths: np.ndarray):
    """Coarse upper box dimension of a boolean grid mask by OR-pooling."""
    if not mask.any():
        return 0.0
    res = mask.shape[0]
    counts, sizes = [], []
    m = mask
    h = widths[0] / res
    while min(m.shape) >= 1:
        counts.append(int(m.sum()))
        sizes.append(h)
        if min(m.shape) < 2 or any(s % 2 for s in m.shape):
            break
        d = m.ndim
        for ax in range(d):
            sh = list(m.shape)
            sh[ax] //= 2
            sh.insert(ax + 1, 2)
            m = m.reshape(sh).any(axis=ax + 1)
        h *= 2
    if len(counts) < 2:
        return float(mask.ndim)
    slope = np.polyfit(np.log(1.0 / np.asarray(sizes)), np.log(counts), 1)[0]
    return float(max(slope, 0.0))


@dataclass
class SingularReport:
    grid_res: int
    tol_rel: float
    fraction: float
    box_dimension: float
    n_marked: int
    detected_length: float | None = None   # 1-d surfaces only
    verdicts: dict = field(default_factory=dict)

    def record(self) -> dict:
        out = {
            "grid_res": self.grid_res,
            "tol_rel": self.tol_rel,
            "fraction": self.fraction,
            "box_dimension": self.box_dimension,
            "n_marked": self.n_marked,
        }
        if self.detected_length is not None:
            out["detected_length"] = self.detected_length
        if self.verdicts:
            out["condition_II"] = self.verdicts
        return out


def singular_fraction(surface: Hypersurface, grid_res: int = 64,
                      tol_rel: float = 1e-9) -> SingularReport:
    """Fraction of grid points where the Hessian determinant is relatively
    tiny: |det| <= tol_rel * scale with scale the product of the Hessian
    row norms (Hadamard normalization; zero rows mark the point).

    Also reports a coarse upper-box-dimension estimate of the marked set
    and, for one-variable surfaces, the bisection-refined length of the
    detected zero set.
    """
    if grid_res < 16:
        raise ArgumentError("grid_res must be >= 16")
    U = surface.domain
    pts = U.grid(grid_res)
    dets, scales = _det_and_scale(surface, pts)
    marked = np.abs(dets) <= tol_rel * scales
    fraction = float(marked.mean())
    mask = marked.reshape([grid_res] * U.dim)
    boxdim = _mask_box_dimension(mask, U.widths)
    detected = None
    if U.dim == 1:
        detected = _zero_set_length_1d(surface, tol_rel, max(grid_res, 65536))
    return SingularReport(grid_res=grid_res, tol_rel=tol_rel, fraction=fraction,
                          box_dimension=boxdim, n_marked=int(marked.sum()),
                          detected_length=detected)


def _zero_set_length_1d(surface: Hypersurface, tol_rel: float, res: int) -> float:
    """Measure of {x : |g''(x)| <= tol_rel |g''(x)|} located by grid scan and
    bisection refinement of each boundary (exact for piecewise bodies)."""
    U = surface.domain
    xs = np.linspace(U.lo[0], U.hi[0], res)

    def marked(x):
        H = surface.hessian(np.atleast_2d(np.asarray(x, dtype=float).reshape(-1, 1)))
        v = np.abs(H[..., 0, 0])
        return (v <= tol_rel * v).ravel()  # i.e. v == 0 when tol_rel < 1

    m = marked(xs)
    total = 0.0
    i = 0
    while i < res:
        if not m[i]:
            i += 1
            continue
        j = i
        while j + 1 < res and m[j + 1]:
            j += 1
        left = xs[i]
        if i > 0:
            lo, hi = xs[i - 1], xs[i]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if marked(mid)[0]:
                    hi = mid
                else:
                    lo = mid
            left = hi
        right = xs[j]
        if j + 1 < res:
            lo, hi = xs[j], xs[j + 1]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if marked(mid)[0]:
                    lo = mid
                else:
                    hi = mid
            right = lo
        total += right - left
        i = j + 1
    return float(total)


# ---------------------------------------------------------------------------
# f-cost refinement check for the singular set
# ---------------------------------------------------------------------------

@dataclass
class ConditionIIReport:
    verdict: str                  # PASS | FAIL | INCONCLUSIVE
    levels: list                  # [(res, fraction, cost)]

    def record(self) -> dict:
        return {"verdict": self.verdict,
                "levels": [{"res": r, "fraction": fr, "cost": c}
                           for r, fr, c in self.levels]}


def _marked_cells(surface: Hypersurface, res: int, tol_rel: float) -> np.ndarray:
    """Cells likely meeting {det = 0}: relative-tolerance marking at the
    center, plus sign changes of det against axis neighbors (the zero set
    of a transversal det crosses between cells without the center value
    ever being small)."""
    U = surface.domain
    pts = U.grid(res)
    dets, scales = _det_and_scale(surface, pts)
    shape = [res] * U.dim
    det_grid = dets.reshape(shape)
    mark = (np.abs(dets) <= tol_rel * scales).reshape(shape)
    sign = np.signbit(det_grid)
    for ax in range(U.dim):
        flip = np.diff(sign.astype(np.int8), axis=ax) != 0
        pad_lo = [(0, 0)] * U.dim
        pad_lo[ax] = (0, 1)
        pad_hi = [(0, 0)] * U.dim
        pad_hi[ax] = (1, 0)
        mark |= np.pad(flip, pad_lo)
        mark |= np.pad(flip, pad_hi)
    return mark


def condition_II_check(surface: Hypersurface, f: DimensionFunction,
                       refinements, tol_rel: float = 1e-9) -> ConditionIIReport:
    """Upper f-cost estimates of the detected singular set across grid
    refinements: cost(res) = (#marked cells) * f(cell diameter).

    PASS when the estimates decay geometrically toward zero (or the set is
    empty at every level); FAIL when every level is essentially fully
    marked, or the estimates stay flat at a positive level / grow (the
    cost has a positive floor, so it cannot vanish); INCONCLUSIVE
    otherwise.
    """
    refinements = [int(r) for r in refinements]
    if len(refinements) < 3:
        raise ArgumentError("need at least 3 refinement levels")
    U = surface.domain
    levels = []
    for res in sorted(refinements):
        mark = _marked_cells(surface, res, tol_rel)
        count = int(mark.sum())
        frac = count / mark.size
        diam = float(np.linalg.norm(U.widths / res))
        cost = count * float(f.value(diam))
        levels.append((res, frac, cost))
    costs = [c for _, _, c in levels]
    fracs = [fr for _, fr, _ in levels]
    if all(c == 0.0 for c in costs):
        return ConditionIIReport("PASS", levels)
    if all(fr >= 1 - 1e-3 for fr in fracs):
        return ConditionIIReport("FAIL", levels)
    if costs[0] > 0:
        trend = costs[-1] / costs[0]
        nonincreasing = all(b <= a * 1.02 for a, b in zip(costs, costs[1:]))
        if nonincreasing and trend <= 0.8:
            return ConditionIIReport("PASS", levels)
        if trend >= 0.85:
            return ConditionIIReport("FAIL", levels)
    return ConditionIIReport("INCONCLUSIVE", levels)


# ---------------------------------------------------------------------------
# Kernel directions and fiber tracing
# ---------------------------------------------------------------------------

@dataclass
class KernelResult:
    direction: np.ndarray
    nullity: int
    residual: float
    scale: float
    ambiguous: bool = False


def kernel_field(surface: Hypersurface, x, reference=None,
                 split: float = 1e-8) -> KernelResult:
    """Unit kernel direction of the Hessian at x.

    Numerical nullity counts singular values below split * scale, with
    scale the spectral norm.  Nullity 0 raises NoKernelError; nullity >= 2
    is served with the direction in the kernel best aligned to
    ``reference`` and flagged ambiguous.  Sign convention: align with
    ``reference`` when given, else positive first nonzero component.
    """
    x = np.asarray(x, dtype=float)
    H = np.asarray(surface.hessian(x), dtype=float)
    evals, evecs = np.linalg.eigh(H)
    mags = np.abs(evals)
    scale = float(mags.max())
    if scale == 0.0:
        # zero Hessian: full kernel
        direction = np.zeros(surface.dim)
        direction[0] = 1.0
        if reference is not None:
            ref = np.asarray(reference, dtype=float)
            direction = ref / np.linalg.norm(ref)
        return KernelResult(direction, surface.dim, 0.0, 0.0,
                            ambiguous=surface.dim > 1)
    small = mags < split * scale
    nullity = int(small.sum())
    if nullity == 0:
        raise NoKernelError(
            f"Hessian nonsingular at {x.tolist()}: smallest |eigenvalue| "
            f"{mags.min():.3g} vs scale {scale:.3g}")
    kernel = evecs[:, small]
    if nullity == 1:
        direction = kernel[:, 0]
    else:
        if reference is not None:
            ref = np.asarray(reference, dtype=float)
            proj = kernel @ (kernel.T @ ref)
            norm = np.linalg.norm(proj)
            direction = proj / norm if norm > 1e-12 else kernel[:, 0]
        else:
            direction = kernel[:, 0]
    direction = direction / np.linalg.norm(direction)
    if reference is not None:
        ref = np.asarray(reference, dtype=float)
        if float(direction @ ref) < 0:
            direction = -direction
    else:
        nz = np.nonzero(np.abs(direction) > 1e-12)[0]
        if len(nz) and direction[nz[0]] < 0:
            direction = -direction
    residual = float(np.linalg.norm(H @ direction))
    return KernelResult(direction, nullity, residual, scale,
                        ambiguous=nullity >= 2)


@dataclass
class Fiber:
    seed: tuple
    polyline: np.ndarray
    straightness_defect: float
    gradient_drift: float
    affinity_defect: float
    truncated: bool = False
    note: str = ""

    @property
    def length(self) -> float:
        if len(self.polyline) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.polyline, axis=0), axis=1).sum())

    def record(self) -> dict:
        return {
            "seed": list(self.seed),
            "polyline": self.polyline.tolist(),
            "length": self.length,
            "diagnostics": {
                "straightness_defect": self.straightness_defect,
                "gradient_drift": self.gradient_drift,
                "affinity_defect": self.affinity_defect,
            },
            "truncated": self.truncated,
            "note": self.note,
        }


def _march(surface: Hypersurface, x0, v0, step: float, max_len: float):
    """Fixed-step RK4 integration of the kernel direction field with sign
    continuity; stops at the domain boundary, on kernel loss, or at max_len."""
    U = surface.domain
    pts = [np.asarray(x0, dtype=float)]
    ref = np.asarray(v0, dtype=float)
    travelled = 0.0
    truncated = False
    note = ""

    def dir_at(y, ref):
        res = kernel_field(surface, y, reference=ref)
        return res.direction, res

    while travelled < max_len:
        x = pts[-1]
        try:
            k1, info = dir_at(x, ref)
            k2, _ = dir_at(x + 0.5 * step * k1, k1)
            k3, _ = dir_at(x + 0.5 * step * k2, k2)
            k4, _ = dir_at(x + step * k3, k3)
        except NoKernelError as exc:
            truncated, note = True, f"kernel lost: {exc}"
            break
        if info.ambiguous:
            truncated, note = True, "kernel nullity changed along the path"
            break
        move = (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        x_new = x + move
        if not U.contains(x_new, tol=0.0):
            break
        pts.append(x_new)
        ref = move / np.linalg.norm(move)
        travelled += float(np.linalg.norm(move))
    return pts, truncated, note


def trace_fiber(surface: Hypersurface, x0, step: float = 0.01,
                max_len: float = 2.0) -> Fiber:
    """Integrate the kernel direction field through x0 in both directions.

    When the Hessian is singular along the whole path the trace is a line
    segment: the polyline's second differences vanish, grad g is constant
    on it, and g restricted to it is affine.  The diagnostics quantify all
    three defects.
    """
    x0 = np.asarray(x0, dtype=float)
    res0 = kernel_field(surface, x0)   # raises NoKernelError when nonsingular
    v0 = res0.direction
    fwd, t1, n1 = _march(surface, x0, v0, step, max_len / 2.0)
    bwd, t2, n2 = _march(surface, x0, -v0, step, max_len / 2.0)
    poly = np.array(list(reversed(bwd[1:])) + fwd)
    truncated = t1 or t2 or res0.ambiguous
    note = "; ".join(s for s in (n1, n2) if s)

    if len(poly) >= 3:
        second = np.linalg.norm(poly[2:] - 2 * poly[1:-1] + poly[:-2], axis=1)
        straightness = float(second.max())
    else:
        straightness = 0.0
    grads = surface.gradient(poly)
    # drift against the gradient at the seed, matching the line-fiber claim
    g0 = surface.gradient(x0)
    drift = float(np.linalg.norm(grads - g0, axis=1).max()) if len(poly) else 0.0
    if len(poly) >= 2:
        t = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(poly, axis=0), axis=1))])
        gv = surface.value(poly)
        A = np.stack([np.ones_like(t), t], axis=1)
        coef, *_ = np.linalg.lstsq(A, gv, rcond=None)
        affinity = float(np.abs(gv - A @ coef).max())
    else:
        affinity = 0.0
    return Fiber(seed=tuple(float(v) for v in x0), polyline=poly,
                 straightness_defect=straightness, gradient_drift=drift,
                 affinity_defect=affinity, truncated=truncated, note=note)


# ---------------------------------------------------------------------------
# Upper-semicontinuity proxy for the kernel dimension
# ---------------------------------------------------------------------------

def nullity_grid(surface: Hypersurface, res: int, split: float = 1e-8) -> np.ndarray:
    """Numerical nullity of the Hessian on a res^(n-1) cell-center grid."""
    U = surface.domain
    pts = U.grid(res)
    out = np.empty(len(pts), dtype=np.int64)
    for i in range(0, len(pts), _DET_CHUNK):
        H = surface.hessian(pts[i:i + _DET_CHUNK])
        sv = np.abs(np.linalg.eigvalsh(H))
        scale = sv.max(axis=-1, keepdims=True)
        out[i:i + _DET_CHUNK] = np.where(
            scale[:, 0] == 0.0, surface.dim,
            (sv < split * np.maximum(scale, 1e-300)).sum(axis=-1))
    return out.reshape([res] * U.dim)


def usc_refinement_check(surface: Hypersurface, coarse_res: int,
                         refine: int = 4, split: float = 1e-8) -> dict:
    """Checks that coarse-grid kernel detections persist under refinement:
    for every coarse cell with nullity >= 1, the fine grid inside that cell
    must reach at least that nullity somewhere.  Returns counts of
    detections and violations (violations are flagged, not raised)."""
    coarse = nullity_grid(surface, coarse_res, split)
    fine = nullity_grid(surface, coarse_res * refine, split)
    d = coarse.ndim
    blocks = fine
    for ax in range(d):
        sh = list(blocks.shape)
        sh[ax] //= refine
        sh.insert(ax + 1, refine)
        blocks = blocks.reshape(sh).max(axis=ax + 1)
    detections = int((coarse >= 1).sum())
    violations = int(((coarse >= 1) & (blocks < coarse)).sum())
    return {"detections": detections, "violations": violations,
            "coarse_res": coarse_res, "fine_res": coarse_res * refine}


# ---------------------------------------------------------------------------
# Fat-Cantor surface body
# ---------------------------------------------------------------------------

class FatCantorBody:
    """g on (a padded neighborhood of) [0, 1] with g'' = distance to a
    nowhere-dense closed set T of positive measure.

    T is built by ``depth`` rounds of middle-interval removal with removed
    lengths summing to (1 - fatness)(1 - 2^-depth); the removed-interval
    ledger is retained.  g'' = h = d(., T) is piecewise linear, so
    r = integral of h and g = integral of r are evaluated exactly from
    per-segment cubic coefficients; no quadrature error.
    """

    def __init__(self, depth: int, fatness: float):
        if depth < 1 or depth > 24:
            raise ConstructionError("depth must be in [1, 24]")
        if not (0.0 < fatness < 1.0):
            raise ConstructionError("fatness must be in (0, 1)")
        self.depth = depth
        self.fatness = fatness
        intervals = [(0.0, 1.0)]
        removed = []
        for k in range(1, depth + 1):
            ell = (1.0 - fatness) * 2.0 ** (1 - 2 * k)
            nxt = []
            for a, b in intervals:
                mid = 0.5 * (a + b)
                ra, rb = mid - ell / 2.0, mid + ell / 2.0
                removed.append((ra, rb))
                nxt.append((a, ra))
                nxt.append((rb, b))
            intervals = nxt
        removed.sort()
        self.removed = removed
        self.kept = intervals
        self.zero_set_measure = 1.0 - sum(b - a for a, b in removed)
        # breakpoints where h changes slope: removal endpoints and midpoints
        nodes = [0.0]
        for a, b in removed:
            nodes.extend((a, 0.5 * (a + b), b))
        nodes.append(1.0)
        self._nodes = np.array(nodes)
        self._h_at = self._h_scalar(self._nodes)
        # slope of h on segment [nodes[i], nodes[i+1]]
        seg_mid = 0.5 * (self._nodes[:-1] + self._nodes[1:])
        widths = np.diff(self._nodes)
        self._slopes = np.where(
            widths > 0,
            (self._h_scalar(self._nodes[1:]) - self._h_at[:-1]) / np.where(widths > 0, widths, 1.0),
            0.0)
        # cumulative integrals at nodes: R = int h, G = int R
        R = np.zeros(len(nodes))
        G = np.zeros(len(nodes))
        for i in range(len(nodes) - 1):
            w = widths[i]
            h0, s = self._h_at[i], self._slopes[i]
            R[i + 1] = R[i] + h0 * w + 0.5 * s * w * w
            G[i + 1] = G[i] + R[i] * w + 0.5 * h0 * w * w + s * w ** 3 / 6.0
        self._R = R
        self._G = G
        self._starts = np.array([a for a, _ in removed])
        self._ends = np.array([b for _, b in removed])

    # exact distance to T for x in [0, 1]; linear continuation outside
    def _h_scalar(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        below = x < 0.0
        above = x > 1.0
        out[below] = -x[below]
        out[above] = x[above] - 1.0
        inside = ~(below | above)
        xi = x[inside]
        res = np.zeros_like(xi)
        if len(self._starts):
            j = np.searchsorted(self._starts, xi, side="right") - 1
            valid = j >= 0
            jj = np.clip(j, 0, len(self._starts) - 1)
            a, b = self._starts[jj], self._ends[jj]
            inside_removed = valid & (xi > a) & (xi < b)
            res[inside_removed] = np.minimum(xi - a, b - xi)[inside_removed]
        out[inside] = res
        return out

    def _locate(self, x):
        return np.clip(np.searchsorted(self._nodes, x, side="right") - 1,
                       0, len(self._nodes) - 2)

    def _rg(self, x):
        x = np.asarray(x, dtype=float)
        r = np.empty_like(x)
        g = np.empty_like(x)
        lo_m = x < 0.0
        hi_m = x > 1.0
        mid = ~(lo_m | hi_m)
        if np.any(lo_m):
            t = x[lo_m]
            r[lo_m] = -0.5 * t * t
            g[lo_m] = -(t ** 3) / 6.0
        if np.any(hi_m):
            t = x[hi_m] - 1.0
            r[hi_m] = self._R[-1] + 0.5 * t * t
            g[hi_m] = self._G[-1] + self._R[-1] * t + t ** 3 / 6.0
        if np.any(mid):
            xm = x[mid]
            j = self._locate(xm)
            dx = xm - self._nodes[j]
            h0, s = self._h_at[j], self._slopes[j]
            r[mid] = self._R[j] + h0 * dx + 0.5 * s * dx * dx
            g[mid] = (self._G[j] + self._R[j] * dx + 0.5 * h0 * dx * dx
                      + s * dx ** 3 / 6.0)
        return r, g

    # --- surface body protocol (1 variable) --------------------------------
    def value(self, x):
        x = np.asarray(x, dtype=float)
        _, g = self._rg(x[..., 0].ravel())
        return g.reshape(x.shape[:-1])

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        r, _ = self._rg(x[..., 0].ravel())
        return r.reshape(x.shape[:-1] + (1,))

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        h = self._h_scalar(x[..., 0].ravel())
        return h.reshape(x.shape[:-1] + (1, 1))

    def sup_gradient_bound(self, box: Box) -> float:
        r, _ = self._rg(np.array([box.lo[0], box.hi[0]]))
        return float(np.max(np.abs(r)))

    def sup_hessian_bound(self, box: Box) -> float:
        cands = np.concatenate([[box.lo[0], box.hi[0]],
                                self._nodes[(self._nodes >= box.lo[0])
                                            & (self._nodes <= box.hi[0])]])
        return float(np.max(self._h_scalar(cands)))


# ---------------------------------------------------------------------------
# Builtin catalog
# ---------------------------------------------------------------------------

def _paraboloid(n: int) -> Hypersurface:
    if n < 2:
        raise ConstructionError("paraboloid needs n >= 2")
    d = n - 1
    coeffs = {}
    for i in range(d):
        e = [0] * d
        e[i] = 2
        coeffs[tuple(e)] = 1.0
    dom = Box((-1.0,) * d, (1.0,) * d)
    return Hypersurface(n, dom, Polynomial(coeffs, d), name=f"paraboloid({n})")


def _degenerate_quadratic(b) -> Hypersurface:
    b = [float(t) for t in b]
    if len(b) != 6:
        raise ConstructionError("degenerate-quadratic expects 6 coefficients")
    b1, b2, b3, b4, b5, b6 = b
    poly = Polynomial({(2, 0): b1, (1, 1): b2, (0, 2): b3,
                       (1, 0): b4, (0, 1): b5, (0, 0): b6}, 2)
    return Hypersurface(3, Box((-1.0, -1.0), (1.0, 1.0)), poly,
                        name="degenerate-quadratic")


def _gordan_noether() -> Hypersurface:
    # x1^2 x3 + x1 x2 x4 + x2^2 x5 + x1^3 + x2^3: Hessian determinant
    # vanishes identically although g depends on every variable
    poly = Polynomial({
        (2, 0, 1, 0, 0): 1.0,
        (1, 1, 0, 1, 0): 1.0,
        (0, 2, 0, 0, 1): 1.0,
        (3, 0, 0, 0, 0): 1.0,
        (0, 3, 0, 0, 0): 1.0,
    }, 5)
    return Hypersurface(6, Box((-2.0,) * 5, (2.0,) * 5), poly, name="gordan-noether")


def _random_poly(n: int, degree: int, seed: int) -> Hypersurface:
    if n < 2 or degree < 1:
        raise ConstructionError("random-poly needs n >= 2 and degree >= 1")
    d = n - 1
    rng = np.random.default_rng(seed)
    coeffs = {}

    def rec(prefix, remaining):
        if len(prefix) == d:
            coeffs[tuple(prefix)] = float(rng.normal())
            return
        for e in range(remaining + 1):
            rec(prefix + [e], remaining - e)

    rec([], degree)
    dom = Box((-1.0,) * d, (1.0,) * d)
    return Hypersurface(n, dom, Polynomial(coeffs, d), name=f"random-poly({seed})")


_BUILTIN_PARAMS = {
    "paraboloid": {"n"},
    "degenerate-quadratic": {"b"},
    "gordan-noether": set(),
    "fat-cantor": {"depth", "fatness"},
    "random-poly": {"n", "degree", "seed"},
}


def make_builtin(name: str, params: dict | None = None) -> Hypersurface:
    """Construct a builtin surface by name; see the module docstring."""
    params = dict(params or {})
    if name not in _BUILTIN_PARAMS:
        raise ConstructionError(f"unknown builtin surface {name!r}")
    extra = set(params) - _BUILTIN_PARAMS[name]
    if extra:
        raise ConstructionError(
            f"unknown parameters {sorted(extra)} for builtin {name!r}")
    try:
        if name == "paraboloid":
            return _paraboloid(int(params.get("n", 3)))
        if name == "degenerate-quadratic":
            return _degenerate_quadratic(params["b"])
        if name == "gordan-noether":
            return _gordan_noether()
        if name == "fat-cantor":
            body = FatCantorBody(int(params.get("depth", 6)),
                                 float(params.get("fatness", 0.5)))
            return Hypersurface(2, Box((-0.25,), (1.25,)), body, name="fat-cantor")
        return _random_poly(int(params.get("n", 3)),
                            int(params.get("degree", 3)),
                            int(params.get("seed", 0)))
    except KeyError as exc:
        raise ConstructionError(f"missing parameter {exc} for builtin {name!r}")
