"""Resonant slabs and their ball covers.

For an integer pair (p, q) the resonant slab on the window K is

    S(p, q) = {x in K : |q . (x, g(x)) - p - theta(x)| < Psi(q)},

represented through the auxiliary field h and thickness rho:

    q_n != 0:  h(x) = r.x + g(x) - (p + theta(x))/q_n,  r = q_head/q_n,
               rho = Psi(q)/|q_n|
    q_n  = 0:  h(x) = r.x - p - theta(x),               r = q_head,
               rho = Psi(q)

so that S(p, q) = {x in K : |h(x)| < rho} in both branches.

The regime dichotomy: either grad h has a root v with ||grad h|| comparable
to ||x - v|| (an interior critical point), or ||grad h|| is uniformly
comparable to ||(r, 1)|| on K.  Covers are assembled accordingly: critical
slabs through dyadic annuli around v, uniform slabs through a single pass
over K, both resting on the sublevel covering step which covers
{|phi| < ||grad phi(x)|| * delta} inside B(x, alpha) by O((alpha/delta)^(n-2))
balls of radius delta.

Everything here is pure and immutable; covers for distinct (p, q) can be
built in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (ArgumentError, BudgetError, GradientDegeneracyError,
                     UnsupportedRegimeError)
from .model import (ApproxFunction, Box, CompactWindow, DimensionFunction,
                    Hypersurface, Polynomial, Shift, eval_F)

__all__ = [
    "HField",
    "Regime",
    "BallCover",
    "CoverReport",
    "build_h",
    "classify_regime",
    "cover_sublevel",
    "cover_slab",
    "count_admissible_p",
    "admissible_p_range",
    "DEFAULT_C_COUNT",
]

# Frozen artifact-wide constants (see module test-suite for calibration).
DEFAULT_C_COUNT = 24.0     # ball-count law: count <= C_count * max(1, alpha/delta)^(n-2)
_SAFETY = 1.05             # inflation applied to rigorous Hessian sup bounds


# ---------------------------------------------------------------------------
# The auxiliary field h
# ---------------------------------------------------------------------------

class HField:
    """Field h whose rho-sublevel set is the slab S(p, q); carries exact
    vectorized value/gradient/Hessian evaluators."""

    def __init__(self, p: int, q, surface: Hypersurface, shift: Shift,
                 psi: ApproxFunction):
        q = np.asarray(q, dtype=np.int64)
        if q.ndim != 1 or q.shape[0] != surface.n:
            raise ArgumentError(f"q must be an integer vector of length {surface.n}")
        if not np.any(q):
            raise ArgumentError("q must be nonzero")
        self.p = int(p)
        self.q = q
        self.surface = surface
        self.shift = shift
        self.psi = psi
        self.qn = int(q[-1])
        psi_q = float(psi.value(q))
        if self.qn != 0:
            self.r = q[:-1].astype(float) / self.qn
            self.rho = psi_q / abs(self.qn)
        else:
            self.r = q[:-1].astype(float)
            self.rho = psi_q
        self.q_norm = float(np.max(np.abs(q)))
        # max-norm of the direction vector (r, 1)
        self.r1_norm = max(float(np.max(np.abs(self.r))) if self.r.size else 0.0, 1.0)
        self._hess_sup: float | None = None

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.qn != 0:
            return (x @ self.r + self.surface.value(x)
                    - (self.p + self.shift.value(x)) / self.qn)
        return x @ self.r - self.p - self.shift.value(x)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.qn != 0:
            return (self.r + self.surface.gradient(x)
                    - self.shift.gradient(x) / self.qn)
        return np.broadcast_to(self.r, x.shape).copy() - self.shift.gradient(x)

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.qn != 0:
            return self.surface.hessian(x) - self.shift.hessian(x) / self.qn
        return -self.shift.hessian(x)

    def sup_hessian_bound(self) -> float:
        """Rigorous upper bound for sup over U of the Hessian operator norm."""
        if self._hess_sup is None:
            U = self.surface.domain
            if self.qn != 0:
                b = (self.surface.sup_hessian_bound(U)
                     + self.shift.sup_hessian_bound(U) / abs(self.qn))
            else:
                b = self.shift.sup_hessian_bound(U)
            self._hess_sup = float(b)
        return self._hess_sup

    @property
    def dim(self) -> int:
        return self.surface.dim


def build_h(p: int, q, surface: Hypersurface, shift: Shift,
            psi: ApproxFunction) -> HField:
    """Assemble the slab field for (p, q); the branch is chosen by q_n."""
    return HField(p, q, surface, shift, psi)


# ---------------------------------------------------------------------------
# Regime classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Regime:
    tag: str                      # "case1" | "case2" | "exceptional"
    v: tuple | None = None        # critical point (case1)
    gradient_scale: float = 0.0   # inf ||grad h|| / ||(r,1)|| (case2)
    c_lo: float = 0.0             # measured comparability constants
    c_hi: float = 0.0
    note: str = ""

    @property
    def is_case1(self) -> bool:
        return self.tag == "case1"

    @property
    def is_case2(self) -> bool:
        return self.tag == "case2"

    @property
    def is_exceptional(self) -> bool:
        return self.tag == "exceptional"


def _probe_grid(box: Box, res: int, cap: int = 8192) -> np.ndarray:
    d = box.dim
    if res ** d > cap:
        res = max(4, int(cap ** (1.0 / d)))
    return box.grid(res)


def _newton_critical_point(h: HField, window: CompactWindow, tol: float):
    """Damped Newton multistart for grad h = 0; best root inside U or None."""
    U = h.surface.domain
    starts = [window.box.center]
    starts.extend(window.box.corner_grid(3))
    escape = 3.0 * max(U.diameter, 1.0)
    best = None
    best_res = np.inf
    for x0 in starts:
        x = np.asarray(x0, dtype=float).copy()
        gx = h.gradient(x)
        res = float(np.linalg.norm(gx))
        for _ in range(60):
            if res <= tol:
                break
            H = h.hessian(x)
            try:
                step = np.linalg.solve(H, -gx)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, -gx, rcond=None)[0]
            if not np.all(np.isfinite(step)):
                break
            lam = 1.0
            improved = False
            while lam >= 1e-4:
                x_new = x + lam * step
                g_new = h.gradient(x_new)
                r_new = float(np.linalg.norm(g_new))
                if r_new < res:
                    x, gx, res = x_new, g_new, r_new
                    improved = True
                    break
                lam *= 0.5
            if not improved:
                break
            if np.linalg.norm(x - U.center) > escape:
                break
        if res <= tol and U.contains(x, tol=1e-9) and res < best_res:
            best, best_res = x.copy(), res
    return best


def classify_regime(h: HField, window: CompactWindow, *,
                    eps_grad: float = 1e-3, probe_res: int = 32,
                    newton_tol_rel: float = 1e-9,
                    ratio_cap: float = 1e3) -> Regime:
    """Decide which comparability relation ||grad h|| satisfies on K.

    Runs a damped Newton iteration on grad h = 0 from the window center and
    a 3^(n-1) corner multistart.  A root v inside U gives the critical
    regime provided the measured ratios ||grad h(x)|| / ||x - v|| on the
    probe grid stay within a bounded window (this also rejects degenerate
    cases where grad h vanishes on a positive-dimensional set).  Otherwise
    the uniform regime requires inf ||grad h|| > eps_grad * ||(r,1)|| on the
    probes.  Anything else is Exceptional -- never a hard error.
    """
    tol = newton_tol_rel * h.r1_norm
    probes = _probe_grid(window.box, probe_res)
    grads = h.gradient(probes)
    gnorms = np.linalg.norm(grads, axis=-1)

    v = _newton_critical_point(h, window, tol)
    degenerate_root = False
    if v is not None:
        # the critical regime needs an isolated nondegenerate critical point;
        # a singular Hessian at v signals a positive-dimensional zero set of
        # grad h (the finitely-many exceptional q)
        Hv = np.abs(np.linalg.eigvalsh(h.hessian(v)))
        degenerate_root = Hv.min() <= 1e-8 * max(Hv.max(), 1e-300)
        if not degenerate_root:
            dist = np.linalg.norm(probes - v, axis=-1)
            mask = dist > 1e-9 * max(window.box.diameter, 1.0)
            if np.any(mask):
                ratios = gnorms[mask] / dist[mask]
                c_lo, c_hi = float(ratios.min()), float(ratios.max())
                if c_lo > 0 and c_hi / c_lo <= ratio_cap:
                    return Regime("case1", v=tuple(float(t) for t in v),
                                  c_lo=c_lo, c_hi=c_hi)
    if degenerate_root:
        return Regime("exceptional",
                      note="critical set of grad h is degenerate at the root")

    inf_g = float(gnorms.min())
    if inf_g > eps_grad * h.r1_norm:
        ratios = gnorms / h.r1_norm
        c_lo, c_hi = float(ratios.min()), float(ratios.max())
        if c_hi / c_lo <= ratio_cap:
            return Regime("case2", gradient_scale=c_lo, c_lo=c_lo, c_hi=c_hi)
        return Regime("exceptional", c_lo=c_lo, c_hi=c_hi,
                      note="uniform-gradient ratio window exceeded")
    return Regime("exceptional",
                  note="no usable critical point and gradient gate failed")


# ---------------------------------------------------------------------------
# Ball covers
# ---------------------------------------------------------------------------

@dataclass
class BallCover:
    """Cover by balls; ``groups`` lists (radius, count) so the cost stays
    exact even when centers are not materialized.  Convention fixed
    artifact-wide: diam(B) = 2 * radius."""

    centers: np.ndarray | None
    radii: np.ndarray | None
    groups: list = field(default_factory=list)   # [(radius, count)]
    target: str = ""

    @staticmethod
    def empty(dim: int) -> "BallCover":
        return BallCover(np.zeros((0, dim)), np.zeros(0), [], "")

    @property
    def count(self) -> int:
        if self.radii is not None:
            return int(len(self.radii))
        return int(sum(c for _, c in self.groups))

    def f_cost(self, f: DimensionFunction) -> float:
        if self.groups:
            return math.fsum(c * float(f.value(2.0 * r)) for r, c in self.groups)
        if self.radii is None or len(self.radii) == 0:
            return 0.0
        return math.fsum(f.value(2.0 * self.radii).tolist())

    @staticmethod
    def concatenate(covers, dim: int) -> "BallCover":
        covers = [c for c in covers if c.count > 0]
        if not covers:
            return BallCover.empty(dim)
        groups = [g for c in covers for g in c.groups]
        if all(c.centers is not None for c in covers):
            centers = np.concatenate([c.centers for c in covers], axis=0)
            radii = np.concatenate([c.radii for c in covers], axis=0)
            return BallCover(centers, radii, groups)
        return BallCover(None, None, groups)


def _householder_to_last(u: np.ndarray) -> np.ndarray:
    """Orthogonal symmetric matrix exchanging u with the last basis vector."""
    d = len(u)
    e = np.zeros(d)
    e[-1] = 1.0
    w = u - e
    nw2 = float(w @ w)
    if nw2 < 1e-24:
        return np.eye(d)
    return np.eye(d) - 2.0 * np.outer(w, w) / nw2


def _transverse_nodes(k: int, extent: float, pitch: float) -> np.ndarray:
    """Grid of pitch ``pitch`` over the transverse k-cube [-extent, extent]^k."""
    if k == 0:
        return np.zeros((1, 0))
    m = int(math.ceil(extent / pitch))
    axis = np.arange(-m, m + 1, dtype=float) * pitch
    mesh = np.meshgrid(*([axis] * k), indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    return pts[np.linalg.norm(pts, axis=1) <= extent + 1e-12]


def _solve_level(field, base, u, s0, targets, lo, hi, slope_floor):
    """Vectorized damped Newton for phi(base + s u) = target on monotone fibers.

    ``base`` is (F, d), s0/targets/lo/hi are (F,).  Returns s with
    phi(s) = target to high relative accuracy; fibers that fail to converge
    are resolved by bisection (phi is monotone along the fiber by the
    gradient-domination precondition).
    """
    s = np.clip(s0, lo, hi)
    for _ in range(12):
        pts = base + s[:, None] * u
        val = field.value(pts) - targets
        der = field.gradient(pts) @ u
        der = np.where(np.abs(der) < slope_floor, np.sign(der + 1e-300) * slope_floor, der)
        step = -val / der
        s_new = np.clip(s + step, lo, hi)
        if np.max(np.abs(s_new - s)) < 1e-14 * max(1.0, np.max(np.abs(hi))):
            s = s_new
            break
        s = s_new
    # verify; fall back to bisection where Newton got stuck on a boundary
    pts = base + s[:, None] * u
    resid = np.abs(field.value(pts) - targets)
    tol = 1e-9 * np.maximum(np.abs(targets), slope_floor * (hi - lo + 1e-300))
    bad = resid > np.maximum(tol, 1e-13)
    if np.any(bad):
        blo, bhi = lo[bad].copy(), hi[bad].copy()
        bb, bt = base[bad], targets[bad]
        flo = field.value(bb + blo[:, None] * u) - bt
        for _ in range(60):
            mid = 0.5 * (blo + bhi)
            fm = field.value(bb + mid[:, None] * u) - bt
            left = (flo <= 0) == (fm <= 0)
            blo = np.where(left, mid, blo)
            flo = np.where(left, fm, flo)
            bhi = np.where(left, bhi, mid)
        s[bad] = 0.5 * (blo + bhi)
    return s


@dataclass
class SublevelCover:
    cover: BallCover
    alpha: float
    delta: float
    n_fibers: int
    n_nonempty: int

    @property
    def count(self) -> int:
        return self.cover.count


def cover_sublevel(field, x, alpha: float, delta: float, *,
                   C: float | None = None, pitch_factor: float = 1.0,
                   extent: float | None = None, materialize: bool = True,
                   max_balls: float = 2e7) -> SublevelCover:
    """Cover {y in B(x, alpha) : |phi(y)| < ||grad phi(x)|| * delta} by balls
    of radius delta.

    Precondition (raises GradientDegeneracyError): ||grad phi(x)|| >=
    C * alpha * sup ||grad^2 phi||, with C = 8(n-1) by default.  Under it
    phi is monotone along fibers parallel to grad phi(x) with slope within
    a factor (1 +- 2/C) of ||grad phi(x)||.

    Construction: rotate so grad phi(x) points along the last axis, lay a
    transverse grid of pitch ~delta over the remaining n-2 rotated
    coordinates, locate the sublevel interval on each fiber by vectorized
    Newton/bisection, and cover it (padded by the worst-case transverse
    drift of the zero set) with radius-delta balls.  Fibers the slab misses
    emit nothing.  Ball count obeys count <= C_count * max(1, alpha/delta)^(n-2)
    with the frozen artifact constant.

    ``extent`` (default alpha) shrinks the coverage obligation to
    B(x, extent) while the curvature control still uses the alpha-ball;
    callers tiling a region with overlapping alpha-balls pass each ball's
    private cell radius here to avoid covering the overlaps repeatedly.
    """
    x = np.asarray(x, dtype=float)
    d = field.dim
    if alpha <= 0 or delta <= 0:
        raise ArgumentError("alpha and delta must be positive")
    if C is None:
        C = 8.0 * d
    if extent is None:
        extent = alpha
    extent = min(extent, alpha)
    gx = np.asarray(field.gradient(x), dtype=float)
    kappa = float(np.linalg.norm(gx))
    Hsup = field.sup_hessian_bound() * _SAFETY
    if kappa < C * alpha * Hsup:
        raise GradientDegeneracyError(
            f"||grad phi|| = {kappa:.3g} < C*alpha*sup||hess|| = "
            f"{C * alpha * Hsup:.3g}; shrink alpha or reclassify")

    u = gx / kappa
    H = _householder_to_last(u)
    k = d - 1
    slope_lo = kappa * (1.0 - 2.0 / C)
    slope_hi = kappa * (1.0 + 2.0 / C)

    pitch = pitch_factor * delta
    if k > 0:
        # keep the worst transverse offset strictly below the ball radius
        max_pitch = 1.9 * delta / math.sqrt(k)
        pitch = min(pitch, max_pitch)
    m_off = 0.5 * pitch * math.sqrt(k)
    w_eff = math.sqrt(max(delta ** 2 - m_off ** 2, (0.25 * delta) ** 2)) * (1 - 1e-12)
    # worst-case drift of the zero set across one transverse cell, padded 1.5x
    # to absorb the fiber reach slightly exceeding alpha in the slope bound
    ext = 3.0 * m_off / (C - 2.0) + 1e-12 * delta

    nodes = _transverse_nodes(k, extent + pitch, pitch)
    if k > 0:
        base = x + nodes @ H[:, :k].T
        t_norm2 = np.einsum("ij,ij->i", nodes, nodes)
    else:
        base = x[None, :]
        t_norm2 = np.zeros(1)
    reach = extent + 2.0 * delta + ext
    a = np.sqrt(np.maximum(reach ** 2 - t_norm2, 0.0))
    F = len(base)

    level = kappa * delta
    phi_lo = field.value(base - a[:, None] * u)
    phi_hi = field.value(base + a[:, None] * u)
    # fibers are monotone increasing along u; slab present iff the window
    # (-level, level) intersects [phi_lo, phi_hi]
    nonempty = (phi_lo < level) & (phi_hi > -level)
    idx = np.where(nonempty)[0]
    sub = SublevelCover(BallCover.empty(d), alpha, delta, F, 0)
    if len(idx) == 0:
        return sub

    b = base[idx]
    ai = a[idx]
    plo, phi_ = phi_lo[idx], phi_hi[idx]
    # solve phi = -level / +level only on fibers whose endpoint values
    # bracket the target; the rest clamp to the chord ends
    slope_est = np.maximum((phi_ - plo) / (2.0 * ai + 1e-300), slope_lo)
    s_minus = -ai.copy()
    need = plo < -level
    if np.any(need):
        guess = (-level - plo[need]) / slope_est[need] - ai[need]
        s_minus[need] = _solve_level(field, b[need], u, guess,
                                     np.full(int(need.sum()), -level),
                                     -ai[need], ai[need], slope_lo)
    s_plus = ai.copy()
    need = phi_ > level
    if np.any(need):
        guess = (level - plo[need]) / slope_est[need] - ai[need]
        s_plus[need] = _solve_level(field, b[need], u, guess,
                                    np.full(int(need.sum()), level),
                                    -ai[need], ai[need], slope_lo)
    lo = s_minus - ext
    hi = s_plus + ext
    lengths = np.maximum(hi - lo, 0.0)
    counts = np.maximum(np.ceil(lengths / (2.0 * w_eff)).astype(np.int64), 1)
    total = int(counts.sum())
    if total > max_balls:
        raise BudgetError(f"sublevel cover would need {total} balls "
                          f"(> budget {int(max_balls)})")

    sub.n_nonempty = len(idx)
    if materialize:
        rep = np.repeat(np.arange(len(idx)), counts)
        offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        s_c = lo[rep] + w_eff * (2 * offs + 1)
        centers = b[rep] + s_c[:, None] * u
        cover = BallCover(centers, np.full(total, delta), [(delta, total)])
    else:
        cover = BallCover(None, None, [(delta, total)])
    sub.cover = cover
    return sub


# ---------------------------------------------------------------------------
# Slab covers (Case 1 / Case 2 assembly)
# ---------------------------------------------------------------------------

@dataclass
class CoverReport:
    p: int
    q: tuple
    regime: str
    n_balls: int
    f_cost: float
    bound: float
    ratio: float
    mode: str = "balls"
    balls: BallCover | None = None
    calls: list = field(default_factory=list)   # (alpha, delta, count) per sub-cover
    annuli: list = field(default_factory=list)  # Case 1 k-range actually used

    def record(self) -> dict:
        return {
            "p": self.p,
            "q": list(self.q),
            "regime": self.regime,
            "n_balls": self.n_balls,
            "f_cost": self.f_cost,
            "bound": self.bound,
            "ratio": self.ratio,
        }


def _cell_cover_nodes(box_lo, box_hi, radius: float, dim: int):
    """Centers of a cubic grid whose radius-``radius`` balls cover the box."""
    pitch = 2.0 * radius / math.sqrt(dim) * (1 - 1e-9)
    axes = []
    for lo, hi in zip(box_lo, box_hi):
        m = max(1, int(math.ceil((hi - lo) / pitch)))
        axes.append(lo + (hi - lo) * (np.arange(m) + 0.5) / m)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def _skip_mask(h: HField, centers: np.ndarray, alpha: float, C: float):
    """True where the ball B(center, alpha) may meet the slab."""
    vals = np.abs(h.value(centers))
    kap = np.linalg.norm(h.gradient(centers), axis=-1)
    return vals <= h.rho + kap * alpha * (1.0 + 2.0 / C) + alpha ** 2 * h.sup_hessian_bound()


def _covering_pass(h: HField, centers, alpha: float, f, C, Hsup, mode,
                   report: CoverReport, covers: list, max_balls, depth: int = 0):
    """Run cover_sublevel over the surviving centers.  Where the gradient-
    domination precondition fails for the requested alpha, the ball is
    re-tiled by half-radius balls and the pass recurses (alpha-halving)."""
    quadrature = mode == "quadrature"
    retry = []
    for c in centers:
        kap_c = float(np.linalg.norm(h.gradient(c)))
        if kap_c < C * alpha * Hsup * _SAFETY:
            retry.append(c)
            continue
        delta = h.rho / kap_c
        if quadrature:
            cost_groups, count, _ = _quadrature_cost(h, c, alpha, delta, C)
            if count:
                covers.append(BallCover(None, None, cost_groups))
                report.calls.append((alpha, delta, count))
        else:
            sub = cover_sublevel(h, c, alpha, delta, C=C,
                                 materialize=(mode == "balls"),
                                 max_balls=max_balls)
            if sub.count:
                covers.append(sub.cover)
                report.calls.append((alpha, delta, sub.count))
    if retry:
        if depth >= 8:
            raise GradientDegeneracyError(
                f"gradient precondition still failing after {depth} halvings "
                f"({len(retry)} balls of radius {alpha:.3g})")
        half = alpha / 2.0
        sub_nodes = []
        for c in retry:
            nodes = c + _cell_cover_nodes(
                np.full(h.dim, -alpha), np.full(h.dim, alpha), half, h.dim)
            sub_nodes.append(nodes)
        nodes = np.concatenate(sub_nodes, axis=0)
        nodes = nodes[_skip_mask(h, nodes, half, C)]
        if len(nodes):
            _covering_pass(h, nodes, half, f, C, Hsup, mode, report, covers,
                           max_balls, depth + 1)


def _quadrature_cost(h: HField, x, alpha: float, delta: float, C: float,
                     coarse: int = 33):
    """Estimated ball count of the cover_sublevel construction, by sampling
    fibers at a coarse transverse pitch instead of pitch delta.

    Each sampled fiber stands for (coarse pitch / delta) fine fibers; its
    interval length is 2*rho/slope at the located zero.  Bias is O(1/coarse)
    from partial occupancy at the slab's entry/exit; cross-validated against
    the exact path in the tests.
    """
    x = np.asarray(x, dtype=float)
    d = h.dim
    k = d - 1
    gx = h.gradient(x)
    kappa = float(np.linalg.norm(gx))
    u = gx / kappa
    Hm = _householder_to_last(u)
    level = kappa * delta

    pitch_fine = min(delta, 1.9 * delta / math.sqrt(max(k, 1)))
    m_off = 0.5 * pitch_fine * math.sqrt(k)
    w_eff = math.sqrt(max(delta ** 2 - m_off ** 2, (0.25 * delta) ** 2)) * (1 - 1e-12)
    ext = (2.0 * m_off / (C - 2.0))

    if k == 0:
        nodes = np.zeros((1, 0))
        weight = 1.0
    else:
        m = coarse if k == 1 else max(9, int(math.sqrt(coarse)))
        axis = np.linspace(-(alpha + pitch_fine), alpha + pitch_fine, m)
        mesh = np.meshgrid(*([axis] * k), indexing="ij")
        nodes = np.stack([g.ravel() for g in mesh], axis=-1)
        nodes = nodes[np.linalg.norm(nodes, axis=1) <= alpha + pitch_fine + 1e-12]
        coarse_pitch = axis[1] - axis[0]
        weight = (coarse_pitch / pitch_fine) ** k
    base = x + nodes @ Hm[:, :k].T if k else x[None, :]
    t2 = np.einsum("ij,ij->i", nodes, nodes) if k else np.zeros(1)
    reach = alpha + 2 * delta + ext
    a = np.sqrt(np.maximum(reach ** 2 - t2, 0.0))

    phi_lo = h.value(base - a[:, None] * u)
    phi_hi = h.value(base + a[:, None] * u)
    nonempty = (phi_lo < level) & (phi_hi > -level)
    if not np.any(nonempty):
        return [], 0, 0
    b = base[nonempty]
    ai = a[nonempty]
    slope_lo = kappa * (1 - 2.0 / C)
    s0 = np.zeros(len(b))
    s_root = _solve_level(h, b, u, s0, np.zeros(len(b)), -ai, ai, slope_lo)
    pts = b + s_root[:, None] * u
    slope = np.abs(h.gradient(pts) @ u)
    slope = np.maximum(slope, slope_lo)
    lengths = np.minimum(2.0 * level / slope, 2.0 * ai) + 2.0 * ext
    per_fiber = np.ceil(lengths / (2.0 * w_eff))
    est = float(per_fiber.sum() * weight)
    count = int(math.ceil(est))
    return [(delta, count)], count, int(round(len(b) * weight))


def cover_slab(h: HField, regime: Regime, window: CompactWindow,
               f: DimensionFunction, *, C: float | None = None,
               epsilon: float | None = None, mode: str = "balls",
               max_balls: float = 2e7) -> CoverReport:
    """Assemble the full ball cover of S(p, q) on K and account its f-cost.

    Case 1 walks dyadic annuli A_k around the critical point v, covering
    each by balls of radius eps*2^-k and running the sublevel step with the
    per-ball delta = rho/||grad h(center)||; the k-sum truncates once the
    slab is thicker than the annulus, at which point the remaining disk is
    covered directly by O(1) balls of radius 2^k rho.  Case 2 covers K once
    by balls of radius eps.  The report carries the f-cost, the reference
    bound F(Psi(q)/||q||) and their ratio.

    ``mode``: "balls" materializes centers, "cost" counts without storing,
    "quadrature" estimates the same construction's count via coarse fiber
    sampling (for scales where enumeration is infeasible).
    """
    if regime.is_exceptional:
        raise UnsupportedRegimeError(
            "cover_slab cannot handle the exceptional regime; "
            "cover K directly instead")
    if mode not in ("balls", "cost", "quadrature"):
        raise ArgumentError(f"unknown cover mode {mode!r}")
    d = h.dim
    if C is None:
        C = 8.0 * d
    if epsilon is None:
        epsilon = 1.0 / (4.0 * C)
    K = window.box
    Hsup = h.sup_hessian_bound()
    bound = eval_F(f, h.surface.n, float(h.psi.value(h.q)) / h.q_norm)
    report = CoverReport(p=h.p, q=tuple(int(t) for t in h.q), regime=regime.tag,
                         n_balls=0, f_cost=0.0, bound=bound, ratio=0.0, mode=mode)
    covers: list[BallCover] = []

    if regime.is_case2:
        centers = _cell_cover_nodes(K.lo, K.hi, epsilon, d)
        centers = centers[_skip_mask(h, centers, epsilon, C)]
        _covering_pass(h, centers, epsilon, f, C, Hsup, mode, report, covers,
                       max_balls)
    else:
        v = np.asarray(regime.v, dtype=float)
        corners = K.corner_grid(2)
        dmax = float(np.max(np.linalg.norm(corners - v, axis=1)))
        dmin = float(np.linalg.norm(K.clip(v) - v))
        c_lo = max(regime.c_lo, 1e-12)
        k = int(math.floor(-math.log2(max(dmax, 1e-300))))
        k_used = []
        while True:
            r_out, r_in = 2.0 ** (-k), 2.0 ** (-k - 1)
            if r_out < max(dmin, 1e-300) and dmin > 0:
                break
            alpha_k = epsilon * r_out
            # thickest slab scale inside this annulus, via the measured
            # comparability ||grad h|| >= c_lo * dist
            delta_est = h.rho / (c_lo * r_in)
            if 2.0 ** k * h.rho >= 2.0 * r_out or delta_est >= 0.5 * alpha_k:
                # slab at least as thick as the covering balls: covering the
                # remaining disk directly at the slab's own thickness scale
                # avoids redundant overlapping sublevel passes
                R = min(max(2.0 ** k * h.rho, delta_est), 2.0 * r_out)
                _direct_disk_cover(h, v, r_out, R, K, C, mode, report, covers)
                k_used.append(k)
                break
            if r_in > dmax:
                k += 1
                continue
            nodes = _annulus_nodes(v, r_in, r_out, alpha_k, K, d)
            if len(nodes):
                nodes = nodes[_skip_mask(h, nodes, alpha_k, C)]
                if len(nodes):
                    _covering_pass(h, nodes, alpha_k, f, C, Hsup, mode, report,
                                   covers, max_balls)
                    k_used.append(k)
            k += 1
            if k > 1080:
                break
        report.annuli = k_used

    total = BallCover.concatenate(covers, d)
    report.n_balls = total.count
    report.f_cost = total.f_cost(f)
    report.ratio = report.f_cost / bound if bound > 0 else 0.0
    if mode == "balls":
        report.balls = total
    return report


def _direct_disk_cover(h: HField, v, r_out: float, R: float, K: Box, C,
                       mode: str, report: CoverReport, covers: list):
    """Cover B(v, r_out) cap slab directly by balls of radius R, grid pitch
    R/sqrt(d) with a radial clamp into the disk (cell half-diagonal plus
    clamp stay within R), keeping only nodes that pass the slab skip test."""
    d = h.dim
    lo = np.maximum(v - r_out, K.lo - R)
    hi = np.minimum(v + r_out, K.hi + R)
    if np.any(hi <= lo):
        return
    pitch = R / math.sqrt(d)
    axes = []
    for a_lo, a_hi in zip(lo, hi):
        m = max(1, int(math.ceil((a_hi - a_lo) / pitch)))
        axes.append(a_lo + (a_hi - a_lo) * (np.arange(m) + 0.5) / m)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=-1)
    dist = np.linalg.norm(nodes - v, axis=1)
    keep = dist <= r_out + 0.5 * R
    nodes, dist = nodes[keep], dist[keep]
    if not len(nodes):
        return
    clamped = np.minimum(dist, r_out)
    scale = np.where(dist > 1e-300, clamped / np.maximum(dist, 1e-300), 1.0)
    nodes = v + (nodes - v) * scale[:, None]
    nodes = nodes[_skip_mask(h, nodes, R, C)]
    if not len(nodes):
        return
    if mode == "balls":
        covers.append(BallCover(nodes, np.full(len(nodes), R), [(R, len(nodes))]))
    else:
        covers.append(BallCover(None, None, [(R, len(nodes))]))
    report.calls.append((r_out, R, len(nodes)))


def _annulus_nodes(v, r_in: float, r_out: float, alpha: float, K: Box, dim: int):
    """Grid centers inside the annulus {r_in <= |x - v| <= r_out}, clamped
    radially into it, restricted to the vicinity of K."""
    lo = np.maximum(v - r_out, K.lo - alpha)
    hi = np.minimum(v + r_out, K.hi + alpha)
    if np.any(hi <= lo):
        return np.zeros((0, dim))
    # pitch alpha/sqrt(d): cell half-diagonal alpha/2, so the radial clamp
    # (at most alpha/2) keeps every point within alpha of its kept node
    pitch = alpha / math.sqrt(dim)
    axes = []
    for a_lo, a_hi in zip(lo, hi):
        m = max(1, int(math.ceil((a_hi - a_lo) / pitch)))
        axes.append(a_lo + (a_hi - a_lo) * (np.arange(m) + 0.5) / m)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=-1)
    dist = np.linalg.norm(nodes - v, axis=1)
    keep = (dist >= r_in - 0.5 * alpha) & (dist <= r_out + 0.5 * alpha)
    nodes, dist = nodes[keep], dist[keep]
    if not len(nodes):
        return nodes
    clamped = np.clip(dist, r_in, r_out)
    scale = np.where(dist > 1e-300, clamped / np.maximum(dist, 1e-300), 1.0)
    return v + (nodes - v) * scale[:, None]


# ---------------------------------------------------------------------------
# Admissible p counting
# ---------------------------------------------------------------------------

def _univariate_range(coeffs: np.ndarray, lo: float, hi: float):
    """Exact range of sum_k coeffs[k] x^k over [lo, hi]."""
    cands = [lo, hi]
    deg = len(coeffs) - 1
    if deg >= 2:
        dcoef = coeffs[1:] * np.arange(1, deg + 1)
        roots = np.roots(dcoef[::-1])
        for r in roots:
            if abs(r.imag) < 1e-12 and lo < r.real < hi:
                cands.append(float(r.real))
    vals = [float(np.polyval(coeffs[::-1], c)) for c in cands]
    return min(vals), max(vals)


def _is_separable(poly) -> bool:
    return bool(np.all((poly.exponents > 0).sum(axis=1) <= 1))


def _power_range(lo: float, hi: float, e: int):
    if e == 0:
        return 1.0, 1.0
    vals = [lo ** e, hi ** e]
    if e % 2 == 0 and lo < 0 < hi:
        vals.append(0.0)
    return min(vals), max(vals)


def admissible_p_range(q, window: CompactWindow, surface: Hypersurface,
                       shift: Shift, psi: ApproxFunction):
    """Interval-arithmetic range [m, M] of q.(x, g(x)) - theta(x) over K and
    the admissible integers p (those with m - Psi < p < M + Psi).

    For separable bodies (every monomial involving one variable, e.g. the
    paraboloid with an affine shift) the per-coordinate ranges are exact, so
    the count matches brute-force enumeration exactly; otherwise monomial-
    wise interval products give a safe over-approximation.
    """
    q = np.asarray(q, dtype=np.int64)
    if not np.any(q):
        raise ArgumentError("q must be nonzero")
    K = window.box
    d = surface.dim
    psi_q = float(psi.value(q))

    g_poly = surface.body if isinstance(surface.body, Polynomial) else None
    if g_poly is not None and _is_separable(g_poly) and _is_separable(shift.body):
        # exact separable path: collect per-variable univariate coefficients
        m_total, M_total = 0.0, 0.0
        const = 0.0
        per_var = [dict() for _ in range(d)]
        for exps, c in zip(g_poly.exponents, g_poly.coefficients):
            nz = np.nonzero(exps)[0]
            if len(nz) == 0:
                const += float(q[-1]) * c
            else:
                i = int(nz[0])
                e = int(exps[i])
                per_var[i][e] = per_var[i].get(e, 0.0) + float(q[-1]) * c
        for exps, c in zip(shift.body.exponents, shift.body.coefficients):
            nz = np.nonzero(exps)[0]
            if len(nz) == 0:
                const -= c
            else:
                i = int(nz[0])
                e = int(exps[i])
                per_var[i][e] = per_var[i].get(e, 0.0) - c
        for i in range(d):
            per_var[i][1] = per_var[i].get(1, 0.0) + float(q[i])
            deg = max(per_var[i]) if per_var[i] else 0
            coeffs = np.zeros(deg + 1)
            for e, c in per_var[i].items():
                coeffs[e] = c
            lo_i, hi_i = _univariate_range(coeffs, K.lo[i], K.hi[i])
            m_total += lo_i
            M_total += hi_i
        m_total += const
        M_total += const
    else:
        # monomial-wise interval products (over-approximation)
        m_total = M_total = 0.0
        for i in range(d):
            lo_i, hi_i = float(q[i]) * K.lo[i], float(q[i]) * K.hi[i]
            m_total += min(lo_i, hi_i)
            M_total += max(lo_i, hi_i)
        for poly, sign in ((surface.body, float(q[-1])), (shift.body, -1.0)):
            if not hasattr(poly, "exponents"):
                raise ArgumentError("interval arithmetic needs polynomial bodies")
            for exps, c in zip(poly.exponents, poly.coefficients):
                lo_m, hi_m = sign * c, sign * c
                for i, e in enumerate(exps):
                    plo, phi_ = _power_range(K.lo[i], K.hi[i], int(e))
                    cands = [lo_m * plo, lo_m * phi_, hi_m * plo, hi_m * phi_]
                    lo_m, hi_m = min(cands), max(cands)
                m_total += lo_m
                M_total += hi_m

    lo_open = m_total - psi_q
    hi_open = M_total + psi_q
    p_min = math.floor(lo_open) + 1
    p_max = math.ceil(hi_open) - 1
    return (m_total, M_total), (p_min, p_max)


def count_admissible_p(q, window: CompactWindow, surface: Hypersurface,
                       shift: Shift, psi: ApproxFunction) -> int:
    """Number of integers p for which the slab S(p, q) can be nonempty,
    by interval arithmetic on q.(x, g(x)) - theta(x) over K."""
    _, (p_min, p_max) = admissible_p_range(q, window, surface, shift, psi)
    return max(0, p_max - p_min + 1)
