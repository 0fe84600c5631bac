"""Energy-norm evaluation for discrete functions and errors, plus slope fitting.

The space-time error norm is the scaled-material-derivative term plus the
time-integrated spatial energy norm, the time-jump terms at slab breakpoints,
and the moving-interface jump term.  Temporal integration is composite
three-point Gauss over the interface-crossing panels of each slab; spatial
integration is three-point Gauss per merged-partition segment.  The
gradient-jump term over the covered parts of cut cells is integrated pairwise
per (cut cell, overlap cell) with panels at their endpoint crossings, which
makes it exact for discrete arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import _GL3, _pair_lengths, _stabilization_panels
from .core import ExactSolution
from .geometry import SlabGeometry, spatial_partition
from .quadrature import composite_time_rule
from .spaces import SpaceTimeSolution, temporal_basis_values


@dataclass(frozen=True)
class NormBreakdown:
    """Squared per-term contributions to the space-time energy norms."""

    material_bg_sq: float  # sum over slabs of k_n * int ||D_t e||^2 over side 1
    material_ov_sq: float  # same over side 2 (material derivative follows the motion)
    grad_sq: float  # time integral of the broken gradient
    flux_sq: float  # weighted average normal flux at the interface points
    iface_jump_sq: float  # weighted interface jumps
    stab_sq: float  # gradient jump over the covered parts of cut cells
    time_jump_sq: float  # jumps at interior slab breakpoints
    final_sq: float  # trace at the final time
    initial_sq: float  # trace at time zero
    moving_jump_sq: float  # interface jump weighted by the temporal normal component

    @property
    def b_sq(self) -> float:
        return (
            self.grad_sq
            + self.flux_sq
            + self.iface_jump_sq
            + self.stab_sq
            + self.time_jump_sq
            + self.final_sq
            + self.initial_sq
            + self.moving_jump_sq
        )

    @property
    def x_sq(self) -> float:
        return self.b_sq + self.material_bg_sq + self.material_ov_sq

    @property
    def b(self) -> float:
        return float(np.sqrt(self.b_sq))

    @property
    def x(self) -> float:
        return float(np.sqrt(self.x_sq))


def _refine(breaks: np.ndarray, t0: float, t1: float, factor: int) -> np.ndarray:
    """Subdivide each panel of [t0, t1] (interior breakpoints given) into equal parts."""
    if factor <= 1:
        return breaks
    full = np.concatenate(([t0], breaks, [t1]))
    out = []
    for lo, hi in zip(full[:-1], full[1:]):
        out.append(np.linspace(lo, hi, factor + 1)[1:-1])
    out.append(breaks)
    res = np.sort(np.concatenate(out))
    return res


def _segment_points(part, space_refine: int):
    """Gauss points/weights per segment, optionally with subdivided segments."""
    if space_refine <= 1:
        pts = part.xa[:, None] + part.lengths[:, None] * _GL3.nodes[None, :]
        wts = part.lengths[:, None] * _GL3.weights[None, :]
        return pts, wts
    frac = np.linspace(0.0, 1.0, space_refine + 1)
    sub = (frac[:-1, None] + np.diff(frac)[:, None] * _GL3.nodes[None, :]).ravel()
    subw = (np.diff(frac)[:, None] * _GL3.weights[None, :]).ravel()
    pts = part.xa[:, None] + part.lengths[:, None] * sub[None, :]
    wts = part.lengths[:, None] * subw[None, :]
    return pts, wts


def anorm_sq(fn, geom: SlabGeometry, t: float, omega1: float = 0.5) -> float:
    """Spatial energy norm squared at time t of a side-wise evaluable function.

    ``fn(x, side, deriv)`` must accept position arrays, side 1 or 2, and deriv
    "value" or "dx".  The four terms: broken gradient, weighted average flux and
    weighted jump at the interface points, and the gradient jump over the
    covered parts of the slab's cut cells.
    """
    part = spatial_partition(geom, t)
    total = 0.0
    for side in (1, 2):
        m = part.side == side
        if not np.any(m):
            continue
        mids = 0.5 * (part.xa[m] + part.xb[m])
        g = np.asarray(fn(mids, side, "dx"), dtype=float)
        total += float(np.sum(part.lengths[m] * g * g))

    nodes = geom.bg_nodes
    mu_bar = float(np.hypot(geom.mu, 1.0))
    for label, s, n1 in geom.interfaces(t):
        v1 = float(fn(np.array([s]), 1, "value")[0])
        v2 = float(fn(np.array([s]), 2, "value")[0])
        g1 = float(fn(np.array([s]), 1, "dx")[0])
        g2 = float(fn(np.array([s]), 2, "dx")[0])
        c = int(np.clip(np.searchsorted(nodes, s, side="right") - 1, 0, len(nodes) - 2))
        h_K = float(nodes[c + 1] - nodes[c])
        avg = omega1 * g1 + (1.0 - omega1) * g2
        total += mu_bar * h_K * avg * avg
        total += mu_bar / h_K * (v1 - v2) ** 2

    from .geometry import overlap_segments

    seg = overlap_segments(geom, t)
    if len(seg):
        mids = 0.5 * (seg.xa + seg.xb)
        jg = np.asarray(fn(mids, 1, "dx")) - np.asarray(fn(mids, 2, "dx"))
        total += float(np.sum(seg.lengths * jg * jg))
    return total


def _zero_exact() -> ExactSolution:
    z = lambda x, t: np.zeros_like(np.asarray(x, dtype=float))
    return ExactSolution(u=z, u_x=z, u_t=z)


def _stab_term(slab) -> float:
    """Exact time integral of the squared gradient jump over the covered parts
    of cut cells, pairwise per (cut cell, overlap cell)."""
    geom = slab.geom
    stab = _stabilization_panels(geom)
    if stab is None:
        return 0.0
    pK, pc, c_lo0, c_hi0, breaks = stab
    q = slab.space.q
    t0, t1, k = geom.t_start, geom.t_end, geom.k
    bg = slab.bg_nodal()
    ov = slab.ov_nodal()
    h_bg = geom.bg_nodes[pK + 1] - geom.bg_nodes[pK]
    s_bg = (bg[pK + 1] - bg[pK]) / h_bg[:, None]  # (npairs, q+1)
    s_ov = (ov[pc + 1] - ov[pc]) / (c_hi0 - c_lo0)[:, None]
    d = s_bg - s_ov
    tq = breaks[:, :-1, None] + np.diff(breaks, axis=1)[:, :, None] * _GL3.nodes
    wq = np.diff(breaks, axis=1)[:, :, None] * _GL3.weights
    tq = tq.reshape(len(pK), -1)
    wq = wq.reshape(len(pK), -1)
    L = _pair_lengths(
        geom.bg_nodes[pK], geom.bg_nodes[pK + 1], c_lo0, c_hi0, geom.mu, t0, tq
    )
    if q == 0:
        jump = d[:, [0]]
    else:
        jump = d[:, [0]] * (t1 - tq) / k + d[:, [1]] * (tq - t0) / k
    return float(np.sum(wq * jump * jump * L))


def _trace_l2_sq(geom, t, fa, fb=None, space_refine=1) -> float:
    """Squared L2 distance of two side-wise evaluable traces over the domain."""
    part = spatial_partition(geom, t)
    pts, wts = _segment_points(part, space_refine)
    total = 0.0
    for side in (1, 2):
        m = part.side == side
        if not np.any(m):
            continue
        xs = pts[m].ravel()
        d = np.asarray(fa(xs, side), dtype=float)
        if fb is not None:
            d = d - np.asarray(fb(xs, side), dtype=float)
        total += float(np.sum(wts[m].ravel() * d * d))
    return total


def xnorm_error(
    sol: SpaceTimeSolution,
    exact: ExactSolution | None = None,
    *,
    time_refine: int = 1,
    space_refine: int = 1,
) -> NormBreakdown:
    """Energy-norm breakdown of exact-minus-discrete (of the discrete function
    itself when ``exact`` is omitted).

    ``time_refine``/``space_refine`` subdivide the quadrature panels and are
    meant for convergence checks of the measurement itself.
    """
    if exact is None:
        exact = _zero_exact()
    if exact.u_x is None or exact.u_t is None:
        raise ValueError("exact solution must provide u_x and u_t for the error norm")
    setup = sol.setup
    omega1 = setup.disc.omega1
    mat_bg = mat_ov = grad = flux = ijump = moving = 0.0
    stab = 0.0

    for slab in sol.slabs:
        geom = slab.geom
        k = geom.k
        mu = geom.mu
        mu_bar = float(np.hypot(mu, 1.0))
        nodes = geom.bg_nodes
        breaks = _refine(geom.events, geom.t_start, geom.t_end, time_refine)
        times, wts = composite_time_rule(geom.t_start, geom.t_end, breaks, _GL3)
        for t, wt in zip(times, wts):
            part = spatial_partition(geom, t)
            pts, pw = _segment_points(part, space_refine)
            for side in (1, 2):
                m = part.side == side
                if not np.any(m):
                    continue
                xs = pts[m].ravel()
                ws = pw[m].ravel()
                ge = np.asarray(exact.u_x(xs, t)) - slab.eval(xs, t, side=side, deriv="dx")
                grad += wt * float(np.sum(ws * ge * ge))
                de = np.asarray(exact.u_t(xs, t)) - slab.eval(
                    xs, t, side=side, deriv="Dt"
                )
                if side == 2:
                    de = de + mu * np.asarray(exact.u_x(xs, t))
                    mat_ov += k * wt * float(np.sum(ws * de * de))
                else:
                    mat_bg += k * wt * float(np.sum(ws * de * de))
            for label, s, n1 in geom.interfaces(t):
                sx = np.array([s])
                e1 = float((np.asarray(exact.u(sx, t)) - slab.eval(sx, t, side=1))[0])
                e2 = float((np.asarray(exact.u(sx, t)) - slab.eval(sx, t, side=2))[0])
                g1 = float(np.asarray(exact.u_x(sx, t))[0]) - slab.interface_gradient(label, t, 1)
                g2 = float(np.asarray(exact.u_x(sx, t))[0]) - slab.interface_gradient(label, t, 2)
                c = int(
                    np.clip(np.searchsorted(nodes, s, side="right") - 1, 0, len(nodes) - 2)
                )
                h_K = float(nodes[c + 1] - nodes[c])
                avg = omega1 * g1 + (1.0 - omega1) * g2
                flux += wt * mu_bar * h_K * avg * avg
                ijump += wt * mu_bar / h_K * (e1 - e2) ** 2
                moving += wt * abs(n1 * mu) * (e1 - e2) ** 2
        stab += _stab_term(slab)

    bp = setup.partition.breakpoints
    N = len(sol.slabs)
    u0 = setup.problem.initial
    up = sol.trace(0, "+")
    initial = _trace_l2_sq(
        sol.slabs[0].geom,
        float(bp[0]),
        lambda x, s: np.asarray(u0(x), dtype=float),
        lambda x, s: up(x, side=s),
        space_refine,
    )
    tjump = 0.0
    for n in range(1, N):
        wp, wm = sol.trace(n, "+"), sol.trace(n, "-")
        tjump += _trace_l2_sq(
            sol.slabs[n - 1].geom,
            float(bp[n]),
            lambda x, s: wp(x, side=s),
            lambda x, s: wm(x, side=s),
            space_refine,
        )
    wN = sol.trace(N, "-")
    T = float(bp[N])
    final = _trace_l2_sq(
        sol.slabs[-1].geom,
        T,
        lambda x, s: np.asarray(exact.u(x, T), dtype=float),
        lambda x, s: wN(x, side=s),
        space_refine,
    )

    return NormBreakdown(
        material_bg_sq=mat_bg,
        material_ov_sq=mat_ov,
        grad_sq=grad,
        flux_sq=flux,
        iface_jump_sq=ijump,
        stab_sq=stab,
        time_jump_sq=tjump,
        final_sq=final,
        initial_sq=initial,
        moving_jump_sq=moving,
    )


def lls_slope(points, window=None) -> float:
    """Least-squares slope of log(error) against log(resolution).

    ``window`` is a 1-based inclusive index pair into the point list; the whole
    list is used when omitted.
    """
    pts = [(float(r), float(e)) for r, e in points]
    if window is not None:
        i, j = window
        if not (1 <= i < j <= len(pts)):
            raise ValueError(f"bad fit window {window} for {len(pts)} points")
        pts = pts[i - 1 : j]
    if len(pts) < 2:
        raise ValueError("need at least two points to fit a slope")
    res = np.array([p[0] for p in pts])
    err = np.array([p[1] for p in pts])
    if np.any(res <= 0) or np.any(err <= 0):
        raise ValueError("resolutions and errors must be positive for a log-log fit")
    return float(np.polyfit(np.log(res), np.log(err), 1)[0])
