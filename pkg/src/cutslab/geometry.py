"""Per-slab cut geometry: interface trajectories, node-crossing events, spatial
partitions, the stabilized overlap region, and space-time normals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GeometryViolation, Setup

# Segments shorter than this fraction of the domain are dropped; a cell cut by
# less than this is classified uncut at that instant.
DEGENERATE_FRACTION = 1e-12
EVENT_DEDUP_FRACTION = 1e-14


@dataclass(frozen=True)
class SlabGeometry:
    """Cut topology of one space-time slab.

    ``events`` are the times in the open slab interval at which an interface
    coincides with a background node, i.e. where the cut configuration changes.
    ``cut_cells`` are the background cells crossed by an interface at some time
    in the slab; ``covered_cells`` are the background cells inside the moving
    interval for the whole slab (cut cells excluded).
    """

    n: int
    t_start: float
    t_end: float
    mu: float
    a_start: float
    overlap_length: float
    bg_nodes: np.ndarray
    ov_offsets: np.ndarray
    events: np.ndarray
    cut_cells: np.ndarray
    covered_cells: np.ndarray

    @property
    def k(self) -> float:
        return self.t_end - self.t_start

    @property
    def h_bg(self) -> float:
        return float(self.bg_nodes[1] - self.bg_nodes[0])

    def left(self, t):
        """Left interface position."""
        return self.a_start + self.mu * (np.asarray(t) - self.t_start)

    def right(self, t):
        return self.left(t) + self.overlap_length

    def ov_positions(self, t: float) -> np.ndarray:
        """Overlap-mesh node positions at time t."""
        return self.left(t) + self.ov_offsets

    def interfaces(self, t: float):
        """[(label, position, spatial normal n1 of the uncovered side)] at time t."""
        a = float(self.left(t))
        return [("left", a, 1.0), ("right", a + self.overlap_length, -1.0)]

    def contains_time(self, t: float) -> bool:
        return self.t_start <= t <= self.t_end


@dataclass(frozen=True)
class SpatialPartition:
    """Segments tiling the domain at a fixed time, tagged with side and cell indices.

    Breakpoints include every background node, every overlap-mesh node, and the
    two interface points.  ``side`` is 1 outside the moving interval and 2 inside;
    ``ov_cell`` is -1 on side-1 segments.
    """

    t: float
    xa: np.ndarray
    xb: np.ndarray
    side: np.ndarray
    bg_cell: np.ndarray
    ov_cell: np.ndarray

    @property
    def lengths(self) -> np.ndarray:
        return self.xb - self.xa

    def __len__(self) -> int:
        return len(self.xa)

    def segments(self):
        """Iterate (x_a, x_b, side, bg_cell, ov_cell or None)."""
        for i in range(len(self.xa)):
            ov = int(self.ov_cell[i]) if self.side[i] == 2 else None
            yield (
                float(self.xa[i]),
                float(self.xb[i]),
                int(self.side[i]),
                int(self.bg_cell[i]),
                ov,
            )


def _interface_crossings(p0: float, mu: float, nodes: np.ndarray, t0: float, t1: float):
    """Times in the open slab interval where p0 + mu (t - t0) hits a node."""
    if mu == 0.0:
        return np.empty(0)
    p1 = p0 + mu * (t1 - t0)
    lo, hi = min(p0, p1), max(p0, p1)
    i0 = np.searchsorted(nodes, lo, side="right")
    i1 = np.searchsorted(nodes, hi, side="left")
    hit = nodes[i0:i1]
    t = t0 + (hit - p0) / mu
    eps = EVENT_DEDUP_FRACTION * (t1 - t0)
    return t[(t > t0 + eps) & (t < t1 - eps)]


def _swept_cut_cells(p0: float, p1: float, nodes: np.ndarray, tol: float) -> np.ndarray:
    """Cells whose interior is visited by an interface sweeping [p0, p1]."""
    lo, hi = min(p0, p1), max(p0, p1)
    cells = np.arange(len(nodes) - 1)
    return cells[(nodes[:-1] < hi - tol) & (nodes[1:] > lo + tol)]


def build_slab_geometry(setup: Setup, n: int) -> SlabGeometry:
    """Cut geometry of slab n (1-based)."""
    if not 1 <= n <= setup.partition.n_slabs:
        raise ValueError(f"slab index {n} out of range")
    t0, t1 = setup.partition.slab_interval(n)
    mu = float(setup.partition.velocities[n - 1])
    a0 = float(setup.a_breaks[n - 1])
    a1 = float(setup.a_breaks[n])
    length = float(setup.overlap.length)
    nodes = setup.bg_nodes
    lo, hi = float(nodes[0]), float(nodes[-1])
    if min(a0, a1) <= lo or max(a0, a1) + length >= hi:
        raise GeometryViolation(f"interface touches the domain boundary in slab {n}")

    tol = DEGENERATE_FRACTION * (hi - lo)
    events = np.concatenate(
        [
            _interface_crossings(a0, mu, nodes, t0, t1),
            _interface_crossings(a0 + length, mu, nodes, t0, t1),
        ]
    )
    events = np.sort(events)
    if len(events) > 1:
        keep = np.concatenate(([True], np.diff(events) > EVENT_DEDUP_FRACTION * (t1 - t0)))
        events = events[keep]

    cut = np.union1d(
        _swept_cut_cells(a0, a1, nodes, tol),
        _swept_cut_cells(a0 + length, a1 + length, nodes, tol),
    )
    a_max, b_min = max(a0, a1), min(a0, a1) + length
    cells = np.arange(len(nodes) - 1)
    covered = cells[(nodes[:-1] >= a_max - tol) & (nodes[1:] <= b_min + tol)]
    covered = np.setdiff1d(covered, cut)

    return SlabGeometry(
        n=n,
        t_start=t0,
        t_end=t1,
        mu=mu,
        a_start=a0,
        overlap_length=length,
        bg_nodes=nodes,
        ov_offsets=setup.ov_offsets,
        events=events,
        cut_cells=cut,
        covered_cells=covered,
    )


def spatial_partition(geom: SlabGeometry, t: float) -> SpatialPartition:
    """Merged partition of the domain at time t in [t_start, t_end]."""
    if not geom.contains_time(t):
        raise ValueError(f"t={t} outside slab {geom.n}")
    nodes = geom.bg_nodes
    a = float(geom.left(t))
    b = a + geom.overlap_length
    pts = np.sort(np.concatenate([nodes, geom.ov_positions(t)]))
    tol = DEGENERATE_FRACTION * (nodes[-1] - nodes[0])
    keep = np.concatenate(([True], np.diff(pts) > tol))
    pts = pts[keep]
    xa, xb = pts[:-1], pts[1:]
    long_enough = (xb - xa) > tol
    xa, xb = xa[long_enough], xb[long_enough]
    mid = 0.5 * (xa + xb)
    side = np.where((mid > a) & (mid < b), 2, 1)
    n_bg = len(nodes) - 1
    bg_cell = np.clip(np.searchsorted(nodes, mid) - 1, 0, n_bg - 1)
    ov_pos = geom.ov_positions(t)
    ov_cell = np.where(
        side == 2,
        np.clip(np.searchsorted(ov_pos, mid) - 1, 0, len(ov_pos) - 2),
        -1,
    )
    return SpatialPartition(t=t, xa=xa, xb=xb, side=side, bg_cell=bg_cell, ov_cell=ov_cell)


def overlap_segments(geom: SlabGeometry, t: float) -> SpatialPartition:
    """Segments of the stabilized overlap region at time t: the parts of the
    slab's cut background cells currently inside the moving interval."""
    part = spatial_partition(geom, t)
    mask = (part.side == 2) & np.isin(part.bg_cell, geom.cut_cells)
    return SpatialPartition(
        t=t,
        xa=part.xa[mask],
        xb=part.xb[mask],
        side=part.side[mask],
        bg_cell=part.bg_cell[mask],
        ov_cell=part.ov_cell[mask],
    )


def spacetime_normal(n_i: float, mu: float) -> tuple[float, float]:
    """Space-time unit normal to the interface trajectory, from the spatial
    normal n_i of the side and the interface velocity."""
    if n_i not in (-1.0, 1.0, -1, 1):
        raise ValueError(f"spatial normal must be +-1, got {n_i}")
    scale = np.hypot(n_i * mu, 1.0)
    return float(n_i / scale), float(-n_i * mu / scale)


def sigma_side(interface: str, mu: float) -> tuple[int, float]:
    """Upwind side index and signed temporal weight of the moving-interface jump term.

    For an interface point with spatial normal n1 of the uncovered side, the
    space-time jump term reduces per interface point to
    ``integral over the slab of w * [trial] * test_sigma dt`` with w = n1 * mu.
    Sigma is the side occupying the point immediately after time t.
    """
    if interface == "left":
        n1 = 1.0
    elif interface == "right":
        n1 = -1.0
    else:
        raise ValueError(f"interface must be 'left' or 'right', got {interface!r}")
    w = n1 * mu
    sigma = 1 if w >= 0 else 2
    return sigma, float(w)


def quadrature_breakpoints(geom: SlabGeometry, extra_crossings: bool = False) -> np.ndarray:
    """Temporal panel breakpoints for composite rules over the slab.

    By default these are the interface-node crossing events.  With
    ``extra_crossings`` every crossing of an overlap-mesh node with a node of a
    slab-cut background cell is added, which makes all piecewise-polynomial
    integrands of the formulation polynomial on each panel.
    """
    if not extra_crossings or geom.mu == 0.0 or len(geom.cut_cells) == 0:
        return geom.events
    cut_nodes = np.unique(np.concatenate([geom.cut_cells, geom.cut_cells + 1]))
    cut_pos = geom.bg_nodes[cut_nodes]
    times = [geom.events]
    y0 = geom.ov_positions(geom.t_start)
    t0, t1 = geom.t_start, geom.t_end
    # crossing of overlap node g with background node position X: t0 + (X - y0_g)/mu
    tt = t0 + (cut_pos[None, :] - y0[:, None]) / geom.mu
    eps = EVENT_DEDUP_FRACTION * geom.k
    tt = tt[(tt > t0 + eps) & (tt < t1 - eps)]
    times.append(tt.ravel())
    out = np.sort(np.concatenate(times))
    if len(out) > 1:
        keep = np.concatenate(([True], np.diff(out) > eps))
        out = out[keep]
    return out
