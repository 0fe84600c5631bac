"""Slab system assembly.

The slab bilinear form splits into pieces with different time dependence:

* overlap-mesh volume terms are rigid under the translation, so their spatial
  matrices are constant on the slab and the time integral is done analytically;
* background volume terms over the uncovered region are the full-mesh matrices
  minus a correction over the covered interval, whose entries are piecewise
  polynomial in time between interface-node crossings;
* interface point terms (Nitsche coupling, penalty, upwind space-time jump)
  are rank-one updates, piecewise polynomial between the same crossings;
* the overlap-region gradient-jump stabilization is integrated pairwise over
  (cut background cell, overlap cell) with panels at their mutual crossings.

Composite three-point Gauss rules on those panels integrate every piecewise
polynomial integrand exactly (degree <= 5), so the assembled matrix carries no
temporal quadrature error.  Right-hand-side integrals use the lower-order
rules of the reference computation: trapezoid in space, midpoint in time for
piecewise-constant time elements and three-point Lobatto for linear ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NumericalFailure, Setup
from .geometry import (
    SlabGeometry,
    overlap_segments,
    quadrature_breakpoints,
    sigma_side,
    spatial_partition,
)
from .quadrature import composite_time_rule, gauss_legendre3, lobatto3, midpoint
from .spaces import (
    SlabSpace,
    _hat_eval,
    temporal_basis_derivs,
    temporal_basis_values,
)

_GL3 = gauss_legendre3()


@dataclass(frozen=True)
class SlabSystem:
    """Dense matrix and load vector for one slab."""

    slab: int
    matrix: np.ndarray
    rhs: np.ndarray
    space: SlabSpace

    def __post_init__(self):
        n = self.space.n_cols
        if self.matrix.shape != (n, n) or self.rhs.shape != (n,):
            raise ValueError("system dimensions do not match the slab space")
        if not (np.all(np.isfinite(self.matrix)) and np.all(np.isfinite(self.rhs))):
            raise NumericalFailure(f"non-finite entries in slab {self.slab} system")


# ---------------------------------------------------------------------------
# pointwise spatial operators (used by tests, apply_Bh, and the point terms)
# ---------------------------------------------------------------------------


def _bg_pair_indices(space: SlabSpace, cells: np.ndarray):
    """Spatial DOF indices of the two nodes of each background cell (-1 if dropped)."""
    return space.bg_dof[cells], space.bg_dof[cells + 1]


def _scatter_cellwise(mat, d0, d1, e00, e01, e10, e11):
    for (r, c, v) in ((d0, d0, e00), (d0, d1, e01), (d1, d0, e10), (d1, d1, e11)):
        ok = (r >= 0) & (c >= 0)
        np.add.at(mat, (r[ok], c[ok]), v[ok] if np.ndim(v) else np.full(ok.sum(), v))


def _segment_mass_stiff(xa, xb, cell_lo, cell_hi):
    """2x2 mass and stiffness entries of one P1 cell restricted to [xa, xb]."""
    h = cell_hi - cell_lo
    pts = xa[:, None] + (xb - xa)[:, None] * _GL3.nodes[None, :]
    wts = (xb - xa)[:, None] * _GL3.weights[None, :]
    w1 = (pts - cell_lo[:, None]) / h[:, None]
    w0 = 1.0 - w1
    m00 = np.sum(wts * w0 * w0, axis=1)
    m01 = np.sum(wts * w0 * w1, axis=1)
    m11 = np.sum(wts * w1 * w1, axis=1)
    seg = xb - xa
    k00 = seg / h**2
    return (m00, m01, m11), (k00, -k00, k00)


class PointVec:
    """Sparse vector over spatial DOFs: the trace of a representation at a point."""

    def __init__(self, idx, val):
        idx = np.asarray(idx, dtype=int)
        val = np.asarray(val, dtype=float)
        ok = idx >= 0
        self.idx = idx[ok]
        self.val = val[ok]

    def __sub__(self, other):
        return PointVec(
            np.concatenate([self.idx, other.idx]), np.concatenate([self.val, -other.val])
        )

    def scaled_sum(self, w1, other, w2):
        return PointVec(
            np.concatenate([self.idx, other.idx]),
            np.concatenate([w1 * self.val, w2 * other.val]),
        )


def add_outer(mat, w: float, test: PointVec, trial: PointVec):
    if len(test.idx) and len(trial.idx):
        mat[np.ix_(test.idx, trial.idx)] += w * np.outer(test.val, trial.val)


def _interface_data(space: SlabSpace, t: float):
    """Per interface point: value/gradient trace vectors for both sides."""
    geom = space.geom
    nodes = geom.bg_nodes
    ov_pos = geom.ov_positions(t)
    h_ov = ov_pos[1] - ov_pos[0]
    out = []
    for label, s, n1 in geom.interfaces(t):
        c, w0, w1, s0, s1 = _hat_eval(nodes, np.array([s]))
        c = int(c[0])
        bg_val = PointVec(
            [space.bg_dof[c], space.bg_dof[c + 1]], [float(w0[0]), float(w1[0])]
        )
        # one-sided gradient cell on the uncovered side
        if label == "left":
            c1 = int(np.clip(np.searchsorted(nodes, s, side="left") - 1, 0, len(nodes) - 2))
            ov_cell = 0
            ov_val = PointVec([space.ov_dof(0)], [1.0])
        else:
            c1 = int(np.clip(np.searchsorted(nodes, s, side="right") - 1, 0, len(nodes) - 2))
            ov_cell = space.n_ov - 2
            ov_val = PointVec([space.ov_dof(space.n_ov - 1)], [1.0])
        h1 = nodes[c1 + 1] - nodes[c1]
        bg_grad = PointVec(
            [space.bg_dof[c1], space.bg_dof[c1 + 1]], [-1.0 / h1, 1.0 / h1]
        )
        ov_grad = PointVec(
            [space.ov_dof(ov_cell), space.ov_dof(ov_cell + 1)], [-1.0 / h_ov, 1.0 / h_ov]
        )
        h_K = float(nodes[c + 1] - nodes[c])
        out.append((label, s, n1, bg_val, ov_val, bg_grad, ov_grad, h_K))
    return out


def assemble_Aht(space: SlabSpace, t: float, gamma: float, omega1: float) -> np.ndarray:
    """Spatial matrix of the symmetric form at time t (one temporal quadrature point)."""
    geom = space.geom
    S = space.n_spatial
    A = np.zeros((S, S))
    part = spatial_partition(geom, t)

    # side-wise stiffness
    for side, node_arr in ((1, geom.bg_nodes), (2, geom.ov_positions(t))):
        m = part.side == side
        if not np.any(m):
            continue
        cells = part.bg_cell[m] if side == 1 else part.ov_cell[m]
        lo, hi = node_arr[cells], node_arr[cells + 1]
        _, (k00, k01, k11) = _segment_mass_stiff(part.xa[m], part.xb[m], lo, hi)
        if side == 1:
            d0, d1 = _bg_pair_indices(space, cells)
        else:
            d0, d1 = space.ov_dof(cells), space.ov_dof(cells + 1)
        _scatter_cellwise(A, d0, d1, k00, k01, k01, k11)

    # interface terms
    mu_bar = float(np.hypot(geom.mu, 1.0))
    for label, s, n1, bg_val, ov_val, bg_grad, ov_grad, h_K in _interface_data(space, t):
        jump = bg_val - ov_val
        avg = bg_grad.scaled_sum(omega1, ov_grad, 1.0 - omega1)
        add_outer(A, -n1, jump, avg)
        add_outer(A, -n1, avg, jump)
        add_outer(A, mu_bar * gamma / h_K, jump, jump)

    # gradient-jump stabilization over the covered parts of cut cells
    ov_pos = geom.ov_positions(t)
    seg = overlap_segments(geom, t)
    for i in range(len(seg)):
        c, g = int(seg.bg_cell[i]), int(seg.ov_cell[i])
        h = geom.bg_nodes[c + 1] - geom.bg_nodes[c]
        h_ov = ov_pos[g + 1] - ov_pos[g]
        jg = PointVec(
            [space.bg_dof[c], space.bg_dof[c + 1], space.ov_dof(g), space.ov_dof(g + 1)],
            [-1.0 / h, 1.0 / h, 1.0 / h_ov, -1.0 / h_ov],
        )
        add_outer(A, float(seg.xb[i] - seg.xa[i]), jg, jg)
    return A


def upwind_matrix(space: SlabSpace, t: float) -> np.ndarray:
    """Spatial matrix of the moving-interface jump term at time t: rows test the
    upwind-side trace, columns carry the jump, weighted by n1*mu."""
    S = space.n_spatial
    G = np.zeros((S, S))
    if space.geom.mu == 0.0:
        return G
    for label, s, n1, bg_val, ov_val, bg_grad, ov_grad, h_K in _interface_data(space, t):
        sigma, w = sigma_side(label, space.geom.mu)
        jump = bg_val - ov_val
        upwind = bg_val if sigma == 1 else ov_val
        add_outer(G, w, upwind, jump)
    return G


def mass_matrix(space: SlabSpace, t: float) -> np.ndarray:
    """Side-wise spatial mass matrix at time t."""
    geom = space.geom
    S = space.n_spatial
    M = np.zeros((S, S))
    part = spatial_partition(geom, t)
    for side, node_arr in ((1, geom.bg_nodes), (2, geom.ov_positions(t))):
        m = part.side == side
        if not np.any(m):
            continue
        cells = part.bg_cell[m] if side == 1 else part.ov_cell[m]
        lo, hi = node_arr[cells], node_arr[cells + 1]
        (m00, m01, m11), _ = _segment_mass_stiff(part.xa[m], part.xb[m], lo, hi)
        if side == 1:
            d0, d1 = _bg_pair_indices(space, cells)
        else:
            d0, d1 = space.ov_dof(cells), space.ov_dof(cells + 1)
        _scatter_cellwise(M, d0, d1, m00, m01, m01, m11)
    return M


# ---------------------------------------------------------------------------
# constant-in-time building blocks
# ---------------------------------------------------------------------------


def _uniform_p1_matrices(nodes: np.ndarray):
    """Full-mesh tridiagonal mass, stiffness, and drift (grad-trial) matrices."""
    n = len(nodes)
    h = np.diff(nodes)
    M = np.zeros((n, n))
    K = np.zeros((n, n))
    C = np.zeros((n, n))  # C[test, trial] = integral of phi_trial' phi_test
    i = np.arange(n - 1)
    for (r, c, mv, kv, cv) in (
        (i, i, h / 3, 1 / h, -0.5 * np.ones_like(h)),
        (i, i + 1, h / 6, -1 / h, 0.5 * np.ones_like(h)),
        (i + 1, i, h / 6, -1 / h, -0.5 * np.ones_like(h)),
        (i + 1, i + 1, h / 3, 1 / h, 0.5 * np.ones_like(h)),
    ):
        np.add.at(M, (r, c), mv)
        np.add.at(K, (r, c), kv)
        np.add.at(C, (r, c), cv)
    return M, K, C


def _embed_bg(space: SlabSpace, mat: np.ndarray) -> np.ndarray:
    out = np.zeros((space.n_spatial, space.n_spatial))
    act = space.active_bg
    out[np.ix_(np.arange(space.n_active_bg), np.arange(space.n_active_bg))] = mat[
        np.ix_(act, act)
    ]
    return out


def _embed_ov(space: SlabSpace, mat: np.ndarray) -> np.ndarray:
    out = np.zeros((space.n_spatial, space.n_spatial))
    out[space.n_active_bg :, space.n_active_bg :] = mat
    return out


def _covered_correction(space: SlabSpace, a: float, b: float):
    """COO mass/stiffness entries of the background basis over [a, b]."""
    geom = space.geom
    nodes = geom.bg_nodes
    c_lo = int(np.clip(np.searchsorted(nodes, a, side="right") - 1, 0, len(nodes) - 2))
    c_hi = int(np.clip(np.searchsorted(nodes, b, side="left") - 1, 0, len(nodes) - 2))
    cells = np.arange(c_lo, c_hi + 1)
    xa = np.maximum(nodes[cells], a)
    xb = np.minimum(nodes[cells + 1], b)
    ok = xb > xa
    cells, xa, xb = cells[ok], xa[ok], xb[ok]
    (m00, m01, m11), (k00, k01, k11) = _segment_mass_stiff(
        xa, xb, nodes[cells], nodes[cells + 1]
    )
    d0, d1 = _bg_pair_indices(space, cells)
    rows = np.concatenate([d0, d0, d1, d1])
    cols = np.concatenate([d0, d1, d0, d1])
    mv = np.concatenate([m00, m01, m01, m11])
    kv = np.concatenate([k00, k01, k01, k11])
    ok = (rows >= 0) & (cols >= 0)
    return rows[ok], cols[ok], mv[ok], kv[ok]


# ---------------------------------------------------------------------------
# pairwise-exact stabilization integral
# ---------------------------------------------------------------------------


def _stabilization_panels(geom: SlabGeometry):
    """(pair DOF data, per-pair time panels) for the gradient-jump term.

    For each (cut background cell, overlap cell) pair the covered-intersection
    length is piecewise linear in time with breakpoints at their endpoint
    crossings; three-point Gauss per panel is exact for the product with the
    temporal mode pairs.
    """
    if len(geom.cut_cells) == 0:
        return None
    nodes = geom.bg_nodes
    t0, t1 = geom.t_start, geom.t_end
    mu = geom.mu
    y0 = geom.ov_positions(t0)
    K_lo_all = nodes[geom.cut_cells]
    K_hi_all = nodes[geom.cut_cells + 1]
    shift = mu * geom.k
    pairs_K, pairs_c = [], []
    for Kc, K_lo, K_hi in zip(geom.cut_cells, K_lo_all, K_hi_all):
        # overlap cells meeting this cell at some slab time
        lo_off = K_lo - max(shift, 0.0)
        hi_off = K_hi - min(shift, 0.0)
        g0 = max(0, int(np.searchsorted(y0, lo_off, side="right")) - 1)
        g1 = min(len(y0) - 2, int(np.searchsorted(y0, hi_off, side="left")) - 1)
        for g in range(g0, g1 + 1):
            pairs_K.append(Kc)
            pairs_c.append(g)
    if not pairs_K:
        return None
    pK = np.asarray(pairs_K)
    pc = np.asarray(pairs_c)
    K_lo, K_hi = nodes[pK], nodes[pK + 1]
    c_lo0, c_hi0 = y0[pc], y0[pc + 1]
    if mu != 0.0:
        crossings = np.stack(
            [
                (K_lo - c_lo0) / mu,
                (K_hi - c_lo0) / mu,
                (K_lo - c_hi0) / mu,
                (K_hi - c_hi0) / mu,
            ],
            axis=1,
        )
        crossings = np.clip(t0 + crossings, t0, t1)
        crossings.sort(axis=1)
    else:
        crossings = np.full((len(pK), 4), t0)
    breaks = np.concatenate(
        [np.full((len(pK), 1), t0), crossings, np.full((len(pK), 1), t1)], axis=1
    )
    return pK, pc, c_lo0, c_hi0, breaks


def _pair_lengths(K_lo, K_hi, c_lo0, c_hi0, mu, t0, tt):
    drift = mu * (tt - t0)
    return np.maximum(
        0.0,
        np.minimum(K_hi[:, None], c_hi0[:, None] + drift)
        - np.maximum(K_lo[:, None], c_lo0[:, None] + drift),
    )


# ---------------------------------------------------------------------------
# slab assembly
# ---------------------------------------------------------------------------


def _temporal_products(q: int, k: float):
    """Exact integrals of mode products over the slab: T1 = lam_i lam_j,
    T2 = lam_i lam_j' (test index first)."""
    if q == 0:
        return np.array([[k]]), np.array([[0.0]])
    T1 = k * np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    T2 = np.array([[-0.5, 0.5], [-0.5, 0.5]])
    return T1, T2


def _f_load(space: SlabSpace, t: float, source) -> np.ndarray:
    """Trapezoid-per-segment load vector of the source at time t."""
    geom = space.geom
    part = spatial_partition(geom, t)
    vec = np.zeros(space.n_spatial)
    half = 0.5 * part.lengths
    ov_pos = geom.ov_positions(t)
    for xs in (part.xa, part.xb):
        fv = np.asarray(source(xs, t), dtype=float) * half
        m1 = part.side == 1
        if np.any(m1):
            c, w0, w1, _, _ = _hat_eval(geom.bg_nodes, xs[m1])
            # evaluate the hats of the segment's own cell, not the neighbor's
            c = part.bg_cell[m1]
            h = geom.bg_nodes[c + 1] - geom.bg_nodes[c]
            w1 = (xs[m1] - geom.bg_nodes[c]) / h
            w0 = 1.0 - w1
            d0, d1 = _bg_pair_indices(space, c)
            for d, w in ((d0, w0), (d1, w1)):
                ok = d >= 0
                np.add.at(vec, d[ok], (fv[m1] * w)[ok])
        m2 = part.side == 2
        if np.any(m2):
            c = part.ov_cell[m2]
            h = ov_pos[c + 1] - ov_pos[c]
            w1 = (xs[m2] - ov_pos[c]) / h
            w0 = 1.0 - w1
            np.add.at(vec, space.ov_dof(c), fv[m2] * w0)
            np.add.at(vec, space.ov_dof(c + 1), fv[m2] * w1)
    return vec


def _trace_load(space: SlabSpace, t: float, func) -> np.ndarray:
    """Gauss-3-per-segment load vector of a scalar function at time t."""
    geom = space.geom
    part = spatial_partition(geom, t)
    vec = np.zeros(space.n_spatial)
    pts = part.xa[:, None] + part.lengths[:, None] * _GL3.nodes[None, :]
    wts = part.lengths[:, None] * _GL3.weights[None, :]
    fv = np.asarray(func(pts.ravel()), dtype=float).reshape(pts.shape) * wts
    ov_pos = geom.ov_positions(t)
    m1 = part.side == 1
    if np.any(m1):
        c = part.bg_cell[m1]
        h = (geom.bg_nodes[c + 1] - geom.bg_nodes[c])[:, None]
        w1 = (pts[m1] - geom.bg_nodes[c][:, None]) / h
        d0, d1 = _bg_pair_indices(space, c)
        for d, w in ((d0, 1.0 - w1), (d1, w1)):
            ok = d >= 0
            np.add.at(vec, d[ok], np.sum(fv[m1] * w, axis=1)[ok])
    m2 = part.side == 2
    if np.any(m2):
        c = part.ov_cell[m2]
        h = (ov_pos[c + 1] - ov_pos[c])[:, None]
        w1 = (pts[m2] - ov_pos[c][:, None]) / h
        np.add.at(vec, space.ov_dof(c), np.sum(fv[m2] * (1.0 - w1), axis=1))
        np.add.at(vec, space.ov_dof(c + 1), np.sum(fv[m2] * w1, axis=1))
    return vec


def assemble_slab(
    space: SlabSpace,
    setup: Setup,
    prev_trace,
    *,
    include_upwind: bool = True,
) -> SlabSystem:
    """Assemble the dense system of one slab.

    ``prev_trace`` is the trace of the solution from below at the slab's start
    (the initial data for the first slab), as a callable of position.
    """
    geom = space.geom
    disc = setup.disc
    q, gamma, omega1 = disc.q, disc.gamma, disc.omega1
    mu = geom.mu
    t0, t1, k = geom.t_start, geom.t_end, geom.k
    S = space.n_spatial
    dlam = temporal_basis_derivs(q, t0, t1)

    # constant-in-time blocks
    M_bg, K_bg, _ = _uniform_p1_matrices(geom.bg_nodes)
    ov_nodes0 = geom.ov_positions(t0)
    M_ov, K_ov, C_ov = _uniform_p1_matrices(ov_nodes0)
    M_full = _embed_bg(space, M_bg)
    K_full = _embed_bg(space, K_bg)
    M2 = _embed_ov(space, M_ov)
    K2 = _embed_ov(space, K_ov)
    C2 = _embed_ov(space, C_ov)

    T1, T2 = _temporal_products(q, k)
    P1 = np.einsum("ij,ab->ijab", T1, K_full + K2 - mu * C2)
    P2 = np.einsum("ij,ab->ijab", T2, M_full + M2)

    # time-dependent corrections on interface-crossing panels
    times, wts = composite_time_rule(t0, t1, geom.events, _GL3)
    mu_bar = float(np.hypot(mu, 1.0))
    for t, wt in zip(times, wts):
        lam = temporal_basis_values(q, t0, t1, t)
        a = float(geom.left(t))
        rows, cols, mv, kv = _covered_correction(space, a, a + geom.overlap_length)
        iface = _interface_data(space, t)
        for i in range(q + 1):
            for j in range(q + 1):
                np.add.at(P2[i, j], (rows, cols), -wt * lam[i] * dlam[j] * mv)
                np.add.at(P1[i, j], (rows, cols), -wt * lam[i] * lam[j] * kv)
                w_ij = wt * lam[i] * lam[j]
                for label, s, n1, bg_val, ov_val, bg_grad, ov_grad, h_K in iface:
                    jump = bg_val - ov_val
                    avg = bg_grad.scaled_sum(omega1, ov_grad, 1.0 - omega1)
                    add_outer(P1[i, j], -n1 * w_ij, jump, avg)
                    add_outer(P1[i, j], -n1 * w_ij, avg, jump)
                    add_outer(P1[i, j], w_ij * mu_bar * gamma / h_K, jump, jump)
                    if include_upwind and mu != 0.0:
                        sigma, w_up = sigma_side(label, mu)
                        upw = bg_val if sigma == 1 else ov_val
                        add_outer(P1[i, j], w_ij * w_up, upw, jump)

    # pairwise-exact gradient-jump stabilization
    stab = _stabilization_panels(geom)
    if stab is not None:
        pK, pc, c_lo0, c_hi0, breaks = stab
        K_lo, K_hi = geom.bg_nodes[pK], geom.bg_nodes[pK + 1]
        tq = breaks[:, :-1, None] + np.diff(breaks, axis=1)[:, :, None] * _GL3.nodes
        wq = np.diff(breaks, axis=1)[:, :, None] * _GL3.weights
        tq = tq.reshape(len(pK), -1)
        wq = wq.reshape(len(pK), -1)
        L = _pair_lengths(K_lo, K_hi, c_lo0, c_hi0, mu, t0, tq)
        h_bg = K_hi - K_lo
        h_ov = c_hi0 - c_lo0
        d_idx = np.stack(
            [space.bg_dof[pK], space.bg_dof[pK + 1], space.ov_dof(pc), space.ov_dof(pc + 1)],
            axis=1,
        )
        d_val = np.stack([-1.0 / h_bg, 1.0 / h_bg, 1.0 / h_ov, -1.0 / h_ov], axis=1)
        # constrained (boundary) background nodes carry no DOF; zero their
        # entries and park the index at 0 so np.add.at cannot wrap around
        d_val = np.where(d_idx >= 0, d_val, 0.0)
        d_idx = np.maximum(d_idx, 0)
        outer = d_val[:, :, None] * d_val[:, None, :]  # (npairs, 4, 4)
        R = np.repeat(d_idx, 4, axis=1).ravel()
        C = np.tile(d_idx, (1, 4)).ravel()
        for i in range(q + 1):
            for j in range(q + 1):
                if q == 0:
                    lamlam = np.ones_like(tq)
                else:
                    li = (t1 - tq) / k if i == 0 else (tq - t0) / k
                    lj = (t1 - tq) / k if j == 0 else (tq - t0) / k
                    lamlam = li * lj
                W = np.sum(wq * lamlam * L, axis=1)  # (npairs,)
                vals = (W[:, None, None] * outer).ravel()
                np.add.at(P1[i, j], (R, C), vals)

    # slab-start mass (time jump / initial coupling)
    M0 = (M_full + M2).copy()
    rows, cols, mv, _ = _covered_correction(space, float(geom.left(t0)), float(geom.right(t0)))
    np.add.at(M0, (rows, cols), -mv)
    lam0 = temporal_basis_values(q, t0, t1, t0)

    ncols = space.n_cols
    A = np.zeros((ncols, ncols))
    for i in range(q + 1):
        for j in range(q + 1):
            A[i :: q + 1, j :: q + 1] = P1[i, j] + P2[i, j] + lam0[i] * lam0[j] * M0

    # right-hand side
    rhs = np.zeros(ncols)
    rhs_rule = midpoint() if q == 0 else lobatto3()
    times_r, wts_r = composite_time_rule(t0, t1, geom.events, rhs_rule)
    for t, wt in zip(times_r, wts_r):
        lam = temporal_basis_values(q, t0, t1, t)
        fvec = _f_load(space, t, setup.problem.source)
        for i in range(q + 1):
            rhs[i :: q + 1] += wt * lam[i] * fvec
    uvec = _trace_load(space, t0, prev_trace)
    for i in range(q + 1):
        rhs[i :: q + 1] += lam0[i] * uvec

    return SlabSystem(slab=geom.n, matrix=A, rhs=rhs, space=space)


# ---------------------------------------------------------------------------
# direct application of the space-time form to evaluable functions
# ---------------------------------------------------------------------------
#
# These walk the quadrature by brute force through function evaluations and are
# meant for verification on small instances, not for assembly-scale work.  With
# panel breakpoints at every node crossing (extra_crossings) the quadrature is
# exact for broken piecewise-linear arguments, so the pairing below agrees with
# the assembled matrices to rounding.


def _compatible(w, v):
    sw, sv = w.setup, v.setup
    return (
        np.array_equal(sw.partition.breakpoints, sv.partition.breakpoints)
        and np.array_equal(sw.partition.velocities, sv.partition.velocities)
        and np.array_equal(sw.bg_nodes, sv.bg_nodes)
        and np.array_equal(sw.ov_offsets, sv.ov_offsets)
        and np.array_equal(sw.a_breaks, sv.a_breaks)
    )


def _segment_quadrature(part):
    pts = part.xa[:, None] + part.lengths[:, None] * _GL3.nodes[None, :]
    wts = part.lengths[:, None] * _GL3.weights[None, :]
    return pts, wts


def _volume_pairing(ws, vs, t, form):
    """integral over the domain of dw/dt * v (standard) or w * (-dv/dt)."""
    part = spatial_partition(ws.geom, t)
    pts, wts = _segment_quadrature(part)
    total = 0.0
    for side in (1, 2):
        m = part.side == side
        if not np.any(m):
            continue
        xs = pts[m].ravel()
        if form == "standard":
            fa = ws.eval(xs, t, side=side, deriv="dt")
            fb = vs.eval(xs, t, side=side)
        else:
            fa = ws.eval(xs, t, side=side)
            fb = -vs.eval(xs, t, side=side, deriv="dt")
        total += float(np.sum(wts[m].ravel() * fa * fb))
    return total


def _gradient_pairing(ws, vs, t):
    part = spatial_partition(ws.geom, t)
    total = 0.0
    for side in (1, 2):
        m = part.side == side
        if not np.any(m):
            continue
        mids = 0.5 * (part.xa[m] + part.xb[m])
        gw = ws.eval(mids, t, side=side, deriv="dx")
        gv = vs.eval(mids, t, side=side, deriv="dx")
        total += float(np.sum(part.lengths[m] * gw * gv))
    return total


def _stabilization_pairing(ws, vs, t):
    seg = overlap_segments(ws.geom, t)
    if len(seg) == 0:
        return 0.0
    mids = 0.5 * (seg.xa + seg.xb)
    jw = ws.eval(mids, t, side=1, deriv="dx") - ws.eval(mids, t, side=2, deriv="dx")
    jv = vs.eval(mids, t, side=1, deriv="dx") - vs.eval(mids, t, side=2, deriv="dx")
    return float(np.sum(seg.lengths * jw * jv))


def _point_pairing(ws, vs, t, gamma, omega1, form, include_upwind):
    geom = ws.geom
    nodes = geom.bg_nodes
    mu = geom.mu
    mu_bar = float(np.hypot(mu, 1.0))
    sym = 0.0
    upwind = 0.0
    for label, s, n1 in geom.interfaces(t):
        w1 = float(ws.eval(s, t, side=1)[0])
        w2 = float(ws.eval(s, t, side=2)[0])
        v1 = float(vs.eval(s, t, side=1)[0])
        v2 = float(vs.eval(s, t, side=2)[0])
        gw = omega1 * ws.interface_gradient(label, t, 1) + (1 - omega1) * ws.interface_gradient(
            label, t, 2
        )
        gv = omega1 * vs.interface_gradient(label, t, 1) + (1 - omega1) * vs.interface_gradient(
            label, t, 2
        )
        jw, jv = w1 - w2, v1 - v2
        c = int(np.clip(np.searchsorted(nodes, s, side="right") - 1, 0, len(nodes) - 2))
        h_K = float(nodes[c + 1] - nodes[c])
        sym += -n1 * (jw * gv + gw * jv) + mu_bar * gamma / h_K * jw * jv
        if include_upwind and mu != 0.0:
            sigma, w_up = sigma_side(label, mu)
            if form == "standard":
                upwind += w_up * jw * (v1 if sigma == 1 else v2)
            else:
                # the rearranged form pairs the downwind trace of the first
                # argument with the jump of the second
                w_dn = w2 if sigma == 1 else w1
                upwind += -w_up * w_dn * jv
    return sym, upwind


def _l2_pairing(geom, t, fa, fb):
    """Inner product over the domain of two side-wise evaluable functions."""
    part = spatial_partition(geom, t)
    pts, wts = _segment_quadrature(part)
    total = 0.0
    for side in (1, 2):
        m = part.side == side
        if not np.any(m):
            continue
        xs = pts[m].ravel()
        total += float(np.sum(wts[m].ravel() * fa(xs, side) * fb(xs, side)))
    return total


def apply_Bh(
    w,
    v,
    *,
    form: str = "standard",
    gamma: float | None = None,
    omega1: float | None = None,
    include_upwind: bool = True,
) -> float:
    """Evaluate the full space-time bilinear form on two space-time functions.

    ``form`` selects the primal writing (time derivative on the first argument,
    jumps paired with upper traces of the second) or the equivalent rearranged
    writing obtained by integration by parts in time.
    """
    if form not in ("standard", "alternative"):
        raise ValueError(f"unknown form {form!r}")
    if not _compatible(w, v):
        raise ValueError("arguments live on different discretizations")
    setup = w.setup
    gamma = setup.disc.gamma if gamma is None else gamma
    omega1 = setup.disc.omega1 if omega1 is None else omega1
    total = 0.0
    N = len(w.slabs)
    for ws, vs in zip(w.slabs, v.slabs):
        geom = ws.geom
        breaks = quadrature_breakpoints(geom, extra_crossings=True)
        times, wts = composite_time_rule(geom.t_start, geom.t_end, breaks, _GL3)
        for t, wt in zip(times, wts):
            part = _volume_pairing(ws, vs, t, form)
            grad = _gradient_pairing(ws, vs, t)
            stab = _stabilization_pairing(ws, vs, t)
            sym, upw = _point_pairing(ws, vs, t, gamma, omega1, form, include_upwind)
            total += wt * (part + grad + stab + sym + upw)

    bp = setup.partition.breakpoints
    if form == "standard":
        w0 = w.trace(0, "+")
        v0 = v.trace(0, "+")
        total += _l2_pairing(
            w.slabs[0].geom,
            float(bp[0]),
            lambda x, s: w0(x, side=s),
            lambda x, s: v0(x, side=s),
        )
        for n in range(1, N):
            wp, wm = w.trace(n, "+"), w.trace(n, "-")
            vp = v.trace(n, "+")
            total += _l2_pairing(
                w.slabs[n - 1].geom,
                float(bp[n]),
                lambda x, s: wp(x, side=s) - wm(x, side=s),
                lambda x, s: vp(x, side=s),
            )
    else:
        for n in range(1, N):
            wm = w.trace(n, "-")
            vp, vm = v.trace(n, "+"), v.trace(n, "-")
            total += _l2_pairing(
                w.slabs[n - 1].geom,
                float(bp[n]),
                lambda x, s: wm(x, side=s),
                lambda x, s: vm(x, side=s) - vp(x, side=s),
            )
        wN, vN = w.trace(N, "-"), v.trace(N, "-")
        total += _l2_pairing(
            w.slabs[-1].geom,
            float(bp[N]),
            lambda x, s: wN(x, side=s),
            lambda x, s: vN(x, side=s),
        )
    return total


def apply_load(v) -> float:
    """Evaluate the full right-hand-side functional on a space-time function,
    with the same quadrature the assembly uses for its load vector."""
    setup = v.setup
    problem = setup.problem
    total = 0.0
    for vs in v.slabs:
        geom = vs.geom
        q = setup.disc.q
        rhs_rule = midpoint() if q == 0 else lobatto3()
        times, wts = composite_time_rule(geom.t_start, geom.t_end, geom.events, rhs_rule)
        for t, wt in zip(times, wts):
            part = spatial_partition(geom, t)
            half = 0.5 * part.lengths
            for xs in (part.xa, part.xb):
                for side in (1, 2):
                    m = part.side == side
                    if not np.any(m):
                        continue
                    fv = np.asarray(problem.source(xs[m], t), dtype=float)
                    total += wt * float(
                        np.sum(half[m] * fv * vs.eval(xs[m], t, side=side))
                    )
    v0 = v.trace(0, "+")
    total += _l2_pairing(
        v.slabs[0].geom,
        float(setup.partition.breakpoints[0]),
        lambda x, s: np.asarray(problem.initial(x), dtype=float),
        lambda x, s: v0(x, side=s),
    )
    return total
