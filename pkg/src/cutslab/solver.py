"""Slab-by-slab time marching and the dense linear solve behind it."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .assembly import SlabSystem, assemble_slab
from .core import Discretization, NumericalFailure, OverlapSpec, ProblemSpec, Setup
from .geometry import build_slab_geometry
from .spaces import SlabSolution, SpaceTimeSolution, build_slab_space

PIVOT_FRACTION = 1e-14
RESIDUAL_TOL = 1e-10


def solve_slab(system: SlabSystem) -> np.ndarray:
    """Solve one slab system by LU with partial pivoting, with sanity checks."""
    A, b = system.matrix, system.rhs
    scale = np.linalg.norm(A, np.inf)
    with warnings.catch_warnings():
        # exact singularity is reported through NumericalFailure below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or pivots.min() <= PIVOT_FRACTION * scale:
        cond = float(np.linalg.cond(A, 1)) if scale > 0 else np.inf
        raise NumericalFailure(
            f"singular slab system (slab {system.slab}, {system.space.n_cols} unknowns, "
            f"{system.space.n_active_bg} background DOFs, condition estimate {cond:.3e})"
        )
    x = lu_solve((lu, piv), b)
    denom = scale * np.linalg.norm(x, np.inf) + np.linalg.norm(b, np.inf)
    if denom > 0:
        rel = np.linalg.norm(A @ x - b, np.inf) / denom
        if rel > RESIDUAL_TOL:
            raise NumericalFailure(
                f"slab {system.slab} solve left relative residual {rel:.3e}"
            )
    return x


def march(
    problem: ProblemSpec, overlap: OverlapSpec, disc: Discretization
) -> SpaceTimeSolution:
    """March the discrete system through all slabs and collect the solution."""
    setup = Setup.build(problem, overlap, disc)
    prev_trace = lambda x: np.asarray(problem.initial(x), dtype=float)
    slabs = []
    for n in range(1, disc.n_slabs + 1):
        geom = build_slab_geometry(setup, n)
        space = build_slab_space(geom, disc.q)
        system = assemble_slab(space, setup, prev_trace)
        coeffs = solve_slab(system)
        sol = SlabSolution(geom=geom, space=space, coeffs=coeffs)
        slabs.append(sol)
        t_end = geom.t_end
        prev_trace = (lambda s, te: (lambda x: s.eval(x, te)))(sol, t_end)
    return SpaceTimeSolution(setup=setup, slabs=tuple(slabs))
