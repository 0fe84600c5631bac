"""Problem data, discretization parameters, and the manufactured test problem.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

INTERIOR_MARGIN = 1e-12


class GeometryViolation(Exception):
    """The moving subdomain left the interior of the background domain."""


class NumericalFailure(Exception):
    """Assembly or linear solve failed (singular system, bad residual)."""


@dataclass(frozen=True)
class ExactSolution:
    u: Callable[[float, float], float]
    u_x: Callable[[float, float], float]
    u_t: Callable[[float, float], float]


@dataclass(frozen=True)
class ProblemSpec:
    """Heat equation data on a fixed interval with homogeneous Dirichlet BCs."""

    x_lo: float
    x_hi: float
    final_time: float
    source: Callable[[float, float], float]
    initial: Callable[[float], float]
    exact: Optional[ExactSolution] = None

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise ValueError(f"need x_lo < x_hi, got [{self.x_lo}, {self.x_hi}]")
        if not self.final_time > 0:
            raise ValueError(f"final time must be positive, got {self.final_time}")

    @property
    def length(self) -> float:
        return self.x_hi - self.x_lo


@dataclass(frozen=True)
class OverlapSpec:
    """Moving subdomain: a rigid interval of fixed length translating inside the domain.

    ``velocity`` is either a constant or a callable of time.  For a callable, the
    slabwise-constant discrete velocity is taken per ``velocity_mode``: the endpoint
    sample at the slab's right endpoint, or the slab average.
    """

    length: float
    initial_left: float
    velocity: Union[float, Callable[[float], float]]
    velocity_mode: str = "sample"  # "sample" | "average"

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("overlap length must be positive")
        if self.velocity_mode not in ("sample", "average"):
            raise ValueError(f"unknown velocity mode {self.velocity_mode!r}")


@dataclass(frozen=True)
class Discretization:
    """Mesh/time-step counts and the stabilization/averaging parameters."""

    n_background: int
    n_overlap: int
    n_slabs: int
    q: int = 0
    gamma: float = 10.0
    omega1: float = 0.5

    def __post_init__(self):
        if self.n_background < 1 or self.n_overlap < 1 or self.n_slabs < 1:
            raise ValueError("cell and slab counts must be at least 1")
        if self.q not in (0, 1):
            raise ValueError(f"temporal degree must be 0 or 1, got {self.q}")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if not 0.0 <= self.omega1 <= 1.0:
            raise ValueError("omega1 must lie in [0, 1]")

    @property
    def omega2(self) -> float:
        return 1.0 - self.omega1


@dataclass(frozen=True)
class TimePartition:
    """Slab breakpoints t_0 < ... < t_N and the constant velocity of each slab."""

    breakpoints: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("need at least two time breakpoints")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time breakpoints must be strictly increasing")
        if len(self.velocities) != len(t) - 1:
            raise ValueError("need one velocity per slab")

    @property
    def n_slabs(self) -> int:
        return len(self.breakpoints) - 1

    def slab_interval(self, n: int) -> tuple[float, float]:
        """Interval (t_{n-1}, t_n] of slab n (1-based)."""
        return float(self.breakpoints[n - 1]), float(self.breakpoints[n])


def make_uniform_mesh(interval: tuple[float, float], n_cells: int) -> np.ndarray:
    """Sorted node positions of a uniform mesh with ``n_cells`` cells."""
    lo, hi = interval
    if n_cells < 1:
        raise ValueError(f"n_cells must be at least 1, got {n_cells}")
    if not lo < hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    return np.linspace(lo, hi, n_cells + 1)


def manufactured_problem(final_time: float = 1.0) -> ProblemSpec:
    """sin^2(pi x) e^(-t/2) on the unit interval, with the matching source term."""

    def u(x, t):
        return np.sin(np.pi * x) ** 2 * np.exp(-t / 2)

    def u_x(x, t):
        return np.pi * np.sin(2 * np.pi * x) * np.exp(-t / 2)

    def u_t(x, t):
        return -0.5 * u(x, t)

    def source(x, t):
        # u_t - u_xx in closed form
        return np.exp(-t / 2) * (
            -0.5 * np.sin(np.pi * x) ** 2 - 2 * np.pi**2 * np.cos(2 * np.pi * x)
        )

    return ProblemSpec(
        x_lo=0.0,
        x_hi=1.0,
        final_time=final_time,
        source=source,
        initial=lambda x: np.sin(np.pi * x) ** 2,
        exact=ExactSolution(u=u, u_x=u_x, u_t=u_t),
    )


def zero_problem(final_time: float = 1.0) -> ProblemSpec:
    """Zero source and zero initial data; the solution is identically zero."""
    zero2 = lambda x, t: np.zeros_like(np.asarray(x, dtype=float))
    return ProblemSpec(
        x_lo=0.0,
        x_hi=1.0,
        final_time=final_time,
        source=zero2,
        initial=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        exact=ExactSolution(u=zero2, u_x=zero2, u_t=zero2),
    )


# 5-point Gauss-Legendre on [0,1], for slab averages of a smooth velocity
_GL5_X, _GL5_W = np.polynomial.legendre.leggauss(5)
_GL5_X = 0.5 * (_GL5_X + 1.0)
_GL5_W = 0.5 * _GL5_W


def slab_velocity(spec: OverlapSpec, t_start: float, t_end: float) -> float:
    """Constant discrete velocity for the slab (t_start, t_end]."""
    if not callable(spec.velocity):
        return float(spec.velocity)
    if spec.velocity_mode == "sample":
        return float(spec.velocity(t_end))
    k = t_end - t_start
    ts = t_start + k * _GL5_X
    return float(np.sum(_GL5_W * np.asarray([spec.velocity(t) for t in ts])))


def build_time_partition(spec: OverlapSpec, final_time: float, n_slabs: int) -> TimePartition:
    """Uniform partition of (0, T] with the slabwise discrete velocities."""
    t = np.linspace(0.0, final_time, n_slabs + 1)
    mu = np.array([slab_velocity(spec, t[n], t[n + 1]) for n in range(n_slabs)])
    return TimePartition(breakpoints=t, velocities=mu)


def interface_path(spec: OverlapSpec, partition: TimePartition) -> np.ndarray:
    """Left interface position at every slab breakpoint (continuous, piecewise linear)."""
    k = np.diff(partition.breakpoints)
    a = np.empty(len(partition.breakpoints))
    a[0] = spec.initial_left
    a[1:] = spec.initial_left + np.cumsum(partition.velocities * k)
    return a


def check_interior(problem: ProblemSpec, spec: OverlapSpec, partition: TimePartition) -> None:
    """Abort if the moving subdomain ever touches the outer boundary.

    The interface path is piecewise linear, so its extremes over [0, T] are
    attained at slab breakpoints.
    """
    a = interface_path(spec, partition)
    if a.min() <= problem.x_lo + INTERIOR_MARGIN:
        raise GeometryViolation(
            f"left interface reaches {a.min():.6g}, touching the boundary {problem.x_lo}"
        )
    if (a.max() + spec.length) >= problem.x_hi - INTERIOR_MARGIN:
        raise GeometryViolation(
            f"right interface reaches {a.max() + spec.length:.6g}, "
            f"touching the boundary {problem.x_hi}"
        )


@dataclass(frozen=True)
class Setup:
    """Everything fixed for one solve: problem, overlap motion, meshes, time partition."""

    problem: ProblemSpec
    overlap: OverlapSpec
    disc: Discretization
    partition: TimePartition
    bg_nodes: np.ndarray
    ov_offsets: np.ndarray  # node offsets within the moving interval, 0 .. length
    a_breaks: np.ndarray  # left interface position at slab breakpoints

    @classmethod
    def build(cls, problem: ProblemSpec, overlap: OverlapSpec, disc: Discretization) -> "Setup":
        partition = build_time_partition(overlap, problem.final_time, disc.n_slabs)
        check_interior(problem, overlap, partition)
        bg_nodes = make_uniform_mesh((problem.x_lo, problem.x_hi), disc.n_background)
        ov_offsets = make_uniform_mesh((0.0, overlap.length), disc.n_overlap)
        a_breaks = interface_path(overlap, partition)
        return cls(problem, overlap, disc, partition, bg_nodes, ov_offsets, a_breaks)

    @property
    def h_background(self) -> float:
        return float(self.problem.length / self.disc.n_background)

    @property
    def h_overlap(self) -> float:
        return float(self.overlap.length / self.disc.n_overlap)

    def spacetime_uniformity_ratios(self) -> tuple[float, float]:
        """Diagnostic (h^2 / k_min, k / h_min); reported, not enforced."""
        k = np.diff(self.partition.breakpoints)
        h = max(self.h_background, self.h_overlap)
        h_min = min(self.h_background, self.h_overlap)
        return float(h * h / k.min()), float(k.max() / h_min)
