"""
Uniform rectangular grids with homogeneous Neumann boundaries.

Nodes sit on the closed box ``[0, L_1] x ... x [0, L_d]`` (boundary nodes
included).  Values are stored flat in row-major order, axis 0 slowest.

Discrete operators:
    - ``laplacian_neumann``: 2nd-order centred stencil, ghost nodes mirrored
      (ghost value = first interior neighbour), so the normal difference at
      the boundary is zero.
    - trapezoidal quadrature in space (boundary nodes half weight) and time.

With the trapezoidal weights ``w`` the stencil is symmetric and negative
semidefinite in ``<f, g> = sum(w f g)`` and ``sum(w * lap f) == 0``, which is
what makes the discrete heat flow conserve mass exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, NonFiniteFieldError

__all__ = [
    "Grid",
    "Field",
    "Trajectory",
    "laplacian_neumann",
    "norm_Lp_omega",
    "norm_Lp_Q",
    "h1_seminorm",
    "mean",
    "laplacian_values",
    "gradient_values",
    "space_norms",
    "time_norm",
    "interval_norm",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_field_csv",
    "read_field_csv",
]

_AXIS_NAMES = ("x", "y", "z")


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product grid on ``[0, extents[0]] x ...``.

    Attributes:
        extents: side lengths of the box, one per axis.
        nodes: nodes per axis (boundary nodes included), each >= 3.
    """

    extents: tuple[float, ...]
    nodes: tuple[int, ...]

    def __post_init__(self):
        extents = tuple(float(e) for e in np.atleast_1d(self.extents))
        nodes = tuple(int(n) for n in np.atleast_1d(self.nodes))
        if len(extents) != len(nodes):
            raise ConfigError(f"extents {extents} and nodes {nodes} differ in length")
        if not 1 <= len(nodes) <= 3:
            raise ConfigError(f"dimension must be 1, 2 or 3, got {len(nodes)}")
        if any(n < 3 for n in nodes):
            raise ConfigError(f"need at least 3 nodes per axis, got {nodes}")
        if any(not (e > 0 and math.isfinite(e)) for e in extents):
            raise ConfigError(f"extents must be positive and finite, got {extents}")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def line(cls, nodes: int, length: float = 1.0) -> "Grid":
        return cls((length,), (nodes,))

    @classmethod
    def rectangle(cls, nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> "Grid":
        return cls((lx, ly), (nx, ny))

    @property
    def dim(self) -> int:
        return len(self.nodes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nodes

    @property
    def size(self) -> int:
        return int(np.prod(self.nodes))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / (n - 1) for e, n in zip(self.extents, self.nodes))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(0.0, e, n) for e, n in zip(self.extents, self.nodes))

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of shape ``grid.shape`` (ij indexing)."""
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(size, dim)`` in storage order."""
        return np.stack([c.ravel() for c in self.mesh()], axis=-1)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights, flat, summing to ``volume``."""
        w = np.ones(1)
        for h, n in zip(self.spacing, self.nodes):
            w1 = np.full(n, h)
            w1[0] = w1[-1] = 0.5 * h
            w = np.multiply.outer(w, w1).ravel()
        w.setflags(write=False)
        return w

    @property
    def laplacian_diagonal(self) -> float:
        """Diagonal entry of the discrete Laplacian (same at every node)."""
        return -sum(2.0 / h**2 for h in self.spacing)


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        bad = int(np.size(values) - np.count_nonzero(np.isfinite(values)))
        raise NonFiniteFieldError(f"{what} has {bad} non-finite entries")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values of one scalar at one time level."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(np.ravel(self.values))
        if values.size != self.grid.size:
            raise ConfigError(f"field has {values.size} values, grid has {self.grid.size} nodes")
        _check_finite(values, "field")
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "Field":
        return cls(grid, np.full(grid.size, float(c)))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "Field":
        """Sample ``fn(x[, y])`` on the nodes (coordinates passed as arrays)."""
        vals = np.broadcast_to(np.asarray(fn(*grid.mesh()), dtype=float), grid.shape)
        return cls(grid, vals)

    def as_array(self) -> np.ndarray:
        """Values reshaped to ``grid.shape``."""
        return self.values.reshape(self.grid.shape)

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ConfigError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Frames ``0..steps`` of a field on ``Q = Omega x (0, steps*dt]``.

    ``values`` has shape ``(steps + 1, grid.size)``; row 0 is the initial
    datum.
    """

    grid: Grid
    dt: float
    values: np.ndarray

    def __post_init__(self):
        dt = float(self.dt)
        if not (dt > 0 and math.isfinite(dt)):
            raise ConfigError(f"time step must be positive, got {self.dt}")
        values = _frozen(self.values)
        if values.ndim != 2 or values.shape[1] != self.grid.size:
            raise ConfigError(
                f"trajectory values must have shape (steps+1, {self.grid.size}), got {values.shape}"
            )
        if values.shape[0] < 2:
            raise ConfigError("a trajectory needs at least one step")
        _check_finite(values, "trajectory")
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid, dt: float, steps: int) -> "Trajectory":
        return cls(grid, dt, np.zeros((steps + 1, grid.size)))

    @classmethod
    def constant(cls, grid: Grid, dt: float, steps: int, c: float) -> "Trajectory":
        return cls(grid, dt, np.full((steps + 1, grid.size), float(c)))

    @classmethod
    def from_frames(cls, frames: Sequence[Field], dt: float) -> "Trajectory":
        grid = frames[0].grid
        if any(f.grid != grid for f in frames):
            raise ConfigError("frames live on different grids")
        return cls(grid, dt, np.stack([f.values for f in frames]))

    @classmethod
    def from_function(cls, grid: Grid, dt: float, steps: int, fn: Callable[..., np.ndarray]) -> "Trajectory":
        """Sample ``fn(t, x[, y])`` at every frame time."""
        coords = grid.mesh()
        t = np.arange(steps + 1) * dt
        vals = np.empty((steps + 1, grid.size))
        for k, tk in enumerate(t):
            vals[k] = np.broadcast_to(np.asarray(fn(tk, *coords), dtype=float), grid.shape).ravel()
        return cls(grid, dt, vals)

    @property
    def steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def T(self) -> float:
        return self.steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def frame(self, k: int) -> Field:
        return Field(self.grid, self.values[k])

    @property
    def frames(self) -> tuple[Field, ...]:
        return tuple(self.frame(k) for k in range(self.steps + 1))

    @property
    def initial(self) -> Field:
        return self.frame(0)

    @property
    def final(self) -> Field:
        return self.frame(self.steps)

    def same_slab(self, other: "Trajectory") -> bool:
        """True when both live on the same grid, dt and step count."""
        return self.grid == other.grid and self.dt == other.dt and self.steps == other.steps

    def _other(self, other):
        if isinstance(other, Trajectory):
            if not self.same_slab(other):
                raise ConfigError("trajectories live on different space-time slabs")
            return other.values
        return other

    def __add__(self, other):
        return Trajectory(self.grid, self.dt, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Trajectory(self.grid, self.dt, self.values - self._other(other))

    def __mul__(self, other):
        return Trajectory(self.grid, self.dt, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Trajectory(self.grid, self.dt, -self.values)


# ---------------------------------------------------------------------------
# array-level kernels (leading axes are frames)
# ---------------------------------------------------------------------------


def _axis_slice(ndim: int, axis: int, s) -> tuple:
    idx = [slice(None)] * ndim
    idx[axis] = s
    return tuple(idx)


def laplacian_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Neumann Laplacian of flat ``values`` (shape ``(..., size)``)."""
    values = np.asarray(values, dtype=float)
    lead = values.shape[:-1]
    arr = values.reshape(lead + grid.shape)
    out = np.zeros_like(arr)
    nd = arr.ndim
    for ax, h in enumerate(grid.spacing):
        a = len(lead) + ax
        S = lambda s: _axis_slice(nd, a, s)  # noqa: E731
        inv = 1.0 / h**2
        out[S(slice(1, -1))] += (arr[S(slice(None, -2))] - 2.0 * arr[S(slice(1, -1))] + arr[S(slice(2, None))]) * inv
        out[S(0)] += 2.0 * (arr[S(1)] - arr[S(0)]) * inv
        out[S(-1)] += 2.0 * (arr[S(-2)] - arr[S(-1)]) * inv
    return out.reshape(values.shape)


def gradient_values(grid: Grid, values: np.ndarray) -> list[np.ndarray]:
    """Per-axis derivatives: centred inside, 2nd-order one-sided at the ends."""
    values = np.asarray(values, dtype=float)
    lead = values.shape[:-1]
    arr = values.reshape(lead + grid.shape)
    return [
        np.gradient(arr, h, axis=len(lead) + ax, edge_order=2).reshape(values.shape)
        for ax, h in enumerate(grid.spacing)
    ]


def _check_p(p: float) -> float:
    p = float(p)
    if not p >= 1:
        raise ConfigError(f"norm exponent must be >= 1, got {p}")
    return p


def space_norms(grid: Grid, values: np.ndarray, p: float) -> np.ndarray:
    """Discrete ``L^p(Omega)`` norm of each row of ``values``."""
    p = _check_p(p)
    a = np.abs(np.asarray(values, dtype=float))
    if math.isinf(p):
        return a.max(axis=-1)
    return (a**p @ grid.weights) ** (1.0 / p)


def time_norm(dt: float, frame_norms: np.ndarray, p: float) -> float:
    """Combine per-frame ``L^p(Omega)`` norms with the trapezoidal rule in time."""
    p = _check_p(p)
    frame_norms = np.asarray(frame_norms, dtype=float)
    if math.isinf(p):
        return float(frame_norms.max())
    fp = frame_norms**p
    integral = dt * (fp.sum() - 0.5 * (fp[0] + fp[-1]))
    return float(integral ** (1.0 / p))


def interval_norm(grid: Grid, dt: float, values: np.ndarray, p: float) -> float:
    """``L^p(Q)`` norm of a piecewise-constant-in-time quantity.

    Row ``k`` of ``values`` is the value on ``(t_k, t_{k+1})`` (e.g. a forward
    difference quotient), so each row gets weight ``dt``.
    """
    p = _check_p(p)
    norms = space_norms(grid, values, p)
    if math.isinf(p):
        return float(norms.max())
    return float((dt * np.sum(norms**p)) ** (1.0 / p))


# ---------------------------------------------------------------------------
# public operators
# ---------------------------------------------------------------------------


def laplacian_neumann(f: Field) -> Field:
    """Discrete Laplacian with zero normal derivative (mirrored ghosts)."""
    return Field(f.grid, laplacian_values(f.grid, f.values))


def norm_Lp_omega(f: Field, p: float) -> float:
    """Trapezoidal ``(sum w_i |f_i|^p)^(1/p)``; ``p = inf`` gives the max norm."""
    return float(space_norms(f.grid, f.values, p))


def norm_Lp_Q(t: Trajectory, p: float) -> float:
    """Space-time ``L^p(Q)`` norm: spatial norm per frame, trapezoid in time."""
    return time_norm(t.dt, space_norms(t.grid, t.values, p), p)


def h1_seminorm(f: Field) -> float:
    """``(integral |grad f|^2)^(1/2)`` with difference gradients and trapezoid weights."""
    grads = gradient_values(f.grid, f.values)
    sq = sum(g**2 for g in grads)
    return float(math.sqrt(sq @ f.grid.weights))


def mean(f: Field) -> float:
    """Quadrature-weighted average over Omega."""
    w = f.grid.weights
    return float(f.values @ w / w.sum())


# ---------------------------------------------------------------------------
# CSV snapshots: header ``t,x[,y],value``, row-major node order
# ---------------------------------------------------------------------------


def _csv_block(grid: Grid, times: Iterable[float], values: np.ndarray) -> np.ndarray:
    times = np.asarray(list(times), dtype=float)
    nt = times.size
    cols = [np.repeat(times, grid.size)]
    cols += [np.tile(c, nt) for c in grid.points.T]
    cols.append(np.asarray(values, dtype=float).reshape(-1))
    return np.column_stack(cols)


def _write_csv(path, grid: Grid, times, values) -> None:
    header = ",".join(["t", *_AXIS_NAMES[: grid.dim], "value"])
    np.savetxt(path, _csv_block(grid, times, values), delimiter=",", header=header, comments="", fmt="%.17g")


def write_trajectory_csv(path, traj: Trajectory) -> None:
    """Write every frame; floats use 17 significant digits (exact round-trip)."""
    _write_csv(path, traj.grid, traj.times, traj.values)


def write_field_csv(path, f: Field, t: float = 0.0) -> None:
    _write_csv(path, f.grid, [t], f.values[None, :])


def _read_csv(path, grid: Grid | None):
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    if header[0] != "t" or header[-1] != "value":
        raise ConfigError(f"{path}: unexpected header {header}")
    dim = len(header) - 2
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if grid is None:
        axes = [np.unique(data[:, 1 + d]) for d in range(dim)]
        grid = Grid(tuple(a[-1] for a in axes), tuple(a.size for a in axes))
    elif grid.dim != dim:
        raise ConfigError(f"{path}: file is {dim}-D, grid is {grid.dim}-D")
    if data.shape[0] % grid.size:
        raise ConfigError(f"{path}: {data.shape[0]} rows is not a multiple of {grid.size} nodes")
    nt = data.shape[0] // grid.size
    times = data[:: grid.size, 0]
    return grid, times, data[:, -1].reshape(nt, grid.size)


def read_trajectory_csv(path, grid: Grid | None = None, dt: float | None = None) -> Trajectory:
    """Read a trajectory CSV; the grid and dt are inferred unless given."""
    grid, times, values = _read_csv(path, grid)
    if dt is None:
        dt = float(times[1] - times[0]) if times.size > 1 else 1.0
    return Trajectory(grid, dt, values)


def read_field_csv(path, grid: Grid | None = None) -> Field:
    grid, _, values = _read_csv(path, grid)
    return Field(grid, values[0])
