"""Computational domains, tensor grids and the log-weight ``f``.

Domains are an interval ``[a, b]`` or an axis-aligned rectangle
``[ax, bx] x [ay, by]`` discretized by a uniform tensor grid that includes the
boundary nodes.  Fields living on a grid are plain numpy arrays of shape
``grid.shape`` (axis 0 is ``x``, axis 1 is ``y``).

The weight ``f`` defines the measure ``dmu = exp(-f) dx``.  The base metric is
Euclidean, so the Bakry-Emery tensor is just the Hessian of ``f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from plaplab.errors import ConfigurationError

MIN_RESOLUTION = 8

INTERVAL = "interval"
RECTANGLE = "rectangle"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DomainSpec:
    """Interval or rectangle plus the number of nodes per axis."""

    kind: str
    bounds: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in (INTERVAL, RECTANGLE):
            raise ConfigurationError(f"unknown domain kind {self.kind!r}")
        dim = 1 if self.kind == INTERVAL else 2
        if len(self.bounds) != dim or len(self.resolution) != dim:
            raise ConfigurationError(
                f"{self.kind} needs {dim} axis bounds and resolutions"
            )
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ConfigurationError(f"invalid axis bounds ({lo}, {hi})")
        for n in self.resolution:
            if int(n) != n or n < 3:
                raise ConfigurationError(f"invalid resolution {n}")

    @classmethod
    def interval(cls, a: float, b: float, n: int) -> DomainSpec:
        return cls(INTERVAL, ((float(a), float(b)),), (int(n),))

    @classmethod
    def rectangle(
        cls, ax: float, bx: float, ay: float, by: float, n: int | Sequence[int]
    ) -> DomainSpec:
        nx, ny = (n, n) if np.isscalar(n) else tuple(n)
        return cls(
            RECTANGLE,
            ((float(ax), float(bx)), (float(ay), float(by))),
            (int(nx), int(ny)),
        )

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def with_resolution(self, n: int | Sequence[int]) -> DomainSpec:
        res = (int(n),) * self.dim if np.isscalar(n) else tuple(int(k) for k in n)
        return DomainSpec(self.kind, self.bounds, res)

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds]))


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid with interior/boundary bookkeeping.

    Attributes:
        spec: the domain this grid discretizes.
        coords: 1D node coordinates per axis.
        spacing: node spacing per axis.
        interior: boolean mask of interior nodes.
        boundary: boolean mask of boundary nodes (complement of ``interior``).
        corner: boolean mask of rectangle corners (never set in 1D).
        normals: outward unit normal per node, shape ``shape + (dim,)``;
            zero at interior nodes and at corners.
        quad_weights: composite trapezoidal weights per node.
    """

    spec: DomainSpec
    coords: tuple[np.ndarray, ...]
    spacing: tuple[float, ...]
    interior: np.ndarray
    boundary: np.ndarray
    corner: np.ndarray
    normals: np.ndarray
    quad_weights: np.ndarray
    depth: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.coords)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    @property
    def h(self) -> float:
        """Largest spacing, used as the refinement parameter."""
        return max(self.spacing)

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of shape ``self.shape`` (``ij`` indexing)."""
        return tuple(np.meshgrid(*self.coords, indexing="ij"))

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (dim,)``."""
        return np.stack(self.mesh(), axis=-1)

    def interior_values(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u)[self.interior]

    def embed(self, v: np.ndarray) -> np.ndarray:
        """Full-grid field from interior values, zero on the boundary."""
        u = np.zeros(self.shape)
        u[self.interior] = v
        return u

    def check_field(self, u, name: str = "field") -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            raise ConfigurationError(
                f"{name} has shape {u.shape}, grid has shape {self.shape}"
            )
        if not np.all(np.isfinite(u)):
            raise ConfigurationError(f"{name} contains non-finite values")
        return u

    def same_as(self, other: Grid) -> bool:
        return self is other or self.spec == other.spec


def make_grid(spec: DomainSpec, min_resolution: int = MIN_RESOLUTION) -> Grid:
    """Build the uniform tensor grid for ``spec``.

    Raises:
        ConfigurationError: if any axis has fewer than ``min_resolution`` nodes.
    """
    if any(n < min_resolution for n in spec.resolution):
        raise ConfigurationError(
            f"resolution {spec.resolution} below minimum {min_resolution} nodes per axis"
        )
    coords = tuple(
        _frozen(np.linspace(lo, hi, n)) for (lo, hi), n in zip(spec.bounds, spec.resolution)
    )
    spacing = tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(spec.bounds, spec.resolution))
    shape = spec.resolution
    dim = spec.dim

    # distance (in nodes) to the nearest boundary node along any axis
    depth = np.full(shape, np.iinfo(np.int64).max, dtype=np.int64)
    for ax, n in enumerate(shape):
        k = np.arange(n)
        d = np.minimum(k, n - 1 - k)
        depth = np.minimum(depth, d.reshape([-1 if a == ax else 1 for a in range(dim)]))
    interior = depth > 0
    boundary = ~interior

    on_face = np.zeros(shape + (dim,), dtype=int)
    for ax, n in enumerate(shape):
        sl_lo = [slice(None)] * dim
        sl_hi = [slice(None)] * dim
        sl_lo[ax], sl_hi[ax] = 0, n - 1
        on_face[tuple(sl_lo) + (ax,)] = -1
        on_face[tuple(sl_hi) + (ax,)] = 1
    n_faces = np.count_nonzero(on_face, axis=-1)
    corner = n_faces > 1
    normals = np.where((n_faces == 1)[..., None], on_face, 0).astype(float)

    q = np.ones(shape)
    for ax, (n, h) in enumerate(zip(shape, spacing)):
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        q = q * w.reshape([-1 if a == ax else 1 for a in range(dim)])

    return Grid(
        spec=spec,
        coords=coords,
        spacing=spacing,
        interior=_frozen(interior),
        boundary=_frozen(boundary),
        corner=_frozen(corner),
        normals=_frozen(normals),
        quad_weights=_frozen(q),
        depth=_frozen(depth),
    )


ZERO = "zero"
LINEAR = "linear"
QUADRATIC = "quadratic"
TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class WeightSpec:
    """Functional form of the log-weight ``f``.

    ``linear``: ``f(x) = a . x`` with ``params["a"]`` a scalar (1D) or a vector.
    ``quadratic``: ``f(x) = c |x - x0|^2``.
    ``tabulated``: node values in ``params["values"]``; derivatives are taken
    with the finite-difference stencils of :mod:`plaplab.calculus`.
    """

    form: str = ZERO
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.form not in (ZERO, LINEAR, QUADRATIC, TABULATED):
            raise ConfigurationError(f"unknown weight form {self.form!r}")
        if self.form == LINEAR and "a" not in self.params:
            raise ConfigurationError("linear weight needs parameter 'a'")
        if self.form == QUADRATIC and "c" not in self.params:
            raise ConfigurationError("quadratic weight needs parameter 'c'")
        if self.form == TABULATED and "values" not in self.params:
            raise ConfigurationError("tabulated weight needs 'values'")

    @classmethod
    def zero(cls) -> WeightSpec:
        return cls(ZERO, {})

    @classmethod
    def linear(cls, a) -> WeightSpec:
        return cls(LINEAR, {"a": a})

    @classmethod
    def quadratic(cls, c: float, x0=0.0) -> WeightSpec:
        return cls(QUADRATIC, {"c": float(c), "x0": x0})

    @classmethod
    def tabulated(cls, values) -> WeightSpec:
        return cls(TABULATED, {"values": np.asarray(values, dtype=float)})

    @property
    def smooth(self) -> bool:
        """False for tabulated weights, whose smoothness is unknown."""
        return self.form != TABULATED

    def describe(self) -> dict:
        """JSON-friendly description (tabulated values summarized)."""
        if self.form == TABULATED:
            return {"form": self.form, "nodes": int(np.size(self.params["values"]))}
        out = {"form": self.form}
        for k, v in self.params.items():
            out[k] = np.asarray(v, dtype=float).tolist()
        return out


@dataclass(frozen=True, eq=False)
class WeightField:
    """Node tables of ``f``, its gradient and Hessian, and measure weights."""

    spec: WeightSpec
    grid: Grid
    f: np.ndarray
    grad_f: np.ndarray
    hess_f: np.ndarray
    measure_weights: np.ndarray

    @property
    def density(self) -> np.ndarray:
        """``exp(-f)`` at every node."""
        return np.exp(-self.f)


def _vector_param(value, dim: int, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.size == 1 and dim > 1 and name == "x0":
        v = np.full(dim, v[0])
    if v.shape != (dim,):
        raise ConfigurationError(f"weight parameter {name!r} must have {dim} components")
    return v


def weight_tables(spec: WeightSpec, grid: Grid) -> WeightField:
    """Evaluate ``f``, ``grad f``, ``hess f`` and ``exp(-f)``-weighted quadrature."""
    dim = grid.dim
    shape = grid.shape
    x = grid.points()
    if spec.form == ZERO:
        f = np.zeros(shape)
        grad = np.zeros(shape + (dim,))
        hess = np.zeros(shape + (dim, dim))
    elif spec.form == LINEAR:
        a = _vector_param(spec.params["a"], dim, "a")
        f = x @ a
        grad = np.broadcast_to(a, shape + (dim,)).copy()
        hess = np.zeros(shape + (dim, dim))
    elif spec.form == QUADRATIC:
        c = float(spec.params["c"])
        x0 = _vector_param(spec.params.get("x0", 0.0), dim, "x0")
        d = x - x0
        f = c * np.sum(d * d, axis=-1)
        grad = 2 * c * d
        hess = np.broadcast_to(2 * c * np.eye(dim), shape + (dim, dim)).copy()
    else:
        from plaplab.calculus import gradient, hessian

        values = np.asarray(spec.params["values"], dtype=float)
        if values.shape != shape:
            raise ConfigurationError(
                f"tabulated weight has {values.size} values for {grid.size} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("tabulated weight contains non-finite values")
        f = values.copy()
        grad = gradient(f, grid)
        hess = hessian(f, grid)
    mw = np.exp(-f) * grid.quad_weights
    return WeightField(
        spec=spec,
        grid=grid,
        f=_frozen(f),
        grad_f=_frozen(grad),
        hess_f=_frozen(hess),
        measure_weights=_frozen(mw),
    )
