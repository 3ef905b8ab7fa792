"""Uniform periodic grids on the unit torus and conservative difference operators.

Scalar fields sample the nodes x_i = i*h (per axis, h = 1/n); indices wrap in
both directions.  Vector fields are face staggered: component 0 of entry
(i, j) lives on the east face at (x_i + h/2, y_j), component 1 on the north
face at (x_i, y_j + h/2).  With this staggering

* ``divergence(gradient(f))`` is the compact five-point Laplacian with
  Fourier symbol 2*(cos(2*pi*k*h) - 1)/h**2 per axis,
* ``sum(f * divergence(v))`` equals ``-sum(gradient(f) . v)`` exactly, so
  diffusion operators built from the pair are symmetric, and
* the cell sum of any divergence telescopes to zero, which makes the time
  stepper conservative to rounding.

All operations are pure; fields are treated as immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError


class Grid:
    """Square n-by-n periodic grid with cell width h = 1/n.

    Coordinate arrays for the nodes and for both face families are
    precomputed and read-only; every field on the grid shares them.
    """

    def __init__(self, n: int):
        if n < 4:
            raise ConfigurationError(f"grid needs n >= 4, got n={n}")
        if n % 2 != 0:
            raise ConfigurationError(f"grid needs even n, got n={n}")
        self.n = int(n)
        self.h = 1.0 / self.n
        axis = np.arange(self.n) * self.h
        self.x1, self.x2 = np.meshgrid(axis, axis, indexing="ij")
        # east faces sit at (x1 + h/2, x2), north faces at (x1, x2 + h/2)
        self.x1_east = self.x1 + 0.5 * self.h
        self.x2_east = self.x2
        self.x1_north = self.x1
        self.x2_north = self.x2 + 0.5 * self.h
        for arr in (self.x1, self.x2, self.x1_east, self.x2_east,
                    self.x1_north, self.x2_north):
            arr.setflags(write=False)

    def __eq__(self, other) -> bool:
        return isinstance(other, Grid) and other.n == self.n

    def __hash__(self) -> int:
        return hash(("Grid", self.n))

    def __repr__(self) -> str:
        return f"Grid(n={self.n}, h={self.h})"


def make_grid(n: int) -> Grid:
    """Build the periodic grid; rejects n < 4 and odd n."""
    return Grid(n)


@dataclass(frozen=True)
class ScalarField:
    """A scalar sampled at the grid nodes, values shape (n, n)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n, self.grid.n):
            raise ConfigurationError(
                f"scalar field shape {v.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("scalar field contains non-finite entries")
        object.__setattr__(self, "values", v)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "ScalarField":
        return ScalarField(self.grid, self.values / scalar)


@dataclass(frozen=True)
class VectorField:
    """A face-staggered 2-vector field, values shape (n, n, 2)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n, self.grid.n, 2):
            raise ConfigurationError(
                f"vector field shape {v.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("vector field contains non-finite entries")
        object.__setattr__(self, "values", v)


def zeros(grid: Grid) -> ScalarField:
    return ScalarField(grid, np.zeros((grid.n, grid.n)))


def from_function(grid: Grid, fn) -> ScalarField:
    """Sample ``fn(x1, x2)`` at the grid nodes."""
    return ScalarField(grid, np.asarray(fn(grid.x1, grid.x2), dtype=float))


def gradient(f: ScalarField) -> VectorField:
    """Face gradient: component k of entry (i, j) is the difference across
    the east (k=0) or north (k=1) face, second order about the face center.
    A constant field maps to the zero vector field exactly."""
    z = f.values
    h = f.grid.h
    out = np.empty((f.grid.n, f.grid.n, 2))
    out[:, :, 0] = (np.roll(z, -1, axis=0) - z) / h
    out[:, :, 1] = (np.roll(z, -1, axis=1) - z) / h
    return VectorField(f.grid, out)


def divergence(v: VectorField) -> ScalarField:
    """Flux-form divergence: difference of face values into each cell.
    The cell sum telescopes to zero over the torus."""
    h = v.grid.h
    v0 = v.values[:, :, 0]
    v1 = v.values[:, :, 1]
    out = (v0 - np.roll(v0, 1, axis=0)) / h + (v1 - np.roll(v1, 1, axis=1)) / h
    return ScalarField(v.grid, out)


def mass(f: ScalarField) -> float:
    """Discrete integral h**2 * sum(values) over the torus."""
    return float(f.grid.h ** 2 * np.sum(f.values))


def norm_l2(f: ScalarField) -> float:
    """Discrete L2 norm sqrt(h**2 * sum(values**2))."""
    return float(np.sqrt(f.grid.h ** 2 * np.sum(f.values ** 2)))


def inner(f: ScalarField, g: ScalarField) -> float:
    """Discrete L2 inner product over cells."""
    return float(f.grid.h ** 2 * np.sum(f.values * g.values))


def vector_inner(v: VectorField, w: VectorField) -> float:
    """Discrete L2 inner product over faces (both components)."""
    return float(v.grid.h ** 2 * np.sum(v.values * w.values))


# ---------------------------------------------------------------------------
# Serialization: one-line header "n=<int>" (vectors add " vec=2"), then the
# payload row-major, either full-precision decimal CSV or raw little-endian
# IEEE-754 doubles.  Format is chosen by file suffix: ".csv" is text,
# anything else is binary.
# ---------------------------------------------------------------------------

def _is_csv(path: Path) -> bool:
    return path.suffix.lower() == ".csv"


def _write_rows(fh, arr: np.ndarray) -> None:
    for row in arr:
        fh.write(",".join(repr(float(x)) for x in row))
        fh.write("\n")


def save_scalar(field: ScalarField, path: str | Path) -> None:
    path = Path(path)
    if _is_csv(path):
        with open(path, "w") as fh:
            fh.write(f"n={field.grid.n}\n")
            _write_rows(fh, field.values)
    else:
        with open(path, "wb") as fh:
            fh.write(f"n={field.grid.n}\n".encode("ascii"))
            fh.write(field.values.astype("<f8").tobytes())


def save_vector(field: VectorField, path: str | Path) -> None:
    path = Path(path)
    comp0 = field.values[:, :, 0]
    comp1 = field.values[:, :, 1]
    if _is_csv(path):
        with open(path, "w") as fh:
            fh.write(f"n={field.grid.n} vec=2\n")
            _write_rows(fh, comp0)
            _write_rows(fh, comp1)
    else:
        with open(path, "wb") as fh:
            fh.write(f"n={field.grid.n} vec=2\n".encode("ascii"))
            fh.write(comp0.astype("<f8").tobytes())
            fh.write(comp1.astype("<f8").tobytes())


def _parse_header(line: str) -> tuple[int, int]:
    parts = line.strip().split()
    if not parts or not parts[0].startswith("n="):
        raise ConfigurationError(f"bad field header: {line!r}")
    n = int(parts[0][2:])
    ncomp = 1
    for extra in parts[1:]:
        if extra.startswith("vec="):
            ncomp = int(extra[4:])
    if ncomp not in (1, 2):
        raise ConfigurationError(f"unsupported component count in header: {line!r}")
    return n, ncomp


def _load_payload(path: Path) -> tuple[int, int, np.ndarray]:
    if _is_csv(path):
        with open(path) as fh:
            n, ncomp = _parse_header(fh.readline())
            flat = np.loadtxt(fh, delimiter=",").reshape(-1)
    else:
        with open(path, "rb") as fh:
            n, ncomp = _parse_header(fh.readline().decode("ascii"))
            flat = np.frombuffer(fh.read(), dtype="<f8").astype(float)
    if flat.size != ncomp * n * n:
        raise ConfigurationError(
            f"{path}: expected {ncomp * n * n} values, found {flat.size}")
    return n, ncomp, flat


def load_scalar(path: str | Path, grid: Grid | None = None) -> ScalarField:
    path = Path(path)
    n, ncomp, flat = _load_payload(path)
    if ncomp != 1:
        raise ConfigurationError(f"{path} holds a vector field, not a scalar")
    g = grid if grid is not None else make_grid(n)
    if g.n != n:
        raise ConfigurationError(f"{path} has n={n}, expected n={g.n}")
    return ScalarField(g, flat.reshape(n, n))


def load_vector(path: str | Path, grid: Grid | None = None) -> VectorField:
    path = Path(path)
    n, ncomp, flat = _load_payload(path)
    if ncomp != 2:
        raise ConfigurationError(f"{path} holds a scalar field, not a vector")
    g = grid if grid is not None else make_grid(n)
    if g.n != n:
        raise ConfigurationError(f"{path} has n={n}, expected n={g.n}")
    values = np.empty((n, n, 2))
    values[:, :, 0] = flat[: n * n].reshape(n, n)
    values[:, :, 1] = flat[n * n:].reshape(n, n)
    return VectorField(g, values)
