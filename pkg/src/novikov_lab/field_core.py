"""Uniform grids, sampled fields and the basic discrete operators.

Every field lives on a :class:`Grid` with nodes ``x_i = x_left + i*dx``.
Boundary nodes use a copied ghost value, so the discrete second derivative
vanishes for a field that is flat at the ends.  All experiments use data
that decays exponentially, which makes that closure harmless.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .errors import (InvalidParameterError, PreconditionError, ResolutionError,
                     UnsupportedInputError)

#: relative floor below which a negative momentum sample still counts as Y+
TOL_SIGN_REL = 1e-10

_HEADER = struct.Struct("<ddq")


@dataclass(frozen=True)
class Grid:
    """Uniform 1-D grid.

    Parameters
    ----------
    x_left : float
        Left endpoint.
    dx : float
        Spacing, strictly positive.
    n : int
        Number of nodes, at least 3.
    """

    x_left: float
    dx: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.x_left) and np.isfinite(self.dx)):
            raise InvalidParameterError("grid endpoints must be finite")
        if self.dx <= 0:
            raise InvalidParameterError(f"dx must be positive, got {self.dx}")
        if int(self.n) != self.n or self.n < 3:
            raise InvalidParameterError(f"n must be an integer >= 3, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "x_left", float(self.x_left))
        object.__setattr__(self, "dx", float(self.dx))

    @classmethod
    def symmetric(cls, half_width: float, dx: float) -> "Grid":
        """Grid on ``[-half_width, half_width]`` with a node at 0."""
        m = int(round(half_width / dx))
        return cls(-m * dx, dx, 2 * m + 1)

    @property
    def x(self) -> np.ndarray:
        return _nodes(self.x_left, self.dx, self.n)

    @property
    def x_right(self) -> float:
        return self.x_left + (self.n - 1) * self.dx

    @property
    def half_width(self) -> float:
        return 0.5 * (self.n - 1) * self.dx

    def index_of(self, x: float) -> int:
        """Index of the node nearest to ``x`` (clipped to the grid)."""
        i = int(np.floor((x - self.x_left) / self.dx + 0.5))
        return min(max(i, 0), self.n - 1)

    def require_half_width(self, floor: float = 20.0) -> None:
        if self.half_width < floor:
            raise PreconditionError(
                f"domain half-width {self.half_width:.3g} below the floor {floor:.3g}")


@lru_cache(maxsize=64)
def _nodes(x_left: float, dx: float, n: int) -> np.ndarray:
    x = x_left + dx * np.arange(n)
    x.setflags(write=False)
    return x


def _frozen(values, n: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (n,):
        raise PreconditionError(f"{what} has shape {arr.shape}, grid expects ({n},)")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(f"{what} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function on a grid (read-only)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.n, "field"))

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def with_values(self, values) -> "Field":
        return type(self)(self.grid, values)

    def to_csv(self, path) -> None:
        write_field_csv(path, self)

    def to_bytes(self) -> bytes:
        return field_to_bytes(self)


@dataclass(frozen=True, eq=False)
class MomentumField(Field):
    """Samples of the momentum density ``y = u - u_xx``.

    When ``y_plus`` is set the constructor checks the sign condition.
    """

    y_plus: bool = field(default=False)

    def __post_init__(self):
        super().__post_init__()
        if self.y_plus and self.values.min(initial=0.0) < -tol_sign(self.values):
            raise PreconditionError("momentum flagged y_plus has negative samples")

    def with_values(self, values) -> "MomentumField":
        return MomentumField(self.grid, values, self.y_plus)


@dataclass(frozen=True)
class PeakonParams:
    """Speed ``c``, initial crest ``x0`` and ``sign`` (+1 peakon, -1 antipeakon)."""

    c: float
    x0: float = 0.0
    sign: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise InvalidParameterError(f"peakon speed must be positive, got {self.c}")
        if self.sign not in (1, -1):
            raise InvalidParameterError("sign must be +1 or -1")

    @property
    def amplitude(self) -> float:
        return self.sign * np.sqrt(self.c)

    def crest(self, t: float) -> float:
        return self.x0 + self.c * t


class Norms(NamedTuple):
    l2: float
    h1: float
    sup: float


def tol_sign(values) -> float:
    """Absolute sign tolerance ``1e-10 * max|values|``."""
    v = np.asarray(values)
    return TOL_SIGN_REL * (float(np.max(np.abs(v))) if v.size else 0.0)


def trapz(values, dx: float) -> float:
    """Trapezoidal quadrature on a uniform grid."""
    return float(integrate.trapezoid(values, dx=dx))


def d1(values, dx: float) -> np.ndarray:
    """Central first difference; one-sided at the two ends."""
    return np.gradient(np.asarray(values, dtype=float), dx, edge_order=1)


def d2(values, dx: float) -> np.ndarray:
    """Three-point second difference with copied ghost values at the ends."""
    v = np.asarray(values, dtype=float)
    padded = np.concatenate(([v[0]], v, [v[-1]]))
    return (padded[2:] - 2.0 * v + padded[:-2]) / dx**2


def peakon_field(params: PeakonParams, t: float, grid: Grid) -> Field:
    """Sample ``sign*sqrt(c)*exp(-|x - c t - x0|)``."""
    return Field(grid, params.amplitude * np.exp(-np.abs(grid.x - params.crest(t))))


def peakon_momentum(params: PeakonParams, t: float, grid: Grid) -> MomentumField:
    """Grid proxy of ``2 sqrt(c) delta``: a single spike at the nearest node."""
    y = np.zeros(grid.n)
    y[grid.index_of(params.crest(t))] = 2.0 * params.amplitude / grid.dx
    return MomentumField(grid, y, y_plus=params.sign > 0)


def multipeakon_field(state, grid: Grid) -> Field:
    """Sample ``sum_i p_i exp(-|x - q_i|)`` for any object with ``q`` and ``p``."""
    q = np.asarray(state.q, dtype=float)
    p = np.asarray(state.p, dtype=float)
    if q.shape != p.shape:
        raise PreconditionError("q and p lengths differ")
    if q.size > 1 and np.any(np.diff(q) <= 0):
        raise PreconditionError("positions must be strictly increasing")
    x = grid.x
    u = np.zeros(grid.n)
    for qi, pi in zip(q, p):
        u += pi * np.exp(-np.abs(x - qi))
    return Field(grid, u)


def compact_bump(grid: Grid, center: float, width: float, amplitude: float) -> np.ndarray:
    """``amplitude * e * rho((x - center) / width)``.

    Peak value ``amplitude``; support ``width`` on each side of ``center``.
    """
    if not width > 0:
        raise InvalidParameterError("width must be positive")
    return amplitude * np.e * _rho((grid.x - center) / width)


def momentum_density(u: Field) -> MomentumField:
    """``y = u - D2 u`` with the same stencil as the Helmholtz solve."""
    y = u.values - d2(u.values, u.grid.dx)
    return MomentumField(u.grid, y)


def norms(u: Field) -> Norms:
    """Discrete L2 norm, H1 norm (central D1) and sup norm."""
    v = u.values
    dx = u.grid.dx
    vx = d1(v, dx)
    l2 = np.sqrt(trapz(v**2, dx))
    h1 = np.sqrt(trapz(v**2 + vx**2, dx))
    return Norms(float(l2), float(h1), float(np.max(np.abs(v))))


def is_y_plus(y: Field) -> bool:
    """True iff ``min(y) >= -tol_sign(y)``."""
    v = y.values
    return bool(v.min() >= -tol_sign(v))


# ---------------------------------------------------------------- mollifier

def _rho(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(1.0 / (x[inside] ** 2 - 1.0))
    return out


@lru_cache(maxsize=1)
def mollifier_constant() -> float:
    """``int_{-1}^{1} exp(1/(x^2-1)) dx`` by adaptive quadrature."""
    val, _ = integrate.quad(lambda s: float(_rho(np.array([s]))[0]), -1.0, 1.0,
                            epsabs=1e-14, epsrel=1e-13)
    return val


def rho_n(x, n: float) -> np.ndarray:
    """Continuous mollifier ``n rho(n x) / int rho``, supported on ``(-1/n, 1/n)``."""
    return n * _rho(n * np.asarray(x, dtype=float)) / mollifier_constant()


def mollifier_weights(dx: float, n_smooth: int) -> np.ndarray:
    """Discrete stencil of ``rho_n`` normalized to unit discrete mass."""
    if n_smooth < 1:
        raise InvalidParameterError("n_smooth must be >= 1")
    half = 1.0 / n_smooth
    if half <= dx:
        raise ResolutionError(
            f"mollifier support 1/{n_smooth} does not exceed dx={dx}")
    m = int(np.ceil(half / dx))
    k = np.arange(-m, m + 1) * dx
    w = rho_n(k, n_smooth) * dx
    return w / w.sum()


def mollify(u: Field, n_smooth: int) -> Field:
    """Convolve with ``rho_n``; ends are padded by their edge values."""
    w = mollifier_weights(u.grid.dx, n_smooth)
    m = (w.size - 1) // 2
    padded = np.pad(u.values, m, mode="edge")
    out = np.convolve(padded, w, mode="valid")
    return u.with_values(out)


# ------------------------------------------------------------ serialization

def write_field_csv(path, f: Field) -> None:
    """Two columns ``x,value`` with a header line."""
    data = np.column_stack([f.grid.x, f.values])
    np.savetxt(path, data, delimiter=",", header="x,value", comments="", fmt="%.17g")


def read_field_csv(path) -> Field:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2 or data.shape[0] < 3:
        raise UnsupportedInputError(f"{path}: expected two columns and >= 3 rows")
    x = data[:, 0]
    dx = float(np.mean(np.diff(x)))
    if dx <= 0 or np.max(np.abs(np.diff(x) - dx)) > 1e-9 * max(1.0, abs(dx)):
        raise UnsupportedInputError(f"{path}: nodes are not uniformly spaced")
    return Field(Grid(float(x[0]), dx, x.size), data[:, 1])


def field_to_bytes(f: Field) -> bytes:
    """Header (x_left, dx as f64; n as i64; little endian) followed by f64 values."""
    g = f.grid
    return _HEADER.pack(g.x_left, g.dx, g.n) + f.values.astype("<f8").tobytes()


def field_from_bytes(buf: bytes) -> Field:
    if len(buf) < _HEADER.size:
        raise UnsupportedInputError("buffer shorter than the field header")
    x_left, dx, n = _HEADER.unpack_from(buf)
    body = buf[_HEADER.size:]
    if len(body) != 8 * n:
        raise UnsupportedInputError(f"expected {n} values, buffer holds {len(body) / 8:g}")
    return Field(Grid(x_left, dx, n), np.frombuffer(body, dtype="<f8"))


def write_field_binary(path, f: Field) -> None:
    Path(path).write_bytes(field_to_bytes(f))


def read_field_binary(path) -> Field:
    return field_from_bytes(Path(path).read_bytes())


def read_field(path) -> Field:
    """Load a field from ``.csv`` text or the binary form (any other suffix)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_field_csv(path)
    return read_field_binary(path)


__all__ = [
    "Grid", "Field", "MomentumField", "PeakonParams", "Norms", "tol_sign", "trapz",
    "d1", "d2", "peakon_field", "peakon_momentum", "multipeakon_field",
    "compact_bump", "momentum_density", "norms", "is_y_plus", "mollifier_constant", "rho_n",
    "mollifier_weights", "mollify", "write_field_csv", "read_field_csv",
    "field_to_bytes", "field_from_bytes", "write_field_binary", "read_field_binary",
    "read_field",
]
