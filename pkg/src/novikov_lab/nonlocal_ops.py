"""Helmholtz inverse, the exponential convolutions p, p_x, p_+, p_- and the weight Psi.

``p = exp(-|x|)/2`` is the Green's function of ``1 - d^2/dx^2``.  On the grid
``p*f`` is the exact inverse of the three-point operator ``I - D2``; the
one-sided pieces ``p_+`` and ``p_-`` use the discrete Green's function of the
same operator on the infinite lattice, ``G_k = A r^|k|``, which makes
``p_+ f + p_- f`` agree with the banded solve up to boundary images.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.linalg import solveh_banded
from scipy.signal import lfilter

from .errors import InternalCheckError, InvalidParameterError
from .field_core import Field, Grid, PeakonParams, d1, d2, peakon_momentum

KERNELS = ("p", "p_x", "p_plus", "p_minus")


class WeightEval(NamedTuple):
    """Psi, Psi' and Psi''' sampled at ``x_i - shift``."""

    psi: np.ndarray
    dpsi: np.ndarray
    d3psi: np.ndarray


@lru_cache(maxsize=32)
def _helmholtz_bands(n: int, dx: float) -> np.ndarray:
    inv = 1.0 / dx**2
    ab = np.empty((2, n))
    ab[0, :] = -inv
    ab[1, :] = 1.0 + 2.0 * inv
    ab[1, 0] = ab[1, -1] = 1.0 + inv
    ab.setflags(write=False)
    return ab


def helmholtz_solve(values: np.ndarray, dx: float) -> np.ndarray:
    """Solve ``(I - D2) v = values`` (copied-ghost ends) on raw arrays."""
    f = np.asarray(values, dtype=float)
    ab = _helmholtz_bands(f.size, float(dx))
    v = solveh_banded(ab, f, lower=False, check_finite=False)
    resid = np.max(np.abs(v - d2(v, dx) - f), initial=0.0)
    # rounding in forming (I - D2)v scales like eps * |A| |v|
    scale = np.max(np.abs(f), initial=0.0) + 4.0 / dx**2 * np.max(np.abs(v), initial=0.0)
    if not resid <= 1e-12 * scale:
        raise InternalCheckError(f"Helmholtz residual {resid:.3e} exceeds 1e-12 * {scale:.3e}")
    return v


def helmholtz_inverse(f: Field) -> Field:
    """Return ``v`` with ``(I - D2) v = f`` as a plain :class:`Field`."""
    return Field(f.grid, helmholtz_solve(f.values, f.grid.dx))


def green_ratio(dx: float) -> tuple[float, float]:
    """``(r, A)`` of the lattice Green's function ``G_k = A r^|k|``.

    ``r`` is the root in (0, 1) of ``r + 1/r = 2 + dx^2`` and ``A`` the value
    at the source for a unit-mass spike of height ``1/dx``.
    """
    h = dx * dx
    r = 1.0 / (1.0 + 0.5 * h + np.sqrt(h + 0.25 * h * h))
    amp = dx / (h + 2.0 * (1.0 - r))
    return float(r), float(amp)


def _one_sided(values: np.ndarray, dx: float) -> np.ndarray:
    # S_i = r (S_{i-1} + f_{i-1}), result dx*A*(S_i + f_i/2)
    r, amp = green_ratio(dx)
    s = lfilter([0.0, r], [1.0, -r], values)
    return dx * amp * (s + 0.5 * values)


def conv_kernel(f: Field, kernel: str) -> Field:
    """Apply one of the exponential convolutions to ``f``.

    Parameters
    ----------
    f : Field
    kernel : {"p", "p_x", "p_plus", "p_minus"}
        ``p`` is the banded Helmholtz solve, ``p_x`` its central derivative and
        ``p_plus``/``p_minus`` the left/right one-sided exponential integrals.
    """
    dx = f.grid.dx
    v = f.values
    if kernel == "p":
        out = helmholtz_solve(v, dx)
    elif kernel == "p_x":
        out = d1(helmholtz_solve(v, dx), dx)
    elif kernel == "p_plus":
        out = _one_sided(v, dx)
    elif kernel == "p_minus":
        out = _one_sided(v[::-1], dx)[::-1]
    else:
        raise InvalidParameterError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    return Field(f.grid, out)


def kernel_quadrature(f: Field, kernel: str = "p") -> Field:
    """Direct trapezoid sum against the continuum kernel (cross-check oracle)."""
    x = f.grid.x
    dx = f.grid.dx
    w = np.full(x.size, dx)
    w[[0, -1]] *= 0.5
    out = np.empty(x.size)
    for lo in range(0, x.size, 512):
        s = x[lo:lo + 512, None] - x[None, :]
        e = 0.5 * np.exp(-np.abs(s))
        if kernel == "p":
            k = e
        elif kernel == "p_x":
            k = -np.sign(s) * e
        elif kernel == "p_plus":
            k = np.where(s > 0, e, np.where(s == 0, 0.5 * e, 0.0))
        elif kernel == "p_minus":
            k = np.where(s < 0, e, np.where(s == 0, 0.5 * e, 0.0))
        else:
            raise InvalidParameterError(f"unknown kernel {kernel!r}")
        out[lo:lo + 512] = k @ (w * f.values)
    return Field(f.grid, out)


def discrete_peakon(params: PeakonParams, grid: Grid, t: float = 0.0) -> Field:
    """Peakon whose discrete momentum is exactly one nonnegative spike."""
    return helmholtz_inverse(peakon_momentum(params, t, grid))


# ---------------------------------------------------------------- weight Psi

def psi(s) -> np.ndarray:
    """``(2/pi) arctan(exp(s/6))``."""
    s = np.asarray(s, dtype=float)
    with np.errstate(over="ignore"):
        return 2.0 / np.pi * np.arctan(np.exp(s / 6.0))


def dpsi(s) -> np.ndarray:
    """``sech(s/6) / (6 pi)``."""
    s = np.asarray(s, dtype=float)
    with np.errstate(over="ignore"):
        return 1.0 / (6.0 * np.pi * np.cosh(s / 6.0))


def d3psi(s) -> np.ndarray:
    """``sech(s/6) (2 tanh^2(s/6) - 1) / (216 pi)``."""
    s = np.asarray(s, dtype=float)
    th = np.tanh(s / 6.0)
    with np.errstate(over="ignore"):
        return (2.0 * th * th - 1.0) / (216.0 * np.pi * np.cosh(s / 6.0))


def psi_eval(grid: Grid, shift: float) -> WeightEval:
    s = grid.x - shift
    return WeightEval(psi(s), dpsi(s), d3psi(s))


def psi_ratio_bound(lo: float = -100.0, hi: float = 100.0, samples: int = 200001) -> float:
    """Max of ``|Psi'''| / Psi'`` on ``[lo, hi]``; analytically ``|2 tanh^2 - 1| / 36``."""
    s = np.linspace(lo, hi, samples)
    th = np.tanh(s / 6.0)
    return float(np.max(np.abs(2.0 * th * th - 1.0)) / 36.0)


__all__ = [
    "KERNELS", "WeightEval", "helmholtz_solve", "helmholtz_inverse", "green_ratio",
    "conv_kernel", "kernel_quadrature", "discrete_peakon", "psi", "dpsi", "d3psi",
    "psi_eval", "psi_ratio_bound",
]
