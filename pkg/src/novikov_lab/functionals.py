"""Scalar diagnostics: conserved quantities, weighted energies, fronts and edges."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidParameterError, PreconditionError, UndefinedEdgeError
from .field_core import Field, MomentumField, d1, momentum_density, trapz
from .nonlocal_ops import dpsi, psi

RIGHT_EDGE_THRESHOLD = 1e-8


class DiagnosticsRow(NamedTuple):
    t: float
    E: float
    F: float
    M_tot: float
    y23: float
    sup_u: float
    x_peak: float
    lyap: float = float("nan")
    x_gamma: float = float("nan")


def energy_E(u: Field) -> float:
    """``int u^2 + u_x^2``."""
    v = u.values
    vx = d1(v, u.grid.dx)
    return trapz(v**2 + vx**2, u.grid.dx)


def energy_F(u: Field) -> float:
    """``int u^4 + 2 u^2 u_x^2 - u_x^4 / 3``."""
    v = u.values
    vx = d1(v, u.grid.dx)
    return trapz(v**4 + 2 * v**2 * vx**2 - vx**4 / 3.0, u.grid.dx)


def y23_norm(y: Field) -> float:
    """``(int |y|^{2/3})^{3/2}`` by the trapezoid rule."""
    return trapz(np.abs(y.values) ** (2.0 / 3.0), y.grid.dx) ** 1.5


def diagnostics(u: Field, y: MomentumField | None = None, t: float = 0.0,
                lyap: float = float("nan"), x_gamma: float = float("nan")) -> DiagnosticsRow:
    """Conserved quantities and peak data of one snapshot.

    ``y`` defaults to the discrete momentum of ``u``; pass the evolved ``y``
    when it is the primary variable.
    """
    y = momentum_density(u) if y is None else y
    dx = u.grid.dx
    v = u.values
    return DiagnosticsRow(
        t=float(t), E=energy_E(u), F=energy_F(u), M_tot=float(np.sum(y.values) * dx),
        y23=y23_norm(y), sup_u=float(np.max(np.abs(v))),
        x_peak=float(u.grid.x[int(np.argmax(v))]), lyap=float(lyap), x_gamma=float(x_gamma))


def write_diagnostics_csv(path, rows: Sequence[DiagnosticsRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DiagnosticsRow._fields)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def read_diagnostics_csv(path) -> list[DiagnosticsRow]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != DiagnosticsRow._fields:
            raise PreconditionError(f"{path}: unexpected header {header}")
        return [DiagnosticsRow(*map(float, row)) for row in rd]


# --------------------------------------------------------- weighted energies

def weighted_energy(u: Field, shift: float) -> float:
    """``int (u^2 + u_x^2) Psi(x - shift)``."""
    v = u.values
    vx = d1(v, u.grid.dx)
    return trapz((v**2 + vx**2) * psi(u.grid.x - shift), u.grid.dx)


@dataclass(frozen=True)
class WindowSpec:
    """Anchor ``t0``, offset ``R`` and drift ``z_rate`` of the moving weight."""

    t0: float
    R: float
    z_rate: float = 2.0 / 3.0
    side: str = "right"

    def __post_init__(self):
        if not self.R > 0:
            raise InvalidParameterError("R must be positive")
        if not 0 < self.z_rate < 1:
            raise InvalidParameterError("z_rate must lie in (0, 1)")
        if self.side not in ("right", "left"):
            raise InvalidParameterError("side must be 'right' or 'left'")


class MonotonicitySeries(NamedTuple):
    times: np.ndarray
    values: np.ndarray
    shifts: np.ndarray
    excess: float


def _frame_speed_check(times, xs, c_min: float) -> None:
    if len(times) < 2:
        return
    speeds = np.diff(xs) / np.diff(times)
    if not np.min(speeds) >= c_min:
        raise PreconditionError(
            f"frame speed {np.min(speeds):.3g} below the required {c_min:.3g}")


def monotonicity_series(snapshots, frame, w: WindowSpec, c_min: float = 1e-3
                        ) -> MonotonicitySeries:
    """``I(t) = int (u^2 + u_x^2) Psi(x - z(t))`` with ``z = x(t0) +- R + z_rate (x(t) - x(t0))``.

    Parameters
    ----------
    snapshots : sequence of Snapshot
    frame : (times, x) pair or ModulationTrack
        Path of the frame center, sampled at the snapshot times.
    w : WindowSpec
    c_min : float
        Required lower bound on the frame speed.

    Returns
    -------
    MonotonicitySeries
        ``excess`` is ``max(0, I(t0) - I(t))`` over ``t <= t0`` for the right
        window and ``max(0, I(t) - I(t0))`` over ``t >= t0`` for the left one.
    """
    if hasattr(frame, "x_of_t"):
        ftimes, fx = np.asarray(frame.times), np.asarray(frame.x_of_t)
    else:
        ftimes, fx = (np.asarray(a, dtype=float) for a in frame)
    _frame_speed_check(ftimes, fx, c_min)
    times = np.array([s.t for s in snapshots])
    xs = np.interp(times, ftimes, fx)
    x0 = float(np.interp(w.t0, ftimes, fx))
    offset = w.R if w.side == "right" else -w.R
    shifts = x0 + offset + w.z_rate * (xs - x0)
    values = np.array([weighted_energy(s.u, z) for s, z in zip(snapshots, shifts)])
    i0 = int(np.argmin(np.abs(times - w.t0)))
    if w.side == "right":
        viol = values[i0] - values[: i0 + 1]
    else:
        viol = values[i0:] - values[i0]
    return MonotonicitySeries(times, values, shifts, float(max(0.0, viol.max(initial=0.0))))


def excess_slope(R_values, excesses, floor: float = 1e-16) -> float:
    """Least-squares slope of ``log(excess + floor)`` against ``R``."""
    R = np.asarray(R_values, dtype=float)
    e = np.log(np.asarray(excesses, dtype=float) + floor)
    return float(np.polyfit(R, e, 1)[0])


# ------------------------------------------------------------------ fronts

def right_edge(y: Field, rel_threshold: float = RIGHT_EDGE_THRESHOLD) -> float:
    """Largest node whose inclusive right tail mass exceeds ``rel_threshold * M_tot``."""
    v = y.values
    dx = y.grid.dx
    m_tot = float(np.sum(v) * dx)
    if not m_tot > 0:
        raise UndefinedEdgeError(f"total momentum {m_tot:.3g} is not positive")
    tail = np.cumsum(v[::-1])[::-1] * dx
    idx = np.nonzero(tail > rel_threshold * m_tot)[0]
    return float(y.grid.x[idx[-1]])


class LyapunovSeries(NamedTuple):
    times: np.ndarray
    values: np.ndarray
    edge_residual: float


def lyapunov_series(snapshots, edges, skip_cells: int = 2) -> LyapunovSeries:
    """``u(t, x_edge(t))`` and the edge identity residual ``max |u + D1 u|``.

    Snapshots from the particle engine are evaluated exactly at the edge;
    grid snapshots are interpolated linearly.

    The residual is taken over nodes at least ``skip_cells`` cells right of
    the edge, where the central difference no longer straddles the kink.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim == 2:
        edges = edges[:, 1]
    times = np.array([s.t for s in snapshots])
    vals = np.empty(times.size)
    worst = 0.0
    for k, (s, xe) in enumerate(zip(snapshots, edges)):
        x = s.grid.x
        v = s.u.values
        parts = getattr(s, "particles", None)
        if parts is not None:
            vals[k] = float(np.exp(-np.abs(xe - parts.q)) @ parts.p)
        else:
            vals[k] = np.interp(xe, x, v)
        right = x >= xe + skip_cells * s.grid.dx
        if np.any(right):
            worst = max(worst, float(np.max(np.abs(v + d1(v, s.grid.dx))[right])))
    return LyapunovSeries(times, vals, worst)


def x_gamma_solve(u: Field, gamma: float) -> float:
    """Shift ``s`` with ``weighted_energy(u, s) = gamma`` (unique; the map decreases)."""
    e = energy_E(u)
    if not 0 < gamma < e:
        raise InvalidParameterError(f"gamma={gamma:.6g} outside (0, E={e:.6g})")
    v = u.values
    dens = v**2 + d1(v, u.grid.dx) ** 2
    x = u.grid.x
    dx = u.grid.dx

    def g(s):
        return trapz(dens * psi(x - s), dx) - gamma

    lo, hi = u.grid.x_left - 60.0, u.grid.x_right + 60.0
    while g(lo) < 0:
        lo -= 60.0
    while g(hi) > 0:
        hi += 60.0
    root = brentq(g, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(root)


class TransportCheck(NamedTuple):
    times: np.ndarray
    x_gamma: np.ndarray
    worst_decrease: float
    worst_rate_margin: float
    monotone_ok: bool
    rate_ok: bool


def transport_rate_check(snapshots, gamma: float, delta: float = 0.5,
                         tol_rel: float = 1e-3, mono_tol_rel: float = 1e-6) -> TransportCheck:
    """Front monotonicity and the lower rate bound over windows of length ``delta``.

    The bound is ``x_g(t + delta) - x_g(t) >= 2/5 int_t^{t+delta} int u^2 Psi'(. - x_g(s)) ds
    - tol_rel * delta * E``; the inner integral follows the front at each stored time.
    """
    times = np.array([s.t for s in snapshots])
    e0 = energy_E(snapshots[0].u)
    xg = np.array([x_gamma_solve(s.u, gamma) for s in snapshots])
    flux = np.array([trapz(s.u.values**2 * dpsi(s.grid.x - z), s.grid.dx)
                     for s, z in zip(snapshots, xg)])
    dec = np.max(np.maximum(xg[:-1] - xg[1:], 0.0), initial=0.0)
    margins = []
    for i, t in enumerate(times):
        j = np.searchsorted(times, t + delta - 1e-9 * max(1.0, delta))
        if j >= times.size or abs(times[j] - (t + delta)) > 1e-6 * max(1.0, delta):
            continue
        integral = float(np.trapezoid(flux[i:j + 1], times[i:j + 1]))
        margins.append((xg[j] - xg[i]) - 0.4 * integral + tol_rel * delta * e0)
    worst = float(min(margins)) if margins else float("nan")
    return TransportCheck(times, xg, float(dec), worst,
                          bool(dec <= mono_tol_rel * e0), bool(margins) and worst >= 0.0)


__all__ = [
    "DiagnosticsRow", "energy_E", "energy_F", "y23_norm", "diagnostics",
    "write_diagnostics_csv", "read_diagnostics_csv", "weighted_energy", "WindowSpec",
    "MonotonicitySeries", "monotonicity_series", "excess_slope", "right_edge",
    "LyapunovSeries", "lyapunov_series", "x_gamma_solve", "TransportCheck",
    "transport_rate_check", "RIGHT_EDGE_THRESHOLD",
]
