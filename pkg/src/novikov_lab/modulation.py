"""Modulation of a solution near a peakon.

The center ``x(t)`` is the increasing root of
``h(x) = int u(z) k(z - x) dz`` with ``k = rho_n * phi'``, the mollified
derivative of ``phi = exp(-|x|)``.  Outside ``|s| < 1/n`` the kernel is the
closed form ``-sgn(s) exp(-|s|) M_n`` with ``M_n = int rho_n(t) e^t dt``;
inside, Gauss-Legendre quadrature split at the kink of ``phi'`` is used.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import CalibrationError, InvalidParameterError, ModulationLossError
from .field_core import Field, Grid, d1, rho_n, trapz

N0_CANDIDATES = (4, 8, 16, 32)
MIN_SLOPE = 0.25 * np.exp(-0.5)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _gl(a: np.ndarray, b: np.ndarray, f) -> np.ndarray:
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    t = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    return half * (f(t) @ _GL_WEIGHTS)


@lru_cache(maxsize=64)
def exp_moment(n: int) -> float:
    """``M_n = int rho_n(t) e^t dt`` (Gauss-Legendre on each half of the support)."""
    a = 1.0 / n
    f = lambda t: rho_n(t, n) * np.cosh(t)  # noqa: E731
    return float(_gl(np.array([-a, 0.0]), np.array([0.0, a]), f).sum())


def mollified_dphi(s, n: int) -> np.ndarray:
    """``(rho_n * phi')(s)`` for ``phi = exp(-|x|)``."""
    s = np.asarray(s, dtype=float)
    flat = s.ravel()
    out = -np.sign(flat) * np.exp(-np.abs(flat)) * exp_moment(n)
    a = 1.0 / n
    inner = np.abs(flat) < a
    if np.any(inner):
        si = flat[inner]
        lo = np.full_like(si, -a)
        hi = np.full_like(si, a)
        left = _gl(lo, si, lambda t: rho_n(t, n) * np.exp(-(si[:, None] - t)))
        right = _gl(si, hi, lambda t: rho_n(t, n) * np.exp(si[:, None] - t))
        out[inner] = right - left
    return out.reshape(s.shape)


def _g0(w):
    return w * np.exp(-np.abs(w))


def _g0_prime(w):
    return (1.0 - np.abs(w)) * np.exp(-np.abs(w))


def calibration_function(y, n: int, derivative: bool = False) -> np.ndarray:
    """``g(y) = int phi(z) k(z - y) dz``, equal to ``rho_n * (w e^{-|w|})`` at ``y``.

    With ``derivative=True`` returns ``g'(y)``.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    base = _g0_prime if derivative else _g0
    a = 1.0 / n
    lo = np.full_like(y, -a)
    hi = np.full_like(y, a)
    # split at tau = y where w = y - tau crosses the kink
    mid = np.clip(y, -a, a)
    f = lambda yy: (lambda t: rho_n(t, n) * base(yy[:, None] - t))  # noqa: E731
    return _gl(lo, mid, f(y)) + _gl(mid, hi, f(y))


@dataclass(frozen=True, eq=False)
class ModulationSetup:
    """Mollifier index, sampled kernel and root-search half-width."""

    n0: int
    kernel: Field
    sigma: float = 1.0

    def kernel_at(self, s) -> np.ndarray:
        return mollified_dphi(s, self.n0)

    @property
    def kernel_l2(self) -> float:
        return float(np.sqrt(trapz(self.kernel.values**2, self.kernel.grid.dx)))


def calibrate_n0(grid: Grid, candidates=N0_CANDIDATES, sigma: float = 1.0,
                 min_slope: float = MIN_SLOPE) -> ModulationSetup:
    """Smallest candidate ``n`` whose ``g`` vanishes only at 0 and increases steeply.

    ``g`` is sampled at spacing ``grid.dx`` on ``[-1/2, 1/2]``; the candidate
    qualifies when ``g`` has the sign of ``y`` there, ``|g(0)| <= 1e-10`` and
    ``g' >= min_slope`` on the sampled points.
    """
    cands = sorted({int(c) for c in candidates})
    if not cands:
        raise InvalidParameterError("candidates must be nonempty")
    if not sigma > 0:
        raise InvalidParameterError("sigma must be positive")
    m = int(np.floor(0.5 / grid.dx + 1e-9))
    ys = grid.dx * np.arange(-m, m + 1)
    for n in cands:
        if n < 1 or 1.0 / n <= grid.dx:
            continue
        g = calibration_function(ys, n)
        gp = calibration_function(ys, n, derivative=True)
        nz = ys != 0
        if abs(g[~nz][0]) > 1e-10:
            continue
        if not np.all(np.sign(g[nz]) == np.sign(ys[nz])):
            continue
        if np.min(gp) < min_slope:
            continue
        kern = Field(grid, mollified_dphi(grid.x, n))
        return ModulationSetup(n, kern, float(sigma))
    raise CalibrationError(f"no candidate in {cands} satisfies the calibration conditions")


def orthogonality(u: Field, setup: ModulationSetup, x: float) -> float:
    """``h(x) = int u(z) k(z - x) dz`` by the trapezoid rule."""
    return trapz(u.values * mollified_dphi(u.grid.x - x, setup.n0), u.grid.dx)


def _scale(u: Field, setup: ModulationSetup) -> float:
    return float(np.sqrt(trapz(u.values**2, u.grid.dx))) * setup.kernel_l2


def solve_center(u: Field, setup: ModulationSetup, guess: float) -> float:
    """Unique increasing root of :func:`orthogonality` in ``[guess - sigma, guess + sigma]``.

    Raises
    ------
    ModulationLossError
        No root, more than one sign change, or only a decreasing crossing.
    """
    step = min(u.grid.dx, 0.25 / setup.n0)
    k = int(np.ceil(setup.sigma / step))
    xs = guess + step * np.arange(-k, k + 1)
    hs = np.array([orthogonality(u, setup, x) for x in xs])
    scale = _scale(u, setup)
    if scale == 0:
        raise ModulationLossError("field vanishes; no center")
    sgn = np.sign(hs)
    exact = np.nonzero(sgn == 0)[0]
    nz = np.nonzero(sgn != 0)[0]
    flips = [i for i, j in zip(nz[:-1], nz[1:]) if sgn[i] != sgn[j]]
    if len(flips) != 1:
        raise ModulationLossError(
            f"{len(flips)} sign changes of h in the window around {guess:.6g}")
    i = flips[0]
    j = nz[np.searchsorted(nz, i) + 1]
    if not (sgn[i] < 0 < sgn[j]):
        raise ModulationLossError("h crosses zero decreasingly; not a peakon center")
    if exact.size and np.any((exact > i) & (exact < j)):
        return float(xs[exact[(exact > i) & (exact < j)][0]])
    root = brentq(lambda x: orthogonality(u, setup, x), xs[i], xs[j],
                  xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    return float(root)


class ModulationTrack(NamedTuple):
    times: np.ndarray
    x_of_t: np.ndarray
    xdot: np.ndarray
    c_of_t: np.ndarray
    resid_h1: np.ndarray
    resid_right: np.ndarray
    resid_thm: np.ndarray
    orth_resid: np.ndarray

    @property
    def c_star(self) -> float:
        """Speed estimate ``(sup u)^2`` at the final time."""
        return float(self.c_of_t[-1])

    def final_quarter_deviation(self) -> tuple[float, float]:
        """``(max |xdot - mean|, mean)`` over the last quarter of the run."""
        t = self.times
        sel = t >= t[0] + 0.75 * (t[-1] - t[0])
        seg = self.xdot[sel]
        mean = float(np.mean(seg))
        return float(np.max(np.abs(seg - mean))), mean


def _h1_on(v: np.ndarray, dx: float, mask: np.ndarray) -> float:
    vx = d1(v, dx)
    return float(np.sqrt(trapz(np.where(mask, v**2 + vx**2, 0.0), dx)))


def _sup(snap) -> float:
    # the crest of a peakon sum sits on a particle; grid samples miss it by O(dx)
    parts = getattr(snap, "particles", None)
    if parts is not None:
        return float(np.max(np.exp(-np.abs(parts.q[:, None] - parts.q[None, :])) @ parts.p))
    return float(np.max(snap.u.values))


def track(snapshots: Sequence, setup: ModulationSetup, guess0: float | None = None,
          A: float = 10.0, z: float | None = None, beta: float = 0.5) -> ModulationTrack:
    """Follow the modulation center through a run.

    Parameters
    ----------
    snapshots : sequence of Snapshot
    setup : ModulationSetup
    guess0 : float, optional
        Initial guess; defaults to the crest of the first snapshot.
    A : float
        ``resid_right`` is the H1 norm of the remainder on ``(x(t) - A, inf)``.
    z, beta : float
        ``resid_thm`` uses ``(-inf, z) U (beta t, inf)``; ``z`` defaults to
        ``x(0) - A``.
    """
    n = len(snapshots)
    times = np.array([s.t for s in snapshots])
    xs = np.empty(n)
    cs = np.empty(n)
    r_h1 = np.empty(n)
    r_right = np.empty(n)
    r_thm = np.empty(n)
    orth = np.empty(n)
    guess = guess0
    for k, snap in enumerate(snapshots):
        u = snap.u
        if guess is None:
            guess = float(u.grid.x[int(np.argmax(u.values))])
        try:
            xk = solve_center(u, setup, guess)
        except ModulationLossError as exc:
            exc.t = snap.t
            exc.partial = (times[:k], xs[:k])
            raise
        xs[k] = xk
        guess = xk
        sup = _sup(snap)
        cs[k] = sup * sup
        x = u.grid.x
        v = u.values - sup * np.exp(-np.abs(x - xk))
        dx = u.grid.dx
        everywhere = np.ones(x.size, dtype=bool)
        r_h1[k] = _h1_on(v, dx, everywhere)
        r_right[k] = _h1_on(v, dx, x > xk - A)
        zz = xs[0] - A if z is None else z
        r_thm[k] = _h1_on(v, dx, (x < zz) | (x > beta * snap.t))
        sc = _scale(u, setup)
        orth[k] = abs(orthogonality(u, setup, xk)) / sc
    xdot = np.gradient(xs, times) if n > 1 else np.zeros(n)
    return ModulationTrack(times, xs, xdot, cs, r_h1, r_right, r_thm, orth)


TRACK_COLUMNS = ("t", "x", "xdot", "c_est", "resid_h1", "resid_right", "orth_resid")


def write_track_csv(path, tr: ModulationTrack) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACK_COLUMNS)
        for row in zip(tr.times, tr.x_of_t, tr.xdot, tr.c_of_t, tr.resid_h1,
                       tr.resid_right, tr.orth_resid):
            w.writerow([repr(float(v)) for v in row])


__all__ = [
    "N0_CANDIDATES", "MIN_SLOPE", "exp_moment", "mollified_dphi", "calibration_function",
    "ModulationSetup", "calibrate_n0", "orthogonality", "solve_center", "ModulationTrack",
    "track", "TRACK_COLUMNS", "write_track_csv",
]
