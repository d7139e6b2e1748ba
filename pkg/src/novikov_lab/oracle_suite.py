"""Standalone verifiers for pointwise inequalities, representations and decay.

The convolution gap ``p*(3 v v_x^2 + 5 v^3) - 2 v^3`` has the exact
rewriting ``3 [p_+*(v (v_x - v)^2) + p_-*(v (v_x + v)^2)]``, which is
manifestly nonnegative for ``v >= 0`` and vanishes at the crest of a peakon.
Both forms are computed here; the second one is the independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import linregress

from .errors import FitError, InvalidParameterError, PreconditionError
from .field_core import Field, Grid, MomentumField, d1, is_y_plus, momentum_density
from .nonlocal_ops import conv_kernel, helmholtz_solve

DECAY_R2_MIN = 0.98


class GapResult(NamedTuple):
    """Minimum of the convolution gap (absolute and relative to ``2 v^3``)."""

    min_gap: float
    argmin: float
    min_rel_gap: float
    argmin_rel: float


def convolution_gap(v: Field) -> np.ndarray:
    """``p*(3 v v_x^2 + 5 v^3) - 2 v^3`` with ``p*`` the banded Helmholtz solve."""
    w = v.values
    wx = d1(w, v.grid.dx)
    return helmholtz_solve(3 * w * wx**2 + 5 * w**3, v.grid.dx) - 2 * w**3


def convolution_gap_split(v: Field) -> np.ndarray:
    """``3 [p_+*(v (v_x - v)^2) + p_-*(v (v_x + v)^2)]`` (oracle form)."""
    w = v.values
    wx = d1(w, v.grid.dx)
    left = conv_kernel(v.with_values(w * (wx - w) ** 2), "p_plus").values
    right = conv_kernel(v.with_values(w * (wx + w) ** 2), "p_minus").values
    return 3.0 * (left + right)


def check_three_five_two(v: Field, y: MomentumField | None = None,
                         rel_floor: float = 1e-3) -> GapResult:
    """Minimum of the convolution gap over the grid.

    Parameters
    ----------
    v : Field
        Must have nonnegative discrete momentum.
    y : MomentumField, optional
        Momentum of ``v``; recomputed when omitted.
    rel_floor : float
        The relative gap ``gap / (2 v^3)`` is minimized over nodes with
        ``v >= rel_floor * max v``.
    """
    y = momentum_density(v) if y is None else y
    if not is_y_plus(y):
        raise PreconditionError("check_three_five_two needs nonnegative momentum")
    gap = convolution_gap(v)
    x = v.grid.x
    i = int(np.argmin(gap))
    w = v.values
    vmax = float(np.max(w))
    if vmax <= 0:
        return GapResult(float(gap[i]), float(x[i]), 0.0, float(x[i]))
    mask = w >= rel_floor * vmax
    rel = np.full(w.size, np.inf)
    rel[mask] = gap[mask] / (2.0 * w[mask] ** 3)
    j = int(np.argmin(rel))
    return GapResult(float(gap[i]), float(x[i]), float(rel[j]), float(x[j]))


def check_representation(v: Field, y: MomentumField | None = None, vx=None) -> float:
    """Max error of ``v = p_+ y + p_- y`` and ``v_x = p_- y - p_+ y``.

    ``y`` defaults to the discrete momentum of ``v`` and ``vx`` to ``D1 v``;
    pass analytic values to measure the discretization error itself.
    """
    y = momentum_density(v) if y is None else y
    vx = d1(v.values, v.grid.dx) if vx is None else np.asarray(vx, dtype=float)
    plus = conv_kernel(y, "p_plus").values
    minus = conv_kernel(y, "p_minus").values
    return float(max(np.max(np.abs(plus + minus - v.values)), np.max(np.abs(minus - plus - vx))))


# ---------------------------------------------------------------- decay fits

@dataclass(frozen=True)
class DecayFit:
    """Envelope ``C exp(-|x - center| / K)`` and the fit quality ``r2``."""

    C: float
    K: float
    r2: float

    @property
    def accepted(self) -> bool:
        return self.r2 >= DECAY_R2_MIN and self.K >= 1.0 - 1e-6


def decay_fit(u: Field, center: float, window: tuple[float, float],
              side: str = "both") -> DecayFit:
    """Least squares of ``log u`` against ``|x - center|`` on ``r_min <= |x - center| <= r_max``.

    ``side`` selects both tails or only the left or right one.
    """
    r_min, r_max = map(float, window)
    if r_max - r_min < 5:
        raise FitError("window must satisfy r_max - r_min >= 5")
    if side not in ("both", "left", "right"):
        raise InvalidParameterError("side must be 'both', 'left' or 'right'")
    x = u.grid.x
    r = np.abs(x - center)
    sel = (r >= r_min) & (r <= r_max)
    if side == "left":
        sel &= x < center
    elif side == "right":
        sel &= x > center
    if np.count_nonzero(sel) < 3:
        raise FitError("fewer than three samples in the fit window")
    vals = u.values[sel]
    if np.any(vals <= 0):
        raise FitError("nonpositive samples in the fit window")
    fit = linregress(r[sel], np.log(vals))
    if not fit.slope < 0:
        raise FitError("profile does not decay on the window")
    return DecayFit(float(np.exp(fit.intercept)), float(-1.0 / fit.slope), float(fit.rvalue**2))


# -------------------------------------------------- characteristic derivative

def characteristic_rhs(u: Field) -> Field:
    """``1/2 u (u^2 - u_x^2) - 1/2 (p_+*(u - u_x)^3 + p_-*(u + u_x)^3)``."""
    v = u.values
    vx = d1(v, u.grid.dx)
    plus = conv_kernel(u.with_values((v - vx) ** 3), "p_plus").values
    minus = conv_kernel(u.with_values((v + vx) ** 3), "p_minus").values
    return Field(u.grid, 0.5 * v * (v * v - vx * vx) - 0.5 * (plus + minus))


class CharacteristicCheck(NamedTuple):
    max_mismatch: float
    n_used: int
    n_skipped: int


def _crests(v: np.ndarray) -> np.ndarray:
    inner = (v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])
    return np.nonzero(inner)[0] + 1


def check_characteristic_derivative(snapshots: Sequence, fm, skip_cells: int = 3
                                    ) -> CharacteristicCheck:
    """Centered time difference of ``u_x`` along stored paths against :func:`characteristic_rhs`.

    Samples within ``skip_cells`` cells of a local maximum of ``u`` are skipped.
    """
    if len(snapshots) < 3:
        raise PreconditionError("need at least three snapshots")
    times = np.array([s.t for s in snapshots])
    ux = []
    rhs = []
    crest_x = []
    for s in snapshots:
        x = s.grid.x
        v = s.u.values
        ux.append(PchipInterpolator(x, d1(v, s.grid.dx)))
        rhs.append(PchipInterpolator(x, characteristic_rhs(s.u).values))
        crest_x.append(x[_crests(v)])
    worst = 0.0
    used = skipped = 0
    live = ~np.asarray(fm.frozen)
    for k in range(1, times.size - 1):
        q_prev, q_now, q_next = fm.paths[k - 1], fm.paths[k], fm.paths[k + 1]
        dt = times[k + 1] - times[k - 1]
        deriv = (ux[k + 1](q_next) - ux[k - 1](q_prev)) / dt
        target = rhs[k](q_now)
        near = np.zeros(q_now.size, dtype=bool)
        for cx in (crest_x[k - 1], crest_x[k], crest_x[k + 1]):
            for c in cx:
                near |= np.abs(q_now - c) <= skip_cells * snapshots[k].grid.dx
        ok = live & ~near
        skipped += int(np.count_nonzero(~ok))
        used += int(np.count_nonzero(ok))
        if np.any(ok):
            worst = max(worst, float(np.max(np.abs(deriv - target)[ok])))
    return CharacteristicCheck(worst, used, skipped)


def edge_rhs_sign(u: Field, x_edge: float, cells: int = 3) -> float:
    """Max of :func:`characteristic_rhs` over a few nodes just right of the edge (expected <= 0)."""
    x = u.grid.x
    dx = u.grid.dx
    sel = (x >= x_edge + 2 * dx) & (x <= x_edge + (2 + cells) * dx)
    return float(np.max(characteristic_rhs(u).values[sel]))


# ------------------------------------------------------------------- corpus

class CorpusMember(NamedTuple):
    index: int
    y: MomentumField
    u: Field
    n_bumps: int
    n_spikes: int


def random_yplus_corpus(grid: Grid, n_members: int = 200, seed: int = 7,
                        center_range: float = 8.0) -> list[CorpusMember]:
    """Seeded nonnegative momenta: up to 5 Gaussian bumps plus up to 2 grid spikes.

    Ranges: bump amplitude [0.1, 1], width [0.3, 2]; spike mass [0.2, 1.2];
    centers uniform in ``[-center_range, center_range]``.
    """
    if n_members < 1:
        raise InvalidParameterError("n_members must be positive")
    rng = np.random.default_rng(seed)
    x = grid.x
    out = []
    for k in range(n_members):
        nb = int(rng.integers(0, 6))
        ns = int(rng.integers(0, 3))
        if nb + ns == 0:
            ns = 1
        y = np.zeros(grid.n)
        for _ in range(nb):
            a = rng.uniform(0.1, 1.0)
            w = rng.uniform(0.3, 2.0)
            c = rng.uniform(-center_range, center_range)
            y += a * np.exp(-0.5 * ((x - c) / w) ** 2)
        for _ in range(ns):
            m = rng.uniform(0.2, 1.2)
            c = rng.uniform(-center_range, center_range)
            y[grid.index_of(c)] += 2.0 * m / grid.dx
        ym = MomentumField(grid, y, y_plus=True)
        out.append(CorpusMember(k, ym, Field(grid, helmholtz_solve(y, grid.dx)), nb, ns))
    return out


class CorpusStats(NamedTuple):
    gaps: list
    fits: list
    bound_ok: bool
    localization_ok: bool
    worst_scaled_gap: float
    near_equal: list


def corpus_gap_check(corpus: Sequence[CorpusMember], near_tol: float | None = None,
                     window: tuple[float, float] = (0.5, 5.5), k_tol: float = 0.05
                     ) -> CorpusStats:
    """Lower bound and equality localization of the convolution gap over a corpus.

    The bound is ``min_gap >= -5 dx max(u^3)``.  A member is near-equal when
    its relative gap is ``<= near_tol`` (default ``10 dx``); each such member
    must have one-sided decay rates ``K = 1 +- k_tol`` around the minimizer.
    """
    dx = corpus[0].u.grid.dx
    near_tol = 10 * dx if near_tol is None else near_tol
    gaps, fits, near = [], [], []
    bound_ok = localization_ok = True
    worst = np.inf
    for m in corpus:
        res = check_three_five_two(m.u, m.y)
        gaps.append(res)
        scale = float(np.max(m.u.values)) ** 3
        worst = min(worst, res.min_gap / (dx * scale))
        if res.min_gap < -5 * dx * scale:
            bound_ok = False
        fit_pair = None
        if res.min_rel_gap <= near_tol:
            near.append(m.index)
            try:
                fit_pair = (decay_fit(m.u, res.argmin_rel, window, "left"),
                            decay_fit(m.u, res.argmin_rel, window, "right"))
                if not all(abs(f.K - 1) <= k_tol for f in fit_pair):
                    localization_ok = False
            except FitError:
                localization_ok = False
        fits.append(fit_pair)
    return CorpusStats(gaps, fits, bound_ok, localization_ok, float(worst), near)


# ------------------------------------------------------------------- report

class OracleCheck(NamedTuple):
    name: str
    statistic: float
    threshold: float
    passed: bool
    seed: int | None = None
    relation: str = "<="


def format_oracle_report(checks: Sequence[OracleCheck]) -> str:
    """One block per check: ``name``, ``statistic``, ``threshold``, ``verdict``, ``seed``."""
    blocks = []
    for c in checks:
        blocks.append("\n".join([
            "[check]",
            f"name = {c.name}",
            f"statistic = {c.statistic!r}",
            f"threshold = {c.relation} {c.threshold!r}",
            f"verdict = {'pass' if c.passed else 'fail'}",
            f"seed = {'' if c.seed is None else c.seed}",
        ]))
    return "\n\n".join(blocks) + "\n"


def parse_oracle_report(text: str) -> list[dict]:
    out = []
    for block in text.strip().split("\n\n"):
        rec = {}
        for line in block.splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                rec[k.strip()] = v.strip()
        if rec:
            out.append(rec)
    return out


__all__ = [
    "GapResult", "convolution_gap", "convolution_gap_split", "check_three_five_two",
    "check_representation", "DecayFit", "decay_fit", "characteristic_rhs",
    "CharacteristicCheck", "check_characteristic_derivative", "edge_rhs_sign",
    "CorpusMember", "random_yplus_corpus", "CorpusStats", "corpus_gap_check",
    "OracleCheck", "format_oracle_report", "parse_oracle_report", "DECAY_R2_MIN",
]
