"""Flat ``key = value`` experiment configuration with dotted sections.

Example::

    experiment = stability
    seed = 7
    grid.x_left = -40
    grid.dx = 0.05
    grid.n = 1601
    init.kind = peakon+bump
    evolve.t_end = 20

Lists are comma separated.  Unknown keys and malformed values raise
:class:`~novikov_lab.errors.ConfigError` naming the offending field.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError

EXPERIMENTS = ("peakon-travel", "multipeakon", "stability", "monotonicity",
               "transport-front", "lyapunov", "lemma-oracles", "convergence-study")
INIT_KINDS = ("peakon", "multipeakon", "field-file", "peakon+bump", "smooth")


@dataclass(frozen=True)
class GridSpec:
    x_left: float = -40.0
    dx: float = 0.05
    n: int = 1601


@dataclass(frozen=True)
class InitSpec:
    kind: str = "peakon"
    c: float = 1.0
    x0: float = 0.0
    q: tuple = ()
    p: tuple = ()
    file: str = ""
    bump_amplitude: float = 0.01
    bump_center: float = -5.0
    bump_width: float = 2.0
    smooth_centers: tuple = (0.0,)
    smooth_amplitudes: tuple = (1.0,)
    smooth_widths: tuple = (1.0,)


@dataclass(frozen=True)
class EvolveSpec:
    t_end: float = 1.0
    snapshot_every: float = 0.1
    cfl: float = 0.4
    limiter: str = "superbee"
    form: str = "momentum"
    engine: str = "eulerian"
    rtol: float = 1e-10


@dataclass(frozen=True)
class ModulationSpec:
    n0_candidates: tuple = (4, 8, 16, 32)
    sigma: float = 1.0


@dataclass(frozen=True)
class WindowsSpec:
    R: tuple = (6.0, 12.0, 18.0, 24.0)
    z_rate: float = 2.0 / 3.0
    beta: float = 0.5
    A: float = 10.0
    gamma: tuple = (0.5,)
    delta: float = 0.5


@dataclass(frozen=True)
class StudySpec:
    dx_list: tuple = (0.05, 0.025, 0.0125)
    corpus_size: int = 200
    min_ratio: float = 1.3
    cross_time: float = 2.0
    y23_time: float = 1.0
    sign_time: float = 5.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description."""

    experiment: str = "peakon-travel"
    seed: int = 7
    out_dir: str = "runs/out"
    jobs: int = 1
    grid: GridSpec = field(default_factory=GridSpec)
    init: InitSpec = field(default_factory=InitSpec)
    evolve: EvolveSpec = field(default_factory=EvolveSpec)
    modulation: ModulationSpec = field(default_factory=ModulationSpec)
    windows: WindowsSpec = field(default_factory=WindowsSpec)
    study: StudySpec = field(default_factory=StudySpec)


_SECTIONS = ("grid", "init", "evolve", "modulation", "windows", "study")


def _convert(name: str, raw: str, default):
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false"):
                raise ValueError(raw)
            return raw.lower() == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if name.endswith("n0_candidates"):
                return tuple(int(s) for s in items)
            return tuple(float(s) for s in items)
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None


def _format(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse config text on top of ``base`` (defaults when omitted)."""
    cfg = base or ExperimentConfig()
    top: dict = {}
    sect: dict = {s: {} for s in _SECTIONS}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if "." in key:
            sec, name = key.split(".", 1)
            if sec not in sect:
                raise ConfigError(f"{key}: unknown section {sec!r}")
            sub = getattr(cfg, sec)
            if name not in {f.name for f in fields(sub)}:
                raise ConfigError(f"{key}: unknown field")
            sect[sec][name] = _convert(key, raw, getattr(sub, name))
        else:
            if key not in ("experiment", "seed", "out_dir", "jobs"):
                raise ConfigError(f"{key}: unknown field")
            top[key] = _convert(key, raw, getattr(cfg, key))
    subs = {s: replace(getattr(cfg, s), **sect[s]) for s in _SECTIONS}
    out = replace(cfg, **top, **subs)
    validate(out)
    return out


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = [f"experiment = {cfg.experiment}", f"seed = {cfg.seed}",
             f"out_dir = {cfg.out_dir}", f"jobs = {cfg.jobs}"]
    for s in _SECTIONS:
        sub = getattr(cfg, s)
        for f in fields(sub):
            lines.append(f"{s}.{f.name} = {_format(getattr(sub, f.name))}")
    return "\n".join(lines) + "\n"


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    return parse_config(text, base)


def validate(cfg: ExperimentConfig) -> None:
    """Range checks run before any computation starts."""
    def need(cond, name, msg):
        if not cond:
            raise ConfigError(f"{name}: {msg}")

    need(cfg.experiment in EXPERIMENTS, "experiment", f"must be one of {EXPERIMENTS}")
    need(cfg.jobs >= 1, "jobs", "must be >= 1")
    g = cfg.grid
    need(g.dx > 0, "grid.dx", "must be positive")
    need(g.n >= 3, "grid.n", "must be >= 3")
    i = cfg.init
    need(i.kind in INIT_KINDS, "init.kind", f"must be one of {INIT_KINDS}")
    need(i.c > 0, "init.c", "must be positive")
    need(len(i.q) == len(i.p), "init.p", "must have as many entries as init.q")
    if i.kind == "multipeakon":
        need(len(i.q) >= 1, "init.q", "needs at least one position")
        need(all(a < b for a, b in zip(i.q, i.q[1:])), "init.q", "must be strictly increasing")
    if i.kind == "field-file":
        need(bool(i.file) and Path(i.file).is_file(), "init.file", f"file {i.file!r} not found")
    need(i.bump_width > 0, "init.bump_width", "must be positive")
    need(i.bump_amplitude >= 0, "init.bump_amplitude", "must be nonnegative")
    need(len(i.smooth_centers) == len(i.smooth_amplitudes) == len(i.smooth_widths),
         "init.smooth_widths", "smooth lists must have equal lengths")
    need(all(a >= 0 for a in i.smooth_amplitudes), "init.smooth_amplitudes", "must be nonnegative")
    need(all(w > 0 for w in i.smooth_widths), "init.smooth_widths", "must be positive")
    e = cfg.evolve
    need(e.t_end > 0, "evolve.t_end", "must be positive")
    need(e.snapshot_every > 0, "evolve.snapshot_every", "must be positive")
    need(0 < e.cfl <= 1, "evolve.cfl", "must lie in (0, 1]")
    need(e.limiter in ("upwind1", "weno3", "weno5", "superbee"), "evolve.limiter",
         "unknown limiter")
    need(e.form in ("momentum", "weak"), "evolve.form", "must be momentum or weak")
    need(e.engine in ("eulerian", "lagrangian"), "evolve.engine", "must be eulerian or lagrangian")
    need(0 < e.rtol < 1, "evolve.rtol", "must lie in (0, 1)")
    m = cfg.modulation
    need(len(m.n0_candidates) > 0 and all(n >= 1 for n in m.n0_candidates),
         "modulation.n0_candidates", "must be a nonempty list of positive integers")
    need(m.sigma > 0, "modulation.sigma", "must be positive")
    w = cfg.windows
    need(len(w.R) >= 2 and all(r > 0 for r in w.R), "windows.R", "needs >= 2 positive values")
    need(0 < w.z_rate < 1, "windows.z_rate", "must lie in (0, 1)")
    need(0 < w.beta, "windows.beta", "must be positive")
    need(w.A > 0, "windows.A", "must be positive")
    need(all(0 < gm < 1 for gm in w.gamma), "windows.gamma", "fractions of E in (0, 1)")
    need(w.delta > 0, "windows.delta", "must be positive")
    s = cfg.study
    need(len(s.dx_list) >= 2 and all(d > 0 for d in s.dx_list), "study.dx_list",
         "needs >= 2 positive spacings")
    need(s.corpus_size >= 1, "study.corpus_size", "must be >= 1")
    need(s.min_ratio > 0, "study.min_ratio", "must be positive")
    for name in ("cross_time", "y23_time", "sign_time"):
        need(getattr(s, name) > 0, f"study.{name}", "must be positive")


__all__ = [
    "EXPERIMENTS", "INIT_KINDS", "GridSpec", "InitSpec", "EvolveSpec", "ModulationSpec",
    "WindowsSpec", "StudySpec", "ExperimentConfig", "parse_config", "serialize_config",
    "load_config", "validate",
]
