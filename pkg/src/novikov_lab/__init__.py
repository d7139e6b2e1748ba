"""Numerical lab for peakon dynamics of a cubic nonlocal shallow-water equation."""

from .config import ExperimentConfig, load_config, parse_config, serialize_config
from .errors import NovikovError
from .field_core import Field, Grid, MomentumField, PeakonParams
from .modulation import calibrate_n0, track
from .multipeakon import MultipeakonState, mp_evolve
from .nonlocal_ops import helmholtz_inverse, helmholtz_solve
from .pde_evolve import EvolveConfig, Snapshot, evolve, evolve_particles

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "load_config", "parse_config", "serialize_config", "NovikovError",
    "Field", "Grid", "MomentumField", "PeakonParams", "calibrate_n0", "track",
    "MultipeakonState", "mp_evolve", "helmholtz_inverse", "helmholtz_solve", "EvolveConfig",
    "Snapshot", "evolve", "evolve_particles",
]
