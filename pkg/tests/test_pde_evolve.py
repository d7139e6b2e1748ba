import warnings

import numpy as np
import pytest

from novikov_lab import pde_evolve

from novikov_lab.errors import BlowUpError, InvalidParameterError, UnsupportedInputError
from novikov_lab.field_core import (Field, Grid, MomentumField, PeakonParams, d1, is_y_plus,
                                    multipeakon_field, peakon_field,
                                    peakon_momentum, trapz)
from novikov_lab.functionals import energy_E, y23_norm
from novikov_lab.multipeakon import MultipeakonState, mp_evolve
from novikov_lab.pde_evolve import (EvolveConfig, deposit_momentum, evolve, evolve_particles,
                                    face_values, flow_invariant_residual, flow_map,
                                    read_snapshot_dir, rhs_direct, rhs_weak, upwind_derivative,
                                    write_snapshot_dir)


def test_config_validation_and_times():
    cfg = EvolveConfig(1.0, 0.3)
    np.testing.assert_allclose(cfg.snapshot_times(), [0, 0.3, 0.6, 0.9, 1.0])
    for bad in [dict(t_end=0, snapshot_every=0.1), dict(t_end=1, snapshot_every=0),
                dict(t_end=1, snapshot_every=0.1, cfl=0), dict(t_end=1, snapshot_every=0.1,
                                                               limiter="minmod"),
                dict(t_end=1, snapshot_every=0.1, form="strong")]:
        with pytest.raises(InvalidParameterError):
            EvolveConfig(**bad)


def test_face_values_exact_for_constants_and_linear():
    v = np.full(20, 2.0)
    for lim in ("upwind1", "weno3", "weno5", "superbee"):
        np.testing.assert_allclose(face_values(v, lim), 2.0)
    g = Grid(0, 0.1, 30)
    lin = 3 * g.x
    np.testing.assert_allclose(upwind_derivative(lin, 0.1, "weno3")[3:-3], 3.0)


def test_superbee_clip_keeps_faces_in_range():
    rng = np.random.default_rng(0)
    v = np.abs(rng.normal(size=200))
    f = face_values(v, "superbee", clip=True)
    assert np.all(f >= 0)
    assert np.all(f <= 2 * v[:-1] + 1e-15)
    g = face_values(-v, "superbee", clip=True)
    np.testing.assert_array_equal(g, -f)


def test_zero_is_fixed_point():
    g = Grid.symmetric(5.0, 0.1)
    z = Field(g, np.zeros(g.n))
    assert np.all(rhs_weak(z).values == 0)
    snaps = evolve(z, EvolveConfig(0.5, 0.25))
    assert all(np.all(s.u.values == 0) for s in snaps)


def test_weak_and_direct_forms_agree_to_second_order():
    errs = []
    for dx in (0.05, 0.025, 0.0125):
        g = Grid.symmetric(15.0, dx)
        u = Field(g, np.exp(-g.x**2))
        errs.append(np.max(np.abs(rhs_weak(u, "weno3").values - rhs_direct(u, "weno3").values)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(ratios > 3.0)


def test_peakon_is_approximate_traveling_wave_of_weak_form():
    # u_t = -c u_x away from the crest, up to O(dx)
    res = []
    for dx in (0.05, 0.025):
        g = Grid.symmetric(20.0, dx)
        ph = peakon_field(PeakonParams(1.0), 0, g)
        r = rhs_weak(ph).values + d1(ph.values, dx)
        res.append(np.max(np.abs(r[np.abs(g.x) > 3 * dx])))
    assert res[1] < res[0]


def test_peakon_travel_error_decreases():
    errs = []
    for dx in (0.05, 0.025, 0.0125):
        g = Grid.symmetric(30.0, dx)
        snaps = evolve(peakon_momentum(PeakonParams(1.0), 0, g), EvolveConfig(1.0, 0.5))
        assert snaps[-1].t == 1.0
        ref = peakon_field(PeakonParams(1.0), 1.0, g).values
        errs.append(np.sqrt(trapz((snaps[-1].u.values - ref) ** 2, dx)))
    assert errs[0] > errs[1] > errs[2]


def test_snapshot_times_exact_and_log(tmp_path):
    g = Grid.symmetric(20.0, 0.05)
    y0 = MomentumField(g, np.exp(-g.x**2))
    log = tmp_path / "steps.csv"
    cfg = EvolveConfig(0.35, 0.1)
    snaps = evolve(y0, cfg, log_path=log)
    assert [s.t for s in snaps] == list(cfg.snapshot_times())
    assert snaps[-1].t == 0.35
    lines = log.read_text().splitlines()
    assert lines[0] == "step,t,dt,max_u,min_y,E"
    assert len(lines) > 5
    assert all(s.cfl <= 0.4 + 1e-12 for s in snaps[1:])


def test_sign_and_invariants_smooth_run():
    g = Grid.symmetric(30.0, 0.05)
    y0 = MomentumField(g, np.exp(-g.x**2) + 0.5 * np.exp(-(g.x - 2) ** 2))
    snaps = evolve(y0, EvolveConfig(2.0, 0.5))
    assert all(is_y_plus(s.y) for s in snaps)
    e0 = energy_E(snaps[0].u)
    assert abs(energy_E(snaps[-1].u) - e0) / e0 < 1e-3
    n0 = y23_norm(snaps[0].y)
    assert abs(y23_norm(snaps[-1].y) - n0) / n0 < 1e-3


def test_weak_form_runs_and_tracks_momentum_form():
    g = Grid.symmetric(20.0, 0.05)
    y0 = MomentumField(g, np.exp(-g.x**2))
    a = evolve(y0, EvolveConfig(0.5, 0.5))[-1].u.values
    b = evolve(y0, EvolveConfig(0.5, 0.5, form="weak"))[-1].u.values
    assert np.max(np.abs(a - b)) < 5e-3


def test_pde_matches_multipeakon_ode():
    errs = []
    s0 = MultipeakonState(0, [-5.0, 5.0], [1.2, 0.8])
    ref = mp_evolve(s0, 2.0)[-1]
    for dx in (0.05, 0.025):
        g = Grid.symmetric(30.0, dx)
        u = evolve(deposit_momentum(s0, g), EvolveConfig(2.0, 2.0))[-1].u.values
        errs.append(np.sqrt(trapz((u - multipeakon_field(ref, g).values) ** 2, dx)))
    assert errs[0] / errs[1] >= 1.3


def test_blow_up_keeps_snapshots(monkeypatch):
    # a peakon-antipeakon pair steepens; grid diffusion caps the slope near 2,
    # so the detector threshold is lowered to exercise the signal path
    monkeypatch.setattr(pde_evolve, "SLOPE_LIMIT", 1.5)
    g = Grid.symmetric(10.0, 0.05)
    y = np.zeros(g.n)
    y[g.index_of(-1.0)] = 2 / g.dx
    y[g.index_of(1.0)] = -2 / g.dx
    with pytest.raises(BlowUpError) as info:
        evolve(MomentumField(g, y), EvolveConfig(5.0, 0.1))
    assert info.value.snapshots
    assert info.value.last_snapshot.t < 5.0


def test_particle_engine_matches_exact_peakon():
    g = Grid.symmetric(20.0, 0.05)
    snaps = evolve_particles(peakon_momentum(PeakonParams(1.0), 0, g), EvolveConfig(2.0, 1.0))
    assert snaps[-1].particles.q[0] == pytest.approx(2.0, abs=1e-8)
    np.testing.assert_allclose(snaps[-1].u.values,
                               peakon_field(PeakonParams(1.0), 2.0, g).values, atol=1e-8)


def test_flow_invariant_converges():
    res = []
    for dx in (0.05, 0.025):
        g = Grid.symmetric(20.0, dx)
        y0 = MomentumField(g, np.exp(-g.x**2))
        snaps = evolve(y0, EvolveConfig(1.0, dx))
        fm = flow_map(snaps, np.linspace(-2, 2, 21))
        res.append(flow_invariant_residual(snaps, fm, y0))
    assert res[1] < res[0] < 0.05


def test_flow_invariant_rejects_spikes():
    g = Grid.symmetric(10.0, 0.1)
    snaps = evolve(peakon_momentum(PeakonParams(1.0), 0, g), EvolveConfig(0.2, 0.1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fm = flow_map(snaps, [0.0])
    with pytest.raises(UnsupportedInputError):
        flow_invariant_residual(snaps, fm, snaps[0].y)


def test_flow_map_freezes_exiting_paths():
    g = Grid.symmetric(3.0, 0.05)
    snaps = evolve(peakon_momentum(PeakonParams(4.0), 0, g), EvolveConfig(1.0, 0.05))
    with pytest.warns(UserWarning):
        fm = flow_map(snaps, [2.9])
    assert fm.frozen[0]
    assert np.all(fm.paths <= g.x_right)


def test_snapshot_dir_roundtrip(tmp_path):
    g = Grid.symmetric(10.0, 0.1)
    snaps = evolve(MomentumField(g, np.exp(-g.x**2)), EvolveConfig(0.2, 0.1))
    write_snapshot_dir(tmp_path / "snaps", snaps)
    back = read_snapshot_dir(tmp_path / "snaps")
    assert [s.t for s in back] == [s.t for s in snaps]
    for a, b in zip(snaps, back):
        np.testing.assert_array_equal(a.u.values, b.u.values)
    assert (tmp_path / "snaps" / "index.csv").read_text().startswith("t,filename,dt,max_abs_u,cfl")
