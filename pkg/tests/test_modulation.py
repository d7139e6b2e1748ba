import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from novikov_lab.errors import CalibrationError, ModulationLossError
from novikov_lab.field_core import (Field, Grid, MomentumField, PeakonParams, compact_bump,
                                    peakon_field, peakon_momentum, rho_n, trapz)
from novikov_lab.modulation import (MIN_SLOPE, TRACK_COLUMNS, calibrate_n0,
                                    calibration_function, exp_moment, mollified_dphi,
                                    orthogonality, solve_center, track, write_track_csv)
from novikov_lab.pde_evolve import EvolveConfig, Snapshot, evolve_particles


@pytest.fixture(scope="module")
def setup():
    return calibrate_n0(Grid.symmetric(40.0, 0.05))


def test_exp_moment_quadrature():
    for n in (4, 8, 16):
        s = np.linspace(-1 / n, 1 / n, 40001)
        ref = trapz(rho_n(s, n) * np.exp(s), s[1] - s[0])
        assert exp_moment(n) == pytest.approx(ref, rel=1e-8)
        assert exp_moment(n) > 1.0


def test_mollified_dphi_matches_adaptive_quadrature():
    n = 8
    s = np.array([-0.3, -0.1, -0.02, 0.0, 0.05, 0.12, 0.5, 2.0])
    direct = []
    for si in s:
        def f(t, si=si):
            return rho_n(np.array([t]), n)[0] * -np.sign(si - t) * np.exp(-abs(si - t))
        pts = [si] if abs(si) < 1 / n else None
        direct.append(quad(f, -1 / n, 1 / n, points=pts, epsabs=1e-13, limit=200)[0])
    np.testing.assert_allclose(mollified_dphi(s, n), direct, atol=1e-9)
    # odd kernel
    np.testing.assert_allclose(mollified_dphi(-s, n), -mollified_dphi(s, n), atol=1e-14)


def test_calibration_function_against_quadrature():
    n = 4
    h = 0.001
    z = np.arange(-30, 30 + h / 2, h)
    ys = np.array([-0.5, -0.1, 0.0, 0.3, 0.5])
    direct = [trapz(np.exp(-np.abs(z)) * mollified_dphi(z - y, n), h) for y in ys]
    np.testing.assert_allclose(calibration_function(ys, n), direct, atol=1e-6)
    assert calibration_function([0.3], n)[0] > 0


def test_calibration_derivative_matches_difference():
    n = 8
    y = np.linspace(-0.5, 0.5, 21)
    h = 1e-5
    fd = (calibration_function(y + h, n) - calibration_function(y - h, n)) / (2 * h)
    np.testing.assert_allclose(calibration_function(y, n, derivative=True), fd, atol=1e-6)


def test_calibrate_picks_smallest_valid(setup):
    assert setup.n0 == 4
    assert np.min(calibration_function(np.linspace(-0.5, 0.5, 101), 4, True)) >= MIN_SLOPE
    # a slope requirement no candidate meets
    with pytest.raises(CalibrationError):
        calibrate_n0(Grid.symmetric(10.0, 0.05), min_slope=2.0)
    # candidates too fine for the grid are skipped
    assert calibrate_n0(Grid.symmetric(10.0, 0.05), candidates=(32, 8)).n0 == 8


@given(st.floats(-3.0, 3.0))
def test_center_of_exact_peakon(x0):
    g = Grid.symmetric(30.0, 0.05)
    setup = calibrate_n0(g)
    u = peakon_field(PeakonParams(1.0, x0), 0, g)
    xc = solve_center(u, setup, x0 + 0.3)
    assert xc == pytest.approx(x0, abs=g.dx)
    assert abs(orthogonality(u, setup, xc)) < 1e-10


def test_two_equal_crests_lose_modulation(setup):
    # the symmetric root between two separated crests is a decreasing crossing
    g = setup.kernel.grid
    u = Field(g, np.exp(-np.abs(g.x - 1.5)) + np.exp(-np.abs(g.x + 1.5)))
    with pytest.raises(ModulationLossError):
        solve_center(u, setup, 0.0)
    with pytest.raises(ModulationLossError):
        solve_center(Field(g, np.zeros(g.n)), setup, 0.0)


def test_track_exact_peakon(setup):
    g = setup.kernel.grid
    p = PeakonParams(1.0)
    ts = np.arange(0, 3.0001, 0.1)
    snaps = [Snapshot(float(t), peakon_field(p, t, g), peakon_momentum(p, t, g)) for t in ts]
    tr = track(snaps, setup)
    assert np.max(np.abs(tr.x_of_t - ts)) <= g.dx
    assert np.max(np.abs(tr.xdot - 1.0)) <= 1e-3
    assert tr.c_star == pytest.approx(1.0)
    assert np.max(tr.resid_h1) < 1e-10


def test_track_perturbed_peakon(setup, tmp_path):
    g = setup.kernel.grid
    y = peakon_momentum(PeakonParams(1.0), 0, g).values + compact_bump(g, -5.0, 2.0, 0.01)
    snaps = evolve_particles(MomentumField(g, y), EvolveConfig(8.0, 0.1))
    tr = track(snaps, setup, guess0=0.0)
    assert np.max(tr.orth_resid) <= 1e-8
    dev, mean = tr.final_quarter_deviation()
    assert dev <= 0.01 * mean
    assert abs(tr.c_star - 1.0) <= 0.05
    assert tr.resid_right[-1] < tr.resid_right[0]
    p = tmp_path / "track.csv"
    write_track_csv(p, tr)
    lines = p.read_text().splitlines()
    assert lines[0] == ",".join(TRACK_COLUMNS)
    assert len(lines) == len(snaps) + 1


def test_track_reports_loss_time(setup):
    g = setup.kernel.grid
    p = PeakonParams(1.0)
    good = Snapshot(0.0, peakon_field(p, 0, g), peakon_momentum(p, 0, g))
    bad_u = Field(g, np.exp(-np.abs(g.x - 1.5)) + np.exp(-np.abs(g.x + 1.5)))
    bad = Snapshot(0.1, bad_u, peakon_momentum(p, 0, g))
    with pytest.raises(ModulationLossError) as info:
        track([good, bad], setup, guess0=0.0)
    assert info.value.t == 0.1
    assert len(info.value.partial[0]) == 1
