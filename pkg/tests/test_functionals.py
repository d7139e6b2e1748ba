import numpy as np
import pytest

from novikov_lab.errors import InvalidParameterError, PreconditionError, UndefinedEdgeError
from novikov_lab.field_core import (Field, Grid, MomentumField, PeakonParams, compact_bump,
                                    peakon_field, peakon_momentum)
from novikov_lab.functionals import (WindowSpec, diagnostics, energy_E, energy_F,
                                     excess_slope, lyapunov_series, monotonicity_series,
                                     read_diagnostics_csv, right_edge, transport_rate_check,
                                     weighted_energy, write_diagnostics_csv, x_gamma_solve,
                                     y23_norm)
from novikov_lab.pde_evolve import EvolveConfig, Snapshot, evolve, evolve_particles


@pytest.fixture
def fine():
    return Grid.symmetric(30.0, 0.005)


def test_peakon_energies(fine):
    u = peakon_field(PeakonParams(4.0), 0, fine)
    # E = 2c; F = c^2 int e^{-4|x|} (1 + 2 - 1/3) = 4 c^2 / 3
    assert energy_E(u) == pytest.approx(8.0, abs=20 * fine.dx)
    assert energy_F(u) == pytest.approx(16 * 4 / 3, rel=1e-2)


def test_y23_of_gaussian(fine):
    y = Field(fine, np.exp(-fine.x**2))
    # int e^{-2x^2/3} = sqrt(3 pi / 2)
    assert y23_norm(y) == pytest.approx(np.sqrt(1.5 * np.pi) ** 1.5, rel=1e-10)


def test_diagnostics_row_and_csv(tmp_path):
    g = Grid.symmetric(20.0, 0.05)
    u = peakon_field(PeakonParams(1.0, 2.0), 0, g)
    row = diagnostics(u, peakon_momentum(PeakonParams(1.0, 2.0), 0, g), t=0.5)
    assert row.x_peak == pytest.approx(2.0)
    assert row.sup_u == pytest.approx(1.0)
    assert row.M_tot == pytest.approx(2.0)
    assert np.isnan(row.lyap)
    p = tmp_path / "d.csv"
    write_diagnostics_csv(p, [row, row._replace(t=1.0)])
    back = read_diagnostics_csv(p)
    assert back[1].t == 1.0 and back[0].E == row.E
    p.write_text("a,b\n1,2\n")
    with pytest.raises(PreconditionError):
        read_diagnostics_csv(p)


def test_weighted_energy_limits():
    g = Grid.symmetric(40.0, 0.01)
    u = peakon_field(PeakonParams(1.0), 0, g)
    e = energy_E(u)
    assert weighted_energy(u, -200.0) == pytest.approx(e, rel=1e-6)
    assert weighted_energy(u, 200.0) < 1e-12
    # the map s -> I(s) is decreasing
    vals = [weighted_energy(u, s) for s in np.linspace(-10, 10, 11)]
    assert np.all(np.diff(vals) < 0)


def test_window_spec_validation():
    with pytest.raises(InvalidParameterError):
        WindowSpec(0, -1)
    with pytest.raises(InvalidParameterError):
        WindowSpec(0, 1, z_rate=1.5)
    with pytest.raises(InvalidParameterError):
        WindowSpec(0, 1, side="up")


def _exact_peakon_snaps(grid, t_end=4.0, dt=0.1):
    p = PeakonParams(1.0)
    ts = np.arange(0, t_end + 1e-12, dt)
    return [Snapshot(float(t), peakon_field(p, t, grid), peakon_momentum(p, t, grid)) for t in ts]


def test_monotonicity_excess_rate_exact_peakon():
    g = Grid.symmetric(60.0, 0.05)
    snaps = _exact_peakon_snaps(g, t_end=10.0)
    ts = [s.t for s in snaps]
    R = (6.0, 12.0, 18.0, 24.0)
    ex = [monotonicity_series(snaps, (ts, ts), WindowSpec(ts[-1], r)).excess for r in R]
    assert np.all(np.diff(ex) < 0)
    assert excess_slope(R, ex) <= -1 / 6 + 0.05


def test_monotonicity_series_zero_field_and_frame_check():
    g = Grid.symmetric(20.0, 0.1)
    z = Field(g, np.zeros(g.n))
    snaps = [Snapshot(t, z, MomentumField(g, np.zeros(g.n))) for t in (0.0, 0.5, 1.0)]
    ts = [0.0, 0.5, 1.0]
    ms = monotonicity_series(snaps, (ts, ts), WindowSpec(1.0, 6.0))
    assert ms.excess == 0.0 and np.all(ms.values == 0)
    with pytest.raises(PreconditionError):
        monotonicity_series(snaps, (ts, [0.0, 0.0, 0.0]), WindowSpec(1.0, 6.0))


def test_excess_slope_recovers_rate():
    R = np.array([6.0, 12.0, 18.0, 24.0])
    assert excess_slope(R, 3 * np.exp(-R / 6)) == pytest.approx(-1 / 6, rel=1e-8)


def test_right_edge():
    g = Grid.symmetric(10.0, 0.1)
    y = MomentumField(g, compact_bump(g, 2.0, 1.0, 1.0))
    xe = right_edge(y)
    assert 2.5 < xe <= 3.0
    with pytest.raises(UndefinedEdgeError):
        right_edge(MomentumField(g, np.zeros(g.n)))


def test_lyapunov_series_on_exact_peakon_is_constant():
    g = Grid.symmetric(30.0, 0.05)
    snaps = evolve_particles(peakon_momentum(PeakonParams(1.0), 0, g), EvolveConfig(2.0, 0.1))
    edges = [s.particles.q[-1] for s in snaps]
    ls = lyapunov_series(snaps, edges)
    np.testing.assert_allclose(ls.values, 1.0, atol=1e-8)
    # central differences of e^{-x} are off by dx^2/6 relative
    assert ls.edge_residual < g.dx**2


def test_lyapunov_nondecreasing_for_right_bump():
    g = Grid.symmetric(30.0, 0.05)
    y = peakon_momentum(PeakonParams(1.0), 0, g).values + compact_bump(g, 3.0, 1.0, 0.2)
    snaps = evolve_particles(MomentumField(g, y), EvolveConfig(4.0, 0.1))
    ls = lyapunov_series(snaps, [s.particles.q[-1] for s in snaps])
    assert np.min(np.diff(ls.values)) >= -1e-4
    assert ls.edge_residual < g.dx


def test_x_gamma_solve():
    g = Grid.symmetric(40.0, 0.01)
    u = peakon_field(PeakonParams(1.0, 3.0), 0, g)
    e = energy_E(u)
    s = x_gamma_solve(u, e / 2)
    assert weighted_energy(u, s) == pytest.approx(e / 2, rel=1e-10)
    # symmetric profile: the half-energy shift sits at the crest
    assert s == pytest.approx(3.0, abs=0.05)
    with pytest.raises(InvalidParameterError):
        x_gamma_solve(u, 2 * e)


def test_transport_front_moves_right():
    g = Grid.symmetric(30.0, 0.05)
    y0 = MomentumField(g, np.exp(-g.x**2) + 0.6 * np.exp(-(g.x - 3) ** 2 / 0.5))
    snaps = evolve(y0, EvolveConfig(2.0, 0.1))
    tc = transport_rate_check(snaps, energy_E(snaps[0].u) / 2)
    assert tc.monotone_ok and tc.rate_ok
    assert tc.x_gamma[-1] > tc.x_gamma[0]
