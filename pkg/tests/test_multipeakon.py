import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erf

from novikov_lab.errors import CollisionError, InvalidParameterError, PreconditionError
from novikov_lab.field_core import Grid, MomentumField, multipeakon_field
from novikov_lab.multipeakon import (MultipeakonState, mp_energy, mp_evolve, mp_field_at,
                                     mp_rhs, mp_rhs_bruteforce, particles_from_momentum,
                                     read_trajectory_csv, write_trajectory_csv)

TWO = MultipeakonState(0.0, [-5.0, 5.0], [1.2, 0.8])


def test_state_validation():
    with pytest.raises(PreconditionError):
        MultipeakonState(0, [1.0, 0.0], [1.0, 1.0])
    with pytest.raises(PreconditionError):
        MultipeakonState(0, [0.0], [1.0, 2.0])
    with pytest.raises(PreconditionError):
        MultipeakonState(0, [np.nan], [1.0])
    s = MultipeakonState(0, [0.0, 2.0], [1.0, 1.0])
    assert s.n == 2 and s.min_gap() == 2.0


def test_single_peakon_moves_at_p_squared():
    s = MultipeakonState(0.0, [1.0], [1.5])
    dq, dp = mp_rhs(s)
    assert dq[0] == pytest.approx(2.25) and dp[0] == 0.0
    end = mp_evolve(s, 2.0)[-1]
    assert end.q[0] == pytest.approx(1.0 + 4.5, rel=1e-10)


@given(st.integers(1, 25), st.integers(0, 2**16))
def test_fast_rhs_matches_bruteforce(n, seed):
    rng = np.random.default_rng(seed)
    q = np.sort(rng.uniform(-10, 10, n))
    if n > 1 and np.min(np.diff(q)) <= 0:
        return
    s = MultipeakonState(0, q, rng.uniform(-1, 2, n))
    a, b = mp_rhs(s), mp_rhs_bruteforce(s)
    assert np.max(np.abs(a[0] - b[0])) <= 1e-12
    assert np.max(np.abs(a[1] - b[1])) <= 1e-12


def test_rhs_far_apart_does_not_overflow():
    s = MultipeakonState(0, [-800.0, 0.0, 800.0], [1.0, 1.0, 1.0])
    dq, dp = mp_rhs(s)
    assert np.all(np.isfinite(dq)) and np.allclose(dq, 1.0)
    np.testing.assert_allclose(dp, 0.0, atol=1e-300)


def test_energy_closed_form():
    e = mp_energy(TWO)
    ref = 2 * (1.2**2 + 0.8**2 + 2 * 1.2 * 0.8 * np.exp(-10))
    assert e == pytest.approx(ref, rel=1e-14)


def test_energy_conservation_and_reversal():
    states = mp_evolve(TWO, 10.0, rtol=1e-10, t_eval=np.linspace(0, 10, 21))
    e0 = mp_energy(TWO)
    assert max(abs(mp_energy(s) - e0) for s in states) / e0 <= 1e-8
    back = mp_evolve(states[-1], 0.0, rtol=1e-10)[-1]
    assert back.t == pytest.approx(0.0)
    assert np.max(np.abs(back.q - TWO.q)) <= 1e-7
    assert np.max(np.abs(back.p - TWO.p)) <= 1e-7


def test_mirror_symmetry():
    end = mp_evolve(TWO, 5.0)[-1]
    m = end.mirrored()
    ret = mp_evolve(m, m.t + 5.0)[-1].mirrored()
    assert ret.t == pytest.approx(0.0, abs=1e-12)
    assert np.max(np.abs(ret.q - TWO.q)) <= 1e-7


def test_faster_peakon_overtakes_without_collision():
    s = MultipeakonState(0, [-4.0, 0.0], [1.5, 0.5])
    states = mp_evolve(s, 12.0)
    assert min(st.min_gap() for st in states) > 0
    # the fast peakon transfers momentum forward; the ordering is preserved
    assert states[-1].p[1] > states[-1].p[0]


def test_peakon_antipeakon_collision_raises():
    s = MultipeakonState(0, [-1.0, 1.0], [1.0, -1.0])
    with pytest.raises(CollisionError) as info:
        mp_evolve(s, 10.0)
    assert 0 < info.value.t < 10
    assert info.value.states


def test_evolve_rejects_zero_interval():
    with pytest.raises(InvalidParameterError):
        mp_evolve(TWO, 0.0)


def test_particles_reproduce_field():
    g = Grid.symmetric(20.0, 0.02)
    x = g.x
    y = MomentumField(g, np.exp(-x**2))
    s = particles_from_momentum(y)
    u = multipeakon_field(s, g).values
    ref = np.sqrt(np.pi) / 4 * np.exp(0.25) * (
        np.exp(-x) * (1 + erf(x - 0.5)) + np.exp(x) * (1 - erf(x + 0.5)))
    assert np.max(np.abs(u - ref)) < 1e-4
    with pytest.raises(PreconditionError):
        particles_from_momentum(MomentumField(g, -np.ones(g.n)))


def test_field_at_matches_grid_sampling():
    g = Grid.symmetric(10.0, 0.1)
    np.testing.assert_allclose(mp_field_at(TWO, g.x), multipeakon_field(TWO, g).values)


def test_trajectory_csv_roundtrip(tmp_path):
    states = mp_evolve(TWO, 1.0, t_eval=[0, 0.5, 1.0])
    p = tmp_path / "traj.csv"
    write_trajectory_csv(p, states)
    back = read_trajectory_csv(p)
    assert len(back) == 3
    for a, b in zip(states, back):
        assert a.t == b.t
        np.testing.assert_array_equal(a.q, b.q)
        np.testing.assert_array_equal(a.p, b.p)
    assert p.read_text().splitlines()[0] == "t,q1,q2,p1,p2,energy"
