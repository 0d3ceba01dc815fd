import numpy as np
import pytest

import opdg
from opdg.simulate import Trajectory
from opdg.wtdo import CHATTER_TOL

from conftest import make_game


def synthetic_setup(samples):
    """1-state, 1-player setup whose gradient signal equals x(t)."""
    game = make_game(A=[[-1.0]], Bs=[[[1.0]]], Qs=[[[1.0]]],
                     Rs=[[[[1.0]]]], x0=[samples[0]])
    ne = opdg.NeSolution(P=[np.array([[1.0]])], K=[np.array([[1.0]])],
                         residual=0.0, iterations=1)
    x = np.asarray(samples, dtype=float).reshape(-1, 1)
    t = 0.001 * np.arange(len(samples))
    traj = Trajectory(t=t, x=x, u=-x, p=(1,))
    return game, ne, traj


def test_single_sign_change():
    game, ne, traj = synthetic_setup([1.0, 0.5, -0.5, -1.0])
    crossings = opdg.extract_crossings(game, ne, traj)
    assert len(crossings) == 1
    cp = crossings[0]
    assert (cp.player, cp.channel) == (0, 0)
    assert cp.sign_plus == -1.0
    assert cp.t_plus - cp.t_minus == pytest.approx(traj.step)
    np.testing.assert_array_equal(cp.x_minus, [0.5])
    np.testing.assert_array_equal(cp.x_plus, [-0.5])


def test_constant_sign_yields_no_crossings():
    game, ne, traj = synthetic_setup([1.0, 0.8, 0.6, 0.4])
    assert opdg.extract_crossings(game, ne, traj) == []


def test_chatter_below_tolerance_is_dropped():
    eps = 0.1 * CHATTER_TOL
    game, ne, traj = synthetic_setup([1.0, eps, -eps, eps, -1.0])
    crossings = opdg.extract_crossings(game, ne, traj)
    # the eps-level flips are chatter; only the final real crossing stays
    assert len(crossings) == 1
    assert crossings[0].x_minus[0] == eps


def test_crossing_times_match_fine_grid_oracle(example2, ne2):
    coarse = opdg.simulate_closed_loop(example2, ne2.K, horizon=10.0,
                                       step=0.001)
    fine = opdg.simulate_closed_loop(example2, ne2.K, horizon=10.0,
                                     step=0.0001)
    cc = opdg.extract_crossings(example2, ne2, coarse)
    cf = opdg.extract_crossings(example2, ne2, fine)
    assert cc and cf
    for cp in cc:
        partners = [f for f in cf
                    if (f.player, f.channel) == (cp.player, cp.channel)]
        assert partners
        nearest = min(abs(f.t_plus - cp.t_plus) for f in partners)
        assert nearest <= coarse.step + 1e-12


def test_empty_crossing_list_is_valid(example2, ne2):
    pot = opdg.solve_wtdo(example2, ne2, [])
    assert pot.method_tag == "WTDO"
    assert np.linalg.eigvalsh(pot.Rp).min() >= 1.0 - 1e-7
    assert np.linalg.eigvalsh(pot.Qp).min() >= -1e-7


def test_example2_wtdo_contract(example2, ne2, traj2):
    crossings = opdg.extract_crossings(example2, ne2, traj2)
    pot = opdg.solve_wtdo(example2, ne2, crossings)
    B = opdg.stack_input_matrix(example2.dynamics)
    Kp = np.vstack(ne2.K)
    # hard gain equality
    assert np.abs(B.T @ pot.Pp - pot.Rp @ Kp).max() < 1e-7
    # PSD floors: Rp above identity, Qp and Pp in the cone
    assert np.linalg.eigvalsh(pot.Rp).min() >= 1.0 - 1e-7
    assert np.linalg.eigvalsh(pot.Qp).min() >= -1e-7
    assert np.linalg.eigvalsh(pot.Pp).min() >= -1e-7
    # eta consistency: the reported objective is the trace residual
    eta = np.trace(example2.dynamics.A.T @ pot.Pp
                   + pot.Pp @ example2.dynamics.A
                   - pot.Pp @ B @ Kp + pot.Qp)
    assert eta == pytest.approx(pot.extras["eta"], abs=1e-7)
    # quadratic-form agreement at every crossing sample used
    for cp in crossings:
        Bi = example2.dynamics.B[cp.player]
        for x in (cp.x_minus, cp.x_plus):
            g_pot = (Bi.T @ pot.Pp @ x)[cp.channel]
            g_orig = (Bi.T @ ne2.P[cp.player] @ x)[cp.channel]
            assert g_pot * g_orig >= 0


def test_example1_wtdo_is_feasible(example1, ne1, traj1):
    crossings = opdg.extract_crossings(example1, ne1, traj1)
    pot = opdg.solve_wtdo(example1, ne1, crossings)
    assert pot.extras["eta"] >= 0
    assert np.linalg.eigvalsh(pot.Rp).min() >= 1.0 - 1e-7


def test_wtdo_feasible_whenever_tfo_is(symmetric_scalar_game):
    # the crossing constraint set is weaker than channel rescaling, so a
    # trajectory-free success implies a weakly-dependent success
    game = symmetric_scalar_game
    ne = opdg.solve_coupled_are(game)
    opdg.solve_tfo(game, ne)     # must not raise
    traj = opdg.simulate_closed_loop(game, ne.K)
    crossings = opdg.extract_crossings(game, ne, traj)
    pot = opdg.solve_wtdo(game, ne, crossings)
    assert pot.method_tag == "WTDO"


def test_noisy_extraction_is_deterministic(example2, ne2, traj2):
    noisy = opdg.add_noise(traj2, 20.0, 5)
    a = opdg.extract_crossings(example2, ne2, noisy)
    b = opdg.extract_crossings(example2, ne2, noisy)
    assert len(a) == len(b) > 1
    assert all(x.t_plus == y.t_plus for x, y in zip(a, b))
