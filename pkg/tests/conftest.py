import numpy as np
import pytest

import opdg


@pytest.fixture(scope="session")
def example1():
    return opdg.builtin_game("example1")


@pytest.fixture(scope="session")
def example2():
    return opdg.builtin_game("example2")


@pytest.fixture(scope="session")
def ne1(example1):
    return opdg.solve_coupled_are(example1)


@pytest.fixture(scope="session")
def ne2(example2):
    return opdg.solve_coupled_are(example2)


@pytest.fixture(scope="session")
def traj1(example1, ne1):
    return opdg.simulate_closed_loop(example1, ne1.K)


@pytest.fixture(scope="session")
def traj2(example2, ne2):
    return opdg.simulate_closed_loop(example2, ne2.K)


def make_game(A, Bs, Qs, Rs, x0):
    return opdg.LqGame(
        dynamics=opdg.LtiDynamics(A=np.asarray(A, dtype=float),
                                  B=[np.asarray(B, dtype=float) for B in Bs]),
        costs=[opdg.PlayerCost(Q=np.asarray(Q, dtype=float),
                               R=[np.asarray(Rj, dtype=float) for Rj in R])
               for Q, R in zip(Qs, Rs)],
        x0=np.asarray(x0, dtype=float))


@pytest.fixture(scope="session")
def symmetric_scalar_game():
    """Two identical players on a stable scalar plant; its coupled
    equilibrium is P1 = P2 = 1/3 and it admits an exact potential."""
    return make_game(
        A=[[-1.0]], Bs=[[[1.0]], [[1.0]]],
        Qs=[[[1.0]], [[1.0]]],
        Rs=[[[[1.0]], [[0.0]]], [[[0.0]], [[1.0]]]],
        x0=[1.0])
