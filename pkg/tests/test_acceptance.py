"""Acceptance gate: one test per published criterion.

Each test prints a single PASS/FAIL line (visible with -s, and in the
failure report otherwise) and then asserts the criterion at its stated
tolerance.  Criteria that measure against published reference values
use the bundled reference tables verbatim.
"""

import math
import statistics
import time

import numpy as np
import pytest

import opdg
from opdg.cli import run_identification
from opdg.errors import InfeasibleTfo
from opdg.ido import IdoConfig
from opdg.riccati import RICCATI_TOL, coupled_residual
from opdg.sdp import check_solution

import test_sdp
import test_verify

REF1 = opdg.reference_values("example1")
REF2 = opdg.reference_values("example2")

SWEEP_SNRS = (10.0, 20.0, 30.0, 40.0)
SWEEP_SEEDS = 11
SWEEP_IDO_EVALS = 1200


def _report(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    return line


def test_criterion_1_example1_gains(example1):
    t0 = time.perf_counter()
    ne = opdg.solve_coupled_are(example1)
    elapsed = time.perf_counter() - t0
    worst = max(np.abs(Ki - np.array(ref)).max()
                for Ki, ref in zip(ne.K, REF1["K"]))
    ok = worst <= 0.005 and elapsed < 5.0
    line = _report(1, ok, f"max gain deviation {worst:.4f} (tol 0.005), "
                          f"runtime {elapsed:.2f}s (limit 5s)")
    assert ok, line


def test_criterion_2_example2_gains(example2):
    t0 = time.perf_counter()
    ne = opdg.solve_coupled_are(example2)
    elapsed = time.perf_counter() - t0
    worst = max(np.abs(Ki - np.array(ref)).max()
                for Ki, ref in zip(ne.K, REF2["K"]))
    ok = worst <= 0.005 and elapsed < 1.0
    line = _report(2, ok, f"max gain deviation {worst:.4f} (tol 0.005), "
                          f"runtime {elapsed:.2f}s (limit 1s)")
    assert ok, line


def test_criterion_3_tfo_example1(example1, ne1):
    try:
        pot = opdg.solve_tfo(example1, ne1)
    except InfeasibleTfo as exc:
        line = _report(3, False,
                       "trajectory-free identification infeasible on "
                       f"example1 (dimension count "
                       f"{exc.report.condition_b_value}, measure "
                       f"{exc.infeasibility:.3g}); no solution to compare "
                       "against the reference matrices")
        pytest.fail(line)
    dq = np.abs(pot.Qp - np.array(REF1["Qp_tfo"])).max()
    dr = np.abs(pot.Rp - np.array(REF1["Rp_tfo"])).max()
    B = opdg.stack_input_matrix(example1.dynamics)
    Kp = np.vstack(ne1.K)
    lyap = example1.dynamics.A.T @ pot.Pp + pot.Pp @ example1.dynamics.A \
        - pot.Pp @ B @ Kp + pot.Qp
    r_b = np.abs(lyap).max()
    r_c = np.abs(B.T @ pot.Pp - pot.Rp @ Kp).max()
    r_d = max(np.abs(np.diag(w)[:, None] * (Bi.T @ Pi) - Bi.T @ pot.Pp).max()
              for Bi, Pi, w in zip(example1.dynamics.B, ne1.P, pot.omega))
    blk = np.block([[pot.Qp, np.zeros((example1.n, example1.m))],
                    [np.zeros((example1.m, example1.n)), pot.Rp]])
    eigs = np.linalg.eigvalsh(blk)
    _, K = opdg.solve_single_are(example1.dynamics.A, B, pot.Qp, pot.Rp)
    gain_dev = np.abs(K - Kp).max()
    ok = (dq <= 0.15 and dr <= 0.15 and max(r_b, r_c, r_d) < 1e-6
          and eigs.min() >= 1 - 1e-7 and eigs.max() <= pot.alpha + 1e-7
          and gain_dev <= 1e-4)
    line = _report(3, ok, f"dQ={dq:.3f} dR={dr:.3f} residuals "
                          f"{max(r_b, r_c, r_d):.2e} gain dev {gain_dev:.2e}")
    assert ok, line


@pytest.fixture(scope="module")
def table1_runs(example1, ne1, traj1):
    out = {}
    for method in ("tfo", "wtdo", "ido"):
        report, pot, _ = run_identification(example1, ne1, method, traj1,
                                            traj1)
        out[method] = report
    return out


def test_criterion_4_table1_errors_and_time_ordering(table1_runs):
    tfo, wtdo, ido = (table1_runs[m] for m in ("tfo", "wtdo", "ido"))
    parts = []
    ok = True
    if tfo.get("feasible") and tfo.get("e_x") is not None:
        parts.append(f"e_x(TFO)={tfo['e_x']:.4f}")
        ok &= tfo["e_x"] <= 0.05
    else:
        parts.append("e_x(TFO)=unavailable (infeasible)")
        ok = False
    for tag, rep, bound in (("WTDO", wtdo, 0.15), ("IDO", ido, 0.15)):
        if rep.get("e_x") is not None:
            parts.append(f"e_x({tag})={rep['e_x']:.4f}")
            ok &= 0.0 <= rep["e_x"] <= bound
        else:
            parts.append(f"e_x({tag})=unavailable")
            ok = False
    times = [tfo["wall_time_seconds"], wtdo["wall_time_seconds"],
             ido["wall_time_seconds"]]
    parts.append("t=" + "/".join(f"{t:.3f}s" for t in times))
    ok &= times[0] < times[1] < times[2]
    line = _report(4, ok, ", ".join(parts))
    assert ok, line


def test_criterion_5_tfo_example2_infeasible(example2, ne2):
    try:
        opdg.solve_tfo(example2, ne2)
        line = _report(5, False, "expected infeasibility did not occur")
        pytest.fail(line)
    except InfeasibleTfo as exc:
        value = exc.report.condition_b_value
        ok = value == 0.0
        line = _report(5, ok, f"infeasible as required, dimension count "
                              f"= {value} (must be exactly 0)")
        assert ok, line


def test_criterion_6_wtdo_example2(example2, ne2, traj2):
    crossings = opdg.extract_crossings(example2, ne2, traj2)
    pot = opdg.solve_wtdo(example2, ne2, crossings)
    dq = np.abs(pot.Qp - np.array(REF2["Qp_wtdo"])).max()
    report, _, _ = run_identification(example2, ne2, "wtdo", traj2, traj2)
    e_x = report["e_x"]
    ok = dq <= 0.15 and e_x <= 0.01
    line = _report(6, ok, f"dQ={dq:.3f} (tol 0.15), e_x={e_x:.4f} "
                          f"(limit 0.01)")
    assert ok, line


@pytest.fixture(scope="module")
def noise_sweep(example2, ne2, traj2):
    medians = {"wtdo": [], "ido": []}
    for snr in SWEEP_SNRS:
        values = {"wtdo": [], "ido": []}
        for seed in range(SWEEP_SEEDS):
            noisy = opdg.add_noise(traj2, snr, seed)
            for method in ("wtdo", "ido"):
                rep, _, _ = run_identification(
                    example2, ne2, method, traj2, noisy,
                    ido_evals=SWEEP_IDO_EVALS)
                if rep.get("e_x") is not None:
                    values[method].append(rep["e_x"])
        for method in ("wtdo", "ido"):
            medians[method].append(
                statistics.median(values[method]) if values[method]
                else math.inf)
    return medians


def test_criterion_7_noise_trend_and_dominance(noise_sweep):
    med_w = noise_sweep["wtdo"]
    med_i = noise_sweep["ido"]
    # SWEEP_SNRS ascend, so each series must be non-increasing
    mono_w = all(a >= b - 1e-12 for a, b in zip(med_w, med_w[1:]))
    mono_i = all(a >= b - 1e-12 for a, b in zip(med_i, med_i[1:]))
    dominance = all(w < i for w, i in zip(med_w, med_i))
    low_snr_ok = med_w[0] <= 0.6
    ok = mono_w and mono_i and dominance and low_snr_ok
    fmt = lambda xs: "[" + ", ".join(f"{x:.3f}" for x in xs) + "]"
    line = _report(7, ok,
                   f"median e_x WTDO {fmt(med_w)} IDO {fmt(med_i)} at "
                   f"SNR {list(SWEEP_SNRS)} dB; monotone "
                   f"(W/I)={mono_w}/{mono_i}, WTDO<IDO everywhere="
                   f"{dominance}, WTDO@10dB<=0.6={low_snr_ok}")
    assert ok, line


def test_criterion_8_verification_of_identified_potentials(
        example1, ne1, traj1, example2, ne2, traj2):
    failures = []
    checked = 0
    for game, ne, traj, tag in ((example1, ne1, traj1, "example1"),
                                (example2, ne2, traj2, "example2")):
        for method in ("tfo", "wtdo", "ido"):
            rep, pot, _ = run_identification(game, ne, method, traj, traj)
            if pot is None:
                continue
            checked += 1
            ver = opdg.verify_opdg(game, ne, pot, traj)
            if ver.pass_rate != 1.0 or ver.max_misalignment > 1.0:
                failures.append(
                    f"{tag}/{method}: pass_rate={ver.pass_rate:.4f} "
                    f"misalignment={ver.max_misalignment}")
    ok = checked > 0 and not failures
    line = _report(8, ok, f"{checked} potentials checked; "
                          + ("all aligned" if ok else "; ".join(failures)))
    assert ok, line


def test_criterion_9_property_suites(example1, example2, ne1, ne2,
                                     symmetric_scalar_game):
    detail = []
    # coupled re-substitution residuals
    r1 = coupled_residual(example1, ne1.P)
    r2 = coupled_residual(example2, ne2.P)
    assert r1 < RICCATI_TOL and r2 < RICCATI_TOL
    detail.append(f"residuals {r1:.1e}/{r2:.1e}")
    # scaling invariance of the gain
    dyn = example1.dynamics
    Q, R = example1.costs[0].Q, example1.costs[0].R[0]
    _, K_base = opdg.solve_single_are(dyn.A, dyn.B[0], Q, R)
    for gamma in (0.5, 2.0, 10.0):
        _, K = opdg.solve_single_are(dyn.A, dyn.B[0], gamma * Q, gamma * R)
        assert np.abs(K - K_base).max() < 1e-6
    detail.append("gain scale-invariant")
    # cone solutions pass the independent checker and match the oracles
    for case in test_sdp.ORACLE_CASES:
        prob, sol = test_sdp.solve_case(case)
        assert sol.status == "Optimal"
        assert check_solution(prob, sol)["ok"]
        assert abs(sol.objective_value
                   - test_sdp.oracle_optimum(case)) <= 1e-6
    detail.append("3 oracle problems matched")
    # integrator order check
    test_kwargs = {}
    test_mod = __import__("test_simulate")
    test_mod.test_rk4_is_fourth_order(**test_kwargs)
    detail.append("integrator order ~4")
    # exact implies ordinal on the constructed symmetric game
    game = symmetric_scalar_game
    ne = opdg.solve_coupled_are(game)
    pot = test_verify.symmetric_exact_potential(game, ne)
    exact, _ = opdg.check_exact_potential(game, pot, ne)
    traj = opdg.simulate_closed_loop(game, ne.K)
    rep = opdg.verify_opdg(game, ne, pot, traj)
    assert exact and rep.pass_rate == 1.0
    detail.append("exact=>ordinal")
    line = _report(9, True, "; ".join(detail))
    assert line
