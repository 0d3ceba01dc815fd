"""Command-line front end.

Subcommands
-----------
ne <game.json>                 solve the feedback Nash equilibrium
identify <game.json> ...       run one or all identification methods
simulate <game.json> ...       closed-loop equilibrium trajectory CSV
verify <game.json> <pot.json>  ordinal/exact verification of a potential
reproduce {example1,example2}  full report bundle for a bundled game

Exit codes: 0 success, 2 input validation, 3 numerical failure,
4 infeasible identification.
"""

from __future__ import annotations

import argparse
import json
import math
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import plots
from .datafiles import builtin_game, builtin_game_dict, reference_values
from .errors import (InfeasibleTfo, InfeasibleWtdo, NoConvergence,
                     NoImprovement, NotStabilizable, OpdgError, SolverFailure)
from .game import (LqGame, PotentialFunction, load_game, save_game,
                   stack_input_matrix, validate_game, game_from_dict)
from .ido import IdoConfig, solve_ido
from .riccati import solve_coupled_are, solve_single_are
from .simulate import (add_noise, simulate_closed_loop, trajectory_error,
                       write_trajectory_csv)
from .tfo import check_feasibility, solve_tfo
from .verify import check_exact_potential, hamiltonian_gradients, verify_opdg
from .wtdo import extract_crossings, solve_wtdo

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4

SWEEP_SNRS_DB = (10.0, 20.0, 30.0, 40.0, math.inf)
DEFAULT_SEEDS = 11


def _arr(M):
    return np.asarray(M).tolist()


def potential_to_dict(pot: PotentialFunction) -> dict:
    return {
        "method": pot.method_tag,
        "Qp": _arr(pot.Qp),
        "Rp": _arr(pot.Rp),
        "Pp": _arr(pot.Pp),
        "Kp": _arr(pot.Kp),
        "omega": [_arr(w) for w in pot.omega] if pot.omega else None,
        "alpha": pot.alpha,
    }


def potential_from_dict(data: dict) -> PotentialFunction:
    if "potential" in data:
        data = data["potential"]
    return PotentialFunction(
        Qp=np.array(data["Qp"], dtype=float),
        Rp=np.array(data["Rp"], dtype=float),
        Pp=np.array(data["Pp"], dtype=float),
        Kp=np.array(data["Kp"], dtype=float),
        method_tag=data.get("method", "IDO"),
        omega=[np.array(w, dtype=float) for w in data["omega"]]
        if data.get("omega") else None,
        alpha=data.get("alpha"))


def feasibility_to_dict(rep) -> dict:
    return {
        "condition_a": rep.condition_a,
        "condition_b_value": rep.condition_b_value,
        "condition_b": rep.condition_b,
        "consistency_ranks": [list(r) for r in rep.consistency_ranks],
        "advisory": rep.advisory,
    }


def _load_and_validate(path):
    game = load_game(path)
    violations = validate_game(game)
    if violations:
        for v in violations:
            print(f"validation: {v}", file=sys.stderr)
        return None
    return game


def _split_gain(game: LqGame, K: np.ndarray):
    out = []
    off = 0
    for pi in game.dynamics.p:
        out.append(K[off:off + pi, :])
        off += pi
    return out


def potential_trajectory(game: LqGame, pot: PotentialFunction, horizon,
                         step):
    """Closed loop of the potential cost's own Riccati feedback."""
    B = stack_input_matrix(game.dynamics)
    _, K = solve_single_are(game.dynamics.A, B, pot.Qp, pot.Rp)
    return simulate_closed_loop(game, _split_gain(game, K),
                                horizon=horizon, step=step)


def run_identification(game, ne, method, traj_clean, traj_ident,
                       ido_evals=None):
    """One method end to end; returns a report dict (+ artifacts).

    Wall time covers the identification solve only, including crossing
    extraction for the trajectory-dependent methods; the equilibrium
    solve and the simulations are excluded.
    """
    report = {"method_tag": method.upper(), "feasible": False}
    pot = None
    t0 = time.perf_counter()
    try:
        if method == "tfo":
            pot = solve_tfo(game, ne)
        elif method == "wtdo":
            crossings = extract_crossings(game, ne, traj_ident)
            pot = solve_wtdo(game, ne, crossings)
            report["n_crossings"] = len(crossings)
        elif method == "ido":
            cfg = IdoConfig() if ido_evals is None else \
                IdoConfig(max_evals=ido_evals)
            pot = solve_ido(game, ne, traj_ident, cfg)
        else:
            raise ValueError(f"unknown method {method!r}")
    except InfeasibleTfo as exc:
        report["infeasible"] = str(exc)
        report["feasibility"] = feasibility_to_dict(exc.report)
        report["infeasibility_measure"] = exc.infeasibility
    except InfeasibleWtdo as exc:
        report["infeasible"] = str(exc)
        report["infeasibility_measure"] = exc.infeasibility
    report["wall_time_seconds"] = time.perf_counter() - t0
    if pot is None:
        return report, None, None

    report["feasible"] = True
    report["potential"] = potential_to_dict(pot)
    traj_pot = potential_trajectory(game, pot, horizon=traj_clean.t[-1],
                                    step=traj_clean.step)
    report["e_x"] = trajectory_error(traj_pot, traj_clean)
    ver = verify_opdg(game, ne, pot, traj_clean)
    report["verification"] = {
        "pass_rate": ver.pass_rate,
        "worst_violation": ver.worst_violation,
        "max_misalignment_samples": (
            None if math.isinf(ver.max_misalignment)
            else ver.max_misalignment),
    }
    if pot.extras:
        report["extras"] = {
            k: v for k, v in pot.extras.items()
            if isinstance(v, (int, float, str))}
    return report, pot, traj_pot


# --- subcommands ------------------------------------------------------------


def cmd_ne(args):
    game = _load_and_validate(args.game)
    if game is None:
        return EXIT_VALIDATION
    try:
        ne = solve_coupled_are(game)
    except (NotStabilizable, NoConvergence) as exc:
        print(f"equilibrium solve failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    Acl = ne.closed_loop(game.dynamics)
    eigs = np.linalg.eigvals(Acl)
    out = {
        "P": [_arr(Pi) for Pi in ne.P],
        "K": [_arr(Ki) for Ki in ne.K],
        "residual": ne.residual,
        "iterations": ne.iterations,
        "closed_loop_eigenvalues": [
            {"re": float(e.real), "im": float(e.imag)} for e in eigs],
    }
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_identify(args):
    game = _load_and_validate(args.game)
    if game is None:
        return EXIT_VALIDATION
    methods = ["tfo", "wtdo", "ido"] if args.all else [args.method]
    if methods == [None]:
        print("choose --method {tfo,wtdo,ido} or --all", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        ne = solve_coupled_are(game)
        traj_clean = simulate_closed_loop(game, ne.K)
    except OpdgError as exc:
        print(f"equilibrium pipeline failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    traj_ident = traj_clean
    if args.snr is not None and not math.isinf(args.snr):
        traj_ident = add_noise(traj_clean, args.snr, args.seed)

    outdir = Path(args.out) if args.out else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(traj_clean, outdir / "trajectory_ne.csv")

    reports = []
    worst_exit = EXIT_OK
    for method in methods:
        try:
            report, pot, traj_pot = run_identification(
                game, ne, method, traj_clean, traj_ident,
                ido_evals=args.ido_evals)
        except (SolverFailure, NoImprovement, NoConvergence,
                NotStabilizable) as exc:
            print(f"{method}: {exc}", file=sys.stderr)
            if not args.all:
                return EXIT_NUMERICAL
            reports.append({"method_tag": method.upper(), "feasible": False,
                            "error": str(exc)})
            worst_exit = EXIT_NUMERICAL
            continue
        reports.append(report)
        if not report["feasible"]:
            if not args.all:
                print(json.dumps(report, indent=2))
                return EXIT_INFEASIBLE
            continue
        if outdir and pot is not None:
            write_trajectory_csv(
                traj_pot, outdir / f"trajectory_{method}.csv")
            grads = hamiltonian_gradients(game, ne, pot, traj_clean)
            _write_gradients_csv(
                grads, traj_clean.t, outdir / f"gradients_{method}.csv")
            plots.plot_state_comparison(
                traj_clean, traj_pot, outdir / f"states_{method}.png",
                title=f"{method.upper()} potential vs original game")
            plots.plot_gradient_comparison(
                traj_clean.t, grads, outdir / f"gradients_{method}.png",
                title=f"{method.upper()} gradient signals")

    payload = reports if args.all else reports[0]
    text = json.dumps(payload, indent=2)
    if outdir:
        (outdir / "report.json").write_text(text + "\n")
    print(text)
    if args.all:
        any_ok = any(r.get("feasible") for r in reports)
        return EXIT_OK if any_ok else max(worst_exit, EXIT_INFEASIBLE)
    return EXIT_OK


def _write_gradients_csv(grads, t, path):
    cols = ["t"]
    series = [t]
    for i, (go, gp) in enumerate(zip(grads.g_orig, grads.g_pot)):
        for j in range(go.shape[1]):
            cols.append(f"g_orig_p{i + 1}c{j + 1}")
            series.append(go[:, j])
            cols.append(f"g_pot_p{i + 1}c{j + 1}")
            series.append(gp[:, j])
    data = np.column_stack(series)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def cmd_simulate(args):
    game = _load_and_validate(args.game)
    if game is None:
        return EXIT_VALIDATION
    try:
        ne = solve_coupled_are(game)
        traj = simulate_closed_loop(game, ne.K, horizon=args.horizon,
                                    step=args.step)
    except OpdgError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.out:
        write_trajectory_csv(traj, args.out)
    else:
        n = traj.x.shape[1]
        m = traj.u.shape[1]
        header = ",".join(["t"] + [f"x{i + 1}" for i in range(n)]
                          + [f"u{j + 1}" for j in range(m)])
        print(header)
        for k in range(len(traj.t)):
            row = np.concatenate([[traj.t[k]], traj.x[k], traj.u[k]])
            print(",".join(f"{v:.17g}" for v in row))
    return EXIT_OK


def cmd_verify(args):
    game = _load_and_validate(args.game)
    if game is None:
        return EXIT_VALIDATION
    try:
        with open(args.potential) as fh:
            pot = potential_from_dict(json.load(fh))
    except (OSError, ValueError, KeyError) as exc:
        print(f"could not read potential: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        ne = solve_coupled_are(game)
        traj = simulate_closed_loop(game, ne.K)
    except OpdgError as exc:
        print(f"equilibrium pipeline failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    rep = verify_opdg(game, ne, pot, traj)
    exact, resid = check_exact_potential(game, pot, ne)
    out = {
        "pass_rate": rep.pass_rate,
        "worst_violation": rep.worst_violation,
        "sign_tolerance": rep.sign_tol,
        "max_misalignment_samples": (
            None if math.isinf(rep.max_misalignment)
            else rep.max_misalignment),
        "exact_potential": exact,
        "exact_potential_residual": resid,
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _median_sweep(game, ne, traj_clean, snrs, seeds, ido_evals):
    """Median trajectory error per method over noisy identifications."""
    def one(snr, seed):
        traj_noisy = add_noise(traj_clean, snr, seed)
        out = {}
        for method in ("wtdo", "ido"):
            try:
                rep, _, _ = run_identification(
                    game, ne, method, traj_clean, traj_noisy,
                    ido_evals=ido_evals)
                out[method] = rep.get("e_x")
            except OpdgError:
                out[method] = None
        return out

    results = {}
    with ThreadPoolExecutor(max_workers=4) as pool:
        futures = {(snr, seed): pool.submit(one, snr, seed)
                   for snr in snrs for seed in range(seeds)}
        for key, fut in futures.items():
            results[key] = fut.result()

    medians = {"WTDO": [], "IDO": []}
    per_seed = {}
    for snr in snrs:
        for tag, method in (("WTDO", "wtdo"), ("IDO", "ido")):
            vals = [results[snr, seed][method] for seed in range(seeds)
                    if results[snr, seed][method] is not None]
            medians[tag].append(statistics.median(vals) if vals else None)
        per_seed[str(snr)] = {
            f"seed{seed}": results[snr, seed] for seed in range(seeds)}
    return medians, per_seed


def cmd_reproduce(args):
    name = args.which
    outdir = Path(args.out) if args.out else Path(f"reproduce-{name}")
    outdir.mkdir(parents=True, exist_ok=True)
    game = game_from_dict(builtin_game_dict(name))
    save_game(game, outdir / "game.json")
    ref = reference_values(name)

    rc = cmd_ne(argparse.Namespace(game=outdir / "game.json",
                                   out=outdir / "ne.json"))
    if rc != EXIT_OK:
        return rc
    ne = solve_coupled_are(game)
    traj_clean = simulate_closed_loop(game, ne.K)
    write_trajectory_csv(traj_clean, outdir / "trajectory_ne.csv")

    reports = {}
    for method in ("tfo", "wtdo", "ido"):
        report, pot, traj_pot = run_identification(
            game, ne, method, traj_clean, traj_clean,
            ido_evals=args.ido_evals)
        reports[method] = report
        (outdir / f"ident_{method}.json").write_text(
            json.dumps(report, indent=2) + "\n")
        if pot is not None:
            write_trajectory_csv(traj_pot,
                                 outdir / f"trajectory_{method}.csv")
            grads = hamiltonian_gradients(game, ne, pot, traj_clean)
            _write_gradients_csv(grads, traj_clean.t,
                                 outdir / f"gradients_{method}.csv")
            plots.plot_state_comparison(
                traj_clean, traj_pot, outdir / f"states_{method}.png",
                title=f"{name}: {method.upper()} potential vs original")
            plots.plot_gradient_comparison(
                traj_clean.t, grads, outdir / f"gradients_{method}.png",
                title=f"{name}: {method.upper()} gradient signals")

    sweep = None
    if name == "example2":
        medians, per_seed = _median_sweep(
            game, ne, traj_clean, SWEEP_SNRS_DB, args.seeds,
            args.ido_evals)
        sweep = {"snr_db": [("inf" if math.isinf(s) else s)
                            for s in SWEEP_SNRS_DB],
                 "seeds": args.seeds,
                 "median_e_x": medians,
                 "per_seed": per_seed}
        (outdir / "noise_sweep.json").write_text(
            json.dumps(sweep, indent=2) + "\n")
        with open(outdir / "noise_sweep.csv", "w") as fh:
            fh.write("snr_db,median_ex_wtdo,median_ex_ido\n")
            for k, snr in enumerate(SWEEP_SNRS_DB):
                fh.write(f"{snr},{medians['WTDO'][k]},{medians['IDO'][k]}\n")
        finite = [s for s in SWEEP_SNRS_DB if not math.isinf(s)]
        plots.plot_noise_sweep(
            finite,
            {tag: vals[:len(finite)] for tag, vals in medians.items()},
            outdir / "noise_sweep.png",
            title=f"{name}: identification error vs measurement noise")

    _write_summary(outdir, name, ne, reports, ref, sweep)
    print(f"bundle written to {outdir}")
    return EXIT_OK


def _fmt_matrix(M, digits=3):
    M = np.asarray(M)
    body = "; ".join(" ".join(f"{v:.{digits}f}" for v in row) for row in M)
    return f"[{body}]"


def _write_summary(outdir, name, ne, reports, ref, sweep):
    lines = [f"# Reproduction summary: {name}", ""]
    lines.append("## Equilibrium gains")
    lines.append("")
    lines.append("| player | computed | reference |")
    lines.append("|---|---|---|")
    for i, Ki in enumerate(ne.K):
        lines.append(f"| {i + 1} | {_fmt_matrix(Ki, 3)} | "
                     f"{_fmt_matrix(ref['K'][i], 2)} |")
    lines.append("")
    lines.append("## Identification")
    lines.append("")
    lines.append("| method | feasible | e_x | wall time [s] | reference e_x |")
    lines.append("|---|---|---|---|---|")
    ref_ex = ref.get("ex_table", {})
    ref2 = ref.get("ex_noise_table")
    for method in ("tfo", "wtdo", "ido"):
        rep = reports[method]
        tag = method.upper()
        if ref_ex:
            rx = ref_ex.get(tag, "-")
        elif ref2 and tag in ref2:
            rx = ref2[tag][-1]     # noise-free column
        else:
            rx = "-"
        ex = f"{rep['e_x']:.4f}" if rep.get("feasible") else "-"
        lines.append(
            f"| {tag} | {rep.get('feasible')} | {ex} | "
            f"{rep['wall_time_seconds']:.3f} | {rx} |")
    lines.append("")
    if "Qp_tfo" in ref:
        lines.append("Reference trajectory-free potential matrices "
                     "(for comparison when feasible):")
        lines.append("")
        lines.append(f"- reference Qp: {_fmt_matrix(ref['Qp_tfo'], 2)}")
        lines.append(f"- reference Rp: {_fmt_matrix(ref['Rp_tfo'], 2)}")
        if reports["tfo"].get("feasible"):
            pot = reports["tfo"]["potential"]
            lines.append(f"- computed Qp: {_fmt_matrix(pot['Qp'], 2)}")
            lines.append(f"- computed Rp: {_fmt_matrix(pot['Rp'], 2)}")
        else:
            lines.append("- computed: infeasible for this game "
                         "(see ident_tfo.json for the structural report)")
        lines.append("")
    if "Qp_wtdo" in ref and reports["wtdo"].get("feasible"):
        pot = reports["wtdo"]["potential"]
        lines.append("Weakly trajectory-dependent potential matrices:")
        lines.append("")
        lines.append(f"- computed Qp:  {_fmt_matrix(pot['Qp'], 2)}")
        lines.append(f"- reference Qp: {_fmt_matrix(ref['Qp_wtdo'], 2)}")
        lines.append(f"- computed Rp:  {_fmt_matrix(pot['Rp'], 2)}")
        lines.append(f"- reference Rp: {_fmt_matrix(ref['Rp_wtdo'], 2)}")
        lines.append("")
    if sweep:
        lines.append("## Noise sweep (median e_x over "
                     f"{sweep['seeds']} seeds)")
        lines.append("")
        header = "| method | " + " | ".join(
            str(s) for s in sweep["snr_db"]) + " |"
        lines.append(header)
        lines.append("|" + "---|" * (len(sweep["snr_db"]) + 1))
        for tag in ("WTDO", "IDO"):
            vals = " | ".join(
                f"{v:.3f}" if v is not None else "-"
                for v in sweep["median_e_x"][tag])
            lines.append(f"| {tag} | {vals} |")
        ref2 = ref.get("ex_noise_table")
        if ref2:
            lines.append("")
            lines.append("Reference single-run values:")
            for tag in ("WTDO", "IDO"):
                vals = ", ".join(str(v) for v in ref2[tag])
                lines.append(f"- {tag}: {vals} at SNR "
                             f"{ref2['snr_db']} dB")
    (outdir / "summary.md").write_text("\n".join(lines) + "\n")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="opdg",
        description="LQ differential games: feedback Nash equilibria and "
                    "ordinal potential identification")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ne", help="solve the feedback Nash equilibrium")
    p.add_argument("game")
    p.add_argument("--out", help="write the JSON here instead of stdout")
    p.set_defaults(func=cmd_ne)

    p = sub.add_parser("identify", help="identify a potential cost")
    p.add_argument("game")
    p.add_argument("--method", choices=("tfo", "wtdo", "ido"))
    p.add_argument("--all", action="store_true",
                   help="run all three methods and compare")
    p.add_argument("--snr", type=float, default=None,
                   help="add state noise at this SNR [dB] before "
                        "identification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for CSVs, figures, report")
    p.add_argument("--ido-evals", type=int, default=None,
                   help="budget for the input-dependent baseline")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("simulate", help="equilibrium trajectory CSV")
    p.add_argument("game")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--out", help="write the CSV here instead of stdout")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="verify a potential against a game")
    p.add_argument("game")
    p.add_argument("potential")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reproduce", help="full report bundle")
    p.add_argument("which", choices=("example1", "example2"))
    p.add_argument("--seeds", type=int, default=DEFAULT_SEEDS)
    p.add_argument("--out")
    p.add_argument("--ido-evals", type=int, default=None)
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except OpdgError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
