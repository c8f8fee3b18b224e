"""Command-line orchestration: run scenarios, write CSV outputs and reports.

Outputs per run (in the chosen output directory):

* ``energy.csv``   -- t,E,Estar,Ecal,D,theta_mean at the sample times,
* ``envelopes.csv``-- t,envelope_K,envelope_psi (nan before they apply),
* ``report.txt``   -- diagnostics and pass/fail verdicts,
* ``snapshot_<t>.csv`` -- optional state dumps.

Exit codes: 0 success, 2 a verdict failed, 1 runtime error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import config as cfgmod
from . import energy as en
from . import laws, rates, solver


def _write_energy_csv(path: str, result: solver.RunResult):
    with open(path, "w") as fh:
        fh.write(en.EnergyRecord.CSV_HEADER + "\n")
        for rec in result.records:
            fh.write(rec.csv_row() + "\n")


def _write_snapshots(outdir: str, result: solver.RunResult):
    for t, st in result.snapshots.items():
        path = os.path.join(outdir, f"snapshot_{t:g}.csv")
        data = np.column_stack([result.grid.x, st.phi, st.v, st.psi,
                                st.w, st.theta, st.q])
        with open(path, "w") as fh:
            fh.write("x,phi,v,psi,w,theta,q\n")
            for row in data:
                fh.write(",".join(format(x, ".17g") for x in row) + "\n")


def _write_envelopes_csv(path: str, result, ep, law):
    times = result.times
    with open(path, "w") as fh:
        fh.write("t,envelope_K,envelope_psi\n")
        for t in times:
            ek = epsi = float("nan")
            if ep is not None and law is not None:
                if t >= ep.T0 and ep.E_cal_T0 > 0:
                    try:
                        ek = rates.lower_envelope_K(t, ep, law)
                    except (laws.DomainError, laws.SingularityError):
                        pass
                if t > ep.T0 + 1.0:
                    try:
                        epsi = rates.lower_envelope_psi(t, ep, law)
                    except laws.DomainError:
                        pass
            fh.write(f"{t:.17g},{ek:.17g},{epsi:.17g}\n")


def analyze_run(result: solver.RunResult, cfg) -> dict:
    """Compute the report diagnostics and verdicts for a finished run."""
    law = result.law
    out = {
        "chi": solver.compute_stability_number(result.params),
        "verdicts": {},
    }

    E = result.column("E")
    Ecal = result.column("Ecal")
    tm = result.column("theta_mean")
    out["E0"], out["ET"] = float(E[0]), float(E[-1])
    out["Ecal0"], out["EcalT"] = float(Ecal[0]), float(Ecal[-1])
    denom = max(E[0], 1e-30)

    drift = float(np.max(np.abs(E - E[0])) / denom)
    out["energy_drift"] = drift
    mono_slack = 1e-10 * denom
    out["verdicts"]["energy_monotone"] = bool(
        np.all(np.diff(E) <= mono_slack))
    out["theta_mean_drift"] = float(np.max(np.abs(tm - tm[0])))
    out["verdicts"]["theta_mean_conserved"] = out["theta_mean_drift"] <= 1e-10

    dissipative = (law is not None and result.profile.omega_nonempty) or \
        result.params.delta > 0
    if not dissipative:
        out["verdicts"]["energy_conserved"] = drift <= 1e-8

    audit = en.audit_dissipation(result)
    out["audit_residual"] = audit.residual
    out["verdicts"]["dissipation_audit"] = audit.passed

    if law is not None:
        out["H1"] = laws.check_H1(law, eps=0.5)
        out["H2"] = laws.check_H2(law)
        ep = rates.envelope_params_from_run(result, law, C1=cfg.C1,
                                            C_cal=cfg.C_cal)
        out["ep"] = ep
        if ep is not None:
            out["gamma"], out["sigma"], out["T0"] = ep.gamma, ep.sigma, ep.T0
            times = result.times
            mask = times >= ep.T0
            env = rates.lower_envelope_K(times[mask], ep, law)
            out["verdicts"]["envelope_dominance"] = bool(
                np.all(Ecal[mask] >= env - 1e-12 * denom))
            fit_mask = times > ep.T0 + 1.0
            if np.count_nonzero(fit_mask) >= 10:
                tf = times[fit_mask]
                env_psi = rates.lower_envelope_psi(tf, ep, law)
                try:
                    out["envelope_psi_exponent"] = rates.fit_decay_exponent(
                        tf, env_psi, (tf[0], tf[-1]))
                except ValueError:
                    pass
        else:
            out["gamma"] = rates.gamma_const(result.records[0].Estar,
                                             result.params.rho2)
            out["T0"] = None
    return out


def write_report(path: str, cfg, out: dict):
    lines = [f"scenario: {cfg.scenario or '(custom)'}",
             f"stability number chi = {out['chi']:.12g}",
             f"E(0) = {out['E0']:.12g}   E(T) = {out['ET']:.12g}",
             f"Ecal(0) = {out['Ecal0']:.12g}   Ecal(T) = {out['EcalT']:.12g}",
             f"max |E(t) - E(0)| / E(0) = {out['energy_drift']:.3e}",
             f"max |theta_mean drift| = {out['theta_mean_drift']:.3e}",
             f"dissipation audit residual = {out['audit_residual']:.3e}"]
    if "H1" in out:
        h1, h2 = out["H1"], out["H2"]
        lines.append(f"H1 check: {'PASS' if h1.passed else 'FAIL'} "
                     f"(c1={h1.c1:.4g}, c2={h1.c2:.4g})")
        lines.append(f"H2 check: {'PASS' if h2.passed else 'FAIL'} "
                     f"(Lambda limits [{h2.lambda_liminf:.4g}, "
                     f"{h2.lambda_limsup:.4g}]"
                     f"{', vanishing' if h2.lambda_vanishing else ''})")
    if "gamma" in out:
        lines.append(f"gamma = {out['gamma']:.12g}")
    if "sigma" in out:
        lines.append(f"sigma = {out['sigma']:.12g}")
    if out.get("T0") is not None:
        lines.append(f"T0 = {out['T0']:.12g}")
    elif "T0" in out:
        lines.append("T0 = not reached (increase T to enter the decay regime)")
    if "envelope_psi_exponent" in out:
        lines.append(
            f"fitted envelope exponent = {out['envelope_psi_exponent']:.6g}")
    for name, ok in out["verdicts"].items():
        lines.append(f"verdict {name}: {'PASS' if ok else 'FAIL'}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def run_scenario(cfg) -> int:
    """Run one config end to end; returns the process exit code."""
    os.makedirs(cfg.out, exist_ok=True)
    report_path = os.path.join(cfg.out, "report.txt")
    try:
        result = solver.run(cfg)
        out = analyze_run(result, cfg)
        _write_energy_csv(os.path.join(cfg.out, "energy.csv"), result)
        _write_envelopes_csv(os.path.join(cfg.out, "envelopes.csv"),
                             result, out.get("ep"), result.law)
        _write_snapshots(cfg.out, result)
        write_report(report_path, cfg, out)
    except Exception as exc:
        with open(report_path, "w") as fh:
            fh.write(f"runtime error: {exc}\n")
        traceback.print_exc()
        return 1
    if all(out["verdicts"].values()):
        return 0
    return 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="timolab",
        description="Damped thermoelastic beam: runs, energies, decay envelopes")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--scenario", help="preset scenario name")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--N", type=int, help="override grid cells")
    parser.add_argument("--dt", type=float, help="override time step")
    parser.add_argument("--T", type=float, help="override final time")
    parser.add_argument("--list", action="store_true",
                        help="list preset scenarios and exit")
    parser.add_argument("--sweep", metavar="DIR",
                        help="run every *.cfg in DIR, one worker per config")
    args = parser.parse_args(argv)

    if args.list:
        for name, desc in cfgmod.list_presets():
            print(f"{name:20s} {desc}")
        return 0

    if args.sweep:
        paths = sorted(os.path.join(args.sweep, f)
                       for f in os.listdir(args.sweep) if f.endswith(".cfg"))
        if not paths:
            print(f"no .cfg files in {args.sweep}", file=sys.stderr)
            return 1
        def one(path):
            cfg = cfgmod.parse_config(path)
            if not cfg.out or cfg.out == "out":
                cfg.out = os.path.splitext(path)[0] + ".out"
            return run_scenario(cfg)
        with ThreadPoolExecutor(max_workers=min(4, len(paths))) as pool:
            codes = list(pool.map(one, paths))
        return max(codes)

    try:
        if args.config:
            cfg = cfgmod.parse_config(args.config)
        elif args.scenario:
            cfg = cfgmod.preset_config(args.scenario)
        else:
            parser.error("need --config, --scenario, --list, or --sweep")
        if args.out:
            cfg.out = args.out
        if args.N:
            cfg.N = args.N
        if args.dt:
            cfg.dt = args.dt
        if args.T:
            cfg.T = args.T
        cfg.__post_init__()
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return run_scenario(cfg)


if __name__ == "__main__":
    sys.exit(main())
