"""Command line entry point: validate | analyze | margin | simulate."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig, load_config
from .diagnostics import lyapunov_series
from .errors import BaseInfeasible, BracketInvalid, ConsensusError, SchemaError
from .graph import check_topology, laplacian
from .lmi import VariableValues
from .margins import MarginQuery, bisect_scale, coordinate_margins, probe
from .model import (AgentSystem, assemble_error_system, feedback_is_hurwitz, is_stabilizable,
                    modal_zero_delay_check)
from .sdp import Certificate, SolverOptions
from .simulate import simulate_x, to_error_coordinates, simulate_z
from .linalg import spectral_abscissa

log = logging.getLogger("delay_consensus")

REFERENCE_A = np.array([[-2.0, 2.0], [-1.0, 1.0]])
REFERENCE_B = np.array([[1.0], [0.0]])
REFERENCE_L = np.array([[0.0, 0, 0], [-1, 2, -1], [0, -1, 1]])
REFERENCE_TAU_BAR = (0.29, 0.18, 0.18)
CONSENSUS_TOL = 1e-3


def is_reference_example(cfg: RunConfig) -> bool:
    sys_ = cfg.agent_system()
    g = cfg.delay_graph()
    return (sys_.A.shape == REFERENCE_A.shape and np.allclose(sys_.A, REFERENCE_A)
            and sys_.B.shape == REFERENCE_B.shape and np.allclose(sys_.B, REFERENCE_B)
            and g.N == 3 and np.allclose(laplacian(g), REFERENCE_L))


def _fmt_vec(v) -> str:
    return "(" + ", ".join(f"{x:.4g}" for x in v) + ")"


class Report:
    def __init__(self, command: str):
        self.data = {"command": command, "errors": [], "warnings": []}
        self.lines = []

    def error(self, msg: str):
        self.data["errors"].append(msg)

    def warn(self, msg: str):
        self.data["warnings"].append(msg)

    def say(self, msg: str):
        self.lines.append(msg)

    @property
    def ok(self) -> bool:
        return not self.data["errors"]

    def summary(self) -> str:
        out = [f"delay-consensus {self.data['command']}"] + self.lines
        out += [f"WARNING: {w}" for w in self.data["warnings"]]
        out += [f"ERROR: {e}" for e in self.data["errors"]]
        return "\n".join(out) + "\n"

    def write(self, out: Path):
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.data, indent=2, default=_jsonable) + "\n")
        (out / "summary.txt").write_text(self.summary())


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o)}")


def assumption_checks(cfg: RunConfig, rep: Report) -> Optional[AgentSystem]:
    sys_ = cfg.agent_system()
    g = cfg.delay_graph()
    topo = check_topology(g, warn=False)
    rep.data["topology"] = {
        "strongly_connected": topo.strongly_connected,
        "has_spanning_tree": topo.has_spanning_tree,
        "roots": list(topo.roots),
        "scc_count": topo.scc_count,
        "laplacian_eigenvalues": [[complex(x).real, complex(x).imag] for x in topo.laplacian_eigenvalues],
        "delay_index": {f"{e.source}->{e.target}": k for e, k in zip(g.edges, g.k)},
    }
    stab = is_stabilizable(sys_.A, sys_.B)
    hurwitz = feedback_is_hurwitz(sys_)
    checks = {"stabilizable": stab, "feedback_hurwitz": hurwitz,
              "spanning_tree": topo.has_spanning_tree,
              "feedback_abscissa": spectral_abscissa(sys_.A - sys_.BK)}
    rep.data["assumptions"] = checks
    rep.say(f"topology: spanning tree={topo.has_spanning_tree}, strongly connected={topo.strongly_connected}, "
            f"roots={list(topo.roots)}")
    rep.say(f"assumptions: (A,B) stabilizable={stab}, A-BK Hurwitz={hurwitz}")
    rep.warn(f"sign convention: coupling sum multiplied by sigma={cfg.system.sigma} "
             "(sigma=-1 is the stabilizing relative-state feedback)")
    if not topo.has_spanning_tree:
        rep.error("Assumption 1 violated: the graph has no directed spanning tree")
        return None
    if not topo.strongly_connected:
        rep.warn("graph has a directed spanning tree but is not strongly connected")
    if not stab:
        rep.error("(A, B) is not stabilizable")
    if not hurwitz:
        rep.warn(f"gain premise fails: A - BK is not Hurwitz (spectral abscissa "
                 f"{checks['feedback_abscissa']:.4g})")
    modes = modal_zero_delay_check(sys_, g)
    rep.data["zero_delay_modes"] = [{"eigenvalue": [m.eigenvalue.real, m.eigenvalue.imag],
                                     "abscissa": m.abscissa, "unstable": m.unstable} for m in modes]
    bad = [m for m in modes if m.unstable]
    if bad:
        rep.warn("zero-delay consensus modes are unstable for Laplacian eigenvalue(s) "
                 + ", ".join(f"{m.eigenvalue.real:.4g}" for m in bad)
                 + "; the delay LMI cannot be feasible for any bounds")
    if is_reference_example(cfg) and not hurwitz:
        rep.warn("reference example inconsistency: the published gain leaves A - BK non-Hurwitz, "
                 "so its published delay bounds cannot be reproduced as ground truth")
    return sys_


def solver_options(cfg: RunConfig) -> SolverOptions:
    return SolverOptions(max_iter=cfg.solver.max_iter, tol=cfg.solver.tol)


def certificate_to_dict(cert: Certificate, tau_bar, mu) -> dict:
    v = cert.values
    return {
        "tau_bar": list(map(float, tau_bar)), "mu": list(map(float, mu)), "epsilon": cert.epsilon,
        "margins": dict(cert.margins),
        "P": v.P.tolist(), "Q": [q.tolist() for q in v.Q], "R": [x.tolist() for x in v.R],
        "S": {f"{k}_{j}": s.tolist() for (k, j), s in v.S.items()},
    }


def load_certificate(path):
    d = json.loads(Path(path).read_text())
    S = {tuple(int(x) for x in key.split("_")): np.array(m) for key, m in d["S"].items()}
    values = VariableValues(P=np.array(d["P"]), Q=[np.array(q) for q in d["Q"]],
                            R=[np.array(x) for x in d["R"]], S=S)
    return values, np.array(d["tau_bar"]), np.array(d["mu"])


def _write_certificate(out: Path, cert: Certificate, tau_bar, mu):
    out.mkdir(parents=True, exist_ok=True)
    (out / "certificate.json").write_text(json.dumps(certificate_to_dict(cert, tau_bar, mu), indent=2) + "\n")


def cmd_analyze(cfg, rep, out, fmt):
    es = assemble_error_system(cfg.agent_system(), cfg.delay_graph())
    tb, mu = cfg.delays.tau_bar, cfg.delays.mu
    res = probe(es, tb, mu, solver_options(cfg), cfg.solver.epsilon)
    feas = {"tau_bar": list(tb), "mu": list(mu), "status": res.status.value,
            "iterations": res.iterations, "objective": res.objective, "upper_bound": res.upper_bound}
    if res.feasible:
        feas["certificate_margins"] = dict(res.certificate.margins)
        feas["epsilon"] = res.certificate.epsilon
        _write_certificate(out, res.certificate, tb, mu)
    if res.farkas is not None:
        feas["farkas_residual"] = res.farkas.residual
    rep.data["feasibility"] = feas
    rep.say(f"feasibility at tau_bar={_fmt_vec(tb)}, mu={_fmt_vec(mu)}: {res.status.value.upper()} "
            f"(margin {res.objective:.4g}, {res.iterations} iterations)")
    if is_reference_example(cfg):
        rep.data["comparison"] = {"published_tau_bar": REFERENCE_TAU_BAR, "status": res.status.value}
        rep.say(f"comparison: published bounds {_fmt_vec(REFERENCE_TAU_BAR)}; "
                f"status at configured bounds {_fmt_vec(tb)} is {res.status.value.upper()}")


def cmd_margin(cfg, rep, out, fmt):
    es = assemble_error_system(cfg.agent_system(), cfg.delay_graph())
    m, mu = cfg.margin, cfg.delays.mu
    r = es.r
    opts = solver_options(cfg)
    entry = {"mode": m.mode, "tolerance": m.tolerance}
    result = None
    try:
        if m.mode == "scale-direction":
            d = m.direction or (1.0,) * r
            entry.update(direction=list(d), bracket=list(m.bracket))
            result = bisect_scale(es, MarginQuery(d, mu, m.bracket, m.tolerance), opts, cfg.solver.epsilon)
        else:
            base = m.base or (m.bracket[0],) * r
            entry["base"] = list(base)
            result = coordinate_margins(es, base, mu, m.tolerance, m.order, options=opts,
                                        epsilon=cfg.solver.epsilon)
    except (BracketInvalid, BaseInfeasible) as exc:
        entry["tau_bar_star"] = None
        entry["reason"] = str(exc)
        rep.warn(f"no certified delay margin: {exc}")
        rep.say("computed margins: none (no feasible bounds in the search range)")
    if result is not None:
        entry.update(tau_bar_star=result.tau_bar.tolist(), scale=result.scale,
                     monotonicity_violations=result.monotonicity_violations,
                     bisection_probes=result.bisection_probes, notes=result.notes,
                     certificate_margins=dict(result.certificate.margins))
        entry["probes"] = [{"tau_bar": list(t), "status": s.value} for t, s in result.probes]
        _write_certificate(out, result.certificate, result.tau_bar, mu)
        rep.say(f"computed margins: tau_bar* = {_fmt_vec(result.tau_bar)} "
                f"({len(result.probes)} probes, {result.monotonicity_violations} monotonicity violations)")
        if result.monotonicity_violations:
            rep.warn("feasibility was not monotone along the search direction; grid-scan result reported")
        if fmt == "csv":
            lines = ["probe," + ",".join(f"tau_bar_{k}" for k in range(1, r + 1)) + ",status"]
            for i, (t, s) in enumerate(result.probes):
                lines.append(f"{i}," + ",".join(f"{x:.12g}" for x in t) + f",{s.value}")
            (out / "probes.csv").write_text("\n".join(lines) + "\n")
    if "probes" not in entry and result is None:
        entry["probes"] = []
    rep.data["margin"] = entry
    if is_reference_example(cfg):
        got = entry.get("tau_bar_star")
        ratio = None if got is None else [g / p for g, p in zip(got, REFERENCE_TAU_BAR)]
        rep.data["comparison"] = {"published_tau_bar": REFERENCE_TAU_BAR, "computed_tau_bar": got,
                                  "ratio": ratio}
        rep.say(f"comparison: computed {('none' if got is None else _fmt_vec(got))} "
                f"vs published {_fmt_vec(REFERENCE_TAU_BAR)}")


PLOT_SCRIPT = '''"""Plot agent states and disagreement from trajectory.csv (run: python3 plot_trajectories.py)."""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

here = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
with open(here / "trajectory.csv") as fh:
    header = next(csv.reader(fh))
data = np.loadtxt(here / "trajectory.csv", delimiter=",", skiprows=1, ndmin=2)
t = data[:, 0]
cols = {name: data[:, i] for i, name in enumerate(header)}
N, n = {N}, {n}
fig, axes = plt.subplots(n + 1, 1, sharex=True, figsize=(7, 2.4 * (n + 1)))
for j in range(1, n + 1):
    for i in range(1, N + 1):
        axes[j - 1].plot(t, cols[f"x_{{i}}_{{j}}"], label=f"agent {{i}}")
    axes[j - 1].set_ylabel(f"state {{j}}")
    axes[j - 1].legend(loc="upper right")
axes[-1].semilogy(t, np.maximum(cols["disagreement"], 1e-16))
axes[-1].set_ylabel("disagreement")
axes[-1].set_xlabel("t [s]")
fig.suptitle("delays: {delays}")
fig.tight_layout()
fig.savefig(here / "trajectories.png", dpi=150)
'''


def cmd_simulate(cfg, rep, out, fmt, seed: int, certificate=None):
    sys_ = cfg.agent_system()
    g = cfg.delay_graph()
    profiles = cfg.profiles()
    dim = g.N * sys_.n
    if cfg.sim.x0 is not None:
        x0 = np.array(cfg.sim.x0)
    else:
        x0 = np.random.default_rng(seed).uniform(-1.0, 1.0, dim)
    traj = simulate_x(sys_, g, profiles, x0, cfg.history(), cfg.sim.h, cfg.sim.T)
    final = float(traj.disagreement[-1])
    converged = bool(not traj.diverged and final <= CONSENSUS_TOL)
    rep.data["simulation"] = {"seed": seed, "x0": x0.tolist(), "h": cfg.sim.h, "T": cfg.sim.T,
                              "history": cfg.sim.history, "profiles": [p.to_dict() for p in profiles],
                              "final_disagreement": final, "converged": converged,
                              "diverged": traj.diverged, "t_end": float(traj.t[-1])}
    rep.say(f"simulation to t={traj.t[-1]:g}: final disagreement {final:.3e}, converged={converged}"
            + (" (diverged, truncated)" if traj.diverged else ""))
    if traj.diverged:
        rep.warn("trajectory diverged and was truncated")
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        traj.to_csv(out / "trajectory.csv")
        delays = ", ".join(f"tau_{k}" for k in range(1, g.r + 1))
        (out / "plot_trajectories.py").write_text(
            PLOT_SCRIPT.replace("{N}", str(g.N)).replace("{n}", str(sys_.n)).replace("{delays}", delays)
            .replace("{{", "{").replace("}}", "}"))
    if certificate is not None:
        values, tb, _ = load_certificate(certificate)
        es = assemble_error_system(sys_, g)
        z0 = to_error_coordinates(traj)[0]
        zt = simulate_z(es, profiles, z0, cfg.history(), cfg.sim.h, cfg.sim.T)
        series = lyapunov_series(zt, values, profiles, tb, cfg.history())
        inc = series.max_relative_increase()
        rep.data["lyapunov"] = {"max_relative_increase": inc, "nonincreasing": inc <= 1e-3,
                                "V0": float(series.V[0]), "V_end": float(series.V[-1])}
        rep.say(f"Lyapunov functional: max relative step increase {inc:.3e}")
        if fmt == "csv":
            series.to_csv(out / "lyapunov.csv")


def run_command(cmd: str, config_path, out, fmt: str = "csv", seed: int = 0, certificate=None) -> int:
    out = Path(out)
    rep = Report(cmd)
    try:
        cfg = load_config(config_path)
    except SchemaError as exc:
        rep.data["schema_errors"] = [{"path": p, "message": m} for p, m in exc.errors]
        for p, m in exc.errors:
            rep.error(f"schema: {p}: {m}")
        rep.write(out)
        sys.stdout.write(rep.summary())
        return 2
    except OSError as exc:
        rep.error(f"cannot read config: {exc}")
        rep.write(out)
        sys.stdout.write(rep.summary())
        return 2
    rep.data["config"] = str(config_path)
    try:
        if assumption_checks(cfg, rep) is not None and rep.ok:
            if cmd == "analyze":
                cmd_analyze(cfg, rep, out, fmt)
            elif cmd == "margin":
                cmd_margin(cfg, rep, out, fmt)
            elif cmd == "simulate":
                cmd_simulate(cfg, rep, out, fmt, seed, certificate)
    except ConsensusError as exc:
        rep.error(f"{type(exc).__name__}: {exc}")
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        rep.error(f"numerical breakdown: {exc}")
    rep.write(out)
    sys.stdout.write(rep.summary())
    return 0 if rep.ok else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="delay-consensus",
                                 description="Delay margins and simulation for delayed consensus.")
    ap.add_argument("command", choices=["validate", "analyze", "margin", "simulate"])
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--format", choices=["csv", "report"], default="csv",
                    help="csv also writes tables and the plot script; report writes only the report")
    ap.add_argument("--seed", type=int, default=0, help="seed for random initial states")
    ap.add_argument("--certificate", help="certificate file for the Lyapunov diagnostic (simulate)")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run_command(args.command, args.config, args.out, args.format, args.seed, args.certificate)


if __name__ == "__main__":
    sys.exit(main())
