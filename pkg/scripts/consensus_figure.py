"""Margin search, certificate and trajectories for the corrected-gain example, saved as one figure.

usage: python3 scripts/consensus_figure.py [OUT_DIR]
"""
import json
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from delay_consensus.config import load_config, parse_dict, to_dict
from delay_consensus.diagnostics import lyapunov_series
from delay_consensus.margins import MarginQuery, bisect_scale
from delay_consensus.model import assemble_error_system
from delay_consensus.simulate import simulate_x, simulate_z, to_error_coordinates

ROOT = Path(__file__).resolve().parents[1]


def main(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    cfg = load_config(ROOT / "configs" / "corrected_gain.json")
    es = assemble_error_system(cfg.agent_system(), cfg.delay_graph())
    m = cfg.margin
    res = bisect_scale(es, MarginQuery(m.direction, cfg.delays.mu, m.bracket, m.tolerance))
    print("tau_bar* =", np.round(res.tau_bar, 4), f"({len(res.probes)} probes)")

    d = to_dict(cfg)
    d["delays"]["tau_bar"] = res.tau_bar.tolist()
    cfg = parse_dict(d)
    profiles = cfg.profiles()
    x0 = np.random.default_rng(0).uniform(-1.0, 1.0, cfg.graph.N * cfg.agent_system().n)
    traj = simulate_x(cfg.agent_system(), cfg.delay_graph(), profiles, x0, cfg.history(), cfg.sim.h, cfg.sim.T)
    zt = simulate_z(es, profiles, to_error_coordinates(traj)[0], cfg.history(), cfg.sim.h, cfg.sim.T)
    series = lyapunov_series(zt, res.certificate.values, profiles, res.tau_bar, cfg.history())

    fig, ax = plt.subplots(2, 2, figsize=(10, 6), sharex=True)
    for i in range(1, traj.N + 1):
        for j in range(traj.n):
            ax[j, 0].plot(traj.t, traj.agent(i)[:, j], label=f"agent {i}")
    for j in range(traj.n):
        ax[j, 0].set_ylabel(f"x_i,{j + 1}")
    ax[0, 0].legend(loc="upper right")
    ax[0, 1].semilogy(traj.t, np.maximum(traj.disagreement, 1e-16))
    ax[0, 1].set_ylabel("disagreement")
    ax[1, 1].semilogy(series.t, np.maximum(series.V, 1e-16))
    ax[1, 1].set_ylabel("V(t)")
    for a in ax[1]:
        a.set_xlabel("t [s]")
    fig.tight_layout()
    fig.savefig(out / "consensus_figure.png", dpi=150)
    (out / "consensus_figure.json").write_text(json.dumps(
        {"tau_bar_star": res.tau_bar.tolist(), "final_disagreement": float(traj.disagreement[-1]),
         "lyapunov_max_relative_increase": series.max_relative_increase()}, indent=2))
    print(f"final disagreement {traj.disagreement[-1]:.2e}; figure in {out}")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "runs" / "figure")
