"""Run analyze, margin and simulate on both bundled configs and print the summaries.

usage: python3 scripts/reproduce_reference.py [OUT_DIR]
"""
import sys
from pathlib import Path

from delay_consensus.cli import run_command

ROOT = Path(__file__).resolve().parents[1]


def main(out: Path) -> int:
    worst = 0
    for name in ("reference_example", "corrected_gain"):
        cfg = ROOT / "configs" / f"{name}.json"
        for cmd in ("validate", "analyze", "margin", "simulate"):
            print(f"\n=== {name}: {cmd} ===")
            kw = {}
            if cmd == "simulate" and (out / name / "analyze" / "certificate.json").exists():
                kw["certificate"] = out / name / "analyze" / "certificate.json"
            worst = max(worst, run_command(cmd, cfg, out / name / cmd, **kw))
    print(f"\noutputs written under {out}")
    return worst


if __name__ == "__main__":
    sys.exit(main(Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "runs"))
