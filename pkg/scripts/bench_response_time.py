"""Response time vs path length on linear topologies, OSDF against the
per-switch reactive baseline.

    python scripts/bench_response_time.py --max-len 10 --trials 5 --out bench.csv [--plot fig.png]
"""
import argparse
import sys

from osdf.controller import ControllerMode
from osdf.dataplane import CostConfig
from osdf.harness import bench_response_time, write_bench_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--min-len", type=int, default=2)
    ap.add_argument("--max-len", type=int, default=10)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--ctrl-rtt-us", type=int, default=CostConfig.ctrl_rtt_us)
    ap.add_argument("--rule-install-us", type=int, default=CostConfig.rule_install_us)
    ap.add_argument("--policy-parse-us", type=int, default=CostConfig.policy_parse_us)
    ap.add_argument("--wall-clock", action="store_true", help="add host timing column")
    ap.add_argument("--out", help="CSV path (default: stdout)")
    ap.add_argument("--plot", help="also save a PNG plot (needs matplotlib)")
    args = ap.parse_args()

    costs = CostConfig(args.ctrl_rtt_us, args.rule_install_us, args.policy_parse_us)
    rows = [r for mode in ControllerMode
            for r in bench_response_time(mode, args.min_len, args.max_len, args.trials,
                                         costs, args.wall_clock)]
    if args.out:
        with open(args.out, "w", newline="") as f:
            write_bench_csv(rows, f, args.wall_clock)
    else:
        write_bench_csv(rows, sys.stdout, args.wall_clock)

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 3.5))
        for mode, marker in [(ControllerMode.OSDF, "o"), (ControllerMode.REACTIVE, "s")]:
            pts = [(r.n, r.response_time_us / 1000) for r in rows if r.mode is mode]
            ax.plot(*zip(*pts), marker=marker, label=mode.value)
        ax.set_xlabel("path length (switches)")
        ax.set_ylabel("response time (virtual ms)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.plot, dpi=150)


if __name__ == "__main__":
    main()
