"""Utility gap to the offline optimum as the trade-off parameter M grows."""

from _common import parser, writer

from eacc import scenarios
from eacc.engine import run_summary
from eacc.oracle import AverageModel, solve_num, utility_gap


def main():
    p = parser(__doc__, 40_000)
    p.add_argument("--resolution", type=float, default=0.01)
    args = p.parse_args()
    base = scenarios.unequal_pair(50, slots=args.slots, seed=args.seed)
    _, value = solve_num(AverageModel.from_config(base), base.constants.utility, args.resolution)
    w = writer(["M", "sum_utility", "optimum", "gap", "mean_backlog"])
    for m in (10, 50, 200, 500, 2000, 5000):
        s = run_summary(scenarios.unequal_pair(m, slots=args.slots, seed=args.seed))
        w.writerow([m, s.sum_utility, value, utility_gap(s, value), s.mean_backlog])


if __name__ == "__main__":
    main()
