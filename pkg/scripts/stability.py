"""Total backlog over time for the fixed-arrival scenarios, sampled every --every slots."""

from _common import parser, writer

from eacc import scenarios
from eacc.engine import iter_run


def main():
    p = parser(__doc__, 100_000)
    p.add_argument("--every", type=int, default=100)
    args = p.parse_args()
    cfgs = scenarios.stability_scenarios(args.slots)
    traces = [[rec.backlog_total for rec in iter_run(cfg) if rec.slot % args.every == 0] for cfg in cfgs]
    w = writer(["slot", *(f"scenario_{i}" for i in range(len(cfgs)))])
    for j, row in enumerate(zip(*traces)):
        w.writerow([j * args.every, *row])


if __name__ == "__main__":
    main()
