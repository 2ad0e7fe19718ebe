"""Delivered rate of one receiver with one helper, EaCC vs NoCooperation, across helper ON probability."""

from _common import parser, writer

from eacc import scenarios
from eacc.engine import Policy, run_summary


def main():
    args = parser(__doc__, 10_000).parse_args()
    w = writer(["p_on", "eacc", "no_coop", "ratio"])
    for p_on in (0.5, 0.6, 0.7, 0.8, 0.9, 1.0):
        rate = {
            pol: run_summary(scenarios.processing_bound(1, p_on=p_on, slots=args.slots, seed=args.seed, policy=pol))
            .mean_delivered_rate[0]
            for pol in (Policy.EACC, Policy.NO_COOPERATION)
        }
        e, n = rate[Policy.EACC], rate[Policy.NO_COOPERATION]
        w.writerow([p_on, e, n, e / n if n else float("inf")])


if __name__ == "__main__":
    main()
