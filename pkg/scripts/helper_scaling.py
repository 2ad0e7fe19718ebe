"""Single-receiver rate against helper count for all three policies, with the shared-medium ceiling."""

from _common import parser, writer

from eacc import scenarios
from eacc.engine import Policy, run_summary


def main():
    p = parser(__doc__, 10_000)
    p.add_argument("--link-rate", type=float, default=8.0)
    args = p.parse_args()
    pols = (Policy.EACC, Policy.COOPERATION_ONLY, Policy.NO_COOPERATION)
    w = writer(["helpers", *(pol.value for pol in pols), "medium_cap"])
    for h in range(0, 5):
        rates = [
            run_summary(
                scenarios.processing_bound(h, link_rate=args.link_rate, slots=args.slots, seed=args.seed, policy=pol)
            ).mean_delivered_rate[0]
            for pol in pols
        ]
        w.writerow([h, *rates, scenarios.medium_cap(h, args.link_rate)])


if __name__ == "__main__":
    main()
