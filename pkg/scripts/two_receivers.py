"""Per-receiver EaCC rates with two receivers sharing one to three helpers."""

from _common import parser, writer

from eacc import scenarios
from eacc.engine import run_summary


def main():
    args = parser(__doc__, 10_000).parse_args()
    w = writer(["helpers", "receiver_0", "receiver_1"])
    for h in (0, 1, 2, 3):
        cfg = scenarios.processing_bound(h, receivers=2, link_rate=12.0, slots=args.slots, seed=args.seed)
        w.writerow([h, *run_summary(cfg).mean_delivered_rate[:2]])


if __name__ == "__main__":
    main()
