"""Receiver rate as its battery level sweeps across the 0.4 threshold."""

import numpy as np
from _common import parser, writer

from eacc import scenarios
from eacc.engine import Policy, run_summary


def main():
    args = parser(__doc__, 10_000).parse_args()
    w = writer(["battery", "eacc", "no_coop"])
    for level in np.round(np.arange(0.1, 1.01, 0.1), 2):
        row = [level]
        for pol in (Policy.EACC, Policy.NO_COOPERATION):
            cfg = scenarios.battery_gate(float(level), slots=args.slots, seed=args.seed, policy=pol)
            row.append(run_summary(cfg).mean_delivered_rate[0])
        w.writerow(row)


if __name__ == "__main__":
    main()
