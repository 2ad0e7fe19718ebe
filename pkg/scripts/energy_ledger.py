"""Cumulative joules per slot, capped vs uncapped relay, for work factors 1, 3 and 9."""

import numpy as np
from _common import parser, writer

from eacc import scenarios
from eacc.engine import run

FACTORS = (1.0, 3.0, 9.0)


def main():
    p = parser(__doc__, 2_000)
    p.add_argument("--cap", type=float, default=2.0)
    args = p.parse_args()
    cols, series = ["slot"], []
    for wf in FACTORS:
        for label, cap in (("capped", args.cap), ("uncapped", None)):
            trace, _ = run(scenarios.energy_constrained(wf, cap, slots=args.slots, seed=args.seed))
            series.append(np.cumsum([r.joules.sum() for r in trace]))
            cols.append(f"{label}_wf{wf:g}")
    w = writer(cols)
    for t in range(args.slots):
        w.writerow([t, *(s[t] for s in series)])


if __name__ == "__main__":
    main()
