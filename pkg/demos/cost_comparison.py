"""Mean messages per join and leave for GDH, TGDH and the region scheme.

    python3 demos/cost_comparison.py [N ...]
"""

import random
import sys

from regionkey import bench


def main(sizes):
    print(f"{'N':>5} {'event':<6} {'Region':>8} {'TGDH':>8} {'GDH':>8}")
    for n in sizes:
        cmp = bench.compare(n, 16, bench.make_trace(n, 3, 3, random.Random(0)))
        for kind in ("join", "leave"):
            means = [cmp.costs[s].mean(kind) for s in ("Region", "TGDH", "GDH")]
            print(f"{n:>5} {kind:<6} " + " ".join(f"{m:>8.1f}" for m in means))
    keys = bench.storage_per_node(1024, 99)
    print("\nkeys stored per node at N=1024:", {k: round(v, 2) for k, v in keys.items()})


if __name__ == "__main__":
    main([int(a) for a in sys.argv[1:]] or [64, 256])
