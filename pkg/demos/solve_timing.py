"""How the cost of one closure solve grows with the number of moments.

All slab models share one node set, so the comparison isolates the effect
of the basis: full moment models pay for dense Hessians, piecewise models
only for their banded or block structure.  The printed slope is the
least-squares exponent of time against moment count.
"""

from pwlmoments import harness as H

SETS = {
    "M_N": ["M_3", "M_7", "M_15", "M_31"],
    "HFM": ["HFM_5", "HFM_9", "HFM_17", "HFM_33"],
    "PMM": ["PMM_4", "PMM_8", "PMM_16", "PMM_32"],
}


def main():
    rule = H.shared_rule_1d(points=20, intervals=256)
    for label, models in SETS.items():
        rows = H.timing_benchmark(models, "crossingbeams1d", repetitions=5, warmup=1,
                                  rule_factory=rule)
        print(label)
        for r in rows:
            print(f"  {r.model:>7} n={r.n:<3} {r.median_ns / 1e6:8.3f} ms  {r.iterations} iterations")
        slope = H.loglog_slope([r.n for r in rows], [r.median_ns for r in rows])
        print(f"  time ~ n^{slope:.2f}")


if __name__ == "__main__":
    main()
