"""Convergence of full and piecewise-linear moment models on slab test densities.

Run from the repository root::

    python3 demos/slab_convergence.py [density]

The density defaults to ``heaviside``.  For each model family the script
prints the L1 and L-infinity errors of the minimum-entropy (or linear)
reconstruction and the empirical order between consecutive refinements.
Try ``gauss1d`` next to ``heaviside`` to see how much the smoothness of the
density matters to the full moment models compared with the piecewise ones.
"""

import sys

from pwlmoments import harness as H

FAMILIES = {
    "M": "M_1 M_2 M_4 M_8",
    "P": "P_1 P_2 P_4 P_8",
    "HFM": "HFM_5 HFM_9 HFM_17 HFM_33",
    "PMM": "PMM_6 PMM_10 PMM_18 PMM_34",
}


def main(density="heaviside"):
    # the default fine rule matters here: coarser rules cannot resolve the steep
    # layer the hat ansatz forms next to the jump and flatten its convergence
    config = H.StudyConfig(densities=(density,),
                           models=tuple(" ".join(FAMILIES.values()).split()))
    rows = H.convergence_study(config)

    print(f"density {H.get_density(density).name}")
    print(f"{'model':>8} {'n':>4} {'L1':>11} {'Linf':>11} {'order':>7} {'iters':>6}")
    family = None
    for row in rows:
        head = row.model.split("_")[0]
        if head != family:
            print()
            family = head
        order = "" if row.order is None else f"{row.order:7.2f}"
        print(f"{row.model:>8} {row.n:>4} {row.l1:11.3e} {row.linf:11.3e} {order:>7} {row.iterations:>6}")

    failed = [r for r in rows if r.error]
    if failed:
        print("\nsolver failures:", ", ".join(r.model for r in failed))


if __name__ == "__main__":
    main(*sys.argv[1:2])
