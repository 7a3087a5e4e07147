"""Cross-check the exact power-counting verdict against the numerical oracle.

    python scripts/power_counting_crosscheck.py --seeds 40
"""

import argparse
import time
import warnings

from scipy.integrate import IntegrationWarning

from hermitelab.power_counting import (
    Finite,
    OracleVerdict,
    check_integrability,
    divergence_oracle,
    random_planar_problem,
)

MATCH = {Finite.YES: OracleVerdict.CONVERGENT, Finite.CONDITIONS_VIOLATED: OracleVerdict.DIVERGENT}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--base", type=float, default=256.0)
    args = ap.parse_args()
    warnings.simplefilter("ignore", IntegrationWarning)
    counts = {"agree": 0, "disagree": 0, "skipped": 0}
    for seed in range(args.seeds):
        t = time.perf_counter()
        p = random_planar_problem(seed)
        theory = check_integrability(p)
        oracle = divergence_oracle(p, base=args.base)
        if oracle.verdict is OracleVerdict.INCONCLUSIVE or theory.finite not in MATCH:
            status = "skipped"
        else:
            status = "agree" if MATCH[theory.finite] is oracle.verdict else "disagree"
        counts[status] += 1
        w = theory.witness.to_json() if theory.witness else None
        print(f"seed {seed:3d}  {theory.finite.value:20} {oracle.verdict.value:12} {status:9} "
              f"ratios={[round(x, 4) for x in oracle.ratios]} witness={w} ({time.perf_counter() - t:.1f}s)")
    print(counts)


if __name__ == "__main__":
    main()
