#!/usr/bin/env python3
"""Learning-rate sweep for the linear class on a stationary process.

Runs the unweighted baseline over a doubling n grid and reports the
log-log slope of the mean learning error (theory predicts -1 up to a log
factor), the calibration constant, and where the rows were written.
"""

import argparse

from drifterm.harness import (
    ExperimentConfig,
    HypothesisPolicy,
    WeightPolicy,
    calibrate_ccal,
    run_experiment,
)
from drifterm.hypotheses import HypothesisKind
from drifterm.processes import (
    CovariateLaw,
    DependenceCore,
    DriftSpec,
    ProcessKind,
    ProcessSpec,
)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=20260810)
    ap.add_argument("--replications", type=int, default=200)
    ap.add_argument("--phi", type=float, default=0.0, help="AR(1) covariate dependence")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/linear_rate")
    args = ap.parse_args()

    core = DependenceCore() if args.phi == 0.0 else DependenceCore(kind="ar1", phi=args.phi)
    process = ProcessSpec(
        kind=ProcessKind.DRIFTING_LINEAR,
        n=128,
        p=2,
        law=CovariateLaw.BALL,
        core=core,
        drift=DriftSpec.constant([0.3, -0.2]),
        noise_sd=0.3,
        y_bound=2.0,
    )
    cfg = ExperimentConfig(
        process=process,
        weights=WeightPolicy(),
        hypothesis=HypothesisPolicy(kind=HypothesisKind.LINEAR_BALL, b_bound=1.0),
        n_grid=(128, 256, 512, 1024, 2048, 4096, 8192),
        replications=args.replications,
        base_seed=args.seed,
        slope_target=-1.0,
        slope_band=(-1.15, -0.85),
    )
    result = run_experiment(cfg, jobs=args.jobs, out_dir=args.out)
    s = result.slope
    print(f"slope={s.slope:.4f} (stderr {s.stderr:.4f}, r2 {s.r2:.4f}), "
          f"band pass: {result.slope_pass}")
    print(f"calibration constant: {calibrate_ccal(result):.6e}")
    print(f"rows written to {args.out}/rows.csv")
    return 0 if result.slope_pass else 1


if __name__ == "__main__":
    raise SystemExit(main())
