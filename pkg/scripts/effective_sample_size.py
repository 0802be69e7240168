#!/usr/bin/env python3
"""Effective-sample-size sweep: exponential weights at a fixed horizon.

Decay rates are chosen so 1/||w||^2 hits the requested targets exactly;
the mean learning error should scale like 1/n_eff (slope -1).
"""

import argparse

from drifterm.harness import (
    ExperimentConfig,
    HypothesisPolicy,
    WeightPolicy,
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
from drifterm.weights import WeightFamily, theta_for_n_eff


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=8192)
    ap.add_argument("--n-eff", type=float, nargs="+", default=[16.0, 64.0, 256.0, 1024.0])
    ap.add_argument("--replications", type=int, default=200)
    ap.add_argument("--seed", type=int, default=20260812)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/effective_sample_size")
    args = ap.parse_args()

    thetas = tuple(theta_for_n_eff(t, args.n) for t in args.n_eff)
    process = ProcessSpec(
        kind=ProcessKind.DRIFTING_LINEAR,
        n=args.n,
        p=2,
        law=CovariateLaw.BALL,
        core=DependenceCore(),
        drift=DriftSpec.constant([0.3, -0.2]),
        noise_sd=0.3,
        y_bound=2.0,
    )
    cfg = ExperimentConfig(
        process=process,
        weights=WeightPolicy(family=WeightFamily.EXPONENTIAL, params=thetas),
        hypothesis=HypothesisPolicy(kind=HypothesisKind.LINEAR_BALL, b_bound=1.0),
        n_grid=(args.n,),
        replications=args.replications,
        base_seed=args.seed,
    )
    result = run_experiment(cfg, jobs=args.jobs, out_dir=args.out)
    s = result.slope
    print("decay rates:", [f"{t:.6g}" for t in thetas])
    print(f"slope vs n_eff: {s.slope:.4f} (stderr {s.stderr:.4f}, r2 {s.r2:.4f})")
    print(f"rows written to {args.out}/rows.csv")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
