"""Replicated experiment harness: grids, slopes, calibration, persistence.

A config describes a process template, a weight policy, a hypothesis
policy, an n grid, and a replication count.  Running it simulates every
(n, weight parameter, replication) cell, fits the weighted ERM, measures
the decomposition terms, attaches the rate certificate, and aggregates
log-log slopes.  Everything is deterministic given (config, base_seed):
per-row seeds are derived from the base seed and the cell indices, so
results do not depend on worker count or completion order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .hypotheses import HypothesisClassSpec, HypothesisKind, basis_size, fit_weighted_erm
from .mixing import k_rho as k_rho_sum
from .mixing import m_beta
from .processes import (
    CovariateLaw,
    DependenceCore,
    DriftSpec,
    ProcessKind,
    ProcessSpec,
    lambda_min,
    mixing_profile,
    simulate,
)
from .rates import (
    RateParameters,
    RateVariant,
    bound_certificate,
    find_scale_constant,
    hypothesis_log_covering,
    weight_class_log_covering,
)
from .risk import drift_error, excess_risk, learning_error
from .weights import (
    DEFAULT_EXP_RANGE,
    WeightFamily,
    WeightSpec,
    make_weights,
)

CSV_HEADER = "n,param,w_l2,seed,learning_error,drift_error,excess_risk,certificate"

MAX_ROW_FAILURE_FRACTION = 0.01


class HarnessError(RuntimeError):
    """Configuration or execution failure at the experiment level."""


@dataclass(frozen=True)
class WeightPolicy:
    """Which weight vectors each grid cell uses.

    ``params`` is the family parameter sweep; None means the full uniform
    window (s = n), the unweighted baseline.  Weights are always anchored
    at t = n.
    """

    family: WeightFamily = WeightFamily.UNIFORM_WINDOW
    params: tuple[float, ...] | None = None
    exp_range: float = DEFAULT_EXP_RANGE

    def specs(self, n: int) -> list[WeightSpec]:
        if self.params is None:
            return [WeightSpec(WeightFamily.UNIFORM_WINDOW, t=n, n=n, param=float(n))]
        return [WeightSpec(self.family, t=n, n=n, param=float(p)) for p in self.params]


@dataclass(frozen=True)
class HypothesisPolicy:
    """Hypothesis class per cell: fixed, or sized from the weight norm."""

    kind: HypothesisKind = HypothesisKind.LINEAR_BALL
    b_bound: float = 1.0
    q: int | None = None  # None with STEP_BASIS: q = basis_size(||w||)
    nu: int | None = None
    ell: int | None = None
    param_bound: float | None = None

    def class_spec(self, spec: ProcessSpec, w_l2: float) -> HypothesisClassSpec:
        if self.kind is HypothesisKind.LINEAR_BALL:
            return HypothesisClassSpec.linear(self.b_bound, lambda_min(spec))
        if self.kind is HypothesisKind.STEP_BASIS:
            q = self.q if self.q is not None else basis_size(w_l2)
            return HypothesisClassSpec.step(q, self.b_bound)
        return HypothesisClassSpec.relu(self.nu, self.ell, self.param_bound, self.b_bound)


@dataclass(frozen=True)
class ExperimentConfig:
    process: ProcessSpec  # template; n is replaced per grid point
    weights: WeightPolicy
    hypothesis: HypothesisPolicy
    n_grid: tuple[int, ...]
    replications: int
    delta: float = 0.05
    base_seed: int = 0
    rate_variant: RateVariant = RateVariant.I
    mc_draws: int = 100_000
    slope_target: float | None = None
    slope_band: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if len(self.n_grid) == 0 or any(
            b <= a for a, b in zip(self.n_grid, self.n_grid[1:])
        ):
            raise HarnessError("n_grid must be nonempty and strictly increasing")
        if self.replications < 1:
            raise HarnessError("need at least one replication")
        if not 0 < self.delta < 1:
            raise HarnessError("delta must be in (0,1)")
        if self.slope_target is not None and self._sweep_axis() == "n":
            if self.replications < 30:
                raise HarnessError("slope experiments need >= 30 replications")
            if len(self.n_grid) < 5 or self.n_grid[-1] < 4 * self.n_grid[0]:
                raise HarnessError("slope n grids need >= 5 points spanning >= 2 octaves")

    def _sweep_axis(self) -> str | None:
        if len(self.n_grid) > 1:
            return "n"
        if self.weights.params is not None and len(self.weights.params) > 1:
            return "n_eff"
        return None


@dataclass(frozen=True)
class Row:
    n: int
    param: float
    w_l2: float
    seed: int
    learning_error: float
    drift_error: float
    excess_risk: float
    certificate: float

    @property
    def n_eff(self) -> float:
        return 1.0 / self.w_l2**2


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    r2: float
    x_field: str
    y_field: str


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: tuple[Row, ...]
    slope: SlopeFit | None
    manifest: dict

    @property
    def slope_pass(self) -> bool | None:
        if self.slope is None or self.config.slope_band is None:
            return None
        lo, hi = self.config.slope_band
        return lo <= self.slope.slope <= hi


def _row_seed(base_seed: int, i_n: int, i_param: int, rep: int, stream: int) -> int:
    ss = np.random.SeedSequence(base_seed, spawn_key=(i_n, i_param, rep, stream))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _row_task(payload: tuple) -> tuple[float, float]:
    """One replication: simulate, fit, measure. Pure function of the payload."""
    spec, w, class_spec, t, path_seed, mc_seed, net_seed, draws = payload
    path = simulate(spec, path_seed)
    fit = fit_weighted_erm(path, w, class_spec, seed=net_seed)
    learn, _, _ = learning_error(fit, spec, w, draws=draws, seed=mc_seed)
    exc, _, _ = excess_risk(fit, spec, t, draws=draws, seed=mc_seed + 1)
    return learn, exc


def _rate_inputs(cfg: ExperimentConfig, spec: ProcessSpec):
    """Weight-class constants, covering bounds, and approximation error for one n."""
    n = spec.n
    fam = cfg.weights.family if cfg.weights.params is not None else WeightFamily.UNIFORM_WINDOW
    if fam is WeightFamily.UNIFORM_WINDOW:
        c1, bw = 1.0, 1.0
    elif fam is WeightFamily.EXPONENTIAL:
        c1, bw = 1.0, 2.0
    else:
        c1, bw = 3.0, 18.0 * math.e**2
    log_n1 = weight_class_log_covering(fam, "union", n=n, exp_range=cfg.weights.exp_range)

    hyp = cfg.hypothesis
    if hyp.kind is HypothesisKind.LINEAR_BALL:
        log_ninf = hypothesis_log_covering("linear", p=spec.p, b_bound=hyp.b_bound)
        c_inf = math.sqrt(lambda_min(spec))
        alpha = 0.0
        approx_err = None
    elif hyp.kind is HypothesisKind.STEP_BASIS:
        log_ninf = hypothesis_log_covering("step", q=hyp.q, b_bound=hyp.b_bound)
        if hyp.q is not None:
            c_inf = 1.0 / math.sqrt(hyp.q)
            alpha = 0.0
            approx_err = lambda u: 1.0 / hyp.q  # 1-Lipschitz targets
        else:
            c_inf = 1.0 / math.sqrt(basis_size(1.0 / math.sqrt(n)))
            alpha = 2.0 / 3.0
            approx_err = lambda u: 1.0 / basis_size(u)
    else:
        log_ninf = hypothesis_log_covering("relu", n=n, b_bound=hyp.b_bound)
        c_inf = 0.0
        alpha = 2.0 / 3.0
        approx_err = lambda u: u ** (2.0 / 3.0)
    return c1, bw, log_n1, log_ninf, c_inf, alpha, approx_err


def build_rate(cfg: ExperimentConfig, spec: ProcessSpec):
    """Rate function for one grid n, with the scale constant found by doubling."""
    n = spec.n
    profile = mixing_profile(spec)
    mb = m_beta(profile, n, cfg.delta).m
    kr = k_rho_sum(profile)
    c1, bw, log_n1, log_ninf, c_inf, alpha, approx_err = _rate_inputs(cfg, spec)
    params = RateParameters(
        c1=c1,
        cw=1.0 / math.sqrt(n),  # ||w||^2 >= 1/n whenever the entries sum to one
        bw=bw,
        m_beta=mb,
        k_rho=kr,
        c_p=1.0,  # time-invariant covariate law
        c_inf=c_inf,
        c_l=1.0,  # square loss
        alpha=alpha,
        a=1.0,
        k=float(n) ** 2,
        delta=cfg.delta,
        n=n,
        log_n1_w=log_n1,
        log_ninf_h=log_ninf,
    )
    rate, report = find_scale_constant(cfg.rate_variant, params, approx_err=approx_err)
    return rate, report


def run_experiment(
    cfg: ExperimentConfig, *, jobs: int = 1, out_dir: str | None = None
) -> ExperimentResult:
    """Execute the full grid; deterministic given (config, base_seed).

    Row-level failures are recorded in the manifest and tolerated up to
    1% of the grid; beyond that the run aborts.
    """
    rows: list[Row] = []
    failures: list[dict] = []
    rate_constants: dict[int, float] = {}
    payloads = []
    meta = []

    for i_n, n in enumerate(cfg.n_grid):
        spec = replace(cfg.process, n=n)
        rate, _ = build_rate(cfg, spec)
        rate_constants[n] = rate.params.a
        for i_param, wspec in enumerate(cfg.weights.specs(n)):
            w = make_weights(wspec)
            class_spec = cfg.hypothesis.class_spec(spec, w.l2)
            drift = drift_error(spec, w, n)
            certificate = bound_certificate(rate, w.l2, cfg.delta, drift_term=drift)
            for rep in range(cfg.replications):
                path_seed = _row_seed(cfg.base_seed, i_n, i_param, rep, 0)
                mc_seed = _row_seed(cfg.base_seed, i_n, i_param, rep, 1)
                net_seed = _row_seed(cfg.base_seed, i_n, i_param, rep, 2)
                payloads.append(
                    (spec, w, class_spec, n, path_seed, mc_seed, net_seed, cfg.mc_draws)
                )
                meta.append((n, wspec.param, w.l2, path_seed, drift, certificate))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_row_task_safe, payloads, chunksize=8))
    else:
        outcomes = [_row_task_safe(p) for p in payloads]

    for (n, param, w_l2, path_seed, drift, certificate), outcome in zip(meta, outcomes):
        if isinstance(outcome, str):
            failures.append({"n": n, "param": param, "seed": path_seed, "error": outcome})
            continue
        learn, exc = outcome
        rows.append(
            Row(
                n=n,
                param=float(param),
                w_l2=w_l2,
                seed=path_seed,
                learning_error=learn,
                drift_error=drift,
                excess_risk=exc,
                certificate=certificate,
            )
        )

    total = len(payloads)
    if failures and len(failures) > MAX_ROW_FAILURE_FRACTION * total:
        raise HarnessError(
            f"{len(failures)}/{total} rows failed (> {MAX_ROW_FAILURE_FRACTION:.0%})"
        )

    outliers = _flag_outliers(rows)

    axis = cfg._sweep_axis()
    slope = None
    if axis == "n" and len(cfg.n_grid) >= 5:
        slope = fit_slope(rows, "n", "learning_error")
    elif axis == "n_eff":
        slope = fit_slope(rows, "n_eff", "learning_error", min_points=3)

    manifest = build_manifest(cfg, rate_constants, failures, len(rows))
    manifest["outliers"] = outliers
    result = ExperimentResult(config=cfg, rows=tuple(rows), slope=slope, manifest=manifest)
    if out_dir is not None:
        write_result(result, out_dir)
    return result


def _flag_outliers(rows) -> list[dict]:
    """Rows whose learning error sits beyond 6 IQR of their grid cell.

    Flagged for the manifest only; aggregation keeps every row since the
    guarantees under test concern high-probability tails.
    """
    cells: dict[tuple, list[Row]] = {}
    for row in rows:
        cells.setdefault((row.n, row.param), []).append(row)
    flagged = []
    for (n, param), cell in cells.items():
        if len(cell) < 4:
            continue
        values = np.array([r.learning_error for r in cell])
        q1, q3 = np.quantile(values, [0.25, 0.75])
        iqr = q3 - q1
        lo, hi = q1 - 6.0 * iqr, q3 + 6.0 * iqr
        for r in cell:
            if not lo <= r.learning_error <= hi:
                flagged.append(
                    {"n": n, "param": param, "seed": r.seed, "learning_error": r.learning_error}
                )
    return flagged


def _row_task_safe(payload):
    try:
        return _row_task(payload)
    except Exception as exc:  # row-level isolation; harness applies the 1% budget
        return f"{type(exc).__name__}: {exc}"


def fit_slope(
    rows,
    x_field: str,
    y_field: str,
    *,
    min_points: int = 5,
) -> SlopeFit:
    """OLS slope of log(mean y) against log x over the grid means.

    Rows are grouped by the x value and the y values averaged within each
    group before taking logs.  ``min_points`` defaults to 5 distinct x
    values; the effective-sample-size sweeps pass 3.
    """

    def x_of(row) -> float:
        if x_field == "n":
            return float(row.n)
        if x_field == "n_eff":
            return row.n_eff
        if x_field == "param":
            return float(row.param)
        raise HarnessError(f"unknown x field {x_field!r}")

    groups: dict[float, list[float]] = {}
    for row in rows:
        groups.setdefault(x_of(row), []).append(getattr(row, y_field))
    if len(groups) < min_points:
        raise HarnessError(f"need >= {min_points} distinct x values, got {len(groups)}")
    xs = np.array(sorted(groups))
    ys = np.array([np.mean(groups[x]) for x in xs])
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise HarnessError("log-log slope needs positive x and y")
    lx, ly = np.log(xs), np.log(ys)
    design = np.vstack([np.ones_like(lx), lx]).T
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    pred = design @ coef
    resid = ly - pred
    dof = max(1, len(xs) - 2)
    sigma2 = float(resid @ resid) / dof
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    stderr = math.sqrt(sigma2 / sxx) if sxx > 0 else math.inf
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(
        slope=float(coef[1]), stderr=stderr, r2=r2, x_field=x_field, y_field=y_field
    )


def calibrate_ccal(result: ExperimentResult) -> float:
    """99th percentile of excess risk over the rate part of the certificate.

    The drift term is subtracted from the stored certificate so the ratio
    compares the stochastic error against r(||w||)^2 log^2(1/delta) alone;
    a zero denominator is an error.
    """
    ratios = []
    for row in result.rows:
        denom = row.certificate - row.drift_error
        if denom <= 0:
            raise HarnessError("certificate rate part must be positive for calibration")
        ratios.append(row.excess_risk / denom)
    if not ratios:
        raise HarnessError("no rows to calibrate on")
    return float(np.quantile(np.asarray(ratios), 0.99))


# ---------------------------------------------------------------------------
# Serialization


def config_to_dict(cfg: ExperimentConfig) -> dict:
    proc = cfg.process
    d = {
        "process": {
            "kind": proc.kind.value,
            "n": proc.n,
            "p": proc.p,
            "law": proc.law.value,
            "core": dataclasses.asdict(proc.core),
            "drift": dataclasses.asdict(proc.drift) if proc.drift else None,
            "noise_sd": proc.noise_sd,
            "y_bound": proc.y_bound,
            "mean": proc.mean,
            "var_start": proc.var_start,
            "var_end": proc.var_end,
            "noise_mode": proc.noise_mode,
            "noise_phi": proc.noise_phi,
        },
        "weights": {
            "family": cfg.weights.family.value,
            "params": list(cfg.weights.params) if cfg.weights.params is not None else None,
            "exp_range": cfg.weights.exp_range,
        },
        "hypothesis": {
            "kind": cfg.hypothesis.kind.value,
            "b_bound": cfg.hypothesis.b_bound,
            "q": cfg.hypothesis.q,
            "nu": cfg.hypothesis.nu,
            "ell": cfg.hypothesis.ell,
            "param_bound": cfg.hypothesis.param_bound,
        },
        "n_grid": list(cfg.n_grid),
        "replications": cfg.replications,
        "delta": cfg.delta,
        "base_seed": cfg.base_seed,
        "rate_variant": cfg.rate_variant.value,
        "mc_draws": cfg.mc_draws,
        "slope_target": cfg.slope_target,
        "slope_band": list(cfg.slope_band) if cfg.slope_band else None,
    }
    return d


def config_from_dict(d: dict) -> ExperimentConfig:
    pd = d["process"]
    drift = DriftSpec(**{**pd["drift"], "a": tuple(pd["drift"]["a"]),
                         "b": tuple(pd["drift"]["b"]) if pd["drift"].get("b") else None}) \
        if pd.get("drift") else None
    process = ProcessSpec(
        kind=ProcessKind(pd["kind"]),
        n=pd.get("n", max(d["n_grid"])),
        p=pd["p"],
        law=CovariateLaw(pd["law"]),
        core=DependenceCore(**pd.get("core", {})),
        drift=drift,
        noise_sd=pd.get("noise_sd", 0.0),
        y_bound=pd.get("y_bound", 1.0),
        mean=pd.get("mean", 0.0),
        var_start=pd.get("var_start", 1.0),
        var_end=pd.get("var_end", 1.0),
        noise_mode=pd.get("noise_mode", "iid"),
        noise_phi=pd.get("noise_phi", 0.0),
    )
    wd = d.get("weights", {})
    weights = WeightPolicy(
        family=WeightFamily(wd.get("family", "uniform")),
        params=tuple(wd["params"]) if wd.get("params") is not None else None,
        exp_range=wd.get("exp_range", DEFAULT_EXP_RANGE),
    )
    hd = d.get("hypothesis", {})
    hypothesis = HypothesisPolicy(
        kind=HypothesisKind(hd.get("kind", "linear")),
        b_bound=hd.get("b_bound", 1.0),
        q=hd.get("q"),
        nu=hd.get("nu"),
        ell=hd.get("ell"),
        param_bound=hd.get("param_bound"),
    )
    return ExperimentConfig(
        process=process,
        weights=weights,
        hypothesis=hypothesis,
        n_grid=tuple(d["n_grid"]),
        replications=d["replications"],
        delta=d.get("delta", 0.05),
        base_seed=d.get("base_seed", 0),
        rate_variant=RateVariant(d.get("rate_variant", "i")),
        mc_draws=d.get("mc_draws", 100_000),
        slope_target=d.get("slope_target"),
        slope_band=tuple(d["slope_band"]) if d.get("slope_band") else None,
    )


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_manifest(cfg, rate_constants, failures, n_rows) -> dict:
    from . import __version__

    return {
        "config": config_to_dict(cfg),
        "config_sha256": config_hash(cfg),
        "base_seed": cfg.base_seed,
        "code_version": __version__,
        "rate_constants": {str(k): v for k, v in rate_constants.items()},
        "failures": failures,
        "n_rows": n_rows,
    }


def rows_to_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.n},{r.param!r},{r.w_l2!r},{r.seed},{r.learning_error!r},"
            f"{r.drift_error!r},{r.excess_risk!r},{r.certificate!r}"
        )
    return "\n".join(lines) + "\n"


def rows_from_csv(text: str) -> list[Row]:
    lines = [ln for ln in text.strip().split("\n") if ln]
    if lines[0] != CSV_HEADER:
        raise HarnessError(f"unexpected CSV header {lines[0]!r}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        rows.append(
            Row(
                n=int(parts[0]),
                param=float(parts[1]),
                w_l2=float(parts[2]),
                seed=int(parts[3]),
                learning_error=float(parts[4]),
                drift_error=float(parts[5]),
                excess_risk=float(parts[6]),
                certificate=float(parts[7]),
            )
        )
    return rows


def write_result(result: ExperimentResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "rows.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write(rows_to_csv(result.rows))
    manifest = dict(result.manifest)
    if result.slope is not None:
        manifest["slope"] = dataclasses.asdict(result.slope)
        manifest["slope_pass"] = result.slope_pass
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
