"""Hypothesis classes and weighted ERM fitters.

Three regression classes: norm-bounded linear predictors (exact
constrained weighted least squares), piecewise-constant step functions on
[0, 1) (per-bin weighted means), and box-constrained ReLU networks fitted
by projected full-batch gradient descent (approximate ERM; the achieved
empirical risk is recorded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .processes import CovariateLaw, SamplePath, sample_covariates
from .weights import WeightVector

# Relative floor under which the weighted Gram matrix counts as deficient.
GRAM_EIG_FLOOR = 1e-8

# Projected-gradient defaults for the network fitter.
NET_STEP_SIZE = 0.05
NET_ITERATIONS = 5000

MC_DRAWS_DEFAULT = 100_000


class HypothesisKind(Enum):
    LINEAR_BALL = "linear"
    STEP_BASIS = "step"
    RELU_NET = "relu"


class RankDeficientGramError(RuntimeError):
    """Signed weights produced a (near-)indefinite weighted Gram matrix."""


class HypothesisError(ValueError):
    """Invalid hypothesis-class configuration or incompatible operands."""


def basis_size(w_l2: float) -> int:
    """Bin count matched to a weight norm: ceil(w_l2^(-2/3)).

    Snaps values within 1e-9 of an integer before the ceiling so exact
    powers are not bumped up by float rounding.
    """
    if not 0 < w_l2 <= 1:
        raise HypothesisError(f"weight norm must be in (0, 1], got {w_l2}")
    v = w_l2 ** (-2.0 / 3.0)
    nearest = round(v)
    if abs(v - nearest) < 1e-9 * max(1.0, v):
        return int(nearest)
    return int(math.ceil(v))


@dataclass(frozen=True)
class HypothesisClassSpec:
    """A regression class with its complexity constants.

    ``c_inf`` is the constant linking the class's L2 distances to sup-norm
    distances (0 when no such link is claimed); ``alpha`` is the covering
    growth exponent in the weight norm.
    """

    kind: HypothesisKind
    b_bound: float
    q: int | None = None
    nu: int | None = None
    ell: int | None = None
    param_bound: float | None = None
    alpha: float = 0.0
    c_inf: float = 0.0

    def __post_init__(self) -> None:
        if self.b_bound <= 0:
            raise HypothesisError("b_bound must be positive")
        if self.kind is HypothesisKind.STEP_BASIS and (self.q is None or self.q < 1):
            raise HypothesisError("step class needs q >= 1")
        if self.kind is HypothesisKind.RELU_NET:
            if not (self.nu and self.ell and self.param_bound):
                raise HypothesisError("network class needs nu, ell, param_bound")

    @staticmethod
    def linear(b_bound: float, lambda_min: float) -> "HypothesisClassSpec":
        """Linear predictors with ||beta|| <= b_bound over a law with known
        smallest second-moment eigenvalue."""
        return HypothesisClassSpec(
            kind=HypothesisKind.LINEAR_BALL,
            b_bound=b_bound,
            alpha=0.0,
            c_inf=math.sqrt(lambda_min),
        )

    @staticmethod
    def step(q: int, b_bound: float) -> "HypothesisClassSpec":
        """q-bin step functions on [0,1) with values clipped to [-b, b].

        Under the uniform covariate law the bin indicators are orthogonal
        with second moment 1/q, giving c_inf = 1/sqrt(q); the covering
        exponent is 2/3 when q is tied to the weight norm via basis_size.
        """
        return HypothesisClassSpec(
            kind=HypothesisKind.STEP_BASIS,
            b_bound=b_bound,
            q=q,
            alpha=2.0 / 3.0,
            c_inf=1.0 / math.sqrt(q),
        )

    @staticmethod
    def relu(nu: int, ell: int, param_bound: float, b_bound: float) -> "HypothesisClassSpec":
        """Box-constrained ReLU networks; no usable sup-norm link (c_inf = 0)."""
        return HypothesisClassSpec(
            kind=HypothesisKind.RELU_NET,
            b_bound=b_bound,
            nu=nu,
            ell=ell,
            param_bound=param_bound,
            alpha=2.0 / 3.0,
            c_inf=0.0,
        )


@dataclass(frozen=True)
class FittedHypothesis:
    """A fitted model: coefficient vector, bin values, or network layers."""

    class_spec: HypothesisClassSpec
    coef: np.ndarray | None = None
    bins: np.ndarray | None = None
    layers: tuple[tuple[np.ndarray, np.ndarray], ...] | None = None
    fit_meta: dict = field(default_factory=dict)

    @property
    def kind(self) -> HypothesisKind:
        return self.class_spec.kind

    def predict(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if self.kind is HypothesisKind.LINEAR_BALL:
            return z @ self.coef
        if self.kind is HypothesisKind.STEP_BASIS:
            idx = _bin_index(z[:, 0], self.class_spec.q)
            return self.bins[idx]
        return _net_forward(self.layers, z)


def _bin_index(z: np.ndarray, q: int) -> np.ndarray:
    idx = np.floor(z * q).astype(int)
    return np.clip(idx, 0, q - 1)


def _weighted_risk(w: np.ndarray, residuals: np.ndarray) -> float:
    return float(np.dot(w, residuals**2))


def _fit_linear(z: np.ndarray, y: np.ndarray, w: np.ndarray, spec: HypothesisClassSpec) -> FittedHypothesis:
    p = z.shape[1]
    gram = (z * w[:, None]).T @ z
    rhs = z.T @ (w * y)
    eigvals, eigvecs = np.linalg.eigh(gram)
    floor = GRAM_EIG_FLOOR * np.trace(gram) / p
    signed = bool(np.any(w < 0))
    if eigvals[0] < floor and signed:
        raise RankDeficientGramError(
            f"weighted Gram matrix has eigenvalue {eigvals[0]:.3e} below floor {floor:.3e} "
            "with signed weights; the objective may be indefinite"
        )
    c_rot = eigvecs.T @ rhs
    safe = eigvals > max(floor, 0.0)
    beta_unc_rot = np.where(safe, c_rot / np.where(safe, eigvals, 1.0), 0.0)
    beta = eigvecs @ beta_unc_rot
    multiplier = 0.0
    B = spec.b_bound
    if np.linalg.norm(beta) > B:
        # Exact ball-constrained minimizer: (G + lam I) beta = rhs with the
        # unique lam > 0 putting beta on the boundary.
        eig_pos = np.maximum(eigvals, 0.0)

        def radius_gap(lam: float) -> float:
            return float(np.sum((c_rot / (eig_pos + lam)) ** 2)) - B**2

        # a singular Gram needs a strictly positive lower bracket
        lo = 0.0 if eig_pos[0] > 0 else 1e-30 * max(1.0, float(np.trace(gram)))
        hi = max(1.0, np.linalg.norm(rhs) / B - eig_pos[0]) + 1.0
        while radius_gap(hi) > 0:
            hi *= 2.0
        multiplier = float(brentq(radius_gap, lo, hi, xtol=1e-14, rtol=1e-15))
        beta = eigvecs @ (c_rot / (eig_pos + multiplier))
    residuals = y - z @ beta
    beta = np.asarray(beta, dtype=float)
    beta.flags.writeable = False
    return FittedHypothesis(
        class_spec=spec,
        coef=beta,
        fit_meta={
            "solver": "constrained" if multiplier > 0 else "normal_equations",
            "multiplier": multiplier,
            "empirical_risk": _weighted_risk(w, residuals),
            "min_gram_eig": float(eigvals[0]),
        },
    )


def _fit_step(z: np.ndarray, y: np.ndarray, w: np.ndarray, spec: HypothesisClassSpec) -> FittedHypothesis:
    q, B = spec.q, spec.b_bound
    if np.any(z[:, 0] < 0) or np.any(z[:, 0] >= 1):
        raise HypothesisError("step basis expects covariates in [0, 1)")
    idx = _bin_index(z[:, 0], q)
    sw = np.bincount(idx, weights=w, minlength=q)
    sy = np.bincount(idx, weights=w * y, minlength=q)
    values = np.zeros(q)
    degenerate = 0
    for j in range(q):
        if sw[j] > 0:
            # Clipped weighted mean = box-constrained minimizer of the
            # convex per-bin objective.
            values[j] = min(max(sy[j] / sw[j], -B), B)
        elif sw[j] < 0:
            # Concave per-bin objective: the box minimizer is an endpoint.
            lo = sw[j] * B**2 + 2.0 * sy[j] * B
            hi = sw[j] * B**2 - 2.0 * sy[j] * B
            values[j] = -B if lo < hi else B
            degenerate += 1
        else:
            values[j] = 0.0  # empty bin (or exactly cancelling weights)
    fitted = values[idx]
    values.flags.writeable = False
    return FittedHypothesis(
        class_spec=spec,
        bins=values,
        fit_meta={
            "solver": "bin_means",
            "empirical_risk": _weighted_risk(w, y - fitted),
            "nonconvex_bins": degenerate,
        },
    )


def _net_forward(layers, z: np.ndarray) -> np.ndarray:
    h = z
    for W, b in layers[:-1]:
        h = np.maximum(h @ W + b, 0.0)
    W, b = layers[-1]
    return (h @ W + b)[:, 0]


def _net_forward_cache(layers, z: np.ndarray):
    acts = [z]
    h = z
    for W, b in layers[:-1]:
        h = np.maximum(h @ W + b, 0.0)
        acts.append(h)
    W, b = layers[-1]
    return (h @ W + b)[:, 0], acts


def _net_gradients(layers, acts, dout: np.ndarray):
    grads = [None] * len(layers)
    delta = dout[:, None]
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ W.T) * (acts[i] > 0)
    return grads


def _fit_net(
    z: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    spec: HypothesisClassSpec,
    seed: int,
) -> FittedHypothesis:
    rng = np.random.default_rng(seed)
    sizes = [z.shape[1]] + [spec.nu] * spec.ell + [1]
    bound = spec.param_bound
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.standard_normal((fan_in, fan_out)) / math.sqrt(fan_in)
        layers.append([np.clip(W, -bound, bound), np.zeros(fan_out)])

    best_risk = math.inf
    best_layers = None
    for _ in range(NET_ITERATIONS):
        pred, acts = _net_forward_cache(layers, z)
        resid = pred - y
        risk = _weighted_risk(w, resid)
        if risk < best_risk:
            best_risk = risk
            best_layers = [(W.copy(), b.copy()) for W, b in layers]
        dout = 2.0 * w * resid
        grads = _net_gradients(layers, acts, dout)
        for (gW, gb), layer in zip(grads, layers):
            layer[0] = np.clip(layer[0] - NET_STEP_SIZE * gW, -bound, bound)
            layer[1] = np.clip(layer[1] - NET_STEP_SIZE * gb, -bound, bound)
    pred, _ = _net_forward_cache(layers, z)
    final_risk = _weighted_risk(w, pred - y)
    if final_risk < best_risk:
        best_risk = final_risk
        best_layers = [(W.copy(), b.copy()) for W, b in layers]
    frozen = tuple((W, b) for W, b in best_layers)
    for W, b in frozen:
        W.flags.writeable = False
        b.flags.writeable = False
    return FittedHypothesis(
        class_spec=spec,
        layers=frozen,
        fit_meta={
            "solver": "projected_gd",
            "iterations": NET_ITERATIONS,
            "step_size": NET_STEP_SIZE,
            "empirical_risk": best_risk,
            "seed": int(seed),
        },
    )


def fit_weighted_erm(
    path: SamplePath,
    w: WeightVector,
    class_spec: HypothesisClassSpec,
    *,
    seed: int = 0,
) -> FittedHypothesis:
    """Minimize the weighted empirical square loss over the class.

    Only the first n observations of the path enter the fit; the held-out
    final row never does.  Linear and step fits are exact minimizers; the
    network fit is approximate (projected gradient descent) and records
    its achieved empirical risk.
    """
    n = path.spec.n
    if w.entries.shape[0] != n:
        raise HypothesisError(f"weight length {w.entries.shape[0]} != n={n}")
    z, y, wv = path.z[:n], path.y[:n], w.entries
    if class_spec.kind is HypothesisKind.LINEAR_BALL:
        return _fit_linear(z, y, wv, class_spec)
    if class_spec.kind is HypothesisKind.STEP_BASIS:
        return _fit_step(z, y, wv, class_spec)
    return _fit_net(z, y, wv, class_spec, seed)


# ---------------------------------------------------------------------------
# Distances


def _as_hypothesis(g, template: "FittedHypothesis | None" = None) -> FittedHypothesis:
    """Coerce a coefficient vector / scalar into a hypothesis for comparisons."""
    if isinstance(g, FittedHypothesis):
        return g
    arr = np.asarray(g, dtype=float)
    if arr.ndim == 0:
        spec = HypothesisClassSpec.step(q=1, b_bound=max(1.0, abs(float(arr)) + 1.0))
        return FittedHypothesis(class_spec=spec, bins=np.array([float(arr)]))
    spec = HypothesisClassSpec.linear(
        b_bound=max(1.0, float(np.linalg.norm(arr))), lambda_min=1.0
    )
    return FittedHypothesis(class_spec=spec, coef=arr)


def _step_edges(f: FittedHypothesis) -> np.ndarray:
    q = f.class_spec.q
    return np.arange(q + 1, dtype=float) / q


def l2_distance(
    f: FittedHypothesis,
    g,
    law: CovariateLaw,
    *,
    p: int = 1,
    second_moment: np.ndarray | None = None,
    draws: int = MC_DRAWS_DEFAULT,
    seed: int = 0,
) -> tuple[float, float, str]:
    """Squared L2 distance between two hypotheses under the covariate law.

    Returns (value, stderr, mode).  Linear pairs use the exact quadratic
    form in the second-moment matrix; step pairs (including constants)
    integrate exactly over the common bin refinement of the uniform law;
    every other pairing is Monte Carlo over fresh covariate draws.
    """
    g = _as_hypothesis(g)
    kinds = (f.kind, g.kind)
    if kinds == (HypothesisKind.LINEAR_BALL, HypothesisKind.LINEAR_BALL):
        if second_moment is None:
            raise HypothesisError("linear pairs need the second-moment matrix")
        d = f.coef - g.coef
        return float(d @ second_moment @ d), 0.0, "exact"
    if (
        kinds == (HypothesisKind.STEP_BASIS, HypothesisKind.STEP_BASIS)
        and law is CovariateLaw.INTERVAL
    ):
        edges = np.union1d(_step_edges(f), _step_edges(g))
        mids = 0.5 * (edges[:-1] + edges[1:])
        widths = np.diff(edges)
        diff = f.bins[_bin_index(mids, f.class_spec.q)] - g.bins[_bin_index(mids, g.class_spec.q)]
        return float(np.sum(widths * diff**2)), 0.0, "exact"
    rng = np.random.default_rng(seed)
    z = sample_covariates(law, p, draws, rng)
    sq = (f.predict(z) - g.predict(z)) ** 2
    value = float(sq.mean())
    stderr = float(sq.std(ddof=1) / math.sqrt(draws))
    return value, stderr, "monte_carlo"


def sup_distance(f: FittedHypothesis, g, *, grid_points: int = 8192) -> float:
    """Sup-norm distance over the covariate support.

    Exact for linear pairs (Cauchy-Schwarz over the unit ball), for step
    pairs (max over the bin refinement), and for step-vs-linear pairs (the
    per-bin extremes sit at bin edges).  Network pairings fall back to a
    uniform evaluation grid of ``grid_points`` points.
    """
    g = _as_hypothesis(g)
    kinds = {f.kind, g.kind}
    if kinds == {HypothesisKind.LINEAR_BALL}:
        return float(np.linalg.norm(f.coef - g.coef))
    if kinds == {HypothesisKind.STEP_BASIS}:
        edges = np.union1d(_step_edges(f), _step_edges(g))
        mids = 0.5 * (edges[:-1] + edges[1:])
        diff = f.bins[_bin_index(mids, f.class_spec.q)] - g.bins[_bin_index(mids, g.class_spec.q)]
        return float(np.max(np.abs(diff)))
    if kinds == {HypothesisKind.STEP_BASIS, HypothesisKind.LINEAR_BALL}:
        step, lin = (f, g) if f.kind is HypothesisKind.STEP_BASIS else (g, f)
        if lin.coef.shape[0] != 1:
            raise HypothesisError("step-vs-linear sup distance is univariate")
        q = step.class_spec.q
        edges = _step_edges(step)
        slope = float(lin.coef[0])
        left = np.abs(step.bins - slope * edges[:-1])
        right = np.abs(step.bins - slope * edges[1:])
        return float(max(left.max(), right.max()))
    # network involved: documented uniform grid on [0, 1) (univariate support)
    zs = (np.arange(grid_points, dtype=float) + 0.5)[:, None] / grid_points
    return float(np.max(np.abs(f.predict(zs) - g.predict(zs))))
