"""Recency-weight families: construction, exact norms, and covering nets.

Three families are supported, each parameterizing a normalized weight
vector over observations 1..t inside a horizon of length n:

* uniform window: mass 1/s on the last s observations,
* exponential smoothing: geometric decay with rate theta > 0,
* Brown double exponential smoothing: signed weights with decay
  theta in (0, 1].

All vectors sum to one; entries past the anchor time t are zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Upper end of the exponential-smoothing parameter interval (0, R).
# theta = 10 already puts > 0.9999 of the mass on the last observation.
DEFAULT_EXP_RANGE = 10.0

# Half-width used to approach open interval endpoints on search grids.
_ENDPOINT_EPS = 1e-6

# Points in the geometric parameter grid used for grid-approximate suprema.
_GRID_POINTS = 10_000


class WeightFamily(Enum):
    UNIFORM_WINDOW = "uniform"
    EXPONENTIAL = "exp"
    BROWN_DES = "brown"


class WeightDomainError(ValueError):
    """A weight parameter lies outside its family's domain."""


@dataclass(frozen=True)
class WeightSpec:
    """One member of a weight family: (family, anchor time t, horizon n, param).

    ``param`` is the window length s for uniform windows (integer-valued,
    1 <= s <= t) and the decay rate theta for the smoothing families.
    """

    family: WeightFamily
    t: int
    n: int
    param: float

    def __post_init__(self) -> None:
        if not (1 <= self.t <= self.n):
            raise WeightDomainError(f"need 1 <= t <= n, got t={self.t}, n={self.n}")
        p = self.param
        if self.family is WeightFamily.UNIFORM_WINDOW:
            if p != int(p) or not (1 <= p <= self.t):
                raise WeightDomainError(f"window length must be an integer in [1, t], got {p}")
        elif self.family is WeightFamily.EXPONENTIAL:
            if not p > 0:
                raise WeightDomainError(f"exponential decay rate must be > 0, got {p}")
        elif self.family is WeightFamily.BROWN_DES:
            # theta = 1 is the degenerate point mass (decay factor 0).
            if not (0 < p <= 1):
                raise WeightDomainError(f"Brown decay rate must be in (0, 1], got {p}")
        else:  # pragma: no cover
            raise WeightDomainError(f"unknown family {self.family}")


@dataclass(frozen=True)
class WeightVector:
    """A realized weight vector with cached norms.

    ``entries`` has length n; ``sum`` is 1 up to float rounding.
    """

    entries: np.ndarray
    l1: float
    l2sq: float
    linf: float
    sum: float

    @property
    def l2(self) -> float:
        return math.sqrt(self.l2sq)

    @property
    def n_eff(self) -> float:
        """Effective sample size 1 / ||w||^2."""
        return 1.0 / self.l2sq

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class WeightClassConstants:
    """Norm extremes of a weight class.

    c1 = sup ||w||_1, cw = inf ||w||_2, bw = sup ||w||_inf / ||w||_2^2,
    n_eff_max = 1 / cw^2.  ``exact`` is False when any field came from a
    finite parameter grid rather than a closed form.
    """

    c1: float
    cw: float
    bw: float
    n_eff_max: float
    exact: bool


def _from_entries(entries: np.ndarray) -> WeightVector:
    entries = np.asarray(entries, dtype=float)
    entries.flags.writeable = False
    return WeightVector(
        entries=entries,
        l1=float(np.sum(np.abs(entries))),
        l2sq=float(np.dot(entries, entries)),
        linf=float(np.max(np.abs(entries))),
        sum=float(np.sum(entries)),
    )


def _brown_blocks(theta: float, t: int) -> np.ndarray:
    """Unnormalized Brown weights b_k = (2 - theta (k+1)) (1-theta)^k, k = 0..t-1."""
    k = np.arange(t, dtype=float)
    r = 1.0 - theta
    return (2.0 - theta * (k + 1.0)) * r**k


def make_weights(spec: WeightSpec) -> WeightVector:
    """Realize a weight spec as a normalized length-n vector with cached norms."""
    t, n = spec.t, spec.n
    entries = np.zeros(n)
    if spec.family is WeightFamily.UNIFORM_WINDOW:
        s = int(spec.param)
        entries[t - s : t] = 1.0 / s
    elif spec.family is WeightFamily.EXPONENTIAL:
        lags = np.arange(t - 1, -1, -1, dtype=float)  # t - i for i = 1..t
        raw = np.exp(-spec.param * lags)
        entries[:t] = raw / raw.sum()
    else:  # BROWN_DES
        theta = spec.param
        blocks = _brown_blocks(theta, t)  # index k = t - i
        total = blocks.sum()
        # The closed-form normalizer (1 + r^t (t theta - 1)) / theta is
        # provably positive; a nonpositive value indicates a bug, not a
        # model state.
        closed = (1.0 + (1.0 - theta) ** t * (t * theta - 1.0)) / theta
        if not (total > 0 and closed > 0):
            raise AssertionError(
                f"Brown normalizer must be positive, got sum={total}, closed={closed}"
            )
        entries[:t] = blocks[::-1] / total + 0.0  # clear negative zeros
    return _from_entries(entries)


def exponential_norms(theta: float, t: int) -> tuple[float, float]:
    """Closed-form (||w||^2, ||w||_inf) of exponential weights at anchor t.

    With rho = exp(-theta): ||w||_inf = (1-rho)/(1-rho^t) and
    ||w||^2 = (1-rho)^2 (1-rho^{2t}) / ((1-rho^t)^2 (1-rho^2)).
    Uses expm1 so tiny theta stays accurate.
    """
    if theta <= 0:
        raise WeightDomainError("theta must be > 0")
    one_m_rho = -math.expm1(-theta)
    one_m_rho_t = -math.expm1(-theta * t)
    one_m_rho_2t = -math.expm1(-2.0 * theta * t)
    one_m_rho_2 = -math.expm1(-2.0 * theta)
    linf = one_m_rho / one_m_rho_t
    l2sq = one_m_rho**2 * one_m_rho_2t / (one_m_rho_t**2 * one_m_rho_2)
    return l2sq, linf


def exponential_spikiness(theta: float, t: int) -> float:
    """Closed-form ||w||_inf / ||w||^2 = (1+rho)/(1+rho^t) for exponential weights."""
    rho = math.exp(-theta)
    return (1.0 + rho) / (1.0 + rho**t)


def theta_for_n_eff(n_eff: float, t: int) -> float:
    """Decay rate whose exponential weights at anchor t have 1/||w||^2 = n_eff."""
    if not 1.0 <= n_eff <= t:
        raise WeightDomainError(f"reachable n_eff is [1, t], got {n_eff} with t={t}")
    from scipy.optimize import brentq

    def gap(theta: float) -> float:
        l2sq, _ = exponential_norms(theta, t)
        return 1.0 / l2sq - n_eff

    lo, hi = 1e-12, 60.0
    if gap(lo) < 0:  # n_eff above what theta -> 0 reaches (== t): only at the limit
        return lo
    return float(brentq(gap, lo, hi, xtol=1e-14, rtol=1e-15))


def _grid(lo: float, hi: float) -> np.ndarray:
    lo_eff = max(lo, 0.0) + _ENDPOINT_EPS
    hi_eff = hi - _ENDPOINT_EPS
    if hi_eff <= lo_eff:
        return np.array([0.5 * (lo + hi)])
    return np.geomspace(lo_eff, hi_eff, _GRID_POINTS)


def class_constants(
    family: WeightFamily,
    param_range: tuple[float, float],
    t_range: tuple[int, int],
) -> WeightClassConstants:
    """Norm extremes of a family over params in ``param_range`` and anchors in ``t_range``.

    Uniform windows have exact constants.  The smoothing families use a
    geometric grid of 10^4 parameters with endpoints approached to 1e-6,
    flagged via ``exact=False``.
    """
    lo, hi = param_range
    t_lo, t_hi = t_range
    if t_lo < 1 or t_hi < t_lo:
        raise WeightDomainError(f"empty anchor range {t_range}")
    if hi <= lo:
        raise WeightDomainError(f"empty parameter range {param_range}")

    if family is WeightFamily.UNIFORM_WINDOW:
        # ||w||_1 = 1, ||w||_inf/||w||^2 = 1 for every window; min norm at s = t_hi.
        return WeightClassConstants(
            c1=1.0, cw=1.0 / math.sqrt(t_hi), bw=1.0, n_eff_max=float(t_hi), exact=True
        )

    if family is WeightFamily.EXPONENTIAL:
        if lo < 0:
            raise WeightDomainError("exponential rates must be positive")
        thetas = _grid(lo, hi)
        # Spikiness (1+rho)/(1+rho^t) and 1/||w||^2 both increase with t,
        # so the anchor extremes are attained at t_hi.
        bw = max(exponential_spikiness(th, t_hi) for th in thetas)
        cw = math.sqrt(min(exponential_norms(th, t_hi)[0] for th in thetas))
        return WeightClassConstants(
            c1=1.0, cw=cw, bw=bw, n_eff_max=1.0 / cw**2, exact=False
        )

    # BROWN_DES: evaluate realized norms on a theta grid x anchor subgrid.
    if not (0 <= lo < hi <= 1):
        raise WeightDomainError("Brown rates must lie in (0, 1)")
    thetas = _grid(lo, hi)
    t_values = np.unique(np.geomspace(t_lo, t_hi, 25).astype(int))
    c1 = 0.0
    bw = 0.0
    cw = math.inf
    r = 1.0 - thetas
    for t in t_values:
        k = np.arange(t, dtype=float)
        # blocks[j, k] for theta_j, lag k
        blocks = (2.0 - thetas[:, None] * (k[None, :] + 1.0)) * r[:, None] ** k[None, :]
        total = blocks.sum(axis=1)
        l1 = np.abs(blocks).sum(axis=1) / total
        l2sq = (blocks**2).sum(axis=1) / total**2
        linf = np.abs(blocks).max(axis=1) / total
        c1 = max(c1, float(l1.max()))
        bw = max(bw, float((linf / l2sq).max()))
        cw = min(cw, float(np.sqrt(l2sq.min())))
    return WeightClassConstants(c1=c1, cw=cw, bw=bw, n_eff_max=1.0 / cw**2, exact=False)


def build_weight_net(
    family: WeightFamily,
    param_range: tuple[float, float],
    t: int,
    epsilon: float,
) -> list[WeightSpec]:
    """Parameter grid whose weight vectors form an epsilon-cover in ||.||_1.

    The grids use the families' Lipschitz constants in the decay rate:
    (t-1) for exponential smoothing and 20 t for Brown smoothing, with
    midpoint spacing so every parameter sits within half a step of the
    grid.  Uniform windows are enumerated exactly.
    """
    if epsilon <= 0:
        raise WeightDomainError(f"epsilon must be > 0, got {epsilon}")
    lo, hi = param_range

    if family is WeightFamily.UNIFORM_WINDOW:
        return [WeightSpec(family, t=t, n=t, param=float(s)) for s in range(1, t + 1)]

    if family is WeightFamily.EXPONENTIAL:
        lip = float(t - 1)
    else:
        lip = 20.0 * t
    if lip == 0.0:  # t = 1: every member is the point mass at time 1
        return [WeightSpec(family, t=t, n=t, param=0.5 * (lo + hi))]
    step = epsilon / lip
    count = max(1, math.ceil((hi - lo) / step))
    params = lo + (np.arange(count) + 0.5) * step
    params = np.minimum(params, hi - 1e-12 * max(1.0, abs(hi)))
    return [WeightSpec(family, t=t, n=t, param=float(p)) for p in params]


def covering_number_bound(
    family: WeightFamily,
    scope: str,
    epsilon: float,
    *,
    t: int | None = None,
    n: int | None = None,
    exp_range: float = DEFAULT_EXP_RANGE,
) -> float:
    """Analytic upper bound on the ||.||_1 covering number of a weight class.

    ``scope`` is "single" (one anchor time t) or "union" (anchors 1..n).
    Bounds: uniform t and n^2/2; exponential 3R(t-1)/eps and 3Rn^2/(2 eps);
    Brown 60t/eps and 60n^2/eps.  Floored at 1 since a nonempty class
    always needs at least one ball.
    """
    if epsilon <= 0:
        raise WeightDomainError(f"epsilon must be > 0, got {epsilon}")
    if scope not in ("single", "union"):
        raise ValueError(f"scope must be 'single' or 'union', got {scope!r}")
    if scope == "single" and t is None:
        raise ValueError("single scope needs t")
    if scope == "union" and n is None:
        raise ValueError("union scope needs n")

    if family is WeightFamily.UNIFORM_WINDOW:
        bound = float(t) if scope == "single" else n**2 / 2.0
    elif family is WeightFamily.EXPONENTIAL:
        if scope == "single":
            bound = 3.0 * exp_range * (t - 1) / epsilon
        else:
            bound = 3.0 * exp_range * n**2 / (2.0 * epsilon)
    else:
        bound = 60.0 * t / epsilon if scope == "single" else 60.0 * n**2 / epsilon
    return max(1.0, bound)
