"""Discretized dynamic-Bayesian-network trust filtering.

Each robot's latent trust value lives on the midpoints of a uniform grid
over (0, 1).  One filter step pushes the belief through a truncated
Gaussian transition kernel whose mean is a linear function of the prior
trust value and the observed impact factors, then weights it with a
sigmoid inquiry likelihood when a human answer is available, and finally
renormalizes.

The default coefficients shipped here are NOT calibrated against human
subjects; they only give plausible dynamics.  Every coefficient can be
overridden from the scenario file.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from .allocation import AllocationPath, RobotProfile
from .errors import DegenerateBelief


@dataclass(frozen=True)
class TrustParams:
    """Coefficients of the trust mean update plus filter discretization."""

    A: float = 0.85
    B1: float = 0.05
    B2: float = 0.05
    C1: float = 0.02
    C2: float = 0.04
    D1: float = 0.02
    D2: float = 0.04
    E1: float = 1.0
    E2: float = 1.0
    rho: float = 0.01        # Gaussian variance of the transition kernel
    alpha1: float = 8.0      # inquiry sigmoid weight on current trust
    alpha2: float = 4.0      # inquiry sigmoid weight on previous trust
    gamma: float = 0.8       # utilization ratio of the workload curve
    mu: float = 0.5          # positive allocation influence coefficient
    mu_bar: float = -0.5     # negative allocation influence coefficient
    i_max: int = 5           # robots a supervisor is comfortable watching
    bins: int = 101
    mean_clamp: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")
        if self.bins < 3:
            raise ValueError("need at least 3 trust bins")
        if not (self.mu > 0.0 > self.mu_bar):
            raise ValueError("mu must be positive and mu_bar negative")
        if not 0.0 < self.mean_clamp < 0.5:
            raise ValueError("mean_clamp must lie in (0, 0.5)")
        if self.i_max < 1:
            raise ValueError("i_max must be at least 1")

    @classmethod
    def from_dict(cls, raw: Mapping) -> "TrustParams":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in raw.items() if k in known})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class TrustFactors:
    """Impact factors feeding one trust update.

    `ac` is present only at reallocation epochs; `None` at ordinary steps.
    """

    p_r: float = 0.0
    a: float = 1.0
    u: float = 0.0
    br: float = 1.0
    ac: float | None = None


NEUTRAL_FACTORS = TrustFactors()


@dataclass(frozen=True)
class HumanObservation:
    h: int
    robot: str
    time: int

    def __post_init__(self) -> None:
        if self.h not in (0, 1):
            raise ValueError("h must be 0 or 1")


def _midpoints(bins: int) -> np.ndarray:
    return (np.arange(bins) + 0.5) / bins


@dataclass(frozen=True, eq=False)
class TrustBelief:
    """Normalized probability vector over trust-grid midpoints."""

    probabilities: np.ndarray

    def __post_init__(self) -> None:
        vec = np.asarray(self.probabilities, dtype=float)
        if vec.ndim != 1 or vec.size < 3:
            raise ValueError("belief must be a vector over at least 3 bins")
        if np.any(vec < 0) or abs(vec.sum() - 1.0) > 1e-9:
            raise ValueError("belief must be a normalized nonnegative vector")
        object.__setattr__(self, "probabilities", vec)

    @classmethod
    def uniform(cls, bins: int = 101) -> "TrustBelief":
        return cls(np.full(bins, 1.0 / bins))

    @classmethod
    def delta(cls, value: float, bins: int = 101) -> "TrustBelief":
        vec = np.zeros(bins)
        vec[int(np.argmin(np.abs(_midpoints(bins) - value)))] = 1.0
        return cls(vec)

    @classmethod
    def gaussian(cls, center: float, sigma: float, bins: int = 101) -> "TrustBelief":
        mids = _midpoints(bins)
        vec = np.exp(-((mids - center) ** 2) / (2.0 * sigma**2))
        return cls(vec / vec.sum())

    @property
    def bins(self) -> int:
        return self.probabilities.size

    @property
    def midpoints(self) -> np.ndarray:
        return _midpoints(self.bins)

    @property
    def mean(self) -> float:
        return float(self.midpoints @ self.probabilities)

    @property
    def variance(self) -> float:
        mids = self.midpoints
        return float(((mids - self.mean) ** 2) @ self.probabilities)

    @property
    def mode(self) -> float:
        """Midpoint of the most probable bin; ties resolve to the lowest bin."""
        return float(self.midpoints[int(np.argmax(self.probabilities))])


def expected_trust(belief: TrustBelief) -> float:
    return belief.mean


def mode_trust(belief: TrustBelief) -> float:
    return belief.mode


# ---------------------------------------------------------------------------
# impact factors
# ---------------------------------------------------------------------------

def performance_update(prev: float, completed: int, avoided: int) -> float:
    """Accumulated performance: unit reward per completion and per avoided obstacle."""
    if prev < 0 or completed not in (0, 1) or avoided < 0:
        raise ValueError("invalid performance inputs")
    return prev + completed + avoided


def safety_coefficient(robot: RobotProfile, battery_low: bool) -> float:
    """1 in the normal state, 1/|capabilities| when the battery is low."""
    if battery_low:
        return 1.0 / len(robot.capabilities)
    return 1.0


def env_workload(obstacles_in_range: int, params: TrustParams) -> float:
    """Workload from surrounding clutter: 1 - gamma^(count + 1)."""
    if obstacles_in_range < 0:
        raise ValueError("obstacle count must be nonnegative")
    return 1.0 - params.gamma ** (obstacles_in_range + 1)


def supervision_workload(activated: bool, i_act: int, params: TrustParams) -> float:
    """Workload from supervising the activated robots of an allocation."""
    if activated:
        if not 0 <= i_act <= params.i_max:
            raise ValueError("i_act must lie in [0, i_max]")
        return 1.0 - i_act / params.i_max
    return 1.0


def allocation_influence(
    path: AllocationPath,
    robot: str,
    robots: Iterable[RobotProfile],
    params: TrustParams,
) -> float:
    """System-wide influence of an adopted allocation on one robot.

    Per step: +mu/I when the robot is assigned, mu_bar/I when some symbol
    it could have performed went to another robot, 0 otherwise.
    """
    robots = sorted(robots)
    count = len(robots)
    capabilities = {r.id: r.capabilities for r in robots}
    if robot not in capabilities:
        raise KeyError(f"unknown robot {robot!r}")
    total = 0.0
    for action in path.steps:
        assigned = action.assigned()
        if any(c.robot == robot for c in assigned):
            total += params.mu / count
        elif any(c.symbol in capabilities[robot] for c in assigned):
            total += params.mu_bar / count
    return total


def intervention_probability(t_now: float, t_prev: float, params: TrustParams) -> float:
    """Probability that the human allows a reallocation, given trust then and now."""
    return float(1.0 / (1.0 + np.exp(-params.alpha1 * t_now + params.alpha2 * t_prev)))


# ---------------------------------------------------------------------------
# transition kernel and forward filtering
# ---------------------------------------------------------------------------

def _factor_offset(now: TrustFactors, prev: TrustFactors, params: TrustParams) -> float:
    offset = (
        params.B1 * now.a * now.p_r
        - params.B2 * prev.a * prev.p_r
        + params.C1 * now.u
        - params.C2 * prev.u
        + params.D1 * now.br
        - params.D2 * prev.br
    )
    if now.ac is not None:
        prev_ac = prev.ac if prev.ac is not None else 0.0
        offset += params.E1 * now.ac - params.E2 * prev_ac
    return offset


def transition_mean(
    t_prev: float, now: TrustFactors, prev: TrustFactors, params: TrustParams
) -> float:
    """Mean of the next-trust Gaussian, clamped into the open unit interval."""
    raw = params.A * t_prev + _factor_offset(now, prev, params)
    return float(np.clip(raw, params.mean_clamp, 1.0 - params.mean_clamp))


@lru_cache(maxsize=1024)
def _transition_kernel(
    bins: int, a_coef: float, offset: float, rho: float, clamp: float
) -> np.ndarray:
    """Column-stochastic kernel K[next, prev] of the truncated Gaussian CPD."""
    mids = _midpoints(bins)
    means = np.clip(a_coef * mids + offset, clamp, 1.0 - clamp)
    log_density = -((mids[:, None] - means[None, :]) ** 2) / (2.0 * rho)
    log_density -= log_density.max(axis=0, keepdims=True)
    kernel = np.exp(log_density)
    kernel /= kernel.sum(axis=0, keepdims=True)
    kernel.setflags(write=False)
    return kernel


def _observation_matrix(obs: HumanObservation, params: TrustParams, bins: int) -> np.ndarray:
    mids = _midpoints(bins)
    allow = 1.0 / (
        1.0 + np.exp(-params.alpha1 * mids[:, None] + params.alpha2 * mids[None, :])
    )
    return allow if obs.h == 1 else 1.0 - allow


def filter_step(
    belief: TrustBelief,
    now: TrustFactors,
    prev: TrustFactors,
    obs: HumanObservation | None,
    params: TrustParams,
) -> TrustBelief:
    """One forward step: transition by the factor-conditioned kernel, weight
    by the inquiry likelihood when an answer is present, renormalize."""
    if belief.bins != params.bins:
        raise ValueError("belief resolution does not match params.bins")
    kernel = _transition_kernel(
        params.bins, params.A, _factor_offset(now, prev, params),
        params.rho, params.mean_clamp,
    )
    if obs is not None:
        kernel = kernel * _observation_matrix(obs, params, params.bins)
    posterior = kernel @ belief.probabilities
    norm = posterior.sum()
    if not np.isfinite(norm) or norm <= 0.0:
        raise DegenerateBelief("filter step annihilated all probability mass")
    return TrustBelief(posterior / norm)


def make_prior(spec: Mapping | None, bins: int) -> TrustBelief:
    """Build an initial belief from a scenario prior description."""
    if spec is None:
        return TrustBelief.gaussian(0.5, 0.1, bins)
    kind = spec.get("kind", "gaussian")
    if kind == "gaussian":
        return TrustBelief.gaussian(
            float(spec.get("center", 0.5)), float(spec.get("sigma", 0.1)), bins
        )
    if kind == "delta":
        return TrustBelief.delta(float(spec["value"]), bins)
    if kind == "uniform":
        return TrustBelief.uniform(bins)
    raise ValueError(f"unknown prior kind {kind!r}")


def epoch_factors(
    base: TrustFactors, ac: float, br: float
) -> TrustFactors:
    """Factors for a reallocation-epoch update carrying the influence term."""
    return replace(base, ac=ac, br=br)
