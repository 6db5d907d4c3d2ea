"""Core growth-and-competition model.

Defines the global model constants, the pairwise competition potential in
size- and log-space, the exact solution of the isolated (no-competition)
growth law, a linear-envelope helper, and the admissibility check that the
simulator requires before integrating a population.

Sizes live in ``(s_m, s_m * exp(R_M))``; the log-size ``r = log(s / s_m)``
maps that interval onto ``(0, R_M)``.  Both parameterizations are exposed
because the integrator works in log space while user-facing data is in
linear sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams",
    "PlantTraits",
    "GronwallEnvelope",
    "AdmissibilityVerdict",
    "competition_potential",
    "log_potential",
    "gompertz_closed_form",
    "gronwall_bound",
    "validate_initial_config",
]


@dataclass(frozen=True)
class ModelParams:
    """Global constants shared by every formula of the model.

    Attributes
    ----------
    s_m:
        Minimal plant size; reference scale of all log-sizes.
    R_M:
        Log-size normalizer.  ``s_m * exp(R_M)`` is the hard upper size
        bound used everywhere downstream.
    sigma_x:
        Spatial decay scale of the competition potential.
    sigma_r:
        Relative-size sensitivity scale of the competition potential.
    """

    s_m: float
    R_M: float
    sigma_x: float
    sigma_r: float

    def __post_init__(self) -> None:
        for name in ("s_m", "R_M", "sigma_x", "sigma_r"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"{name} must be strictly positive, got {value!r}")

    @property
    def max_size(self) -> float:
        """Hard upper size bound ``s_m * exp(R_M)``."""
        return self.s_m * math.exp(self.R_M)


@dataclass
class PlantTraits:
    """Fixed characteristics of one individual.

    ``x`` is the planar position, ``S`` the asymptotic (isolated) size and
    ``gamma`` the growth rate.  Admissibility relative to a ``ModelParams``
    (``s_m < S < s_m * exp(R_M)``) is checked by
    :func:`validate_initial_config`, not here, because it needs the global
    constants.
    """

    x: np.ndarray
    S: float
    gamma: float

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        if self.x.shape != (2,):
            raise ValueError(f"position must have shape (2,), got {self.x.shape}")
        self.S = float(self.S)
        self.gamma = float(self.gamma)
        if not self.S > 0.0:
            raise ValueError("asymptotic size S must be strictly positive")
        if self.gamma < 0.0:
            raise ValueError("growth rate gamma must be nonnegative")


@dataclass(frozen=True)
class GronwallEnvelope:
    """Coefficients of the scalar linear envelope ``y' = a - b y``.

    The comparison solution through ``y0`` is
    ``a/b + (y0 - a/b) * exp(-b t)``; depending on the sign of the
    differential inequality it bounds a quantity from above or below.
    """

    a: float
    b: float
    y0: float

    def __post_init__(self) -> None:
        if self.b == 0.0:
            raise ValueError("decay constant b must be nonzero")


@dataclass(frozen=True)
class AdmissibilityVerdict:
    """Outcome of :func:`validate_initial_config`.

    ``ok`` is True when every individual satisfies the admissibility
    hypotheses; otherwise ``index`` is the first offending individual and
    ``reason`` a short description of the violated condition.
    """

    ok: bool
    index: int | None = None
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def competition_potential(params: ModelParams, s, s_prime, dist):
    """Competition potential exerted on a plant of size ``s`` by a neighbor
    of size ``s_prime`` at Euclidean distance ``dist``.

        C(s, s', d) = log(s'/s_m) / (2 R_M (1 + d^2 / sigma_x^2))
                      * (1 + tanh(log(s'/s) / sigma_r))

    The value lies in ``[0, 1]`` whenever both sizes lie in
    ``[s_m, s_m * exp(R_M)]``.  It decreases with distance, increases with
    the neighbor's size, and decreases with the plant's own size.
    Broadcasts over array arguments.
    """
    s = np.asarray(s, dtype=float)
    s_prime = np.asarray(s_prime, dtype=float)
    dist = np.asarray(dist, dtype=float)
    if np.any(s <= 0.0) or np.any(s_prime <= 0.0):
        raise ValueError("sizes must be strictly positive")
    spatial = 1.0 + (dist / params.sigma_x) ** 2
    growth = np.log(s_prime / params.s_m) / (2.0 * params.R_M * spatial)
    crowding = 1.0 + np.tanh(np.log(s_prime / s) / params.sigma_r)
    out = growth * crowding
    return out if out.ndim else float(out)


def log_potential(params: ModelParams, r, r_prime, dist):
    """Competition potential in log-size variables ``r = log(s / s_m)``.

        C_r(r, r', d) = r' / (2 R_M (1 + d^2 / sigma_x^2))
                        * (1 + tanh((r' - r) / sigma_r))

    Identical to :func:`competition_potential` evaluated at
    ``s = s_m e^r``, ``s' = s_m e^{r'}``; this is the form the integrator
    uses because the coupled system is solved in log space.
    """
    r = np.asarray(r, dtype=float)
    r_prime = np.asarray(r_prime, dtype=float)
    dist = np.asarray(dist, dtype=float)
    spatial = 1.0 + (dist / params.sigma_x) ** 2
    out = r_prime / (2.0 * params.R_M * spatial) * (1.0 + np.tanh((r_prime - r) / params.sigma_r))
    return out if out.ndim else float(out)


def gompertz_closed_form(traits: PlantTraits, params: ModelParams, s0, t):
    """Exact solution of the isolated growth law
    ``ds/dt = gamma * s * (log(S/s_m) - log(s/s_m))`` with ``s(0) = s0``.

    In log-size variables the law is linear,
    ``dr/dt = gamma * (log(S/s_m) - r)``, giving

        s(t) = S * (s0 / S) ** exp(-gamma * t)

    which is evaluated here in log space for stability.  Broadcasts over
    ``t``.
    """
    t = np.asarray(t, dtype=float)
    if float(s0) <= 0.0:
        raise ValueError("initial size must be strictly positive")
    r0 = math.log(s0 / params.s_m)
    r_cap = math.log(traits.S / params.s_m)
    r = r_cap + (r0 - r_cap) * np.exp(-traits.gamma * t)
    out = params.s_m * np.exp(r)
    return out if out.ndim else float(out)


def gronwall_bound(env: GronwallEnvelope, t, direction: str = "upper"):
    """Evaluate the linear comparison envelope at time ``t``.

        a/b + (y0 - a/b) * exp(-b t)

    ``direction`` records whether the caller uses the value as an upper or
    a lower bound; the formula is the same either way.  Broadcasts over
    ``t``.
    """
    if direction not in ("upper", "lower"):
        raise ValueError("direction must be 'upper' or 'lower'")
    if env.b == 0.0:
        raise ValueError("decay constant b must be nonzero")
    t = np.asarray(t, dtype=float)
    fixed = env.a / env.b
    out = fixed + (env.y0 - fixed) * np.exp(-env.b * t)
    return out if out.ndim else float(out)


def validate_initial_config(
    params: ModelParams,
    traits: list[PlantTraits],
    sizes0,
) -> AdmissibilityVerdict:
    """Check the admissibility hypotheses guaranteeing a global solution.

    Every individual must satisfy ``s_m < S_i < s_m * exp(R_M)``,
    ``gamma_i > 0`` and ``s_m < s0_i < S_i``.  Under these conditions the
    coupled system has a unique global solution with
    ``s_m < s_i(t) < S_i`` and competition indices in ``[0, 1]`` for all
    time.  Returns a verdict naming the first violating individual, if
    any.  Raises on a length mismatch or a population smaller than 2 (the
    competition index divides by ``N - 1``).
    """
    sizes0 = np.asarray(sizes0, dtype=float)
    if len(traits) != len(sizes0):
        raise ValueError(
            f"traits ({len(traits)}) and initial sizes ({len(sizes0)}) differ in length"
        )
    if len(traits) < 2:
        raise ValueError("population must contain at least 2 individuals")
    hi = params.max_size
    for i, (th, s0) in enumerate(zip(traits, sizes0)):
        if not (params.s_m < th.S < hi):
            return AdmissibilityVerdict(
                False, i, "asymptotic size outside (s_m, s_m*exp(R_M))"
            )
        if not th.gamma > 0.0:
            return AdmissibilityVerdict(False, i, "growth rate not strictly positive")
        if not (params.s_m < s0 < th.S):
            return AdmissibilityVerdict(False, i, "initial size outside (s_m, S)")
    return AdmissibilityVerdict(True)
