"""Piecewise-constant surrogate of the competition load and its flow.

The time axis is cut into stages of length dt.  On each stage the
population-averaged competition potential felt by a probe plant is
frozen and fitted, as a function of the probe's initial data, by least
squares over polynomial features of bounded variable transforms.  The
fitted stages combine in closed form into an exponentially weighted
time integral, which plugs into the growth kernel to give the
approximate limiting flow

    flow(t, s, theta) = s_m (s/s_m)^{e^{-gamma t}}
                        (S/s_m)^{1 - e^{-gamma t} - I(t, s, theta)}

where I is the reconstructed potential integral.  Training is
recursive: the sizes that feed stage k's Monte-Carlo targets are
themselves advanced with the flow built from stages 0..k-1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .initial import Mu0Config, SurfaceParams, sample_mu0
from .model import ModelParams, PlantTraits
from .textio import write_csv

__all__ = [
    "FeatureSpec",
    "MeanFieldModel",
    "PotentialStage",
    "export_r2_csv",
    "feature_map",
    "fit_stage",
    "flow_eval",
    "flow_eval_many",
    "load_model",
    "mc_potential",
    "model_from_dict",
    "model_to_dict",
    "monomial_exponents",
    "n_monomials",
    "polynomial_features",
    "reconstructed_potential_integral",
    "save_model",
    "stage_potential_eval",
    "train",
]

MODEL_FORMAT = "plantfield-meanfield-model"
MODEL_VERSION = 1

# Sub-stream tags for the training draws.
_SET_CLOUD = 0
_SET_TRAIN = 1
_SET_TEST = 2


def n_monomials(k: int, d: int) -> int:
    """Number of k-variable monomials of total degree at most d."""
    return math.comb(k + d, k)


@lru_cache(maxsize=None)
def monomial_exponents(k: int, d: int) -> tuple:
    """Exponent tuples of all k-variable monomials with total degree <= d.

    Order: the last variable's exponent varies slowest; within each of
    its values the first k-1 variables recurse the same way.  For two
    variables and degree 2 this yields
    (0,0), (1,0), (2,0), (0,1), (1,1), (0,2) — i.e. the feature list
    (1, x1, x1^2, x2, x1*x2, x2^2).
    """
    if k < 1:
        raise ValueError("need at least one variable")
    if d < 0:
        raise ValueError("degree must be nonnegative")
    if k == 1:
        return tuple((e,) for e in range(d + 1))
    out = []
    for e_last in range(d + 1):
        for rest in monomial_exponents(k - 1, d - e_last):
            out.append(rest + (e_last,))
    return tuple(out)


def polynomial_features(values, d: int) -> np.ndarray:
    """All monomials of total degree <= d of the given variables.

    ``values`` is one point (k,) or a batch (n, k); the result is the
    corresponding (n_monomials,) or (n, n_monomials) array, columns in
    ``monomial_exponents`` order.
    """
    values = np.asarray(values, dtype=float)
    single = values.ndim == 1
    pts = values[None, :] if single else values
    if pts.ndim != 2:
        raise ValueError("values must have shape (k,) or (n, k)")
    k = pts.shape[1]
    exps = monomial_exponents(k, d)
    # Power tables: pow_tab[j][:, e] = pts[:, j] ** e
    pow_tab = [
        pts[:, j][:, None] ** np.arange(d + 1)[None, :] for j in range(k)
    ]
    cols = np.empty((pts.shape[0], len(exps)))
    for c, alpha in enumerate(exps):
        acc = pow_tab[0][:, alpha[0]].copy()
        for j in range(1, k):
            if alpha[j]:
                acc *= pow_tab[j][:, alpha[j]]
        cols[:, c] = acc
    return cols[0] if single else cols


@dataclass(frozen=True)
class FeatureSpec:
    """Variable transforms and polynomial degree of one stage's regression."""

    arity: int
    degree: int
    center: np.ndarray
    length_x: float
    length_y: float
    dt: float
    params: ModelParams

    def __post_init__(self):
        if self.arity not in (3, 5):
            raise ValueError("arity must be 3 or 5")
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        c = np.asarray(self.center, dtype=float)
        if c.shape != (2,):
            raise ValueError("center must be a 2-vector")
        object.__setattr__(self, "center", c)
        if self.length_x <= 0.0 or self.length_y <= 0.0:
            raise ValueError("lengths must be strictly positive")
        if self.dt <= 0.0:
            raise ValueError("dt must be strictly positive")

    @property
    def n_features(self) -> int:
        return n_monomials(self.arity, self.degree)


def feature_map(
    spec: FeatureSpec,
    s,
    x,
    S=None,
    gamma=None,
) -> np.ndarray:
    """Features of a probe's initial data: polynomial in bounded transforms.

    The transformed variables are log(s/s_m), arctan of each centered
    and scaled position coordinate and, for arity 5, log(S/s_m) and
    e^{-gamma dt}.  Every monomial is damped by the spatial factor
    1 / (1 + |x - center|^2 / sigma_x^2).
    """
    s = np.asarray(s, dtype=float)
    single = s.ndim == 0
    s = np.atleast_1d(s)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape != (s.shape[0], 2):
        raise ValueError("positions must have shape (n, 2) matching sizes")
    if spec.arity == 3:
        if S is not None or gamma is not None:
            raise ValueError("arity-3 features take no S or gamma")
    else:
        if S is None or gamma is None:
            raise ValueError("arity-5 features require S and gamma")
    p = spec.params
    dx = x - spec.center[None, :]
    vars_ = [
        np.log(s / p.s_m),
        np.arctan(dx[:, 0] / spec.length_x),
        np.arctan(dx[:, 1] / spec.length_y),
    ]
    if spec.arity == 5:
        S = np.atleast_1d(np.asarray(S, dtype=float))
        gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
        vars_.append(np.log(S / p.s_m))
        vars_.append(np.exp(-gamma * spec.dt))
    V = np.stack(vars_, axis=1)
    feats = polynomial_features(V, spec.degree)
    cauchy = 1.0 / (1.0 + (dx**2).sum(axis=1) / p.sigma_x**2)
    feats = feats * cauchy[:, None]
    return feats[0] if single else feats


def mc_potential(
    params: ModelParams,
    s,
    x,
    cloud_sizes: np.ndarray,
    cloud_positions: np.ndarray,
):
    """Cloud-averaged competition potential on one or many probes.

    Returns (1/N) sum_j C(s, s'_j, |x - x'_j|) where the primes run
    over the cloud atoms.
    """
    cloud_sizes = np.asarray(cloud_sizes, dtype=float)
    cloud_positions = np.asarray(cloud_positions, dtype=float)
    if cloud_sizes.size == 0:
        raise ValueError("cloud must be nonempty")
    s = np.asarray(s, dtype=float)
    single = s.ndim == 0
    s = np.atleast_1d(s)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if np.any(s <= 0.0) or np.any(cloud_sizes <= 0.0):
        raise ValueError("sizes must be strictly positive")
    p = params
    d2 = ((x[:, None, :] - cloud_positions[None, :, :]) ** 2).sum(axis=2)
    spatial = 1.0 + d2 / p.sigma_x**2
    r_probe = np.log(s / p.s_m)
    r_cloud = np.log(cloud_sizes / p.s_m)
    crowd = 1.0 + np.tanh((r_cloud[None, :] - r_probe[:, None]) / p.sigma_r)
    vals = (r_cloud[None, :] / (2.0 * p.R_M * spatial) * crowd).mean(axis=1)
    return float(vals[0]) if single else vals


@dataclass
class PotentialStage:
    """One fitted stage: coefficients, their feature spec, and fit quality."""

    beta: np.ndarray
    spec: FeatureSpec
    r2_train: float
    r2_test: float
    stage_index: int

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.shape != (self.spec.n_features,):
            raise ValueError(
                f"beta must have length {self.spec.n_features}, "
                f"got {self.beta.shape}"
            )
        if not np.all(np.isfinite(self.beta)):
            raise ValueError("beta must be finite")
        for name in ("r2_train", "r2_test"):
            v = float(getattr(self, name))
            if not math.isnan(v) and v > 1.0 + 1e-12:
                raise ValueError(f"{name} cannot exceed 1")
            setattr(self, name, v)
        self.stage_index = int(self.stage_index)


def _r2(targets: np.ndarray, predictions: np.ndarray) -> float:
    """Coefficient of determination; NaN when the targets are constant.

    Constancy is judged against accumulation roundoff, not exact zero:
    summing n identical values can leave the mean half an ulp off, which
    would otherwise turn 0/0 into an arbitrary finite ratio.
    """
    targets = np.asarray(targets, dtype=float)
    ss_tot = float(np.sum((targets - targets.mean()) ** 2))
    scale = max(1.0, float(np.max(np.abs(targets))))
    if ss_tot <= targets.size * (np.finfo(float).eps * scale) ** 2:
        return float("nan")
    ss_res = float(np.sum((targets - predictions) ** 2))
    return 1.0 - ss_res / ss_tot


def _stage_features(spec: FeatureSpec, inputs) -> np.ndarray:
    if spec.arity == 3:
        s, x = inputs
        return feature_map(spec, s, x)
    s, x, S, gamma = inputs
    return feature_map(spec, s, x, S, gamma)


def fit_stage(
    spec: FeatureSpec,
    training,
    testing=None,
    stage_index: int = 0,
) -> PotentialStage:
    """Least-squares fit of one stage's potential targets.

    ``training`` and ``testing`` are (inputs, targets) pairs where
    inputs is (s, x) for arity 3 or (s, x, S, gamma) for arity 5.  The
    coefficient vector is the minimum-norm least-squares solution, so
    rank-deficient designs (e.g. all probes identical) are handled
    without pivoting choices.  Fit quality is measured on the clamped
    predictions, matching how the stage is used.
    """
    train_inputs, train_targets = training
    y = np.asarray(train_targets, dtype=float)
    if y.size == 0:
        raise ValueError("training set must be nonempty")
    F = _stage_features(spec, train_inputs)
    beta, *_ = np.linalg.lstsq(F, y, rcond=None)
    r2_train = _r2(y, np.clip(F @ beta, 0.0, 1.0))
    r2_test = float("nan")
    if testing is not None:
        test_inputs, test_targets = testing
        yt = np.asarray(test_targets, dtype=float)
        Ft = _stage_features(spec, test_inputs)
        r2_test = _r2(yt, np.clip(Ft @ beta, 0.0, 1.0))
    return PotentialStage(
        beta=beta,
        spec=spec,
        r2_train=r2_train,
        r2_test=r2_test,
        stage_index=stage_index,
    )


def stage_potential_eval(stage: PotentialStage, s, x, S=None, gamma=None):
    """Clamped stage potential: the fitted combination projected into [0,1]."""
    feats = _stage_features(
        stage.spec, (s, x) if stage.spec.arity == 3 else (s, x, S, gamma)
    )
    raw = feats @ stage.beta
    clipped = np.clip(raw, 0.0, 1.0)
    return float(clipped) if np.ndim(clipped) == 0 else clipped


@dataclass
class MeanFieldModel:
    """The trained surrogate: M fitted stages plus its training context."""

    stages: list
    dt: float
    T: float
    mu0_cfg: Mu0Config
    n_cloud: int
    seed: int
    params: ModelParams

    def __post_init__(self):
        if not self.stages:
            raise ValueError("a model needs at least one stage")
        m = len(self.stages)
        if abs(m * self.dt - self.T) > 1e-9 * max(1.0, abs(self.T)):
            raise ValueError("stage count times dt must equal the horizon T")
        if self.stages[0].spec.arity != 3:
            raise ValueError("stage 0 must have arity 3")
        if any(st.spec.arity != 5 for st in self.stages[1:]):
            raise ValueError("stages beyond the first must have arity 5")

    @property
    def n_stages(self) -> int:
        return len(self.stages)


def _stage_weights(dt: float, n_stages: int, t, gamma) -> np.ndarray:
    """Exponential time weights of each stage's contribution at time t.

    For the stage [t_k, t_k + dt): weight 1 - e^{gamma (t_k - t)} while
    the stage is in progress at t, e^{gamma (t_{k+1} - t)} -
    e^{gamma (t_k - t)} once it is completed, and 0 before it starts.
    The weights sum to 1 - e^{-gamma t} when every stage contributes.
    """
    t_b = np.atleast_1d(np.asarray(t, dtype=float))
    g_b = np.atleast_1d(np.asarray(gamma, dtype=float))
    t_b, g_b = np.broadcast_arrays(t_b, g_b)
    w = np.zeros((n_stages,) + t_b.shape)
    for k in range(n_stages):
        t_k = k * dt
        t_k1 = (k + 1) * dt
        active = (t_b > t_k) & (t_b < t_k1)
        done = t_b >= t_k1
        if np.any(active):
            w[k][active] = 1.0 - np.exp(g_b[active] * (t_k - t_b[active]))
        if np.any(done):
            w[k][done] = np.exp(g_b[done] * (t_k1 - t_b[done])) - np.exp(
                g_b[done] * (t_k - t_b[done])
            )
    return w


def _stage_values(model: MeanFieldModel, s0, x, S, gamma, upto: Optional[int] = None):
    """Evaluate every stage's clamped potential at initial data; (M, n)."""
    m = model.n_stages if upto is None else upto
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    vals = np.empty((m, s0.shape[0]))
    for k in range(m):
        st = model.stages[k]
        if st.spec.arity == 3:
            vals[k] = np.atleast_1d(stage_potential_eval(st, s0, x))
        else:
            vals[k] = np.atleast_1d(stage_potential_eval(st, s0, x, S, gamma))
    return vals


def reconstructed_potential_integral(
    model: MeanFieldModel, t: float, s, theta: PlantTraits
) -> float:
    """Exponentially weighted sum of the stage potentials up to time t.

    Equals gamma * integral_0^t e^{gamma (tau - t)} C_stage(tau) dtau
    evaluated in closed form, where C_stage is the piecewise-constant
    potential at the probe's initial data.  Zero at t = 0 and for
    gamma = 0 (the weight density vanishes identically).
    """
    if not -1e-12 <= t <= model.T + 1e-12:
        raise ValueError(f"time {t} outside the trained horizon [0, {model.T}]")
    t = min(max(t, 0.0), model.T)
    if theta.gamma == 0.0:
        return 0.0
    vals = _stage_values(
        model,
        np.array([float(s)]),
        np.asarray(theta.x, dtype=float)[None, :],
        np.array([theta.S]),
        np.array([theta.gamma]),
    )[:, 0]
    w = _stage_weights(model.dt, model.n_stages, float(t), float(theta.gamma))
    return float(np.sum(vals * w[:, 0]))


def flow_eval(model: MeanFieldModel, t: float, s0, theta: PlantTraits) -> float:
    """The surrogate flow: grow initial size s0 with traits theta to time t."""
    p = model.params
    if s0 <= p.s_m:
        raise ValueError("initial size must exceed the minimal size")
    chat = reconstructed_potential_integral(model, t, s0, theta)
    decay = math.exp(-theta.gamma * float(t))
    return float(
        p.s_m
        * (s0 / p.s_m) ** decay
        * (theta.S / p.s_m) ** (1.0 - decay - chat)
    )


def flow_eval_many(
    model: MeanFieldModel,
    t: float,
    s0: np.ndarray,
    x: np.ndarray,
    S: np.ndarray,
    gamma: np.ndarray,
    stage_vals: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Vectorized ``flow_eval`` over atoms sharing one evaluation time.

    ``stage_vals`` may carry precomputed per-stage potentials of the
    same atoms (from ``_stage_values``) to amortize feature evaluation
    across many times.
    """
    if not -1e-12 <= t <= model.T + 1e-12:
        raise ValueError(f"time {t} outside the trained horizon [0, {model.T}]")
    t = min(max(float(t), 0.0), model.T)
    p = model.params
    s0 = np.asarray(s0, dtype=float)
    S = np.asarray(S, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if stage_vals is None:
        stage_vals = _stage_values(model, s0, x, S, gamma)
    w = _stage_weights(model.dt, model.n_stages, np.full(s0.shape, t), gamma)
    chat = np.sum(stage_vals * w, axis=0)
    decay = np.exp(-gamma * t)
    return p.s_m * (s0 / p.s_m) ** decay * (S / p.s_m) ** (1.0 - decay - chat)


def _child_seed(seed: int, tag: int, k: int) -> int:
    """64-bit sub-seed for one draw set (cloud / train / test, stage k)."""
    words = np.random.SeedSequence(seed, spawn_key=(tag, k)).generate_state(2)
    return (int(words[0]) << 32) | int(words[1])


def train(
    mu0_cfg: Mu0Config,
    params: ModelParams,
    dt: float,
    T: float,
    N: int,
    K: int,
    d3: int,
    d5: int,
    seed: int,
) -> MeanFieldModel:
    """Fit the stagewise potential surrogate by forward recursion.

    One cloud of N plants supplies the Monte-Carlo integrals; each
    stage k draws fresh training and testing probes (K each), advances
    every involved size to t_k = k dt with the flow already built from
    stages 0..k-1, fits the stage, and moves on.  Stage 0 regresses on
    (s, x) only (degree d3); later stages on (s, x, S, gamma) (degree
    d5).  Cloud, training, and testing draws come from disjoint
    sub-streams of ``seed``, so the entire procedure is reproducible.
    """
    if dt <= 0.0 or T <= 0.0:
        raise ValueError("dt and T must be strictly positive")
    m_stages = round(T / dt)
    if m_stages < 1 or abs(m_stages * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("the horizon T must be an integral number of stages")
    if d3 < 0 or d5 < 0:
        raise ValueError("degrees must be nonnegative")
    if N < 1 or K < 1:
        raise ValueError("sample sizes must be at least 1")

    p = params
    cloud = sample_mu0(mu0_cfg.with_seed(_child_seed(seed, _SET_CLOUD, 0)), N)
    s0_c = np.array([smp.s0 for smp in cloud])
    x_c = np.stack([smp.traits.x for smp in cloud])
    S_c = np.array([smp.traits.S for smp in cloud])
    g_c = np.array([smp.traits.gamma for smp in cloud])

    center = x_c.mean(axis=0)
    spread = float(np.std(x_c))
    if spread == 0.0:
        # Degenerate position cloud: fall back to the spatial decay scale.
        spread = p.sigma_x

    stages: list = []
    cloud_stage_vals: list = []  # per fitted stage, its value on the cloud

    def flow_sizes(s0, x, S, gamma, stage_vals_list, t_k):
        if not stages:
            return np.asarray(s0, dtype=float).copy()
        partial = MeanFieldModel(
            stages=list(stages), dt=dt, T=len(stages) * dt,
            mu0_cfg=mu0_cfg, n_cloud=N, seed=seed, params=p,
        )
        sv = np.stack(stage_vals_list)
        return flow_eval_many(partial, t_k, s0, x, S, gamma, stage_vals=sv)

    def probe_stage_vals(s0, x, S, gamma):
        vals = []
        for st in stages:
            if st.spec.arity == 3:
                vals.append(np.atleast_1d(stage_potential_eval(st, s0, x)))
            else:
                vals.append(
                    np.atleast_1d(stage_potential_eval(st, s0, x, S, gamma))
                )
        return vals

    for k in range(m_stages):
        t_k = k * dt
        sizes_cloud = flow_sizes(s0_c, x_c, S_c, g_c, cloud_stage_vals, t_k)

        sets = {}
        for tag, name in ((_SET_TRAIN, "train"), (_SET_TEST, "test")):
            draws = sample_mu0(mu0_cfg.with_seed(_child_seed(seed, tag, k)), K)
            s0_p = np.array([smp.s0 for smp in draws])
            x_p = np.stack([smp.traits.x for smp in draws])
            S_p = np.array([smp.traits.S for smp in draws])
            g_p = np.array([smp.traits.gamma for smp in draws])
            sizes_p = flow_sizes(
                s0_p, x_p, S_p, g_p, probe_stage_vals(s0_p, x_p, S_p, g_p), t_k
            )
            targets = mc_potential(p, sizes_p, x_p, sizes_cloud, x_c)
            inputs = (s0_p, x_p) if k == 0 else (s0_p, x_p, S_p, g_p)
            sets[name] = (inputs, targets)

        spec = FeatureSpec(
            arity=3 if k == 0 else 5,
            degree=d3 if k == 0 else d5,
            center=center,
            length_x=spread,
            length_y=spread,
            dt=dt,
            params=p,
        )
        stage = fit_stage(spec, sets["train"], sets["test"], stage_index=k)
        stages.append(stage)
        if stage.spec.arity == 3:
            cloud_stage_vals.append(
                np.atleast_1d(stage_potential_eval(stage, s0_c, x_c))
            )
        else:
            cloud_stage_vals.append(
                np.atleast_1d(stage_potential_eval(stage, s0_c, x_c, S_c, g_c))
            )

    return MeanFieldModel(
        stages=stages,
        dt=dt,
        T=m_stages * dt,
        mu0_cfg=mu0_cfg,
        n_cloud=N,
        seed=seed,
        params=p,
    )


# --------------------------------------------------------------------------
# Serialization: versioned JSON, canonical layout, bit-exact round trips.


def _surface_to_dict(sp: SurfaceParams) -> dict:
    return {
        "offset": sp.offset,
        "peak_value": sp.peak_value,
        "trough_value": sp.trough_value,
        "peak_center": [float(v) for v in sp.peak_center],
        "trough_center": [float(v) for v in sp.trough_center],
        "curvature_peak": [[float(v) for v in row] for row in sp.curvature_peak],
        "curvature_trough": [
            [float(v) for v in row] for row in sp.curvature_trough
        ],
    }


def _surface_from_dict(d: dict) -> SurfaceParams:
    return SurfaceParams(
        offset=d["offset"],
        peak_value=d["peak_value"],
        trough_value=d["trough_value"],
        peak_center=np.array(d["peak_center"]),
        trough_center=np.array(d["trough_center"]),
        curvature_peak=np.array(d["curvature_peak"]),
        curvature_trough=np.array(d["curvature_trough"]),
    )


def _mu0_to_dict(cfg: Mu0Config) -> dict:
    return {
        "seed": cfg.seed,
        "L": cfg.L,
        "S_surface": _surface_to_dict(cfg.S_surface),
        "gamma_surface": _surface_to_dict(cfg.gamma_surface),
        "delta_S": cfg.delta_S,
        "delta_gamma": cfg.delta_gamma,
        "S_lower": cfg.S_lower,
        "gamma_max": cfg.gamma_max,
        "s0_law": cfg.s0_law,
        "s0": cfg.s0,
        "s0_min": cfg.s0_min,
        "s0_max": cfg.s0_max,
    }


def _mu0_from_dict(d: dict, params: ModelParams) -> Mu0Config:
    return Mu0Config(
        params=params,
        seed=d["seed"],
        L=d["L"],
        S_surface=_surface_from_dict(d["S_surface"]),
        gamma_surface=_surface_from_dict(d["gamma_surface"]),
        delta_S=d["delta_S"],
        delta_gamma=d["delta_gamma"],
        S_lower=d["S_lower"],
        gamma_max=d["gamma_max"],
        s0_law=d["s0_law"],
        s0=d["s0"],
        s0_min=d["s0_min"],
        s0_max=d["s0_max"],
    )


def model_to_dict(model: MeanFieldModel, config_sha256: str = "") -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config_sha256": config_sha256,
        "seed": model.seed,
        "dt": model.dt,
        "T": model.T,
        "n_cloud": model.n_cloud,
        "params": {
            "s_m": model.params.s_m,
            "R_M": model.params.R_M,
            "sigma_x": model.params.sigma_x,
            "sigma_r": model.params.sigma_r,
        },
        "mu0": _mu0_to_dict(model.mu0_cfg),
        "stages": [
            {
                "stage_index": st.stage_index,
                "arity": st.spec.arity,
                "degree": st.spec.degree,
                "center": [float(v) for v in st.spec.center],
                "length_x": st.spec.length_x,
                "length_y": st.spec.length_y,
                "dt": st.spec.dt,
                "beta": [float(b) for b in st.beta],
                "r2_train": st.r2_train,
                "r2_test": st.r2_test,
            }
            for st in model.stages
        ],
    }


def model_from_dict(d: dict) -> MeanFieldModel:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError("not a recognized model document")
    if d.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {d.get('version')!r}")
    params = ModelParams(
        s_m=d["params"]["s_m"],
        R_M=d["params"]["R_M"],
        sigma_x=d["params"]["sigma_x"],
        sigma_r=d["params"]["sigma_r"],
    )
    mu0 = _mu0_from_dict(d["mu0"], params)
    stages = []
    for sd in d["stages"]:
        spec = FeatureSpec(
            arity=sd["arity"],
            degree=sd["degree"],
            center=np.array(sd["center"]),
            length_x=sd["length_x"],
            length_y=sd["length_y"],
            dt=sd["dt"],
            params=params,
        )
        stages.append(
            PotentialStage(
                beta=np.array(sd["beta"]),
                spec=spec,
                r2_train=sd["r2_train"],
                r2_test=sd["r2_test"],
                stage_index=sd["stage_index"],
            )
        )
    return MeanFieldModel(
        stages=stages,
        dt=d["dt"],
        T=d["T"],
        mu0_cfg=mu0,
        n_cloud=d["n_cloud"],
        seed=d["seed"],
        params=params,
    )


def _canonical_json(d: dict) -> str:
    return json.dumps(d, indent=1, sort_keys=True) + "\n"


def save_model(model: MeanFieldModel, path, config_sha256: str = "") -> None:
    """Write the model as canonical JSON (floats in round-trip form)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_canonical_json(model_to_dict(model, config_sha256)))


def load_model(path) -> MeanFieldModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def load_model_dict(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def export_r2_csv(model: MeanFieldModel, path, comments=()) -> None:
    """One row per stage start time: t, r2_train, r2_test."""
    rows = [
        (float(st.stage_index * model.dt), st.r2_train, st.r2_test)
        for st in model.stages
    ]
    write_csv(path, ["t", "r2_train", "r2_test"], rows, comments=comments)
