"""MCMC for the latent-MTD model.

One sweep updates, in order: each patient's mtd by an exact draw from its
truncated-lognormal full conditional (the censoring region is an interval
once r is fixed); each patient's log r by random-walk Metropolis against its
prior plus feasibility; then mu, logit-scaled cv, and logit-scaled r0 by
random-walk Metropolis.  Proposal scales adapt by Robbins-Monro toward 0.44
acceptance during a dedicated adaptation phase and are frozen afterwards.

Chains draw from independent counter-based streams keyed by (seed, chain),
so equal seeds reproduce retained draws bit-for-bit in any execution order.
"""

from __future__ import annotations

import hashlib
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr, ndtri

from .model import (
    HyperPriors,
    InfeasibleDataError,
    Interval,
    LatentState,
    TrialDataset,
    censor_feasible,
    cv_to_tau,
)

__all__ = [
    "McmcConfig",
    "NodeInfo",
    "PosteriorSamples",
    "ProposalScales",
    "initialize_state",
    "mcmc_step",
    "run_chains",
    "run_nodes",
    "sample_truncated_lognormal",
]

logger = logging.getLogger(__name__)

# Upper bound of the logit parameterisation for cv proposals.  The cv prior
# (mean 0.5, sd 1/6 by default) has no meaningful mass anywhere near it.
CV_CAP = 10.0

# Records whose feasible ratio range collapses onto r = 1 cannot be
# initialized against any practical spacing prior.
_MIN_FEASIBLE_RATIO = 1.06

_TINY = 5e-324
_U_HI = math.nextafter(1.0, 0.0)
_ACCEPT_TARGET = 0.44


@dataclass(frozen=True)
class McmcConfig:
    """Chain layout and lengths; defaults give 4 x 2500 retained draws."""

    chains: int = 4
    adapt_iters: int = 1000
    burnin_iters: int = 4000
    retained_per_chain: int = 2500
    thin: int = 10
    seed: int = 20181031

    def __post_init__(self) -> None:
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.adapt_iters < 0 or self.burnin_iters < 0:
            raise ValueError("iteration counts must be >= 0")
        if self.retained_per_chain < 1:
            raise ValueError("retained_per_chain must be >= 1")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    @property
    def total_retained(self) -> int:
        return self.chains * self.retained_per_chain


@dataclass(frozen=True)
class NodeInfo:
    """Identity and censoring data of one sampled mtd node."""

    label: str
    cohort: str
    okdose: float
    aedose: float  # for hypothetical nodes: the dose whose grade is predicted
    grade: int  # -1 when the grade is unobserved (hypothetical node)
    hypothetical: bool = False

    @property
    def pool_key(self) -> tuple[float, float, int]:
        return (self.okdose, self.aedose, self.grade)


@dataclass
class ProposalScales:
    """Random-walk step sizes; `r` holds one entry per sampled node."""

    mu: float = 0.5
    cv: float = 0.8
    r0: float = 0.8
    r: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass(frozen=True)
class PosteriorSamples:
    """Retained draws of one run, one array of shape (chains, kept) per parameter."""

    draws: dict[str, np.ndarray]
    parameters: tuple[str, ...]
    nodes: tuple[NodeInfo, ...]
    config: McmcConfig
    priors: HyperPriors
    data_fingerprint: str
    accept_rates: dict[str, tuple[float, ...]]
    runtime_seconds: float

    def array(self, parameter: str) -> np.ndarray:
        try:
            return self.draws[parameter]
        except KeyError:
            raise KeyError(f"unknown parameter {parameter!r}") from None

    def pooled(self, parameter: str) -> np.ndarray:
        return self.array(parameter).reshape(-1)


class _Problem:
    """Dataset unpacked into arrays; grade -1 marks unobserved-grade nodes."""

    def __init__(self, nodes: tuple[NodeInfo, ...], fingerprint: str):
        self.nodes = nodes
        self.fingerprint = fingerprint
        self.n = len(nodes)
        self.okdose = np.array([v.okdose for v in nodes], dtype=float)
        self.aedose = np.array([v.aedose for v in nodes], dtype=float)
        self.grade = np.array([v.grade for v in nodes], dtype=int)
        self.labels = [v.label for v in nodes]
        # group lanes by which cutpoint bounds the support from each side
        lo_cut = np.where(self.grade == 0, 1, self.grade + 1)
        lo_cut[(self.grade < 0) | (self.grade == 5)] = 0  # no grade-side floor
        hi_cut = self.grade.copy()
        hi_cut[self.grade == 5] = 5
        hi_cut[(self.grade <= 0)] = 0  # no ceiling
        self.lo_groups = [(k, np.flatnonzero(lo_cut == k)) for k in range(1, 6)]
        self.lo_groups = [(k, ix) for k, ix in self.lo_groups if ix.size]
        self.hi_groups = [(k, np.flatnonzero(hi_cut == k)) for k in range(1, 6)]
        self.hi_groups = [(k, ix) for k, ix in self.hi_groups if ix.size]
        self.ok_idx = np.flatnonzero(self.okdose > 0)


def _problem_from_dataset(data: TrialDataset) -> _Problem:
    nodes = tuple(
        NodeInfo(p.patient_id, p.cohort, p.okdose, p.aedose, p.grade) for p in data.patients
    )
    return _Problem(nodes, data.fingerprint())


class _ChainState:
    def __init__(self, mu: float, cv: float, r0: float, mtd: np.ndarray, r: np.ndarray):
        self.mu = mu
        self.cv = cv
        self.tau = cv_to_tau(cv)
        self.r0 = r0
        self.mtd = np.asarray(mtd, dtype=float).copy()
        self.r = np.asarray(r, dtype=float).copy()
        self.log_mtd = np.log(self.mtd) if self.mtd.size else np.empty(0)
        self.log_r = np.log(self.r) if self.r.size else np.empty(0)


def _inverse_cut(target: np.ndarray, k: int, r: np.ndarray) -> np.ndarray:
    """Approximate m with cutpoint_k(m) == target, same arithmetic family as the ladder."""
    if k == 1:
        return target * r * r
    if k == 2:
        return target * r
    if k == 3:
        return target.copy() if isinstance(target, np.ndarray) else target
    if k == 4:
        return target / r
    return target / r / r


def _cut_vec(m: np.ndarray, k: int, r: np.ndarray) -> np.ndarray:
    """Cutpoint k of the ladder, elementwise; identical arithmetic to _ladder."""
    if k == 1:
        return m / r / r
    if k == 2:
        return m / r
    if k == 3:
        return m
    if k == 4:
        return m * r
    return m * r * r


def _support_bounds(problem: _Problem, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Member-exact support bounds per node for the current ratios (r > 1).

    The lower bound satisfies every floor constraint and the upper every
    ceiling constraint bit-for-bit: each starts at the algebraic inverse of
    its binding cutpoint and ulp-walks until the cutpoint comparison (in the
    canonical ladder arithmetic) holds, so clamping a draw into [lo, hi]
    always yields a feasible mtd.  Cutpoints are nondecreasing in m, which
    makes each constraint's solution set an up- or down-set; max/clamp of
    satisfying values therefore stays satisfying.
    """
    n = problem.n
    lo = np.zeros(n)
    hi = np.full(n, math.inf)
    for k, ix in problem.lo_groups:
        t = problem.aedose[ix]
        rr = r[ix]
        m = _inverse_cut(t, k, rr)
        for _ in range(8):
            bad = _cut_vec(m, k, rr) < t
            if not bad.any():
                break
            m[bad] = np.nextafter(m[bad], math.inf)
        lo[ix] = m
    if problem.ok_idx.size:
        ix = problem.ok_idx
        t = problem.okdose[ix]
        rr = r[ix]
        z = t * rr * rr
        for _ in range(8):
            bad = z / rr / rr < t
            if not bad.any():
                break
            z[bad] = np.nextafter(z[bad], math.inf)
        np.maximum(lo[ix], z, out=z)
        lo[ix] = z
    for k, ix in problem.hi_groups:
        t = problem.aedose[ix]
        rr = r[ix]
        m = _inverse_cut(t, k, rr)
        for _ in range(8):
            bad = _cut_vec(m, k, rr) >= t
            if not bad.any():
                break
            m[bad] = np.nextafter(m[bad], 0.0)
        hi[ix] = m
    return lo, hi


def _draw_truncated_normal(
    rng: np.random.Generator,
    a: np.ndarray,
    b: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Standard-normal draws restricted to [a, b] by inverse CDF.

    Works in whichever tail keeps CDF precision; lanes whose interval mass
    underflows entirely are flagged for endpoint fallback.
    """
    flip = a > 0.0
    aa = np.where(flip, -b, a)
    bb = np.where(flip, -a, b)
    fa = ndtr(aa)
    fb = ndtr(bb)
    u = fa + rng.random(a.shape[0]) * (fb - fa)
    u = np.clip(u, _TINY, _U_HI)
    with np.errstate(invalid="ignore"):
        z = ndtri(u)
    z = np.where(flip, -z, z)
    fallback = (fb <= fa) | ~np.isfinite(z)
    return z, fallback


def sample_truncated_lognormal(
    mu: float,
    tau: float,
    interval: Interval,
    rng: np.random.Generator,
) -> float:
    """One exact draw from LogNormal(mu, 1/tau) restricted to `interval`.

    Deep-tail regions are handled through the complementary CDF; if the
    region's probability mass underflows float64 entirely, the endpoint
    nearest the mode is returned and the event is logged.
    """
    if interval.is_empty:
        raise ValueError("cannot sample from an empty interval")
    if tau <= 0 or not math.isfinite(tau):
        raise ValueError("tau must be finite and > 0")
    lo = max(interval.lo, 0.0)
    hi = interval.hi
    st = math.sqrt(tau)
    a = -math.inf if lo <= 0 else (math.log(lo) - mu) * st
    b = math.inf if math.isinf(hi) else (math.log(hi) - mu) * st
    z, fallback = _draw_truncated_normal(rng, np.array([a]), np.array([b]))
    if fallback[0]:
        logger.warning(
            "truncated lognormal region [%g, %g) carries no representable mass; "
            "falling back to the nearer endpoint",
            lo,
            hi,
        )
        z = np.array([a if a > 0 else b])
    x = math.exp(mu + float(z[0]) / st)
    lo_member = lo if interval.lo_closed else math.nextafter(lo, math.inf)
    hi_member = math.nextafter(hi, 0.0) if math.isfinite(hi) else hi
    if interval.hi_closed and math.isfinite(hi):
        hi_member = hi
    return min(max(x, max(lo_member, _TINY)), hi_member)


def _gibbs_mtd(
    problem: _Problem,
    state: _ChainState,
    rng: np.random.Generator,
) -> int:
    lo, hi = _support_bounds(problem, state.r)
    st = math.sqrt(state.tau)
    # log of the subnormal floor ~ -745 acts as -inf through ndtr; log(inf)=inf
    np.maximum(lo, _TINY, out=lo)
    a = (np.log(lo) - state.mu) * st
    b = (np.log(hi) - state.mu) * st
    z, fallback = _draw_truncated_normal(rng, a, b)
    if fallback.any():
        # the nearer endpoint sits on the side of the mode
        z = np.where(fallback, np.where(a > 0, a, b), z)
    with np.errstate(over="ignore"):
        mtd = np.exp(state.mu + z / st)
    np.clip(mtd, lo, hi, out=mtd)
    state.mtd = mtd
    state.log_mtd = np.log(mtd)
    return int(np.count_nonzero(fallback))


def _metropolis_r(
    problem: _Problem,
    state: _ChainState,
    scales: ProposalScales,
    priors: HyperPriors,
    rng: np.random.Generator,
) -> np.ndarray:
    theta = state.log_r
    prop = theta + scales.r * rng.standard_normal(problem.n)
    log_u = np.log(rng.random(problem.n))
    r_prop = np.exp(prop)
    feasible = censor_feasible(problem.okdose, problem.aedose, problem.grade, state.mtd, r_prop)
    log_r0 = math.log(state.r0)
    delta = -0.5 * priors.r_prec * ((prop - log_r0) ** 2 - (theta - log_r0) ** 2)
    alpha = np.where(feasible, np.minimum(1.0, np.exp(np.minimum(delta, 0.0))), 0.0)
    accept = feasible & (log_u < delta)
    state.r = np.where(accept, r_prop, state.r)
    state.log_r = np.where(accept, prop, theta)
    return alpha


def _logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _metropolis_mu(
    state: _ChainState,
    scales: ProposalScales,
    priors: HyperPriors,
    rng: np.random.Generator,
) -> float:
    prop = state.mu + scales.mu * rng.standard_normal()
    log_u = math.log(rng.random())
    if not (priors.mu_lo <= prop <= priors.mu_hi):
        return 0.0
    n = state.mtd.size
    if n:
        sx = float(np.sum(state.log_mtd))
        delta = -0.5 * state.tau * (n * (prop**2 - state.mu**2) - 2.0 * sx * (prop - state.mu))
    else:
        delta = 0.0
    alpha = min(1.0, math.exp(min(delta, 0.0)))
    if log_u < delta:
        state.mu = prop
    return alpha


def _metropolis_cv(
    state: _ChainState,
    scales: ProposalScales,
    priors: HyperPriors,
    rng: np.random.Generator,
) -> float:
    theta = _logit(state.cv / CV_CAP)
    prop_theta = theta + scales.cv * rng.standard_normal()
    log_u = math.log(rng.random())
    cv_prop = CV_CAP * _sigmoid(prop_theta)
    if cv_prop <= 0.0 or cv_prop >= CV_CAP:
        return 0.0
    tau_prop = cv_to_tau(cv_prop)
    n = state.mtd.size
    delta = -0.5 * priors.cv_prec * (
        (cv_prop - priors.cv_mean) ** 2 - (state.cv - priors.cv_mean) ** 2
    )
    delta += math.log(cv_prop * (CV_CAP - cv_prop)) - math.log(state.cv * (CV_CAP - state.cv))
    if n:
        sq = float(np.sum((state.log_mtd - state.mu) ** 2))
        delta += 0.5 * n * (math.log(tau_prop) - math.log(state.tau))
        delta -= 0.5 * (tau_prop - state.tau) * sq
    alpha = min(1.0, math.exp(min(delta, 0.0)))
    if log_u < delta:
        state.cv = cv_prop
        state.tau = tau_prop
    return alpha


def _metropolis_r0(
    state: _ChainState,
    scales: ProposalScales,
    priors: HyperPriors,
    rng: np.random.Generator,
) -> float:
    lo, hi = priors.r0_lo, priors.r0_hi
    theta = _logit((state.r0 - lo) / (hi - lo))
    prop_theta = theta + scales.r0 * rng.standard_normal()
    log_u = math.log(rng.random())
    r0_prop = lo + (hi - lo) * _sigmoid(prop_theta)
    if r0_prop <= lo or r0_prop >= hi:
        return 0.0
    n = state.r.size
    delta = math.log((r0_prop - lo) * (hi - r0_prop)) - math.log(
        (state.r0 - lo) * (hi - state.r0)
    )
    if n:
        sr = float(np.sum(state.log_r))
        lp, lc = math.log(r0_prop), math.log(state.r0)
        delta += -0.5 * priors.r_prec * (n * (lp**2 - lc**2) - 2.0 * sr * (lp - lc))
    alpha = min(1.0, math.exp(min(delta, 0.0)))
    if log_u < delta:
        state.r0 = r0_prop
    return alpha


def _sweep(
    problem: _Problem,
    state: _ChainState,
    scales: ProposalScales,
    priors: HyperPriors,
    rng: np.random.Generator,
) -> dict:
    info: dict = {"fallbacks": 0}
    if problem.n:
        info["fallbacks"] = _gibbs_mtd(problem, state, rng)
        info["r"] = _metropolis_r(problem, state, scales, priors, rng)
    info["mu"] = _metropolis_mu(state, scales, priors, rng)
    info["cv"] = _metropolis_cv(state, scales, priors, rng)
    if priors.r0_hi > priors.r0_lo:
        info["r0"] = _metropolis_r0(state, scales, priors, rng)
    return info


def _initialize(problem: _Problem, priors: HyperPriors) -> _ChainState:
    uppers = np.full(problem.n, math.inf)
    for i in range(problem.n):
        g = problem.grade[i]
        ok, ae = problem.okdose[i], problem.aedose[i]
        if g >= 1 and ok > 0:
            ratio = ae / ok
            if g == 5:
                uppers[i] = ratio**0.25
            elif g >= 2:
                uppers[i] = ratio ** (1.0 / (g - 1))
        if math.isfinite(uppers[i]) and uppers[i] <= _MIN_FEASIBLE_RATIO:
            raise InfeasibleDataError(
                f"patient {problem.labels[i]} admits no spacing ratio in the prior range: "
                f"observations require r < {uppers[i]:.4f}"
            )
    top = min(float(np.min(uppers)) if problem.n else math.inf, priors.r0_hi)
    r0 = min(max((priors.r0_lo + top) / 2.0, priors.r0_lo), priors.r0_hi)
    if priors.r0_hi == priors.r0_lo:
        r0 = priors.r0_lo
    r = np.minimum(r0, 0.95 * uppers)
    lo, hi = _support_bounds(problem, r)
    mtd = np.empty(problem.n)
    for i in range(problem.n):
        if lo[i] > 0 and math.isfinite(hi[i]):
            mtd[i] = math.sqrt(lo[i]) * math.sqrt(hi[i])
        elif lo[i] > 0:
            mtd[i] = lo[i] * math.sqrt(10.0)
        elif math.isfinite(hi[i]):
            mtd[i] = hi[i] / math.sqrt(10.0)
        else:
            mtd[i] = math.exp(0.5 * (priors.mu_lo + priors.mu_hi))
    mtd = np.clip(mtd, np.where(lo > 0, lo, _TINY), hi)
    if problem.n:
        mu = float(np.mean(np.log(mtd)))
        mu = min(max(mu, priors.mu_lo), priors.mu_hi)
    else:
        mu = 0.5 * (priors.mu_lo + priors.mu_hi)
    return _ChainState(mu=mu, cv=priors.cv_mean, r0=r0, mtd=mtd, r=r)


def initialize_state(
    data: TrialDataset,
    priors: HyperPriors,
    rng: np.random.Generator | None = None,
) -> LatentState:
    """Deterministic feasible starting state for a dataset.

    r0 starts at the midpoint of the prior range capped by the tightest
    feasible ratio; each r_i backs off to 95% of its own cap; each mtd_i at
    the geometric midpoint of its support (a decade wide when unbounded).
    Raises naming the offending patient when a record cannot be satisfied by
    any spacing ratio in the prior range.  The recipe draws nothing; `rng`
    is accepted for signature stability.
    """
    del rng
    state = _initialize(_problem_from_dataset(data), priors)
    return LatentState(mu=state.mu, cv=state.cv, r0=state.r0, mtd=state.mtd, r=state.r)


def mcmc_step(
    state: LatentState,
    data: TrialDataset,
    priors: HyperPriors,
    scales: ProposalScales,
    rng: np.random.Generator,
) -> LatentState:
    """One full sweep over (mtd_i, r_i, mu, cv, r0); returns the new state."""
    problem = _problem_from_dataset(data)
    if scales.r.size != problem.n:
        scales = replace(scales, r=np.full(problem.n, 0.25))
    cs = _ChainState(state.mu, state.cv, state.r0, np.asarray(state.mtd), np.asarray(state.r))
    _sweep(problem, cs, scales, priors, rng)
    return LatentState(mu=cs.mu, cv=cs.cv, r0=cs.r0, mtd=cs.mtd, r=cs.r)


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chain])))


_ADAPT_BLOCKS = ("mu", "cv", "r0")


def _run_single_chain(
    problem: _Problem,
    priors: HyperPriors,
    config: McmcConfig,
    chain: int,
) -> tuple[dict, dict, int]:
    rng = _chain_rng(config.seed, chain)
    state = _initialize(problem, priors)
    scales = ProposalScales(r=np.full(problem.n, 0.25))
    log_scales = {"mu": math.log(scales.mu), "cv": math.log(scales.cv), "r0": math.log(scales.r0)}
    log_r_scales = np.log(scales.r)
    fallbacks = 0

    for t in range(config.adapt_iters):
        info = _sweep(problem, state, scales, priors, rng)
        fallbacks += info["fallbacks"]
        gamma = (t + 1.0) ** -0.6
        for name in _ADAPT_BLOCKS:
            if name in info:
                log_scales[name] += gamma * (info[name] - _ACCEPT_TARGET)
                log_scales[name] = min(max(log_scales[name], math.log(1e-4)), math.log(1e3))
        if "r" in info:
            log_r_scales += gamma * (info["r"] - _ACCEPT_TARGET)
            np.clip(log_r_scales, math.log(1e-4), math.log(1e3), out=log_r_scales)
            scales.r = np.exp(log_r_scales)
        scales.mu = math.exp(log_scales["mu"])
        scales.cv = math.exp(log_scales["cv"])
        scales.r0 = math.exp(log_scales["r0"])

    accept_sums = {name: 0.0 for name in _ADAPT_BLOCKS}
    accept_sums["r"] = 0.0
    post_adapt = 0
    for _ in range(config.burnin_iters):
        info = _sweep(problem, state, scales, priors, rng)
        fallbacks += info["fallbacks"]
        post_adapt += 1
        for name in _ADAPT_BLOCKS:
            if name in info:
                accept_sums[name] += info[name]
        if "r" in info:
            accept_sums["r"] += float(np.mean(info["r"]))

    kept = config.retained_per_chain
    out = {
        "mu": np.empty(kept),
        "cv": np.empty(kept),
        "tau": np.empty(kept),
        "r0": np.empty(kept),
        "mtd": np.empty((kept, problem.n)),
        "r": np.empty((kept, problem.n)),
    }
    for k in range(kept):
        for _ in range(config.thin):
            info = _sweep(problem, state, scales, priors, rng)
            fallbacks += info["fallbacks"]
            post_adapt += 1
            for name in _ADAPT_BLOCKS:
                if name in info:
                    accept_sums[name] += info[name]
            if "r" in info:
                accept_sums["r"] += float(np.mean(info["r"]))
        out["mu"][k] = state.mu
        out["cv"][k] = state.cv
        out["tau"][k] = state.tau
        out["r0"][k] = state.r0
        out["mtd"][k] = state.mtd
        out["r"][k] = state.r
    rates = {
        name: (accept_sums[name] / post_adapt if post_adapt else math.nan)
        for name in accept_sums
    }
    return out, rates, fallbacks


def run_chains(
    data: TrialDataset,
    priors: HyperPriors,
    config: McmcConfig,
) -> PosteriorSamples:
    """Run the full protocol (adapt, burn-in, thinned retention) on a dataset."""
    return _run_problem(_problem_from_dataset(data), priors, config)


def _nodes_fingerprint(nodes: tuple[NodeInfo, ...]) -> str:
    rows = [
        f"{v.label},{v.cohort},{v.okdose!r},{v.aedose!r},{v.grade},{int(v.hypothetical)}"
        for v in nodes
    ]
    return hashlib.sha256("\n".join(rows).encode()).hexdigest()


def run_nodes(
    nodes: tuple[NodeInfo, ...],
    priors: HyperPriors,
    config: McmcConfig,
) -> PosteriorSamples:
    """Run the protocol on explicit nodes, observed grades or not.

    A node with grade -1 has no grade band; its (mtd, r) still follow the
    population law, its ladder must still be increasing, and a positive
    okdose still floors its mtd at okdose * r^2.  Labels must be unique.
    """
    nodes = tuple(nodes)
    seen: set[str] = set()
    for v in nodes:
        if v.label in seen:
            raise ValueError(f"duplicate node label {v.label!r}")
        seen.add(v.label)
    return _run_problem(_Problem(nodes, _nodes_fingerprint(nodes)), priors, config)


def _run_problem(
    problem: _Problem,
    priors: HyperPriors,
    config: McmcConfig,
) -> PosteriorSamples:
    start = time.perf_counter()
    per_chain = [
        _run_single_chain(problem, priors, config, c) for c in range(config.chains)
    ]
    total_fallbacks = sum(f for _, _, f in per_chain)
    if total_fallbacks:
        logger.warning(
            "%d truncated draws hit CDF underflow; endpoint fallback used", total_fallbacks
        )

    draws: dict[str, np.ndarray] = {}
    for name in ("mu", "cv", "tau", "r0"):
        draws[name] = np.stack([res[0][name] for res in per_chain])
    for i, node in enumerate(problem.nodes):
        draws[f"mtd[{node.label}]"] = np.stack([res[0]["mtd"][:, i] for res in per_chain])
        draws[f"r[{node.label}]"] = np.stack([res[0]["r"][:, i] for res in per_chain])
    parameters = (
        "mu",
        "cv",
        "tau",
        "r0",
        *[f"mtd[{v.label}]" for v in problem.nodes],
        *[f"r[{v.label}]" for v in problem.nodes],
    )
    accept_rates = {
        name: tuple(res[1].get(name, math.nan) for res in per_chain)
        for name in ("mu", "cv", "r0", "r")
    }
    return PosteriorSamples(
        draws=draws,
        parameters=parameters,
        nodes=problem.nodes,
        config=config,
        priors=priors,
        data_fingerprint=problem.fingerprint,
        accept_rates=accept_rates,
        runtime_seconds=time.perf_counter() - start,
    )
