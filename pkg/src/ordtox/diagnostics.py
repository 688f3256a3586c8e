"""Convergence diagnostics, posterior summaries, and density curves.

Everything here is a pure function over the immutable draw arrays carried by
``PosteriorSamples``: highest-posterior-density intervals, the classic
(unsplit) Gelman-Rubin potential scale reduction factor, Geyer
initial-positive-sequence effective sample sizes, tabular summaries in the
hyperparameters-then-patients layout, and Gaussian kernel density estimates
of the per-patient mtd posteriors on the natural-log dose scale.

Interval bounds labelled lower95/upper95 are HPD endpoints; the matching
central (equal-tailed) quantiles are carried alongside under distinct names
so no consumer has to guess which convention a column uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Interval
from .sampler import NodeInfo, PosteriorSamples

__all__ = [
    "SummaryRow",
    "DensityCurve",
    "hpd_interval",
    "psrf",
    "effective_sample_size",
    "summarize",
    "kde_density",
]


@dataclass(frozen=True)
class SummaryRow:
    """One parameter's posterior summary and chain diagnostics."""

    parameter: str
    lower95: float  # HPD endpoints
    median: float
    upper95: float
    mean: float
    sseff: float
    psrf: float
    mcse: float  # sd / sqrt(sseff)
    central_lower95: float  # equal-tailed 2.5% / 97.5% quantiles
    central_upper95: float


@dataclass(frozen=True)
class DensityCurve:
    """A kernel density estimate over a natural-log dose grid.

    `group` carries the shared censoring key (okdose, aedose, grade) when the
    curve pools equivalent patients; `members` lists the pooled labels.
    """

    parameter: str
    grid: np.ndarray
    density: np.ndarray
    group: tuple[float, float, int] | None = None
    members: tuple[str, ...] = ()

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))


def hpd_interval(draws: np.ndarray, mass: float) -> Interval:
    """Shortest closed interval of sorted draws containing ceil(mass * n).

    Ties between equally short windows go to the leftmost one.
    """
    x = np.sort(np.asarray(draws, dtype=float).reshape(-1))
    n = x.size
    if n < 10:
        raise ValueError("hpd_interval needs at least 10 draws")
    if not 0.0 < mass <= 1.0:
        raise ValueError("mass must be in (0, 1]")
    m = min(n, max(1, math.ceil(mass * n - 1e-9)))
    widths = x[m - 1 :] - x[: n - m + 1]
    j = int(np.argmin(widths))  # first minimum = smallest index
    return Interval(float(x[j]), float(x[j + m - 1]), True, True)


def _chain_matrix(per_chain_draws) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(per_chain_draws, dtype=float))
    if arr.shape[0] < 2:
        raise ValueError("need at least 2 chains")
    return arr


def psrf(per_chain_draws) -> float:
    """Classic Gelman-Rubin statistic on the unsplit chains.

    Zero within-chain variance is degenerate: identical constant chains give
    1.0 by convention, distinct constants give inf.
    """
    arr = _chain_matrix(per_chain_draws)
    m, n = arr.shape
    within = arr.var(axis=1, ddof=1) if n > 1 else np.zeros(m)
    w = float(within.mean())
    b = float(n * arr.mean(axis=1).var(ddof=1))
    if w == 0.0:
        return 1.0 if b == 0.0 else math.inf
    v_hat = (n - 1) / n * w + (m + 1) / (m * n) * b
    return math.sqrt(v_hat / w)


def _ess_one_chain(x: np.ndarray) -> float:
    n = x.size
    if n < 2:
        return 1.0
    centered = x - x.mean()
    gamma0 = float(centered @ centered) / n
    if gamma0 == 0.0:
        return 1.0  # a constant chain carries one draw of information

    def gamma(k: int) -> float:
        return float(centered[: n - k] @ centered[k:]) / n

    # Geyer: sum pair autocovariances while they stay positive
    total = 0.0
    j = 0
    while 2 * j + 1 < n:
        pair = gamma(2 * j) + gamma(2 * j + 1)
        if pair <= 0.0:
            break
        total += pair
        j += 1
    iat = 2.0 * total / gamma0 - 1.0
    return n / max(iat, 1e-12)


def effective_sample_size(per_chain_draws) -> float:
    """Autocorrelation-adjusted sample count, summed over chains.

    Uses Geyer's initial positive sequence per chain; the result is capped
    at the total number of draws.
    """
    arr = _chain_matrix(per_chain_draws)
    total = sum(_ess_one_chain(row) for row in arr)
    return float(min(total, arr.size))


def _pooled_node_groups(nodes: tuple[NodeInfo, ...]) -> list[list[NodeInfo]]:
    groups: dict[tuple, list[NodeInfo]] = {}
    for node in nodes:
        groups.setdefault(node.pool_key, []).append(node)
    return list(groups.values())


def _row(parameter: str, arr: np.ndarray) -> SummaryRow:
    pooled = arr.reshape(-1)
    hpd = hpd_interval(pooled, 0.95) if pooled.size >= 10 else None
    sd = float(pooled.std(ddof=1)) if pooled.size > 1 else 0.0
    sseff = effective_sample_size(arr) if arr.shape[0] >= 2 else float(pooled.size)
    rhat = psrf(arr) if arr.shape[0] >= 2 else math.nan
    lo, hi = np.quantile(pooled, [0.025, 0.975])
    return SummaryRow(
        parameter=parameter,
        lower95=hpd.lo if hpd else float(pooled.min()),
        median=float(np.median(pooled)),
        upper95=hpd.hi if hpd else float(pooled.max()),
        mean=float(pooled.mean()),
        sseff=sseff,
        psrf=rhat,
        mcse=sd / math.sqrt(sseff) if sseff > 0 else math.nan,
        central_lower95=float(lo),
        central_upper95=float(hi),
    )


def summarize(samples: PosteriorSamples, pooled: bool = False) -> list[SummaryRow]:
    """Posterior summary table: hyperparameter rows, then one per mtd node.

    Node order follows the dataset (cohorts in enrollment order).  With
    `pooled` set, patients sharing (okdose, aedose, grade) collapse into one
    row over their concatenated draws, labelled mtd[a+b+...].  Single-chain
    runs report psrf as nan (the statistic needs two chains).
    """
    if samples.config.total_retained < 1 or not samples.draws:
        raise ValueError("summarize needs a non-empty sample set")
    rows = [_row(name, samples.array(name)) for name in ("mu", "cv", "tau", "r0")]
    if pooled:
        for group in _pooled_node_groups(samples.nodes):
            label = "+".join(v.label for v in group)
            arr = np.concatenate([samples.array(f"mtd[{v.label}]") for v in group], axis=1)
            rows.append(_row(f"mtd[{label}]", arr))
    else:
        for node in samples.nodes:
            name = f"mtd[{node.label}]"
            rows.append(_row(name, samples.array(name)))
    return rows


def _silverman_bandwidth(logs: np.ndarray) -> float:
    n = logs.size
    sd = float(logs.std(ddof=1))
    q1, q3 = np.quantile(logs, [0.25, 0.75])
    spread = min(sd, (q3 - q1) / 1.34) if q3 > q1 else sd
    h = 0.9 * spread * n ** (-0.2)
    if h <= 0.0:  # all draws identical to float precision
        h = max(1e-9, abs(float(logs[0])) * 1e-9)
    return h


def kde_density(
    samples: PosteriorSamples,
    parameter: str,
    pooled: bool = False,
    grid_points: int = 512,
) -> DensityCurve:
    """Gaussian KDE of one parameter's draws on the natural-log scale.

    Silverman bandwidth 0.9 * min(sd, IQR/1.34) * n^(-1/5); the grid spans
    [min - 3h, max + 3h] so the trapezoidal integral stays within 1% of 1.
    With `pooled` set and `parameter` naming an mtd node, draws of all
    patients sharing that node's (okdose, aedose, grade) are concatenated
    and the curve reports the group key and member labels.
    """
    group = None
    members: tuple[str, ...] = ()
    if pooled and parameter.startswith("mtd[") and parameter.endswith("]"):
        label = parameter[4:-1]
        matches = [v for v in samples.nodes if v.label == label]
        if matches:
            key = matches[0].pool_key
            pool = [v for v in samples.nodes if v.pool_key == key]
            group = key
            members = tuple(v.label for v in pool)
            draws = np.concatenate([samples.pooled(f"mtd[{v.label}]") for v in pool])
        else:
            draws = samples.pooled(parameter)
    else:
        draws = samples.pooled(parameter)
    if draws.size < 100:
        raise ValueError("kde_density needs at least 100 draws")
    if (draws <= 0).any():
        raise ValueError("kde_density works on the log scale; draws must be positive")

    logs = np.log(draws)
    h = _silverman_bandwidth(logs)
    grid = np.linspace(logs.min() - 3 * h, logs.max() + 3 * h, grid_points)
    density = np.empty(grid_points)
    norm = logs.size * h * math.sqrt(2 * math.pi)
    for start in range(0, grid_points, 64):  # chunked: the outer product is large
        block = grid[start : start + 64, None]
        z = (block - logs[None, :]) / h
        density[start : start + 64] = np.exp(-0.5 * z * z).sum(axis=1) / norm
    return DensityCurve(
        parameter=parameter, grid=grid, density=density, group=group, members=members
    )
