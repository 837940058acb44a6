"""Resampling side: empirical standardization, bootstrap draws, the
empirical-cumulant expansion, event checkers, and the studentized-t
functional with its derivative jet."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .cumulants import (CumulantSet, MultiIndex, enumerate_multi_indices,
                        inv_sqrt_spd, moments_to_cumulants,
                        raw_moments_from_points)
from .expansion import EdgeworthExpansion, SetSpec, build_expansion
from .jets import DerivativeJet, jet_variable

__all__ = [
    "Dataset",
    "SampleStats",
    "EventFlags",
    "sample_stats",
    "sqrt_spd",
    "bootstrap_draws",
    "empirical_edgeworth",
    "event_checks",
    "g_value_and_jet",
    "tstat_bootstrap",
    "fhat_indicator",
    "tstat_pushforward",
    "edgeworth_tstat_measure",
    "edgeworth_tstat_curve",
    "sup_deviation",
    "enlargement_deviation",
    "child_rng",
]

_CHUNK = 16384   # fixed bootstrap chunk so streams do not depend on workers


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child stream derived from a master seed and a key path."""
    return np.random.default_rng(np.random.SeedSequence(
        entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class Dataset:
    """n points in R^d with uniform weights."""

    points: np.ndarray
    family: Optional[str] = None
    seed: Optional[int] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a nonempty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("all coordinates must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _as_points(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.points
    pts = np.asarray(data, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


@dataclass(frozen=True)
class SampleStats:
    mean: np.ndarray
    cov: np.ndarray
    lam_min: float
    lam_max: float
    abs_moment: float        # (1/n) sum ||X_i||^s
    max_mixed_moment: float  # max over |v| <= s of (1/n) sum prod |X_ik|^{v_k}
    n: int
    s: int


def sample_stats(data, s: int) -> SampleStats:
    pts = _as_points(data)
    n, d = pts.shape
    if n < 2:
        raise ValueError("need at least 2 points")
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = centered.T @ centered / n
    cov = (cov + cov.T) / 2
    eig = np.linalg.eigvalsh(cov)
    norms = np.sqrt(np.sum(pts * pts, axis=1))
    absx = np.abs(pts)
    max_mixed = 0.0
    for v in enumerate_multi_indices(d, s):
        prod = np.ones(n)
        for k, p in enumerate(v):
            if p:
                prod = prod * absx[:, k] ** p
        max_mixed = max(max_mixed, float(prod.mean()))
    return SampleStats(mean=mean, cov=cov,
                       lam_min=float(eig[0]), lam_max=float(eig[-1]),
                       abs_moment=float((norms ** s).mean()),
                       max_mixed_moment=max_mixed, n=n, s=s)


def sqrt_spd(V: np.ndarray) -> np.ndarray:
    """Symmetric positive-semidefinite square root."""
    V = np.asarray(V, dtype=float)
    w, U = np.linalg.eigh((V + V.T) / 2)
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.T


def bootstrap_draws(data, B: int, seed: int = 0,
                    stream_key: Tuple[int, ...] = ()) -> np.ndarray:
    """B draws of sqrt(n) Vhat^{-1/2} (bootstrap mean - sample mean).

    Streams are derived per fixed-size chunk from (seed, stream_key, chunk),
    so the output is bit-identical for any parallel schedule.
    """
    pts = _as_points(data)
    n, d = pts.shape
    if B < 1:
        raise ValueError("B must be >= 1")
    stats = sample_stats(pts, 2) if n >= 2 else None
    if stats is None or stats.lam_min <= 0:
        raise ValueError("sample covariance is singular; cannot standardize")
    A = inv_sqrt_spd(stats.cov)
    out = np.empty((B, d))
    for ci, lo in enumerate(range(0, B, _CHUNK)):
        m = min(_CHUNK, B - lo)
        rng = child_rng(seed, *stream_key, ci)
        idx = rng.integers(0, n, size=(m, n))
        means = pts[idx].mean(axis=1)
        out[lo:lo + m] = sqrt(n) * (means - stats.mean) @ A.T
    return out


def empirical_edgeworth(data, s: int) -> EdgeworthExpansion:
    """Expansion built from the standardized empirical cumulants at size n."""
    pts = _as_points(data)
    n = pts.shape[0]
    stats = sample_stats(pts, 2)
    if stats.lam_min <= 0:
        raise ValueError("sample covariance is singular; cannot standardize")
    A = inv_sqrt_spd(stats.cov)
    std_pts = (pts - stats.mean) @ A.T
    cums = moments_to_cumulants(raw_moments_from_points(std_pts, s))
    table = dict(cums.table)
    # exact standardization up to float rounding; pin the order-1/2 entries
    d = pts.shape[1]
    for nu in table:
        o = sum(nu)
        if o == 1:
            table[nu] = 0.0
        elif o == 2:
            table[nu] = 1.0 if 2 in nu else 0.0
    cums = CumulantSet(d, s, table, standardized=True)
    return build_expansion(cums, n, s)


@dataclass(frozen=True)
class EventFlags:
    e0: bool
    e1: bool
    e2: bool
    e3: Optional[bool]
    stats: SampleStats
    jet_max: Optional[float] = None
    thresholds: Dict[str, float] = field(default_factory=dict)

    def all_hold(self) -> bool:
        flags = [self.e0, self.e1, self.e2]
        if self.e3 is not None:
            flags.append(self.e3)
        return all(flags)


def event_checks(data, s: int, rho_bar: float, c1: float, c2: float,
                 c3: Optional[float] = None,
                 wbar: Optional[float] = None) -> EventFlags:
    """Threshold events on the sample: moment cap, eigenvalue floor,
    mixed-moment cap, and (for the d=2 t-statistic case) the derivative
    jet cap together with the eigenvalue ceiling."""
    for name, v in (("rho_bar", rho_bar), ("c1", c1), ("c2", c2)):
        if v <= 0:
            raise ValueError("%s must be > 0" % name)
    pts = _as_points(data)
    stats = sample_stats(pts, s)
    e0 = stats.abs_moment <= rho_bar
    e1 = stats.lam_min >= c1
    e2 = stats.max_mixed_moment <= c2
    e3 = None
    jet_max = None
    thresholds = {"rho_bar": rho_bar, "c1": c1, "c2": c2}
    if c3 is not None:
        if wbar is None:
            raise ValueError("the jet event needs the reference mean wbar")
        if pts.shape[1] != 2:
            raise ValueError("the jet event is defined for d = 2 data")
        jet = g_value_and_jet(stats.mean, wbar, order=s + 3)
        jet_max = jet.max_abs()
        e3 = (jet_max <= c3) and (stats.lam_max <= c3)
        thresholds["c3"] = c3
    return EventFlags(e0=bool(e0), e1=bool(e1), e2=bool(e2),
                      e3=e3 if e3 is None else bool(e3),
                      stats=stats, jet_max=jet_max, thresholds=thresholds)


def g_value_and_jet(xbar, wbar: float, order: int) -> DerivativeJet:
    """Partials of (x1 - wbar) / sqrt(x2 - x1^2) at xbar, to the given order."""
    xbar = np.asarray(xbar, dtype=float)
    if xbar.shape != (2,):
        raise ValueError("base point must lie in R^2")
    var = xbar[1] - xbar[0] ** 2
    if var <= 0:
        raise ValueError("nonpositive variance at base point (x2 <= x1^2)")
    x1 = jet_variable(0, xbar[0], 2, order)
    x2 = jet_variable(1, xbar[1], 2, order)
    g = (x1 - wbar) * (x2 - x1 * x1) ** (-0.5)
    return DerivativeJet.from_jet(g, xbar)


def tstat_bootstrap(W, B: int, seed: int = 0,
                    stream_key: Tuple[int, ...] = ()
                    ) -> Tuple[np.ndarray, int]:
    """B bootstrap draws of the studentized mean statistic.

    Resamples with replacement, studentizes by the resample standard
    deviation (denominator n), and centers at the original sample mean.
    Draws with zero resample variance are excluded and counted.
    """
    w = np.asarray(W, dtype=float).ravel()
    n = w.size
    if np.unique(w).size < 2:
        raise ValueError("need at least two distinct values")
    wbar = w.mean()
    out = []
    degenerate = 0
    for ci, lo in enumerate(range(0, B, _CHUNK)):
        m = min(_CHUNK, B - lo)
        rng = child_rng(seed, *stream_key, ci)
        idx = rng.integers(0, n, size=(m, n))
        res = w[idx]
        mb = res.mean(axis=1)
        s2 = (res * res).mean(axis=1) - mb * mb
        ok = s2 > 0
        degenerate += int(np.sum(~ok))
        out.append(sqrt(n) * (mb[ok] - wbar) / np.sqrt(s2[ok]))
    return np.concatenate(out), degenerate


def tstat_pushforward(x: np.ndarray, stats: SampleStats, wbar: float,
                      n: int) -> Tuple[np.ndarray, np.ndarray]:
    """sqrt(n) g(Xbar + Vhat^{1/2} x / sqrt(n)) for points x of shape (m, 2).

    Returns (values, valid); invalid points are those where the shifted
    second coordinate fails x2 > x1^2, reported so callers can count them.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    shifted = stats.mean + x @ sqrt_spd(stats.cov).T / sqrt(n)
    var = shifted[:, 1] - shifted[:, 0] ** 2
    valid = var > 0
    vals = np.zeros(x.shape[0])
    vals[valid] = sqrt(n) * (shifted[valid, 0] - wbar) / np.sqrt(var[valid])
    return vals, valid


class _SingularCounter:
    count = 0


def fhat_indicator(t: float, x, stats: SampleStats, wbar: float, n: int,
                   counter: Optional[List[int]] = None) -> int:
    """Indicator that the pushed-forward studentized statistic is <= t.

    Points where the variance coordinate goes nonpositive return 0 and
    bump the supplied counter (a one-element list).
    """
    vals, valid = tstat_pushforward(np.atleast_1d(x)[None, :]
                                    if np.ndim(x) == 1 else x, stats, wbar, n)
    if not valid[0]:
        if counter is not None:
            counter[0] += 1
        return 0
    return int(vals[0] <= t)


def edgeworth_tstat_curve(t_grid, e: EdgeworthExpansion, stats: SampleStats,
                          wbar: float, n: int, budget: int,
                          rng: np.random.Generator
                          ) -> Tuple[np.ndarray, np.ndarray, int]:
    """MC estimate of the expansion measure of the t-statistic regions.

    Returns (values, standard errors, singular point count) on the t grid;
    one Gaussian importance sample is shared across the whole grid.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    t_grid = np.asarray(t_grid, dtype=float)
    z = rng.standard_normal((budget, 2))
    w = e.weight(z)
    u, valid = tstat_pushforward(z, stats, wbar, n)
    singular = int(np.sum(~valid))
    w_eff = np.where(valid, w, 0.0)
    u_eff = np.where(valid, u, np.inf)
    order = np.argsort(u_eff)
    u_sorted = u_eff[order]
    w_sorted = w_eff[order]
    csum = np.concatenate([[0.0], np.cumsum(w_sorted)])
    csum_sq = np.concatenate([[0.0], np.cumsum(w_sorted ** 2)])
    pos = np.searchsorted(u_sorted, t_grid, side="right")
    values = csum[pos] / budget
    # se of mean(1{u<=t} w): sqrt((E w^2 1 - (E w 1)^2)/budget)
    second = csum_sq[pos] / budget
    var = np.maximum(second - values ** 2, 0.0) / budget
    return values, np.sqrt(var), singular


def edgeworth_tstat_measure(t: float, e: EdgeworthExpansion,
                            stats: SampleStats, wbar: float, n: int,
                            budget: int, rng: np.random.Generator
                            ) -> Tuple[float, float]:
    vals, ses, _ = edgeworth_tstat_curve(np.array([t]), e, stats, wbar, n,
                                         budget, rng)
    return float(vals[0]), float(ses[0])


def sup_deviation(members: Sequence, q_emp: Callable, q_tilde: Callable
                  ) -> Tuple[float, List[dict]]:
    """Max absolute deviation between two evaluators over a member class."""
    if len(members) == 0:
        raise ValueError("empty member class")
    records = []
    best = 0.0
    for m in members:
        a, b = float(q_emp(m)), float(q_tilde(m))
        dev = abs(a - b)
        records.append({"member": m, "q_emp": a, "q_tilde": b,
                        "abs_dev": dev})
        best = max(best, dev)
    return best, records


def enlargement_deviation(A: SetSpec, eta: float, draws: np.ndarray) -> float:
    """Empirical mass gained by enlarging A by eta, under the given draws."""
    if eta < 0:
        raise ValueError("eta must be >= 0")
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    if A.kind not in ("halfline", "box", "ball", "halfspace"):
        raise ValueError("unsupported set kind for enlargement")
    base = float(A.contains(draws).mean())
    grown = float(A.enlarged(eta).contains(draws).mean())
    return grown - base
