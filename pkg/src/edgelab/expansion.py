"""Edgeworth expansion construction and signed-measure evaluation.

An expansion is stored as one Hermite-basis coefficient table per
correction order j: the degree-j correction polynomial applied to the
Gaussian as a differential operator turns each monomial z^nu into the
tensor Hermite polynomial He_nu(x) times the Gaussian density, so the
polynomial coefficient tables double as Hermite coefficient tables.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import factorial, sqrt, pi, inf
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammainc, gamma as gamma_fn, ndtr

from .cumulants import (CumulantSet, MultiIndex, Polynomial,
                        enumerate_multi_indices, multi_factorial)

__all__ = [
    "pj_polynomial",
    "hermite_value",
    "hermite_tensor",
    "EdgeworthExpansion",
    "build_expansion",
    "SetSpec",
    "MeasureResult",
    "m_s_norm",
    "default_probe_grid",
    "gaussian_oscillation",
]


# ---------------------------------------------------------------------------
# Hermite machinery (probabilists' convention)

def hermite_value(k: int, x):
    """He_k(x) by the recurrence He_{k+1} = x He_k - k He_{k-1}."""
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for m in range(1, k):
        prev, cur = cur, x * cur - m * prev
    return cur if cur.ndim else float(cur)


def _hermite_column(max_k: int, x: np.ndarray) -> np.ndarray:
    """He_0..He_max_k stacked along the first axis, for an array x."""
    out = np.empty((max_k + 1,) + x.shape)
    out[0] = 1.0
    if max_k >= 1:
        out[1] = x
    for m in range(1, max_k):
        out[m + 1] = x * out[m] - m * out[m - 1]
    return out


def hermite_tensor(nu: MultiIndex, x) -> float:
    """Product over coordinates of He_{nu_k}(x_k)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    val = 1.0
    for k, p in enumerate(nu):
        val *= hermite_value(p, x[k])
    return float(val)


def _hermite_to_monomial_1d(k: int) -> Dict[int, float]:
    """Coefficients of He_k in the monomial basis."""
    out = {}
    for m in range(k // 2 + 1):
        out[k - 2 * m] = ((-1) ** m * factorial(k)
                          / (factorial(m) * 2 ** m * factorial(k - 2 * m)))
    return out


def _monomial_to_hermite_1d(k: int) -> Dict[int, float]:
    """Coefficients of x^k in the Hermite basis."""
    out = {}
    for m in range(k // 2 + 1):
        out[k - 2 * m] = (factorial(k)
                          / (factorial(m) * 2 ** m * factorial(k - 2 * m)))
    return out


def _basis_change(coeffs: Dict[MultiIndex, float], conv) -> Dict[MultiIndex, float]:
    """Apply a per-coordinate 1-d basis conversion to a tensor table."""
    out: Dict[MultiIndex, float] = {}
    for nu, c in coeffs.items():
        partial = {(): c}
        for p in nu:
            table = conv(p)
            nxt: Dict[Tuple[int, ...], float] = {}
            for prefix, cp in partial.items():
                for q, cq in table.items():
                    key = prefix + (q,)
                    nxt[key] = nxt.get(key, 0.0) + cp * cq
            partial = nxt
        for mu, cm in partial.items():
            out[mu] = out.get(mu, 0.0) + cm
    return {nu: c for nu, c in out.items() if c != 0.0}


def hermite_table_to_monomial(coeffs: Dict[MultiIndex, float]) -> Dict[MultiIndex, float]:
    return _basis_change(coeffs, _hermite_to_monomial_1d)


def monomial_table_to_hermite(coeffs: Dict[MultiIndex, float]) -> Dict[MultiIndex, float]:
    return _basis_change(coeffs, _monomial_to_hermite_1d)


# ---------------------------------------------------------------------------
# correction polynomials

def _compositions(total: int, parts: int):
    """All tuples of ``parts`` positive integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def pj_polynomial(j: int, c: CumulantSet) -> Polynomial:
    """Correction polynomial of order j built from the cumulant table.

    Sum over m of 1/m! times the sum over compositions (j_1,...,j_m) of j
    of the product of the degree-(j_k + 2) cumulant polynomials divided by
    (j_k + 2)!.  Exact when the cumulant table holds exact rationals.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    if j + 2 > c.max_order:
        raise ValueError("order %d cumulants needed, table stops at %d"
                         % (j + 2, c.max_order))
    from .cumulants import chi_poly
    d = c.dimension
    total = Polynomial(d, {})
    base = {r: chi_poly(r + 2, c) for r in range(1, j + 1)}
    for m in range(1, j + 1):
        for comp in _compositions(j, m):
            term = Polynomial(d, {(0,) * d: 1})
            for jk in comp:
                term = term * base[jk]
            denom = 1
            for jk in comp:
                denom *= factorial(jk + 2)
            denom *= factorial(m)
            total = total + Polynomial(
                d, {nu: v / denom for nu, v in term.coeffs.items()})
    return total


@dataclass(frozen=True)
class EdgeworthExpansion:
    """Signed-measure expansion of a standardized sum at sample size n."""

    dimension: int
    order: int          # s
    n: int
    cumulants: CumulantSet
    hermite_coeffs: Dict[int, Dict[MultiIndex, float]]

    @property
    def max_hermite_degree(self) -> int:
        return max((sum(nu) for tab in self.hermite_coeffs.values()
                    for nu in tab), default=0)

    def weight(self, x: np.ndarray) -> np.ndarray:
        """Signed density divided by the Gaussian density, at points (m, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        K = self.max_hermite_degree
        he = np.stack([_hermite_column(K, x[:, k])
                       for k in range(self.dimension)])  # (d, K+1, m)
        out = np.zeros(x.shape[0])
        for j, tab in self.hermite_coeffs.items():
            scale = self.n ** (-j / 2.0)
            for nu, c in tab.items():
                term = np.full(x.shape[0], c)
                for k, p in enumerate(nu):
                    term = term * he[k, p]
                out += scale * term
        return out

    def density(self, x) -> float:
        """Signed density at a single point (may be negative)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        phi = np.exp(-0.5 * float(x @ x)) / (2 * pi) ** (self.dimension / 2)
        return float(self.weight(x[None, :])[0] * phi)

    def density_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        phi = np.exp(-0.5 * np.sum(x * x, axis=1)) / (2 * pi) ** (self.dimension / 2)
        return self.weight(x) * phi

    def cdf_1d(self, t: float) -> float:
        """One-dimensional CDF via the exact Hermite antiderivative."""
        if self.dimension != 1:
            raise ValueError("cdf_1d requires dimension 1")
        t = float(t)
        if t == inf:
            return 1.0
        if t == -inf:
            return 0.0
        out = 0.0
        phi_t = np.exp(-0.5 * t * t) / sqrt(2 * pi)
        for j, tab in self.hermite_coeffs.items():
            scale = self.n ** (-j / 2.0)
            for (k,), c in tab.items():
                if k == 0:
                    out += scale * c * float(ndtr(t))
                else:
                    out -= scale * c * hermite_value(k - 1, t) * phi_t
        return out

    def to_json_dict(self) -> dict:
        return {
            "d": self.dimension,
            "s": self.order,
            "n": self.n,
            "cumulants": [[list(nu), float(v)]
                          for nu, v in sorted(self.cumulants.table.items(),
                                              key=_glex_key)],
            "hermite": [{"j": j,
                         "terms": [[list(nu), float(c)]
                                   for nu, c in sorted(tab.items(),
                                                       key=_glex_key)]}
                        for j, tab in sorted(self.hermite_coeffs.items())],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "EdgeworthExpansion":
        d, s, n = obj["d"], obj["s"], obj["n"]
        table = {tuple(nu): v for nu, v in obj["cumulants"]}
        cums = CumulantSet(d, s, table)
        cums = CumulantSet(d, s, table, standardized=cums.check_standardized())
        hc = {blk["j"]: {tuple(nu): c for nu, c in blk["terms"]}
              for blk in obj["hermite"]}
        return cls(d, s, n, cums, hc)


def _glex_key(item):
    nu = item[0]
    return (sum(nu), tuple(-e for e in nu))


def build_expansion(c: CumulantSet, n: int, s: int) -> EdgeworthExpansion:
    """Assemble the order-s expansion at sample size n from cumulants."""
    if not 2 <= s <= c.max_order:
        raise ValueError("need 2 <= s <= cumulant order %d, got s=%d"
                         % (c.max_order, s))
    if n < 1:
        raise ValueError("n must be >= 1")
    if not c.standardized and not c.check_standardized():
        raise ValueError("cumulants must be standardized "
                         "(zero mean, identity second order)")
    d = c.dimension
    coeffs: Dict[int, Dict[MultiIndex, float]] = {0: {(0,) * d: 1.0}}
    for j in range(1, s - 1):
        coeffs[j] = dict(pj_polynomial(j, c).coeffs)
    return EdgeworthExpansion(d, s, n, c, coeffs)


# ---------------------------------------------------------------------------
# sets and signed measures

@dataclass(frozen=True)
class SetSpec:
    """Convex evaluation region: half-line, box, centered/offset ball, half-space."""

    kind: str
    low: Optional[Tuple[float, ...]] = None        # box
    high: Optional[Tuple[float, ...]] = None       # box
    threshold: Optional[float] = None              # halfline upper endpoint
    center: Optional[Tuple[float, ...]] = None     # ball
    radius: Optional[float] = None                 # ball
    normal: Optional[Tuple[float, ...]] = None     # halfspace {a'x <= offset}
    offset: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("halfline", "box", "ball", "halfspace"):
            raise ValueError("unknown set kind %r" % (self.kind,))
        if self.kind == "box":
            if any(l > h for l, h in zip(self.low, self.high)):
                raise ValueError("box bounds must satisfy low <= high")
        if self.kind == "ball" and self.radius < 0:
            raise ValueError("ball radius must be >= 0")

    @staticmethod
    def halfline(t: float) -> "SetSpec":
        return SetSpec("halfline", threshold=float(t))

    @staticmethod
    def box(low: Sequence[float], high: Sequence[float]) -> "SetSpec":
        return SetSpec("box", low=tuple(float(v) for v in low),
                       high=tuple(float(v) for v in high))

    @staticmethod
    def full_space(d: int) -> "SetSpec":
        return SetSpec.box([-inf] * d, [inf] * d)

    @staticmethod
    def ball(center: Sequence[float], radius: float) -> "SetSpec":
        return SetSpec("ball", center=tuple(float(v) for v in center),
                       radius=float(radius))

    @staticmethod
    def halfspace(normal: Sequence[float], offset: float) -> "SetSpec":
        return SetSpec("halfspace",
                       normal=tuple(float(v) for v in normal),
                       offset=float(offset))

    def dimension_of(self, default: int) -> int:
        if self.kind == "halfline":
            return 1
        if self.kind == "box":
            return len(self.low)
        if self.kind == "ball":
            return len(self.center)
        if self.kind == "halfspace":
            return len(self.normal)
        return default

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Boolean membership for points of shape (m, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "halfline":
            return x[:, 0] <= self.threshold
        if self.kind == "box":
            lo = np.asarray(self.low)
            hi = np.asarray(self.high)
            return np.all((x >= lo) & (x <= hi), axis=1)
        if self.kind == "ball":
            ctr = np.asarray(self.center)
            return np.sum((x - ctr) ** 2, axis=1) <= self.radius ** 2
        a = np.asarray(self.normal)
        return x @ a <= self.offset

    def enlarged(self, eta: float) -> "SetSpec":
        """Grow (eta > 0) or shrink (eta < 0) the region.

        Boxes pad per axis (sup-norm convention); balls change radius;
        half-lines and half-spaces shift the boundary along the normal.
        """
        if self.kind == "halfline":
            return SetSpec.halfline(self.threshold + eta)
        if self.kind == "box":
            lo = [l - eta for l in self.low]
            hi = [h + eta for h in self.high]
            if any(l > h for l, h in zip(lo, hi)):   # shrunk to nothing
                mid = [(l + h) / 2 for l, h in zip(self.low, self.high)]
                return SetSpec.box(mid, mid)
            return SetSpec.box(lo, hi)
        if self.kind == "ball":
            return SetSpec.ball(self.center, max(self.radius + eta, 0.0))
        a = np.asarray(self.normal)
        return SetSpec.halfspace(self.normal,
                                 self.offset + eta * float(np.linalg.norm(a)))


@dataclass(frozen=True)
class MeasureResult:
    value: float
    error: float
    converged: bool
    method: str


def _interval_hermite_integral(k: int, a: float, b: float) -> float:
    """Integral of He_k(u) phi(u) over [a, b], exact antiderivative."""
    if k == 0:
        return float(ndtr(b) - ndtr(a))
    def tail(t):
        if t == inf or t == -inf:
            return 0.0
        return hermite_value(k - 1, t) * np.exp(-0.5 * t * t) / sqrt(2 * pi)
    return tail(a) - tail(b)


def _box_measure(e: EdgeworthExpansion, low, high) -> float:
    total = 0.0
    cache: Dict[Tuple[int, int], float] = {}
    for j, tab in e.hermite_coeffs.items():
        scale = e.n ** (-j / 2.0)
        for nu, c in tab.items():
            prod = 1.0
            for k, p in enumerate(nu):
                key = (k, p)
                if key not in cache:
                    cache[key] = _interval_hermite_integral(p, low[k], high[k])
                prod *= cache[key]
                if prod == 0.0:
                    break
            total += scale * c * prod
    return total


def _monomial_ball_integral(mu: MultiIndex, r: float) -> float:
    """Integral of x^mu phi(x) over the centered ball of radius r."""
    if any(p % 2 for p in mu):
        return 0.0
    d = len(mu)
    a = sum(mu) + d
    ang = 2.0
    for p in mu:
        ang *= gamma_fn((p + 1) / 2.0)
    ang /= gamma_fn(a / 2.0)
    radial = 2.0 ** (a / 2.0 - 1.0) * gammainc(a / 2.0, r * r / 2.0) \
        * gamma_fn(a / 2.0)
    return ang * radial / (2 * pi) ** (d / 2.0)


def _centered_ball_measure(e: EdgeworthExpansion, r: float) -> float:
    total = 0.0
    for j, tab in e.hermite_coeffs.items():
        mono = hermite_table_to_monomial(tab)
        scale = e.n ** (-j / 2.0)
        for mu, c in mono.items():
            total += scale * c * _monomial_ball_integral(mu, r)
    return total


def _rotation_to_first_axis(a: np.ndarray) -> np.ndarray:
    """Orthogonal U whose first column is a/||a|| (so x = U y aligns y1 with a)."""
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a)
    if norm == 0:
        raise ValueError("half-space normal must be nonzero")
    d = a.size
    M = np.eye(d)
    M[:, 0] = a / norm
    Q, R = np.linalg.qr(M)
    if R[0, 0] < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def _halfspace_measure(e: EdgeworthExpansion, normal, offset: float) -> float:
    a = np.asarray(normal, dtype=float)
    U = _rotation_to_first_axis(a)
    thresh = offset / np.linalg.norm(a)
    d = e.dimension
    total = 0.0
    for j, tab in e.hermite_coeffs.items():
        mono = hermite_table_to_monomial(tab)
        # substitute x = U y into the monomial table
        from .cumulants import _series_substitute_linear
        rotated = _series_substitute_linear(mono, U,
                                            max_order=3 * max(j, 1) + 1)
        herm = monomial_table_to_hermite(rotated)
        scale = e.n ** (-j / 2.0)
        for nu, c in herm.items():
            if any(p != 0 for p in nu[1:]):
                continue   # full-line integral of He_p, p >= 1, vanishes
            total += scale * c * _interval_hermite_integral(nu[0], -inf, thresh)
    return total


def set_measure(e: EdgeworthExpansion, A: SetSpec, method: str = "quadrature",
                budget: int = 200_000,
                rng: Optional[np.random.Generator] = None) -> MeasureResult:
    """Signed measure of a region under the expansion.

    ``quadrature`` uses exact Hermite antiderivatives (boxes, half-lines,
    half-spaces, centered balls); ``mc`` uses Gaussian importance sampling
    with the Hermite-polynomial factor as weight and works for any region.
    """
    d = e.dimension
    if method == "quadrature":
        if A.kind == "halfline":
            if d != 1:
                raise ValueError("halfline regions require dimension 1")
            return MeasureResult(e.cdf_1d(A.threshold), 1e-14, True, method)
        if A.kind == "box":
            return MeasureResult(_box_measure(e, A.low, A.high),
                                 1e-14, True, method)
        if A.kind == "ball":
            if all(c == 0 for c in A.center):
                return MeasureResult(_centered_ball_measure(e, A.radius),
                                     1e-13, True, method)
            raise ValueError("quadrature supports centered balls only; "
                             "use method='mc' for shifted balls")
        if A.kind == "halfspace":
            return MeasureResult(_halfspace_measure(e, A.normal, A.offset),
                                 1e-13, True, method)
        raise ValueError("unsupported region kind %r" % (A.kind,))
    if method == "mc":
        if budget < 1:
            raise ValueError("budget must be >= 1")
        rng = rng if rng is not None else np.random.default_rng(0)
        z = rng.standard_normal((budget, d))
        vals = A.contains(z) * e.weight(z)
        value = float(vals.mean())
        err = float(vals.std(ddof=1) / sqrt(budget))
        return MeasureResult(value, err, True, method)
    raise ValueError("method must be 'quadrature' or 'mc'")


# ---------------------------------------------------------------------------
# f-functionals

def default_probe_grid(d: int, radius: float = 12.0) -> np.ndarray:
    """Tensor probe grid of the given radius, plus the origin.

    Step widens with dimension to keep the grid desk-sized.
    """
    step = {1: 0.05, 2: 0.1, 3: 0.5}.get(d)
    if step is None:
        raise ValueError("probe grids support d <= 3")
    axis = np.arange(-radius, radius + step / 2, step)
    pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1)
    pts = pts.reshape(-1, d)
    return np.vstack([pts, np.zeros((1, d))])


def m_s_norm(f, s: int, grid: np.ndarray) -> float:
    """Grid lower bound for sup |f(x)| / (1 + ||x||^s)."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    vals = np.abs(np.asarray(f(grid), dtype=float))
    norms = np.sqrt(np.sum(grid * grid, axis=1))
    return float(np.max(vals / (1.0 + norms ** s)))


def gaussian_oscillation(A: SetSpec, eps: float, budget: int = 200_000,
                         rng: Optional[np.random.Generator] = None,
                         d: Optional[int] = None) -> Tuple[float, float]:
    """Standard-Gaussian mass of the eps-shell around the boundary of A.

    Monte Carlo estimate with standard error; equals the Gaussian-average
    oscillation of the indicator of A at scale eps.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    rng = rng if rng is not None else np.random.default_rng(0)
    d = d if d is not None else A.dimension_of(1)
    z = rng.standard_normal((budget, d))
    shell = A.enlarged(eps).contains(z) & ~A.enlarged(-eps).contains(z)
    p = float(shell.mean())
    se = sqrt(max(p * (1 - p), 1e-300) / budget)
    return p, se
