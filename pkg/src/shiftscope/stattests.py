"""Two-sample hypothesis tests used to detect distribution shift.

Three complementary procedures: a univariate Kolmogorov–Smirnov test, a
per-dimension KS screen with Bonferroni correction for multivariate feature
spaces, a chi-squared homogeneity test for label frequencies, and a
permutation test on the unbiased MMD statistic for multivariate feature
shift.  All are pure functions and deterministic under a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaincc

from .datamodel import Dataset, DomainPair, LabelSpace
from .density import median_heuristic_gamma, _pairwise_sq_dists, _as_matrix

__all__ = [
    "TestResult",
    "FeatureShiftReport",
    "ks_two_sample",
    "feature_shift_screen",
    "feature_shift_report_from_dict",
    "label_shift_test",
    "mmd_permutation_test",
    "test_result_from_dict",
]

REJECT_LEVELS = (0.10, 0.05, 0.01)


@dataclass(frozen=True)
class TestResult:
    """Outcome of one two-sample test.

    reject_at holds (level, decision) pairs for the standard levels in
    descending order; decisions are monotone by construction since each is
    simply p < level.
    """

    test_name: str
    statistic: float
    p_value: float
    reject_at: tuple
    n_source: int
    n_target: int

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError("p-value outside [0, 1]")

    def rejects(self, level: float) -> bool:
        for lv, dec in self.reject_at:
            if lv == level:
                return dec
        return self.p_value < level

    def to_dict(self) -> dict:
        return {
            "test_name": self.test_name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reject_at": [[lv, dec] for lv, dec in self.reject_at],
            "n_source": self.n_source,
            "n_target": self.n_target,
        }


def test_result_from_dict(d: dict) -> TestResult:
    return TestResult(
        d["test_name"], d["statistic"], d["p_value"],
        tuple((lv, bool(dec)) for lv, dec in d["reject_at"]),
        d["n_source"], d["n_target"],
    )


def _decisions(p: float) -> tuple:
    return tuple((lv, p < lv) for lv in REJECT_LEVELS)


def _kolmogorov_sf(lam: float) -> float:
    # Q(λ) = 2 Σ (−1)^{j−1} e^{−2 j² λ²}, truncated at 100 terms.  Below
    # λ ≈ 0.05 the tail terms have not died out yet, but there Q is 1 to
    # more digits than we report, so return the limit directly.
    if lam < 0.05:
        return 1.0
    s = 0.0
    for j in range(1, 101):
        term = 2.0 * (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
        s += term
        if abs(term) < 1e-16:
            break
    return min(max(s, 0.0), 1.0)


def ks_two_sample(x, y, name: str = "ks") -> TestResult:
    """Two-sample Kolmogorov–Smirnov test on 1-D samples.

    D is the exact sup of |F̂_x − F̂_y| over the pooled points; the p-value
    uses the asymptotic Kolmogorov distribution with the small-sample
    effective-size correction, so it is approximate for small n.
    """
    xv = np.sort(np.asarray(x, dtype=np.float64).ravel())
    yv = np.sort(np.asarray(y, dtype=np.float64).ravel())
    n, m = xv.size, yv.size
    if n == 0 or m == 0:
        raise ValueError("empty sample")
    pooled = np.concatenate([xv, yv])
    fx = np.searchsorted(xv, pooled, side="right") / n
    fy = np.searchsorted(yv, pooled, side="right") / m
    d_stat = float(np.max(np.abs(fx - fy)))
    if d_stat == 0.0:
        p = 1.0
    else:
        ne = n * m / (n + m)
        lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d_stat
        p = _kolmogorov_sf(lam)
    return TestResult(name, d_stat, p, _decisions(p), n, m)


@dataclass(frozen=True)
class FeatureShiftReport:
    """Per-dimension KS results plus a Bonferroni-corrected overall verdict."""

    per_dimension: tuple
    level: float
    bonferroni_level: float
    shifted: bool

    @property
    def verdict(self) -> str:
        return "shifted" if self.shifted else "no shift detected"

    def to_dict(self) -> dict:
        return {
            "per_dimension": [t.to_dict() for t in self.per_dimension],
            "level": self.level,
            "bonferroni_level": self.bonferroni_level,
            "shifted": self.shifted,
            "verdict": self.verdict,
        }


def feature_shift_report_from_dict(d: dict) -> FeatureShiftReport:
    return FeatureShiftReport(
        tuple(test_result_from_dict(t) for t in d["per_dimension"]),
        d["level"], d["bonferroni_level"], bool(d["shifted"]),
    )


def feature_shift_screen(pair: DomainPair, level: float = 0.05) -> FeatureShiftReport:
    """KS test on every feature dimension; any rejection at level/d flags
    the feature distribution as shifted."""
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    d = pair.source.d
    corrected = level / d
    results = []
    for j in range(d):
        r = ks_two_sample(pair.source.column(j), pair.target.column(j),
                          name=f"ks[dim {j}]")
        results.append(r)
    shifted = any(r.p_value < corrected for r in results)
    return FeatureShiftReport(tuple(results), level, corrected, shifted)


def label_shift_test(source_labels: Sequence, target_labels: Sequence,
                     space: LabelSpace) -> TestResult:
    """Chi-squared two-sample homogeneity test on label frequencies.

    Labels with zero pooled count are dropped (degrees of freedom shrink
    accordingly); fewer than two surviving cells is a degenerate table.
    """
    if len(source_labels) == 0 or len(target_labels) == 0:
        raise ValueError("empty sample")
    cs = np.zeros(space.k)
    ct = np.zeros(space.k)
    for l in source_labels:
        cs[space.index(str(l))] += 1
    for l in target_labels:
        ct[space.index(str(l))] += 1
    keep = (cs + ct) > 0
    cs, ct = cs[keep], ct[keep]
    k_eff = int(keep.sum())
    if k_eff < 2:
        raise ValueError("degenerate table")
    ns, nt = cs.sum(), ct.sum()
    total = ns + nt
    pooled = (cs + ct) / total
    stat = 0.0
    for row, nrow in ((cs, ns), (ct, nt)):
        expected = nrow * pooled
        stat += float(np.sum((row - expected) ** 2 / expected))
    dof = k_eff - 1
    p = float(min(max(gammaincc(dof / 2.0, stat / 2.0), 0.0), 1.0))
    return TestResult("label_chi2", stat, p, _decisions(p),
                      int(ns), int(nt))


def _unbiased_mmd_from_gram(k: np.ndarray, ix: np.ndarray, iy: np.ndarray) -> float:
    kxx = k[np.ix_(ix, ix)]
    kyy = k[np.ix_(iy, iy)]
    kxy = k[np.ix_(ix, iy)]
    n, m = ix.size, iy.size
    s_xx = (kxx.sum() - np.trace(kxx)) / (n * (n - 1))
    s_yy = (kyy.sum() - np.trace(kyy)) / (m * (m - 1))
    return float(s_xx + s_yy - 2.0 * kxy.mean())


def mmd_permutation_test(x, y, permutations: int = 200,
                         seed: int = 0) -> TestResult:
    """Permutation test on the unbiased squared-MMD statistic.

    The kernel width comes from the pooled median heuristic, so it is
    invariant under relabeling and needs no per-permutation refit.  The
    pooled Gram matrix is computed once; each permutation only re-indexes
    it.  Samples beyond 3,000 pooled rows are thinned deterministically
    before testing to keep the Gram matrix bounded.
    """
    if permutations < 100:
        raise ValueError("insufficient permutations")
    a = _as_matrix(x)
    b = _as_matrix(y)
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ValueError("need at least two samples per domain")
    if a.shape[0] + b.shape[0] < 10:
        raise ValueError("pooled sample too small (need n ≥ 10)")
    if a.shape[1] != b.shape[1]:
        raise ValueError("feature dimension mismatch")
    n_src, n_tgt = a.shape[0], b.shape[0]
    cap = 1500
    if a.shape[0] > cap:
        a = a[np.linspace(0, a.shape[0] - 1, cap).astype(int)]
    if b.shape[0] > cap:
        b = b[np.linspace(0, b.shape[0] - 1, cap).astype(int)]
    pooled = np.vstack([a, b])
    gamma = median_heuristic_gamma(pooled)
    gram = np.exp(-gamma * _pairwise_sq_dists(pooled, pooled))
    n, m = a.shape[0], b.shape[0]
    ix = np.arange(n)
    iy = np.arange(n, n + m)
    observed = _unbiased_mmd_from_gram(gram, ix, iy)
    rng = np.random.default_rng(seed)
    count = 0
    for _ in range(permutations):
        perm = rng.permutation(n + m)
        stat = _unbiased_mmd_from_gram(gram, perm[:n], perm[n:])
        if stat >= observed:
            count += 1
    p = (1.0 + count) / (1.0 + permutations)
    return TestResult("mmd_permutation", observed, p, _decisions(p),
                      n_src, n_tgt)
