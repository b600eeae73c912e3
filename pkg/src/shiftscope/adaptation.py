"""Executable adaptation procedures and bound calculators.

Two solvers — EM re-estimation of target class priors (label-causal prior
shift) and kernel mean matching of per-sample importance weights
(feature-causal covariate shift) — plus two closed-form generalization
bounds.  Solvers are deterministic given their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .datamodel import DomainPair, WeightKind, WeightVector
from .density import median_heuristic_gamma, _pairwise_sq_dists, _as_matrix

__all__ = [
    "EmPriorResult",
    "KmmResult",
    "BoundReport",
    "em_prior_adjust",
    "adjust_posteriors",
    "kernel_mean_matching",
    "cortes_covariate_bound",
    "zhao_js_lower_bound",
    "confusion_matrix_prior",
]


@dataclass(frozen=True, eq=False)
class EmPriorResult:
    estimated_target_prior: np.ndarray
    iterations: int
    trajectory: tuple          # per-iteration prior vectors, starting point included
    converged: bool
    class_weights: WeightVector
    log_likelihoods: tuple     # target-sample log-likelihood per iteration
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "estimated_target_prior": self.estimated_target_prior.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "class_weights": self.class_weights.to_dict(),
            "trajectory": [p.tolist() for p in self.trajectory],
            "log_likelihoods": list(self.log_likelihoods),
            "warnings": list(self.warnings),
        }


def _check_posteriors(posteriors: np.ndarray) -> np.ndarray:
    p = np.asarray(posteriors, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0 or p.shape[1] < 2:
        raise ValueError("posteriors must form an (n, k) matrix with k >= 2")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("non-simplex rows")
    if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("non-simplex rows")
    return p


def em_prior_adjust(source_posteriors, source_prior,
                    max_iter: int = 1000, tol: float = 1e-6) -> EmPriorResult:
    """Re-estimate target class priors from source-classifier posteriors.

    Fixed-point EM started at the source prior: the E-step rescales each
    posterior row by the current prior ratio and renormalizes, the M-step
    averages the soft labels.  Stops when the prior moves less than `tol`
    in max-norm.  A class with zero source prior and identically zero
    posterior mass cannot be reweighted: its weight is pinned to 1 and a
    warning recorded.
    """
    post = _check_posteriors(source_posteriors)
    p_s = np.asarray(source_prior, dtype=np.float64)
    if p_s.shape != (post.shape[1],):
        raise ValueError("source prior length does not match posterior columns")
    if np.any(p_s < 0) or abs(p_s.sum() - 1.0) > 1e-6:
        raise ValueError("source prior must lie in the simplex")
    dead = (p_s == 0)
    if np.any(dead):
        if np.any(post[:, dead] > 1e-12):
            raise ValueError("zero source prior for a class with posterior mass")
    warnings = tuple(
        f"class {int(c)} has zero source prior and no posterior mass; weight pinned to 1"
        for c in np.nonzero(dead)[0]
    )
    live = ~dead
    # Work on the live classes only; dead classes keep prior 0.
    ratio_base = np.zeros_like(p_s)
    p_t = p_s.copy()
    trajectory = [p_t.copy()]
    lls = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ratio_base[live] = p_t[live] / p_s[live]
        scaled = post * ratio_base
        row_sums = scaled.sum(axis=1)
        lls.append(float(np.sum(np.log(np.maximum(row_sums, 1e-300)))))
        q = scaled / row_sums[:, None]
        p_new = q.mean(axis=0)
        delta = float(np.max(np.abs(p_new - p_t)))
        p_t = p_new
        trajectory.append(p_t.copy())
        if delta < tol:
            converged = True
            break
    weights = np.ones_like(p_s)
    weights[live] = p_t[live] / p_s[live]
    return EmPriorResult(
        estimated_target_prior=p_t,
        iterations=it,
        trajectory=tuple(trajectory),
        converged=converged,
        class_weights=WeightVector(WeightKind.PER_CLASS, weights),
        log_likelihoods=tuple(lls),
        warnings=warnings,
    )


def adjust_posteriors(posteriors, source_prior, target_prior) -> np.ndarray:
    """Rescale posterior rows by the prior ratio and renormalize.

    With equal priors every ratio is exactly 1.0 and the renormalization
    divides each row by its own sum, reproducing the input bit-for-bit for
    valid simplex rows.
    """
    post = _check_posteriors(posteriors)
    p_s = np.asarray(source_prior, dtype=np.float64)
    p_t = np.asarray(target_prior, dtype=np.float64)
    if p_s.shape != (post.shape[1],) or p_t.shape != p_s.shape:
        raise ValueError("prior length does not match posterior columns")
    for pr in (p_s, p_t):
        if np.any(pr < 0) or abs(pr.sum() - 1.0) > 1e-6:
            raise ValueError("priors must lie in the simplex")
    zero_src = (p_s == 0)
    if np.any(zero_src) and np.any(post[:, zero_src] > 1e-12):
        raise ValueError("zero source prior for a class with posterior mass")
    ratio = np.ones_like(p_s)
    nz = ~zero_src
    ratio[nz] = p_t[nz] / p_s[nz]
    scaled = post * ratio
    return scaled / scaled.sum(axis=1, keepdims=True)


# --- kernel mean matching ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class KmmResult:
    weights: WeightVector
    objective_trajectory: tuple
    constraint_slack: float    # |mean(weights) - 1|
    gamma: float
    epsilon: float
    upper_bound: float
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.to_dict(),
            "objective_trajectory": list(self.objective_trajectory),
            "constraint_slack": self.constraint_slack,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "upper_bound": self.upper_bound,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _project_box_sum(v: np.ndarray, upper: float, lo_sum: float,
                     hi_sum: float) -> np.ndarray:
    """Euclidean projection onto {0 <= w <= upper, lo_sum <= sum(w) <= hi_sum}.

    Exact: clipping to the box either already satisfies the sum band, or the
    optimum sits on a sum boundary, where w = clip(v − λ) and
    f(λ) = Σ clip(v − λ) is piecewise linear and non-increasing — solved by
    sorting the 2n breakpoints and interpolating on the final segment.
    """
    if upper * v.size < lo_sum:
        raise ValueError("upper bound too small for the mean constraint")
    clipped = np.clip(v, 0.0, upper)
    s = float(clipped.sum())
    if lo_sum <= s <= hi_sum:
        return clipped
    target = hi_sum if s > hi_sum else lo_sum
    bps = np.sort(np.concatenate([v, v - upper]))
    # f spans [0, n·upper] across the breakpoints, so the target sum is
    # always bracketed; binary search the segment, then interpolate.
    lo_i, hi_i = 0, bps.size - 1

    def f(lam: float) -> float:
        return float(np.clip(v - lam, 0.0, upper).sum())

    while hi_i - lo_i > 1:
        mid = (lo_i + hi_i) // 2
        if f(bps[mid]) >= target:
            lo_i = mid
        else:
            hi_i = mid
    f_lo, f_hi = f(bps[lo_i]), f(bps[hi_i])
    if f_lo == f_hi:
        lam = bps[lo_i]
    else:
        lam = bps[lo_i] + (f_lo - target) * (bps[hi_i] - bps[lo_i]) / (f_lo - f_hi)
    return np.clip(v - lam, 0.0, upper)


def kernel_mean_matching(pair_or_source, target=None, gamma: Optional[float] = None,
                         upper_bound: float = 1000.0,
                         epsilon: Optional[float] = None,
                         max_iter: int = 5000,
                         tol: float = 1e-6) -> KmmResult:
    """Match the weighted source mean embedding to the target's.

    Minimizes ½ wᵀK_ss w − n_s·κᵀw with κ = K_st·1/n_t over the box
    0 ≤ w ≤ B intersected with |mean(w) − 1| ≤ ε, by accelerated projected
    gradient (momentum restarts whenever the objective rises) with
    backtracking from w = 1.  The projection is exact, so box and mean
    constraints hold exactly on every iterate.  Convergence means the
    projected-gradient fixed-point residual fell below tol; exhausting the
    iteration budget returns converged=False rather than raising: the
    weights are still feasible and usable.
    """
    if isinstance(pair_or_source, DomainPair):
        src = pair_or_source.source.features
        tgt = pair_or_source.target.features
    else:
        src = _as_matrix(pair_or_source)
        tgt = _as_matrix(target)
    n_s, n_t = src.shape[0], tgt.shape[0]
    if n_s < 2 or n_t < 2:
        raise ValueError("need at least two samples per domain")
    if src.shape[1] != tgt.shape[1]:
        raise ValueError("feature dimension mismatch")
    if gamma is None:
        gamma = median_heuristic_gamma(np.vstack([src, tgt]))
    gamma = float(gamma)
    if epsilon is None:
        epsilon = (math.sqrt(n_s) - 1.0) / math.sqrt(n_s)
    epsilon = float(epsilon)
    upper = float(upper_bound)
    k_ss = np.exp(-gamma * _pairwise_sq_dists(src, src))
    k_st = np.exp(-gamma * _pairwise_sq_dists(src, tgt))
    if not (np.all(np.isfinite(k_ss)) and np.all(np.isfinite(k_st))):
        raise ValueError("Gram matrix non-finite")
    kappa = n_s * (k_st @ np.full(n_t, 1.0 / n_t))

    def objective(w):
        return 0.5 * float(w @ (k_ss @ w)) - float(kappa @ w)

    lo_sum = n_s * (1.0 - epsilon)
    hi_sum = n_s * (1.0 + epsilon)
    w = _project_box_sum(np.ones(n_s), upper, lo_sum, hi_sum)
    # Lipschitz constant of the gradient = largest eigenvalue of K_ss,
    # estimated by a fixed-length power iteration from a deterministic start.
    v = np.full(n_s, 1.0 / math.sqrt(n_s))
    for _ in range(30):
        v2 = k_ss @ v
        nv = float(np.linalg.norm(v2))
        if nv == 0:
            break
        v = v2 / nv
    lip = max(float(v @ (k_ss @ v)), 1e-12)
    step0 = 1.0 / lip

    def proj(v):
        return _project_box_sum(v, upper, lo_sum, hi_sum)

    def residual(v):
        ref = proj(v - step0 * (k_ss @ v - kappa))
        return float(np.max(np.abs(ref - v))) <= tol * max(1.0, float(np.max(np.abs(v))))

    obj = objective(w)
    traj = [obj]
    converged = residual(w)
    w_old = w
    y = w
    t_mom = 1.0
    it = 0
    while not converged and it < max_iter:
        it += 1
        g = k_ss @ y - kappa
        obj_y = 0.5 * float(y @ g) - 0.5 * float(kappa @ y)
        step = step0
        accepted = False
        for _ in range(50):
            cand = proj(y - step * g)
            diff = cand - y
            o_cand = objective(cand)
            if o_cand <= obj_y + float(g @ diff) + (0.5 / step) * float(diff @ diff) + 1e-12:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        if o_cand > obj and t_mom > 1.0:
            # momentum overshot: restart from the best iterate
            y = w
            t_mom = 1.0
            continue
        w_old, w, obj = w, cand, o_cand
        traj.append(obj)
        moved = float(np.max(np.abs(w - w_old)))
        if (moved <= tol * max(1.0, float(np.max(np.abs(w)))) or it % 50 == 0) \
                and residual(w):
            converged = True
            break
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = w + ((t_mom - 1.0) / t_next) * (w - w_old)
        t_mom = t_next
    slack = abs(float(w.mean()) - 1.0)
    return KmmResult(
        weights=WeightVector(WeightKind.PER_SAMPLE, w),
        objective_trajectory=tuple(traj),
        constraint_slack=slack,
        gamma=gamma,
        epsilon=epsilon,
        upper_bound=upper,
        iterations=it,
        converged=converged,
    )


# --- bound calculators --------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    bound_name: str
    value: float
    inputs: dict

    def to_dict(self) -> dict:
        return {"bound_name": self.bound_name, "value": self.value,
                "inputs": dict(self.inputs)}


def cortes_covariate_bound(renyi2_bits: float, c: float, n: int,
                           delta: float) -> BoundReport:
    """Importance-weighting generalization bound for covariate shift.

    value = 2^(5/4) · 2^(D/2) · ((c/n)·ln(2ne/c) + (1/n)·ln(4/δ))^(3/8),
    with D the order-2 Rényi divergence in bits (it sits in a base-2
    exponent) and natural logs inside the bracket.
    """
    if not (n > c >= 1):
        raise ValueError("need n > c >= 1")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if renyi2_bits < 0:
        raise ValueError("Rényi divergence must be nonnegative")
    bracket = (c / n) * math.log(2.0 * n * math.e / c) + math.log(4.0 / delta) / n
    value = 2.0 ** 1.25 * 2.0 ** (renyi2_bits / 2.0) * bracket ** 0.375
    return BoundReport(
        "cortes_covariate", float(value),
        {"renyi2_bits": renyi2_bits, "pseudo_dimension": c, "n": n,
         "delta": delta, "log_convention": "exponent base-2, bracket natural"},
    )


def zhao_js_lower_bound(label_js_distance: float,
                        representation_js_distance: float) -> BoundReport:
    """Information-theoretic lower bound on joint source+target error.

    Inputs are JS *distances* (square roots of the divergences).  The bound
    ½(d_Y − d_Z)² applies when the label-distribution distance exceeds the
    representation distance and is vacuous (0) otherwise.
    """
    d_y, d_z = float(label_js_distance), float(representation_js_distance)
    for v in (d_y, d_z):
        if not (0.0 <= v <= 1.0):
            raise ValueError("JS distances must lie in [0, 1]")
    value = 0.5 * (d_y - d_z) ** 2 if d_y > d_z else 0.0
    return BoundReport(
        "zhao_js_lower", float(value),
        {"label_js_distance": d_y, "representation_js_distance": d_z},
    )


def confusion_matrix_prior(val_true, val_pred, target_pred, space) -> np.ndarray:
    """Classic confusion-matrix prior estimate, the baseline EM is compared
    against.

    Builds C[i, j] = P(pred = i | true = j) on validation data, observes the
    predicted-label frequencies q on the target, and solves C·p = q for the
    target prior (exactly for k = 2, least squares then clipped and
    renormalized for k > 2).
    """
    k = space.k
    conf = np.zeros((k, k))
    for t, p in zip(val_true, val_pred):
        conf[space.index(str(p)), space.index(str(t))] += 1
    col = conf.sum(axis=0)
    if np.any(col == 0):
        raise ValueError("validation split misses a class")
    c = conf / col
    q = np.zeros(k)
    for p in target_pred:
        q[space.index(str(p))] += 1
    q /= q.sum()
    if k == 2:
        denom = c[1, 1] - c[1, 0]
        if abs(denom) < 1e-12:
            raise ValueError("confusion matrix is singular")
        p1 = (q[1] - c[1, 0]) / denom
        p1 = min(max(p1, 0.0), 1.0)
        return np.array([1.0 - p1, p1])
    sol, *_ = np.linalg.lstsq(c, q, rcond=None)
    sol = np.clip(sol, 0.0, None)
    s = sol.sum()
    return sol / s if s > 0 else np.full(k, 1.0 / k)
