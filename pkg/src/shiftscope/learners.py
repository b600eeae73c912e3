"""Self-contained supervised learners: weighted logistic regression, linear
SVM, and RBF-kernel SVM, with shared evaluation and JSON persistence.

All three accept per-sample weights so that importance-weighted risk
minimization works uniformly: weights scale the loss terms (logistic,
hinge) or the box constraints (RBF dual).  Features are standardized inside
`train` and the transform travels with the model.  Every training path is
deterministic given (data, hyperparameters, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .datamodel import Dataset, LabelSpace, WeightKind, WeightVector
from .density import median_heuristic_gamma, _pairwise_sq_dists

__all__ = [
    "TrainedModel",
    "EvalReport",
    "train",
    "predict",
    "predict_posterior",
    "decision_function",
    "evaluate",
    "save_model",
    "load_model",
]

KINDS = ("logistic", "linear_svm", "rbf_svm")

_DEFAULT_HYPER = {
    "logistic": {"l2": 1e-4, "max_iter": 20000, "tol": 1e-6},
    "linear_svm": {"C": 1.0, "epochs": 200},
    "rbf_svm": {"C": 1.0, "gamma": None, "tol": 1e-3, "max_iter": 200000},
}


@dataclass(frozen=True, eq=False)
class TrainedModel:
    kind: str
    label_space: LabelSpace
    mu: np.ndarray          # standardization offsets, one per feature
    sd: np.ndarray          # standardization scales (zero-variance dims -> 1)
    params: dict
    hyper: dict
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mu) / self.sd


@dataclass(frozen=True, eq=False)
class EvalReport:
    accuracy: float
    per_class_accuracy: np.ndarray
    confusion: np.ndarray   # counts, rows = true label, cols = predicted
    n_eval: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class_accuracy": self.per_class_accuracy.tolist(),
            "confusion": self.confusion.astype(int).tolist(),
            "n_eval": self.n_eval,
        }


def _resolve_weights(ds: Dataset, space: LabelSpace,
                     sample_weights: Optional[WeightVector]) -> np.ndarray:
    if sample_weights is None:
        return np.ones(ds.n)
    if sample_weights.kind is WeightKind.PER_SAMPLE:
        if sample_weights.values.shape[0] != ds.n:
            raise ValueError("weight count does not match sample count")
        return np.array(sample_weights.values)
    # per-class weights broadcast to the samples through their labels
    if sample_weights.values.shape[0] != space.k:
        raise ValueError("per-class weight count does not match label space")
    idx = np.array([space.index(l) for l in ds.labels])
    return np.array(sample_weights.values)[idx]


def _standardization(x: np.ndarray):
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return mu, sd


def train(ds: Dataset, kind: str, hyper: Optional[dict] = None,
          sample_weights: Optional[WeightVector] = None,
          seed: int = 0, label_space: Optional[LabelSpace] = None) -> TrainedModel:
    """Fit one of the three model kinds on a labeled dataset.

    logistic   : weighted maximum likelihood, L2 penalty on weights (not
                 bias), full-batch gradient descent with backtracking to
                 gradient-norm tolerance 1e-6.
    linear_svm : weighted hinge + L2 subgradient schedule (Pegasos-style),
                 exactly `epochs` seeded passes, bias as an augmented
                 regularized coordinate.
    rbf_svm    : SMO on the dual with per-sample box C_i = C·w_i, KKT
                 tolerance 1e-3, maximal-violating-pair selection with ties
                 broken by lowest index.

    Classes beyond two are handled one-vs-rest for the SVMs; logistic is
    natively multinomial.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    if ds.labels is None:
        raise ValueError("unlabeled dataset")
    if label_space is None:
        label_space = LabelSpace(tuple(dict.fromkeys(ds.labels)))
    present = set(ds.labels)
    if len(present) < 2:
        raise ValueError("degenerate labels")
    h = dict(_DEFAULT_HYPER[kind])
    if hyper:
        unknown = set(hyper) - set(h)
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        h.update(hyper)
    w = _resolve_weights(ds, label_space, sample_weights)
    x = ds.features
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite features")
    mu, sd = _standardization(x)
    xs = (x - mu) / sd
    y_idx = np.array([label_space.index(l) for l in ds.labels])

    if kind == "logistic":
        params, meta = _fit_logistic(xs, y_idx, label_space.k, w, h)
    elif kind == "linear_svm":
        params, meta = _fit_linear_svm(xs, y_idx, label_space.k, w, h, seed)
    else:
        params, meta = _fit_rbf_svm(xs, y_idx, label_space.k, w, h)
        h = dict(h, gamma=params["gamma"])  # record the resolved width
    return TrainedModel(kind, label_space, mu, sd, params, h, seed, meta)


# --- logistic ---------------------------------------------------------------


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _logistic_loss_grad(weights, bias, xs, y_idx, k, w, lam):
    z = xs @ weights.T + bias
    p = _softmax(z)
    n = xs.shape[0]
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y_idx] = 1.0
    # weighted negative log-likelihood, sum form: duplicating a sample is
    # exactly doubling its weight
    ll = np.log(np.maximum(p[np.arange(n), y_idx], 1e-300))
    loss = -float(np.dot(w, ll)) + 0.5 * lam * float(np.sum(weights * weights))
    resid = (p - onehot) * w[:, None]
    g_w = resid.T @ xs + lam * weights
    g_b = resid.sum(axis=0)
    return loss, g_w, g_b


def _fit_logistic(xs, y_idx, k, w, h):
    lam = float(h["l2"])
    tol = float(h["tol"])
    max_iter = int(h["max_iter"])
    d = xs.shape[1]
    weights = np.zeros((k, d))
    bias = np.zeros(k)
    loss, g_w, g_b = _logistic_loss_grad(weights, bias, xs, y_idx, k, w, lam)
    step = 1.0 / max(1.0, float(np.sum(w)))  # conservative Lipschitz guess
    it = 0
    converged = False
    while it < max_iter:
        gnorm = math.sqrt(float(np.sum(g_w * g_w) + np.sum(g_b * g_b)))
        if gnorm <= tol:
            converged = True
            break
        # backtracking with step growth: still plain gradient descent, the
        # step policy is deterministic
        while True:
            w_new = weights - step * g_w
            b_new = bias - step * g_b
            l_new, gw_new, gb_new = _logistic_loss_grad(
                w_new, bias - step * g_b, xs, y_idx, k, w, lam)
            if l_new <= loss - 0.5 * step * gnorm * gnorm + 1e-12:
                break
            step *= 0.5
            if step < 1e-18:
                break
        weights, bias = w_new, b_new
        loss, g_w, g_b = l_new, gw_new, gb_new
        step *= 1.25
        it += 1
    return ({"weights": weights, "bias": bias},
            {"iterations": it, "converged": converged, "final_loss": loss})


# --- linear SVM -------------------------------------------------------------


def _fit_linear_binary(xa, y_pm, w, c, epochs, rng):
    # Pegasos schedule on (lam/2)||v||^2 + (1/n) sum w_i hinge_i with
    # lam = 1/(C n); the bias rides along as an augmented, regularized
    # coordinate.
    n = xa.shape[0]
    lam = 1.0 / (c * n)
    v = np.zeros(xa.shape[1])
    t = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for i in order:
            t += 1
            eta = 1.0 / (lam * t)
            v *= (1.0 - eta * lam)
            if y_pm[i] * float(xa[i] @ v) < 1.0:
                v += (eta * w[i]) * y_pm[i] * xa[i]
    return v


def _fit_linear_svm(xs, y_idx, k, w, h, seed):
    c = float(h["C"])
    epochs = int(h["epochs"])
    xa = np.hstack([xs, np.ones((xs.shape[0], 1))])
    n_machines = 1 if k == 2 else k
    streams = np.random.SeedSequence(seed).spawn(n_machines)
    ws = np.empty((n_machines, xs.shape[1]))
    bs = np.empty(n_machines)
    for m in range(n_machines):
        pos = (y_idx == 1) if k == 2 else (y_idx == m)
        y_pm = np.where(pos, 1.0, -1.0)
        v = _fit_linear_binary(xa, y_pm, w, c, epochs, np.random.default_rng(streams[m]))
        ws[m] = v[:-1]
        bs[m] = v[-1]
    return ({"w": ws, "b": bs}, {"epochs": epochs, "machines": n_machines})


# --- RBF SVM ----------------------------------------------------------------


def _smo_binary(gram, y_pm, box, tol, max_iter):
    """Two-index SMO on min ½αᵀQα − 1ᵀα, yᵀα = 0, 0 ≤ α_i ≤ box_i.

    Maintains u_i = Σ_j α_j y_j K_ij.  Selection: i maximizes s = y − u over
    the up-movable set, j minimizes it over the down-movable set; stops when
    the violation gap m − M drops to tol.
    """
    n = y_pm.shape[0]
    alpha = np.zeros(n)
    u = np.zeros(n)
    eps = 1e-12
    it = 0
    m_val = m_low = 0.0
    while it < max_iter:
        s = y_pm - u
        up = ((y_pm > 0) & (alpha < box - eps)) | ((y_pm < 0) & (alpha > eps))
        low = ((y_pm > 0) & (alpha > eps)) | ((y_pm < 0) & (alpha < box - eps))
        if not up.any() or not low.any():
            break
        s_up = np.where(up, s, -np.inf)
        s_low = np.where(low, s, np.inf)
        i = int(np.argmax(s_up))
        j = int(np.argmin(s_low))
        m_val, m_low = float(s[i]), float(s[j])
        if m_val - m_low <= tol:
            break
        eta = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        eta = max(eta, 1e-12)
        # unconstrained step on alpha_j, then clip to the feasible segment
        e_i = u[i] - y_pm[i]
        e_j = u[j] - y_pm[j]
        a_j_new = alpha[j] + y_pm[j] * (e_i - e_j) / eta
        if y_pm[i] != y_pm[j]:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(box[j], box[i] + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - box[i])
            hi = min(box[j], alpha[i] + alpha[j])
        a_j_new = min(max(a_j_new, lo), hi)
        delta_j = a_j_new - alpha[j]
        if abs(delta_j) < eps:
            break  # numerically pinned; the gap is already within float noise
        delta_i = -y_pm[i] * y_pm[j] * delta_j
        alpha[i] += delta_i
        alpha[j] += delta_j
        u += (y_pm[i] * delta_i) * gram[i] + (y_pm[j] * delta_j) * gram[j]
        it += 1
    b = 0.5 * (m_val + m_low)
    return alpha, b, it


def _fit_rbf_svm(xs, y_idx, k, w, h):
    c = float(h["C"])
    gamma = h["gamma"]
    if gamma is None:
        gamma = median_heuristic_gamma(xs)
    gamma = float(gamma)
    tol = float(h["tol"])
    max_iter = int(h["max_iter"])
    gram = np.exp(-gamma * _pairwise_sq_dists(xs, xs))
    machines = []
    iterations = []
    n_machines = 1 if k == 2 else k
    for m in range(n_machines):
        pos = (y_idx == 1) if k == 2 else (y_idx == m)
        y_pm = np.where(pos, 1.0, -1.0)
        box = c * w
        alpha, b, it = _smo_binary(gram, y_pm, box, tol, max_iter)
        sv = alpha > 1e-12
        machines.append({
            "sv": xs[sv],
            "coef": alpha[sv] * y_pm[sv],
            "b": b,
        })
        iterations.append(it)
    return ({"machines": machines, "gamma": gamma},
            {"iterations": iterations, "machines": n_machines})


# --- shared inference -------------------------------------------------------


def _features_of(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.features
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return x


def decision_function(model: TrainedModel, data) -> np.ndarray:
    """Real-valued scores: (n,) for binary models, (n, machines) otherwise.

    Logistic scores are log-posterior-odds (binary) or logits (multiclass);
    SVM scores are the usual signed margins.
    """
    x = _features_of(data)
    if x.shape[1] != model.d:
        raise ValueError("feature dimension mismatch")
    xs = model.standardize(x)
    if model.kind == "logistic":
        z = xs @ model.params["weights"].T + model.params["bias"]
        if model.label_space.k == 2:
            return z[:, 1] - z[:, 0]
        return z
    if model.kind == "linear_svm":
        scores = xs @ model.params["w"].T + model.params["b"]
    else:
        gamma = model.params["gamma"]
        cols = []
        for mach in model.params["machines"]:
            km = np.exp(-gamma * _pairwise_sq_dists(xs, mach["sv"]))
            cols.append(km @ mach["coef"] + mach["b"])
        scores = np.column_stack(cols)
    return scores[:, 0] if scores.shape[1] == 1 else scores


def predict_posterior(model: TrainedModel, data) -> np.ndarray:
    """Class-posterior matrix (n, k).  Logistic models only: the SVMs
    produce uncalibrated margins, not probabilities."""
    if model.kind != "logistic":
        raise ValueError("posterior probabilities are only available for "
                         "logistic models")
    x = _features_of(data)
    if x.shape[1] != model.d:
        raise ValueError("feature dimension mismatch")
    xs = model.standardize(x)
    z = xs @ model.params["weights"].T + model.params["bias"]
    return _softmax(z)


def predict(model: TrainedModel, data) -> tuple:
    """Predicted labels; ties break toward the first label in the space."""
    labels = model.label_space.labels
    if model.kind == "logistic":
        post = predict_posterior(model, data)
        # argmax returns the first maximal index, which is the tie rule
        idx = np.argmax(post, axis=1)
        return tuple(labels[i] for i in idx)
    scores = decision_function(model, data)
    if model.label_space.k == 2:
        # single machine: positive side is the second label, exact zero
        # falls to the first
        return tuple(labels[1] if s > 0 else labels[0] for s in np.atleast_1d(scores))
    idx = np.argmax(scores, axis=1)
    return tuple(labels[i] for i in idx)


def evaluate(model: TrainedModel, ds: Dataset) -> EvalReport:
    if ds.labels is None:
        raise ValueError("unlabeled dataset")
    preds = predict(model, ds)
    k = model.label_space.k
    confusion = np.zeros((k, k))
    for truth, pred in zip(ds.labels, preds):
        confusion[model.label_space.index(truth), model.label_space.index(pred)] += 1
    row_sums = confusion.sum(axis=1)
    per_class = np.where(row_sums > 0, np.diag(confusion) / np.maximum(row_sums, 1), 0.0)
    accuracy = float(np.trace(confusion) / ds.n)
    return EvalReport(accuracy, per_class, confusion, ds.n)


# --- persistence -------------------------------------------------------------


def _params_to_json(kind: str, params: dict) -> dict:
    if kind == "rbf_svm":
        return {
            "gamma": params["gamma"],
            "machines": [
                {"sv": m["sv"].tolist(), "coef": m["coef"].tolist(), "b": m["b"]}
                for m in params["machines"]
            ],
        }
    return {k: v.tolist() for k, v in params.items()}


def _params_from_json(kind: str, params: dict) -> dict:
    if kind == "rbf_svm":
        return {
            "gamma": params["gamma"],
            "machines": [
                {"sv": np.asarray(m["sv"], dtype=np.float64).reshape(-1, len(m["sv"][0]) if m["sv"] else 0),
                 "coef": np.asarray(m["coef"], dtype=np.float64),
                 "b": float(m["b"])}
                for m in params["machines"]
            ],
        }
    return {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}


def save_model(model: TrainedModel, path) -> None:
    doc = {
        "kind": model.kind,
        "label_space": model.label_space.to_dict(),
        "standardization": {"mu": model.mu.tolist(), "sd": model.sd.tolist()},
        "hyperparameters": {k: v for k, v in model.hyper.items()},
        "seed": model.seed,
        "parameters": _params_to_json(model.kind, model.params),
        "meta": model.meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    from .datamodel import label_space_from_dict
    return TrainedModel(
        kind=doc["kind"],
        label_space=label_space_from_dict(doc["label_space"]),
        mu=np.asarray(doc["standardization"]["mu"], dtype=np.float64),
        sd=np.asarray(doc["standardization"]["sd"], dtype=np.float64),
        params=_params_from_json(doc["kind"], doc["parameters"]),
        hyper=doc["hyperparameters"],
        seed=doc["seed"],
        meta=doc.get("meta", {}),
    )
