"""Recovering a moved class prior without a single target label.

The target domain draws the same class conditionals as the source but
three quarters of it is positive instead of half. A source-trained
logistic model soft-labels the target; EM re-estimates the prior from
those soft labels alone, and the posterior correction buys back the
accuracy the stale prior cost.

Run: python3 demos/02_prior_shift_em.py
"""

import numpy as np

from shiftscope.adaptation import adjust_posteriors, em_prior_adjust
from shiftscope.datamodel import (Causality, Dataset, ScenarioKind,
                                  ShiftScenario)
from shiftscope.learners import predict_posterior, train
from shiftscope.synthgen import ScenarioSpec, generate

pair = generate(ScenarioSpec(
    ShiftScenario(ScenarioKind.PRIOR, Causality.Y_TO_X),
    n_source=2000, n_target=2000, seed=7))
space = pair.label_space

model = train(pair.source, "logistic", seed=7, label_space=space)
target_post = predict_posterior(model, pair.target.features)

counts = np.array([pair.source.labels.count(l) for l in space.labels])
source_prior = counts / counts.sum()
result = em_prior_adjust(target_post, source_prior)

true_counts = np.array([pair.target.labels.count(l) for l in space.labels])
true_prior = true_counts / true_counts.sum()

print(f"label order          : {space.labels}")
print(f"source prior         : {np.round(source_prior, 3)}")
print(f"true target prior    : {np.round(true_prior, 3)}  (held out)")
print(f"EM estimate          : {np.round(result.estimated_target_prior, 3)}"
      f"  in {len(result.log_likelihoods)} iterations")

def accuracy(post):
    picks = [space.labels[i] for i in post.argmax(axis=1)]
    return float(np.mean([p == t for p, t in zip(picks, pair.target.labels)]))

adjusted = adjust_posteriors(target_post, source_prior,
                             result.estimated_target_prior)
print()
print(f"target accuracy, stale prior    : {accuracy(target_post):.3f}")
print(f"target accuracy, EM-adjusted    : {accuracy(adjusted):.3f}")
