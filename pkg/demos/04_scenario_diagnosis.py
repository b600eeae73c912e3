"""Three dataset-pair stories walked through the diagnosis rules.

Each story assembles the evidence a practitioner would have (test results,
model fitness, expert claims) and asks the engine to name the scenario.
The punchline of the third: same statistical evidence, opposite causal
reading, different diagnosis.

Run: python3 demos/04_scenario_diagnosis.py
"""

from shiftscope.datamodel import Causality, TriState
from shiftscope.engine import (CLAIM_CLASS_CONDITIONALS_EQUAL,
                               CausalityUnknownError, Evidence,
                               ExpertAssertion, classify)
from shiftscope.stattests import FeatureShiftReport, TestResult


def rejecting_label_test():
    return TestResult("label_chi2", 14.1, 0.0002, (("0.05", True),), 294, 200)


def shifted_features():
    ks = TestResult("ks_two_sample", 0.31, 0.0001, (("0.025", True),), 294, 200)
    return FeatureShiftReport((ks,), 0.05, 0.025, True)


def show(title, evidence):
    d = classify(evidence)
    print(f"--- {title}")
    print(f"    scenario   : {d.scenario.kind.value} "
          f"({d.scenario.causality.value}), confidence {d.confidence}")
    for line in d.rationale:
        print(f"    rationale  : {line}")
    print(f"    next move  : {d.recommendation.summary}")
    if d.recommendation.executable_actions:
        print(f"    executable : {', '.join(d.recommendation.executable_actions)}")
    print()


# 1. Two clinics, one disease. Age and cholesterol cause the diagnosis,
#    the feature mix moved, and a linear screen generalizes poorly.
show("clinic A -> clinic B", Evidence(
    causality=Causality.X_TO_Y,
    feature_shift=shifted_features(),
    model_well_specified=TriState.NO,
    model_metrics={"source_holdout_accuracy": 0.66, "holdout_gap": 0.01}))

# 2. Cell images: malignancy drives the morphology, and the lab swear the
#    imaging pipeline is unchanged; only the case mix moved.
show("cytology lab, new referral mix", Evidence(
    causality=Causality.Y_TO_X,
    label_shift=rejecting_label_test(),
    expert_assertions=(ExpertAssertion(
        CLAIM_CLASS_CONDITIONALS_EQUAL, TriState.YES,
        "same stain, same scanner, same protocol"),)))

# 3. Printed digits to street numbers: the label still causes the image,
#    but nobody can vouch for the conditionals staying put.
show("digit photos, new camera and new mix", Evidence(
    causality=Causality.Y_TO_X,
    label_shift=rejecting_label_test(),
    expert_assertions=(ExpertAssertion(
        CLAIM_CLASS_CONDITIONALS_EQUAL, TriState.NO,
        "house-number fonts look nothing like the training set"),)))

# And the gate everything hangs on: no causal direction, no diagnosis.
try:
    classify(Evidence(causality=Causality.UNKNOWN))
except CausalityUnknownError as e:
    print(f"--- unknown causality\n    hard stop  : {e}")
