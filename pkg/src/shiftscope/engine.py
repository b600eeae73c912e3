"""Decision core: shift matrices, scenario classification, recommendations,
and the diagnosis session state machine.

The classifier is a deterministic first-match rule chain per causal branch
over three-valued evidence.  Statistical tests outrank expert assertions on
the same quantity (conflicts are noted in the rationale, never hidden), and
the confidence grade reports what kind of evidence the decision actually
consumed: Determined (tests only), Indicated (tests or model indicators
mixed with anything else), Assumed (assertions alone).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .datamodel import (Causality, Dataset, DomainPair, LabelSpace,
                        ScenarioKind, ShiftMatrix, ShiftScenario, TriState)
from .stattests import (FeatureShiftReport, TestResult, feature_shift_screen,
                        label_shift_test, mmd_permutation_test)

__all__ = [
    "CLAIM_PRIOR_CHANGED",
    "CLAIM_CLASS_CONDITIONALS_EQUAL",
    "CLAIM_CONCEPT_STABLE",
    "CLAIM_FEATURE_DISTRIBUTION_CHANGED",
    "ExpertAssertion",
    "Evidence",
    "Recommendation",
    "Diagnosis",
    "CausalityUnknownError",
    "IllegalSessionInput",
    "derive_shift_matrix",
    "recommendation_catalog",
    "classify",
    "model_well_specification",
    "SessionState",
    "new_session",
    "advance_session",
    "allowed_inputs",
    "ProvideCausality",
    "ProvideDataset",
    "RunTest",
    "ProvideAssertion",
    "Proceed",
    "Finalize",
    "KNOWN_CLAIMS",
]

# Canonical claim keys for expert assertions.  Free-form claims are carried
# along but only these four drive classification.
CLAIM_PRIOR_CHANGED = "prior_changed"
CLAIM_CLASS_CONDITIONALS_EQUAL = "class_conditionals_equal"
CLAIM_CONCEPT_STABLE = "concept_stable"
CLAIM_FEATURE_DISTRIBUTION_CHANGED = "feature_distribution_changed"

KNOWN_CLAIMS = (
    CLAIM_PRIOR_CHANGED,
    CLAIM_CLASS_CONDITIONALS_EQUAL,
    CLAIM_CONCEPT_STABLE,
    CLAIM_FEATURE_DISTRIBUTION_CHANGED,
)

# Well-specification thresholds; overridable through classify/session knobs.
ACCURACY_THRESHOLD = 0.65
GAP_THRESHOLD = 0.05
DROP_THRESHOLD = 0.10


class CausalityUnknownError(ValueError):
    """Diagnosis cannot proceed without a causal direction."""


class IllegalSessionInput(ValueError):
    def __init__(self, step: str, allowed: tuple):
        super().__init__(
            f"illegal input for step {step}; allowed inputs: {', '.join(allowed)}")
        self.step = step
        self.allowed = allowed


@dataclass(frozen=True)
class ExpertAssertion:
    """A tri-state domain-knowledge claim with its justification text."""

    claim: str
    value: TriState
    justification: str

    def __post_init__(self):
        if not self.claim:
            raise ValueError("empty claim key")
        if not isinstance(self.value, TriState):
            object.__setattr__(self, "value", TriState(self.value))
        if not str(self.justification).strip():
            raise ValueError("expert assertions require a justification")

    def to_dict(self) -> dict:
        return {"claim": self.claim, "value": self.value.value,
                "justification": self.justification}


@dataclass(frozen=True)
class Evidence:
    """Everything classify may consult, in one immutable bundle."""

    causality: Causality
    feature_shift: Optional[FeatureShiftReport] = None
    label_shift: Optional[TestResult] = None
    mmd_test: Optional[TestResult] = None
    model_well_specified: TriState = TriState.UNKNOWN
    model_metrics: dict = field(default_factory=dict)
    divergence_estimates: tuple = ()
    expert_assertions: tuple = ()

    def assertion(self, claim: str) -> TriState:
        for a in self.expert_assertions:
            if a.claim == claim:
                return a.value
        return TriState.UNKNOWN

    def to_dict(self) -> dict:
        return {
            "causality": self.causality.value,
            "feature_shift": None if self.feature_shift is None else self.feature_shift.to_dict(),
            "label_shift": None if self.label_shift is None else self.label_shift.to_dict(),
            "mmd_test": None if self.mmd_test is None else self.mmd_test.to_dict(),
            "model_well_specified": self.model_well_specified.value,
            "model_metrics": dict(self.model_metrics),
            "divergence_estimates": [d.to_dict() for d in self.divergence_estimates],
            "expert_assertions": [a.to_dict() for a in self.expert_assertions],
        }


@dataclass(frozen=True)
class Recommendation:
    kind: ScenarioKind
    summary: str
    executable_actions: tuple = ()
    caveats: tuple = ()
    see_also: tuple = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "summary": self.summary,
            "executable_actions": list(self.executable_actions),
            "caveats": list(self.caveats),
            "see_also": list(self.see_also),
        }


@dataclass(frozen=True)
class Diagnosis:
    scenario: ShiftScenario
    confidence: str            # Determined | Indicated | Assumed
    rationale: tuple
    recommendation: Recommendation
    shift_matrix: ShiftMatrix

    def __post_init__(self):
        if not self.rationale:
            raise ValueError("rationale must not be empty")
        if self.confidence not in ("Determined", "Indicated", "Assumed"):
            raise ValueError("unknown confidence grade")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "confidence": self.confidence,
            "rationale": list(self.rationale),
            "recommendation": self.recommendation.to_dict(),
            "shift_matrix": self.shift_matrix.to_dict(),
        }


# --- shift matrix ------------------------------------------------------------

_Y, _N = TriState.YES, TriState.NO

_MATRIX_ROWS = {
    # kind: (P(y), P(x), P(x|y), P(y|x), P(x,y)), definitional fields
    ScenarioKind.PRIOR: ((_Y, _Y, _N, _Y, _Y),
                         ("delta_prior", "delta_class_conditionals")),
    ScenarioKind.CLASS_CONDITIONAL: ((_N, _Y, _Y, _Y, _Y),
                                     ("delta_prior", "delta_class_conditionals")),
    ScenarioKind.COVARIATE: ((_Y, _Y, _Y, _N, _Y),
                             ("delta_features", "delta_posteriors")),
    ScenarioKind.CONCEPT: ((_Y, _N, _Y, _Y, _Y),
                           ("delta_features", "delta_posteriors")),
    ScenarioKind.GENERAL: ((_Y, _Y, _Y, _Y, _Y), ()),
}


def derive_shift_matrix(kind: ScenarioKind, causality: Causality) -> ShiftMatrix:
    """The five-quantity change profile for a scenario.

    Definitional cells are the ones the scenario's definition forces;
    the rest follow as consequences under the stated causal direction.
    """
    ShiftScenario(kind, causality)  # validates compatibility
    values, definitional = _MATRIX_ROWS[kind]
    return ShiftMatrix(*values, definitional=frozenset(definitional))


# --- recommendation catalog ---------------------------------------------------

_SURVEY_POINTERS = (
    "transformation-learning surveys (shared embeddings, adversarial feature alignment)",
)
_DRIFT_POINTERS = ("concept-drift adaptation literature",)


def recommendation_catalog() -> dict:
    """The five solution-procedure rows, keyed by scenario kind value."""
    return {
        "Prior": Recommendation(
            kind=ScenarioKind.PRIOR,
            summary=(
                "Perform class-based reweighting of the source sample: estimate "
                "the target label priors (EM over source-classifier posteriors "
                "when target labels are unavailable), then weight each source "
                "sample by the prior ratio or equivalently rescale classifier "
                "posteriors before prediction."),
            executable_actions=("em_prior_adjust", "adjust_posteriors"),
        ),
        "ClassConditional": Recommendation(
            kind=ScenarioKind.CLASS_CONDITIONAL,
            summary=(
                "Find a transformation t between the domains' class-conditional "
                "feature distributions with P_s(x) = P_t(t(x)) and train on the "
                "transformed source sample. Learning t is application-specific "
                "and outside this toolkit's executable scope."),
            caveats=(
                "There is no free lunch: no transformation-learning approach is "
                "best a priori; validate any learned transformation on held-out "
                "target data.",),
            see_also=_SURVEY_POINTERS,
        ),
        "Covariate": Recommendation(
            kind=ScenarioKind.COVARIATE,
            summary=(
                "If the source model is misspecified, reweight source samples "
                "by estimated density ratios (kernel mean matching against the "
                "target feature sample) and retrain; a well-specified model "
                "needs no adaptation — train on all samples."),
            executable_actions=("kernel_mean_matching",),
        ),
        "Concept": Recommendation(
            kind=ScenarioKind.CONCEPT,
            summary=(
                "No domain adaptation scenario: the feature-label relationship "
                "itself changed, so reweighting or transforming source data "
                "cannot recover target performance. Obtain labeled target data "
                "or treat the problem as drift."),
            see_also=_DRIFT_POINTERS,
        ),
        "General": Recommendation(
            kind=ScenarioKind.GENERAL,
            summary=(
                "Decompose the shift into its basic components and apply their "
                "procedures where identifiable, starting with the component "
                "best supported by evidence."),
            caveats=("There is no performance guarantee.",),
        ),
    }


# --- classification -----------------------------------------------------------


def _merge(test_value: Optional[TriState], assertion_value: TriState,
           quantity: str, notes: list):
    """Combine a test-derived value with an assertion: tests outrank, and a
    contradiction is recorded rather than silently resolved."""
    if test_value is None or test_value is TriState.UNKNOWN:
        if assertion_value is not TriState.UNKNOWN:
            return assertion_value, "assertion"
        return TriState.UNKNOWN, None
    if (assertion_value is not TriState.UNKNOWN
            and assertion_value is not test_value):
        notes.append(
            f"conflict on {quantity}: test says {test_value.value}, expert "
            f"asserts {assertion_value.value}; the test result takes precedence")
    return test_value, "test"


def _drop_state(metrics: dict, drop_threshold: float):
    src = metrics.get("source_holdout_accuracy", metrics.get("source_accuracy"))
    tgt = metrics.get("target_accuracy")
    if src is None or tgt is None:
        return TriState.UNKNOWN, None
    return ((TriState.YES if (src - tgt) >= drop_threshold else TriState.NO),
            "indicator")


def classify(evidence: Evidence, level: float = 0.05,
             drop_threshold: float = DROP_THRESHOLD,
             gap_threshold: float = GAP_THRESHOLD) -> Diagnosis:
    """Map evidence to a scenario diagnosis under the answered causality.

    First-match rule chains, one per causal branch.  When evidence supports
    both a basic scenario and the general one, the basic scenario wins and a
    caveat records the unverified remainder.  Unknown causality is a hard
    stop: causal research cannot be automated away.
    """
    if evidence.causality is Causality.UNKNOWN:
        raise CausalityUnknownError("causal research required")
    notes: list = []
    rationale: list = []
    consulted: set = set()
    catalog = recommendation_catalog()

    def describe_tests():
        if evidence.label_shift is not None:
            r = evidence.label_shift
            rationale.append(
                f"label_shift: statistic {r.statistic:.4g}, p={r.p_value:.4g} "
                f"({'rejects' if r.p_value < level else 'fails to reject'} at {level:g})")
        if evidence.feature_shift is not None:
            f = evidence.feature_shift
            rationale.append(
                f"feature_shift: {f.verdict} (Bonferroni level {f.bonferroni_level:.4g})")
        if evidence.mmd_test is not None:
            r = evidence.mmd_test
            rationale.append(
                f"mmd_permutation: statistic {r.statistic:.4g}, p={r.p_value:.4g}")

    def describe_assertions():
        for a in evidence.expert_assertions:
            rationale.append(
                f"assertion {a.claim}={a.value.value} ({a.justification})")

    drop, drop_src = _drop_state(evidence.model_metrics, drop_threshold)
    ws = evidence.model_well_specified
    gap = evidence.model_metrics.get("holdout_gap")
    well_generalizing = (gap is not None and gap <= gap_threshold) or ws is TriState.YES

    caveats: list = []
    extra_actions: tuple = ()

    if evidence.causality is Causality.Y_TO_X:
        test_ps = None
        if evidence.label_shift is not None:
            test_ps = (TriState.YES if evidence.label_shift.p_value < level
                       else TriState.NO)
        ps, ps_src = _merge(test_ps, evidence.assertion(CLAIM_PRIOR_CHANGED),
                            "label prior change", notes)
        ccs = evidence.assertion(CLAIM_CLASS_CONDITIONALS_EQUAL)

        def consult(*pairs):
            for value, src in pairs:
                if src is not None and value is not TriState.UNKNOWN:
                    consulted.add(src)

        consult((ps, ps_src), (ccs, "assertion" if ccs is not TriState.UNKNOWN else None),
                (drop, drop_src))
        if ps is TriState.NO and drop is TriState.YES and ccs is not TriState.YES:
            kind = ScenarioKind.CLASS_CONDITIONAL
            rationale.append(
                "rule: stable label priors with a performance drop and no "
                "asserted class-conditional equality indicate class-conditional shift")
        elif ps is TriState.YES and ccs is TriState.YES:
            kind = ScenarioKind.PRIOR
            rationale.append(
                "rule: label prior change with asserted class-conditional "
                "equality is prior shift")
        elif ps is TriState.YES and ccs is TriState.NO:
            kind = ScenarioKind.GENERAL
            rationale.append(
                "rule: both the label priors and the class conditionals moved; "
                "no basic scenario covers this")
        elif ps is TriState.YES:
            kind = ScenarioKind.PRIOR
            caveats.append(
                "class-conditional stability was not asserted or tested; if the "
                "conditionals also moved, the scenario is general shift")
            rationale.append(
                "rule: label prior change with unverified class-conditional "
                "stability; the basic scenario is preferred over general shift")
        elif ccs is TriState.NO:
            kind = ScenarioKind.CLASS_CONDITIONAL
            rationale.append(
                "rule: asserted class-conditional change with no evidence of "
                "prior change indicates class-conditional shift")
        elif ps is TriState.NO and drop is TriState.YES:
            kind = ScenarioKind.GENERAL
            caveats.append(
                "the observed performance drop is unexplained by the evidence "
                "at hand; treat the diagnosis with care")
            rationale.append(
                "rule: priors stable and conditionals asserted equal, yet "
                "performance dropped — evidence is internally inconsistent")
        elif ps is TriState.NO:
            kind = ScenarioKind.PRIOR
            caveats.append(
                "no shift detected on the label-causal branch; the class-based "
                "reweighting path is listed pro forma and its weights should "
                "come out near 1")
            rationale.append(
                "rule: no evidence of any shift; reporting the harmless basic "
                "scenario for this causal branch")
        else:
            kind = ScenarioKind.GENERAL
            caveats.append(
                "insufficient evidence: neither tests nor assertions constrain "
                "the scenario")
            rationale.append("rule: insufficient evidence on the label-causal branch")
    else:  # X -> Y
        test_fs = None
        if evidence.feature_shift is not None:
            test_fs = TriState.YES if evidence.feature_shift.shifted else TriState.NO
        elif evidence.mmd_test is not None:
            test_fs = (TriState.YES if evidence.mmd_test.p_value < level
                       else TriState.NO)
        fs, fs_src = _merge(test_fs,
                            evidence.assertion(CLAIM_FEATURE_DISTRIBUTION_CHANGED),
                            "feature-distribution change", notes)
        cst = evidence.assertion(CLAIM_CONCEPT_STABLE)
        if fs_src is not None and fs is not TriState.UNKNOWN:
            consulted.add(fs_src)
        if cst is not TriState.UNKNOWN:
            consulted.add("assertion")
        if drop_src is not None and drop is not TriState.UNKNOWN:
            consulted.add(drop_src)
        if ws is not TriState.UNKNOWN:
            consulted.add("indicator")

        if fs is TriState.NO and drop is TriState.YES and well_generalizing:
            kind = ScenarioKind.CONCEPT
            rationale.append(
                "rule: no feature-distribution shift, yet a well-generalizing "
                "source model loses accuracy on the target — the concept moved")
        elif fs is TriState.YES and ws is TriState.NO:
            kind = ScenarioKind.COVARIATE
            rationale.append(
                "rule: feature distribution shifted and the source model is "
                "misspecified — covariate shift with instance reweighting")
        elif fs is TriState.YES and ws is TriState.YES:
            kind = ScenarioKind.COVARIATE
            caveats.append(
                "the source model is well-specified: no adaptation needed, "
                "train on all samples; the reweighting path is listed for the "
                "misspecified case")
            rationale.append(
                "rule: feature distribution shifted but the model is "
                "well-specified, which covariate shift leaves harmless")
        elif fs is TriState.YES and cst is TriState.YES:
            kind = ScenarioKind.COVARIATE
            caveats.append(
                "model specification is unverified; the covariate reading "
                "rests on the asserted concept stability")
            rationale.append(
                "rule: feature distribution shifted with concept stability "
                "asserted; the basic scenario is preferred over general shift")
        elif fs is TriState.YES:
            kind = ScenarioKind.GENERAL
            rationale.append(
                "rule: feature distribution shifted and concept stability is "
                "not asserted; nothing excludes a concurrent concept change")
        elif cst is TriState.NO:
            kind = ScenarioKind.CONCEPT
            rationale.append(
                "rule: the expert asserts the concept itself changed")
            if fs is TriState.UNKNOWN:
                caveats.append("feature-distribution stability is unverified")
        elif fs is TriState.NO and drop is TriState.YES:
            kind = ScenarioKind.CONCEPT
            caveats.append(
                "the source model generalizes poorly on its own holdout; the "
                "accuracy drop may partly reflect misspecification rather "
                "than concept change")
            rationale.append(
                "rule: no feature-distribution shift but a performance drop; "
                "concept shift is the remaining explanation")
        elif fs is TriState.NO:
            kind = ScenarioKind.COVARIATE
            caveats.append(
                "no shift detected on the feature-causal branch; no adaptation "
                "needed — the reweighting path is listed pro forma")
            rationale.append(
                "rule: no evidence of any shift; reporting the harmless basic "
                "scenario for this causal branch")
        else:
            kind = ScenarioKind.GENERAL
            caveats.append(
                "insufficient evidence: neither tests nor assertions constrain "
                "the scenario")
            rationale.append("rule: insufficient evidence on the feature-causal branch")

    describe_tests()
    if evidence.model_metrics:
        bits = ", ".join(f"{k}={v:.4g}" for k, v in sorted(evidence.model_metrics.items()))
        rationale.append(f"model indicator: well_specified={ws.value} ({bits})")
    describe_assertions()
    rationale.extend(notes)

    scenario = ShiftScenario(kind, evidence.causality)
    base = catalog[kind.value]
    recommendation = Recommendation(
        kind=base.kind,
        summary=base.summary,
        executable_actions=base.executable_actions + extra_actions,
        caveats=base.caveats + tuple(caveats),
        see_also=base.see_also,
    )
    if consulted == {"test"}:
        confidence = "Determined"
    elif "test" in consulted or "indicator" in consulted:
        confidence = "Indicated"
    else:
        confidence = "Assumed"
    return Diagnosis(
        scenario=scenario,
        confidence=confidence,
        rationale=tuple(rationale),
        recommendation=recommendation,
        shift_matrix=derive_shift_matrix(kind, evidence.causality),
    )


# --- model well-specification indicator ----------------------------------------


def model_well_specification(pair: DomainPair, seed: int = 0,
                             accuracy_threshold: float = ACCURACY_THRESHOLD,
                             gap_threshold: float = GAP_THRESHOLD):
    """Fit a source logistic model on a seeded 80/20 split and grade it.

    Returns (state, metrics): Yes when holdout accuracy clears the accuracy
    threshold and the train-holdout gap stays within the gap threshold, No
    when either fails, Unknown when the holdout is too small to say.
    Target accuracy is included when the target carries labels.
    """
    from .learners import evaluate, train

    src = pair.source
    if src.labels is None:
        raise ValueError("unlabeled source")
    n = src.n
    n_holdout = max(1, n // 5)
    order = np.random.default_rng(seed).permutation(n)
    hold_idx = np.sort(order[:n_holdout])
    train_idx = np.sort(order[n_holdout:])
    metrics: dict = {}
    if n_holdout < 10 or len({src.labels[i] for i in train_idx}) < 2:
        return TriState.UNKNOWN, {"reason": "insufficient data for the indicator"}
    ds_train = Dataset(src.features[train_idx],
                       tuple(src.labels[i] for i in train_idx), name="source/train")
    ds_hold = Dataset(src.features[hold_idx],
                      tuple(src.labels[i] for i in hold_idx), name="source/holdout")
    model = train(ds_train, "logistic", seed=seed, label_space=pair.label_space)
    acc_train = evaluate(model, ds_train).accuracy
    acc_hold = evaluate(model, ds_hold).accuracy
    metrics["source_train_accuracy"] = acc_train
    metrics["source_holdout_accuracy"] = acc_hold
    metrics["holdout_gap"] = acc_train - acc_hold
    if pair.target.labels is not None:
        metrics["target_accuracy"] = evaluate(model, pair.target).accuracy
    ok = acc_hold >= accuracy_threshold and metrics["holdout_gap"] <= gap_threshold
    return (TriState.YES if ok else TriState.NO), metrics


# --- session state machine ------------------------------------------------------

STEP_AWAIT_CAUSALITY = "AwaitCausality"
STEP_AWAIT_DATA = "AwaitData"
STEP_TESTING = "Testing"
STEP_AWAIT_ASSERTIONS = "AwaitExpertAssertions"
STEP_DIAGNOSED = "Diagnosed"

SESSION_TESTS = ("feature_shift", "label_shift", "mmd", "fit_source_model")


@dataclass(frozen=True)
class ProvideCausality:
    value: Causality


@dataclass(frozen=True)
class ProvideDataset:
    role: str                      # "source" | "target"
    dataset: Dataset
    label_space: Optional[LabelSpace] = None


@dataclass(frozen=True)
class RunTest:
    test: str
    seed: int = 0
    level: float = 0.05
    permutations: int = 200


@dataclass(frozen=True)
class ProvideAssertion:
    claim: str
    value: TriState
    justification: str


@dataclass(frozen=True)
class Proceed:
    pass


@dataclass(frozen=True)
class Finalize:
    pass


SessionInput = Union[ProvideCausality, ProvideDataset, RunTest,
                     ProvideAssertion, Proceed, Finalize]


@dataclass(frozen=True)
class SessionState:
    """Immutable snapshot of one diagnosis session."""

    id: str
    step: str = STEP_AWAIT_CAUSALITY
    causality: Optional[Causality] = None
    source: Optional[Dataset] = None
    target: Optional[Dataset] = None
    label_space: Optional[LabelSpace] = None
    answered: tuple = ()           # (question, value) pairs, append-only
    test_results: tuple = ()       # (test name, result object) pairs
    assertions: tuple = ()
    model_well_specified: TriState = TriState.UNKNOWN
    model_metrics: dict = field(default_factory=dict)
    diagnosis: Optional[Diagnosis] = None
    advisory: Optional[str] = None
    level: float = 0.05
    created_at: float = 0.0
    updated_at: float = 0.0

    def pair(self) -> DomainPair:
        if self.source is None or self.target is None:
            raise ValueError("both datasets are required before testing")
        space = self.label_space
        if space is None:
            if self.source.labels is None:
                raise ValueError("unlabeled source")
            space = LabelSpace(tuple(dict.fromkeys(self.source.labels)))
        return DomainPair(self.source, self.target, space)

    def evidence(self) -> Evidence:
        feature = label = mmd_r = None
        for name, result in self.test_results:
            if name == "feature_shift":
                feature = result
            elif name == "label_shift":
                label = result
            elif name == "mmd":
                mmd_r = result
        return Evidence(
            causality=self.causality if self.causality is not None else Causality.UNKNOWN,
            feature_shift=feature,
            label_shift=label,
            mmd_test=mmd_r,
            model_well_specified=self.model_well_specified,
            model_metrics=dict(self.model_metrics),
            expert_assertions=self.assertions,
        )


def new_session(session_id: str, level: float = 0.05,
                now: Optional[float] = None) -> SessionState:
    ts = time.time() if now is None else now
    return SessionState(id=session_id, level=level, created_at=ts, updated_at=ts)


_ALLOWED = {
    STEP_AWAIT_CAUSALITY: ("causality answer",),
    STEP_AWAIT_DATA: ("dataset upload", "proceed"),
    STEP_TESTING: ("test request", "proceed"),
    STEP_AWAIT_ASSERTIONS: ("expert assertion", "finalize"),
    STEP_DIAGNOSED: (),
}


def allowed_inputs(step: str) -> tuple:
    """Legal input kinds for a session step; terminal steps accept none."""
    return _ALLOWED[step]


def _run_session_test(state: SessionState, req: RunTest) -> SessionState:
    if req.test not in SESSION_TESTS:
        raise ValueError(f"unknown test {req.test!r}; available: {', '.join(SESSION_TESTS)}")
    pair = state.pair()
    if req.test == "feature_shift":
        result = feature_shift_screen(pair, level=req.level)
        return replace(state, test_results=state.test_results + (("feature_shift", result),))
    if req.test == "label_shift":
        if pair.target.labels is None:
            raise ValueError("target labels required")
        result = label_shift_test(pair.source.labels, pair.target.labels,
                                  pair.label_space)
        return replace(state, test_results=state.test_results + (("label_shift", result),))
    if req.test == "mmd":
        result = mmd_permutation_test(pair.source, pair.target,
                                      permutations=req.permutations, seed=req.seed)
        return replace(state, test_results=state.test_results + (("mmd", result),))
    ws, metrics = model_well_specification(pair, seed=req.seed)
    return replace(state, model_well_specified=ws, model_metrics=metrics,
                   test_results=state.test_results + (("fit_source_model", metrics),))


def advance_session(state: SessionState, inp: SessionInput,
                    now: Optional[float] = None) -> SessionState:
    """Pure transition function of the session state machine.

    AwaitCausality → AwaitData → Testing (re-entrant) →
    AwaitExpertAssertions → Diagnosed (terminal).  Unknown causality jumps
    straight to Diagnosed with an advisory and no Diagnosis.  Illegal
    inputs are rejected naming the step and its legal inputs.
    """
    ts = time.time() if now is None else now

    def illegal():
        raise IllegalSessionInput(state.step, _ALLOWED[state.step])

    if state.step == STEP_AWAIT_CAUSALITY:
        if not isinstance(inp, ProvideCausality):
            illegal()
        answered = state.answered + (("causality", inp.value.value),)
        if inp.value is Causality.UNKNOWN:
            return replace(state, step=STEP_DIAGNOSED, causality=inp.value,
                           answered=answered, updated_at=ts,
                           advisory=("causal research required: the causal "
                                     "direction between features and labels must "
                                     "be established before any shift diagnosis"))
        return replace(state, step=STEP_AWAIT_DATA, causality=inp.value,
                       answered=answered, updated_at=ts)

    if state.step == STEP_AWAIT_DATA:
        if isinstance(inp, ProvideDataset):
            if inp.role not in ("source", "target"):
                raise ValueError("dataset role must be 'source' or 'target'")
            if getattr(state, inp.role) is not None:
                raise ValueError(f"{inp.role} dataset already provided")
            updates = {inp.role: inp.dataset, "updated_at": ts}
            if inp.label_space is not None:
                updates["label_space"] = inp.label_space
            nxt = replace(state, **updates)
            if nxt.source is not None and nxt.target is not None:
                nxt = replace(nxt, step=STEP_TESTING)
            return nxt
        if isinstance(inp, Proceed):
            return replace(state, step=STEP_TESTING, updated_at=ts)
        illegal()

    if state.step == STEP_TESTING:
        if isinstance(inp, RunTest):
            return replace(_run_session_test(state, inp), updated_at=ts)
        if isinstance(inp, Proceed):
            return replace(state, step=STEP_AWAIT_ASSERTIONS, updated_at=ts)
        illegal()

    if state.step == STEP_AWAIT_ASSERTIONS:
        if isinstance(inp, ProvideAssertion):
            assertion = ExpertAssertion(inp.claim, inp.value, inp.justification)
            return replace(
                state,
                assertions=state.assertions + (assertion,),
                answered=state.answered + ((inp.claim, assertion.value.value),),
                updated_at=ts)
        if isinstance(inp, Finalize):
            diagnosis = classify(state.evidence(), level=state.level)
            return replace(state, step=STEP_DIAGNOSED, diagnosis=diagnosis,
                           answered=state.answered + (("finalize", "Yes"),),
                           updated_at=ts)
        illegal()

    illegal()
