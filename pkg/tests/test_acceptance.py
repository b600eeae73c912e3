"""Headline acceptance checks, one test per claim the package stands behind.

Each test funnels through check(), which records a PASS/FAIL line for the
terminal summary (see conftest) and then asserts, so a red run still prints
one verdict per criterion.  The repro targets are expensive, so they run
through a module-scoped fixture exactly once here, and a second time inside
the determinism check which needs a repeat run anyway.
"""

import itertools
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from shiftscope.datamodel import (Causality, Dataset, ScenarioKind,
                                  ShiftScenario, TriState, write_dataset_csv)
from shiftscope.density import (GaussianDensity, fit_kde, js_divergence,
                                kl_divergence, mmd, renyi_divergence)
from shiftscope.engine import (CLAIM_CLASS_CONDITIONALS_EQUAL,
                               CLAIM_CONCEPT_STABLE,
                               CLAIM_FEATURE_DISTRIBUTION_CHANGED,
                               CLAIM_PRIOR_CHANGED, Evidence, ExpertAssertion,
                               classify, derive_shift_matrix)
from shiftscope.repro import REPRO_TARGETS, run_repro
from shiftscope.stattests import FeatureShiftReport
from shiftscope.stattests import TestResult as StatTestResult
from shiftscope.stattests import mmd_permutation_test

from conftest import record_acceptance

Y, N, U = TriState.YES, TriState.NO, TriState.UNKNOWN
LN2 = np.log(2.0)

# feature-space KL reference values (two decimals) at the b where they exist;
# the class-conditional column is b^2/2 for every b
FEATURE_KL_REFERENCE = {0.0: 0.00, 0.2: 0.01, 0.4: 0.04, 0.6: 0.10,
                        1.6: 0.73, 1.8: 0.94, 2.0: 1.17}


def check(name: str, ok: bool, detail: str) -> None:
    record_acceptance(name, ok, detail)
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def repro_runs(tmp_path_factory):
    """One timed run of every repro target, artifacts kept for later
    byte-comparison."""
    out = {}
    for target in sorted(REPRO_TARGETS):
        art_dir = tmp_path_factory.mktemp(f"first_{target}")
        t0 = time.perf_counter()
        report = run_repro(target, out_dir=art_dir)
        out[target] = (report, time.perf_counter() - t0, art_dir)
    return out


def test_kl_table(repro_runs):
    report, elapsed, _ = repro_runs["kl-table"]
    rows = report["rows"]
    analytic_exact = all(
        r["analytic_class_conditional_kl"] == r["b"] ** 2 / 2 for r in rows)
    kde_err = max(abs(r["kde_class_conditional_kl"] - r["b"] ** 2 / 2)
                  for r in rows)
    ref_rows = [r for r in rows if round(r["b"], 1) in FEATURE_KL_REFERENCE]
    feat_err = max(abs(r["feature_space_kl"]
                       - FEATURE_KL_REFERENCE[round(r["b"], 1)])
                   for r in ref_rows)
    ok = (len(rows) == 11 and analytic_exact and kde_err <= 0.05
          and len(ref_rows) == 7 and feat_err <= 0.03 and elapsed < 30)
    check("kl-table", ok,
          f"analytic column exact over {len(rows)} b values; "
          f"max |KDE - b^2/2| {kde_err:.4f} (<=0.05); "
          f"max feature-KL error vs reference {feat_err:.4f} (<=0.03); "
          f"{elapsed:.1f}s (<30s)")


def test_prior_table(repro_runs):
    report, elapsed, _ = repro_runs["prior-table"]
    t = report["table"]
    got = {"ss": t["source"]["svm_source"]["mean"],
           "st": t["target"]["svm_source"]["mean"],
           "ts": t["source"]["svm_target"]["mean"],
           "tt": t["target"]["svm_target"]["mean"]}
    want = {"ss": 0.75, "st": 0.74, "ts": 0.64, "tt": 0.80}
    worst = max(abs(got[k] - want[k]) for k in want)
    order = sum(1 for r in report["runs"] if r["tt"] > r["st"])
    ok = (worst <= 0.05 and order >= 8 and len(report["runs"]) == 10
          and elapsed < 60)
    check("prior-table", ok,
          f"worst mean-accuracy error {worst:.3f} (<=0.05); "
          f"target-model beats source-model on target in {order}/10 (>=8); "
          f"{elapsed:.1f}s (<60s)")


def test_heart(repro_runs):
    report, _, _ = repro_runs["heart"]
    if report["status"] == "ok":
        ok = (abs(report["unweighted_accuracy"] - 0.47) <= 0.05
              and abs(report["weighted_accuracy"] - 0.54) <= 0.05
              and report["improvement"] >= 0.02)
        detail = (f"clinic data: unweighted {report['unweighted_accuracy']:.3f}"
                  f" (0.47+-0.05), weighted {report['weighted_accuracy']:.3f}"
                  f" (0.54+-0.05), gain {report['improvement']:.3f} (>=0.02)")
    else:
        sub = report["substitute"]
        improved = sub["improved_at_least_0.03"]
        ok = improved >= 8 and len(sub["runs"]) == 10 and sub["passes"]
        detail = ("clinic files not ingested; offline substitute: KMM "
                  f"weighting gained >=0.03 in {improved}/10 seeds (>=8)")
    check("heart", ok, detail)


def test_breast(repro_runs):
    report, _, _ = repro_runs["breast"]
    em_err = abs(report["em_positive_prior"] - 0.20)
    rows = report["sweep"]

    def mean_acc(kind):
        return float(np.mean([r["accuracy"][kind] for r in rows]))

    m_true, m_em, m_none = (mean_acc("true_priors"), mean_acc("em"),
                            mean_acc("no_adjustment"))
    head = report["accuracy"]
    ordering = (m_true >= m_em >= m_none - 0.005
                and head["true_priors"] >= head["em"]
                >= head["no_adjustment"] - 0.005)
    closer = sum(
        1 for r in rows
        if abs(r["em_positive_prior"] - r["true_positive_prior"])
        < abs(r["confusion_matrix_positive_prior"] - r["true_positive_prior"]))
    ok = em_err <= 0.05 and ordering and closer >= 7 and len(rows) == 10
    check("breast", ok,
          f"EM prior {report['em_positive_prior']:.3f} vs 0.20 "
          f"(err {em_err:.3f} <=0.05); mean accuracy true {m_true:.3f} >= "
          f"EM {m_em:.3f} >= unadjusted {m_none:.3f} - 0.005; EM beat the "
          f"confusion-matrix prior in {closer}/10 seeds (>=7)")


def test_general_benign(repro_runs):
    report, _, _ = repro_runs["general-benign"]
    overall = report["target_overall_accuracy"]
    per = report["target_per_class_accuracy"]
    ok = overall >= 0.85 and per["+1"] >= 0.95 and per["-1"] < per["+1"]
    check("general-benign", ok,
          f"target overall {overall:.3f} (>=0.85), positive {per['+1']:.3f} "
          f"(>=0.95), negative {per['-1']:.3f} strictly lower")


def test_transformation(repro_runs):
    report, _, _ = repro_runs["transformation"]
    gaps = {c["b"]: c["sup_gap"] for c in report["sup_gap_checks"]}
    witness = report["violation_witness"]["sup_gap"]
    residuals = report["total_probability_residuals"]
    ok = (set(gaps) == {0.5, 1.0, 1.5}
          and all(g <= 0.05 for g in gaps.values())
          and witness > 0.05
          and len(residuals) == 5
          and all(v <= 0.02 for v in residuals.values()))
    check("transformation", ok,
          f"sup translation gap {max(gaps.values()):.4f} at worst b "
          f"(<=0.05 for b in 0.5/1.0/1.5); unequal-prior witness "
          f"{witness:.3f} (>0.05); worst total-probability residual "
          f"{max(residuals.values()):.2e} (<=0.02 on all 5 generators)")


def test_divergence_properties():
    p01, p11 = GaussianDensity(0.0, 1.0), GaussianDensity(1.0, 1.0)

    # nonnegativity and JS bounds across a spread of KDE pairs
    rng = np.random.default_rng(0)
    nonneg, js_bounds, js_sym = True, True, 0.0
    for _ in range(5):
        p = fit_kde(rng.normal(rng.uniform(-1, 1), rng.uniform(0.5, 2), 400))
        q = fit_kde(rng.normal(rng.uniform(-1, 1), rng.uniform(0.5, 2), 400))
        kl_pq = kl_divergence(p, q).value
        js_pq = js_divergence(p, q).value
        js_qp = js_divergence(q, p).value
        r2 = renyi_divergence(p, q, alpha=2.0).value
        nonneg &= kl_pq >= -1e-12 and js_pq >= -1e-12 and r2 >= -1e-12
        js_bounds &= -1e-12 <= js_pq <= 1.0 + 1e-12
        js_sym = max(js_sym, abs(js_pq - js_qp))

    # direction matters for KL: widen q and the two orders separate
    wide = GaussianDensity(0.0, 2.0)
    asym_gap = abs(kl_divergence(p01, wide).value
                   - kl_divergence(wide, p01).value)

    # alpha -> 1 recovers KL (bits on both sides)
    kl_bits = kl_divergence(p01, p11).value / LN2
    renyi_near_one = renyi_divergence(p01, p11, alpha=1.001).value
    continuity_err = abs(renyi_near_one - kl_bits)

    # a sample against itself has zero biased MMD
    x = rng.standard_normal((40, 2))
    self_mmd = mmd(x, x).biased.value

    # null calibration of the permutation test at the 0.05 level
    rejections = 0
    for s in range(100):
        r = np.random.default_rng(1000 + s)
        a = r.standard_normal((60, 1))
        b = r.standard_normal((60, 1))
        res = mmd_permutation_test(a, b, permutations=200, seed=s)
        rejections += int(dict(res.reject_at)[0.05])
    rate = rejections / 100.0

    ok = (nonneg and js_bounds and js_sym <= 1e-9 and asym_gap > 0.05
          and continuity_err <= 1e-2 and abs(self_mmd) <= 1e-9
          and 0.01 <= rate <= 0.10)
    check("divergence-properties", ok,
          f"nonnegative, JS symmetric (max gap {js_sym:.1e}) and in [0,1]; "
          f"KL order gap {asym_gap:.3f}; Renyi(1.001) within "
          f"{continuity_err:.4f} of KL (<=0.01); self-MMD {self_mmd:.1e}; "
          f"null rejection rate {rate:.2f} in [0.01, 0.10]")


def test_scenario_engine():
    golden = {
        ScenarioKind.PRIOR: ("Yes", "Yes", "No", "Yes", "Yes"),
        ScenarioKind.CLASS_CONDITIONAL: ("No", "Yes", "Yes", "Yes", "Yes"),
        ScenarioKind.COVARIATE: ("Yes", "Yes", "Yes", "No", "Yes"),
        ScenarioKind.CONCEPT: ("Yes", "No", "Yes", "Yes", "Yes"),
        ScenarioKind.GENERAL: ("Yes", "Yes", "Yes", "Yes", "Yes"),
    }
    causality_of = {
        ScenarioKind.PRIOR: Causality.Y_TO_X,
        ScenarioKind.CLASS_CONDITIONAL: Causality.Y_TO_X,
        ScenarioKind.COVARIATE: Causality.X_TO_Y,
        ScenarioKind.CONCEPT: Causality.X_TO_Y,
        ScenarioKind.GENERAL: Causality.X_TO_Y,
    }
    cols = ("delta_prior", "delta_features", "delta_class_conditionals",
            "delta_posteriors", "delta_joint")
    golden_ok = all(
        tuple(derive_shift_matrix(kind, causality_of[kind]).to_dict()[c]
              for c in cols) == row
        for kind, row in golden.items())

    def label_test(reject):
        return StatTestResult("label_chi2", 12.0 if reject else 0.4,
                              0.001 if reject else 0.7, (("0.05", reject),),
                              100, 100)

    def feature_report(shifted):
        row = StatTestResult("ks_two_sample", 0.4 if shifted else 0.05,
                             0.001 if shifted else 0.6, (("0.025", shifted),),
                             100, 100)
        return FeatureShiftReport((row, row), 0.05, 0.025, shifted)

    def asserted(claim, value):
        return ExpertAssertion(claim, value, "domain knowledge")

    # every tri-state evidence combination must resolve to a legal scenario
    total, resolved = 0, 0
    for lbl, ps, ccs, drop in itertools.product(
            (None, True, False), (Y, N, U), (Y, N, U), (None, True, False)):
        assertions = []
        if ps is not U:
            assertions.append(asserted(CLAIM_PRIOR_CHANGED, ps))
        if ccs is not U:
            assertions.append(asserted(CLAIM_CLASS_CONDITIONALS_EQUAL, ccs))
        metrics = {} if drop is None else {
            "source_holdout_accuracy": 0.9,
            "target_accuracy": 0.6 if drop else 0.89}
        d = classify(Evidence(
            causality=Causality.Y_TO_X,
            label_shift=None if lbl is None else label_test(lbl),
            model_metrics=metrics, expert_assertions=tuple(assertions)))
        total += 1
        ShiftScenario(d.scenario.kind, Causality.Y_TO_X)
        resolved += int(d.confidence in ("Determined", "Indicated", "Assumed"))
    for fs, fsc, cst, ws, drop in itertools.product(
            (None, True, False), (Y, N, U), (Y, N, U), (Y, N, U),
            (None, True, False)):
        assertions = []
        if fsc is not U:
            assertions.append(asserted(CLAIM_FEATURE_DISTRIBUTION_CHANGED,
                                       fsc))
        if cst is not U:
            assertions.append(asserted(CLAIM_CONCEPT_STABLE, cst))
        metrics = {} if drop is None else {
            "source_holdout_accuracy": 0.9, "holdout_gap": 0.02,
            "target_accuracy": 0.6 if drop else 0.89}
        d = classify(Evidence(
            causality=Causality.X_TO_Y,
            feature_shift=None if fs is None else feature_report(fs),
            model_well_specified=ws, model_metrics=metrics,
            expert_assertions=tuple(assertions)))
        total += 1
        ShiftScenario(d.scenario.kind, Causality.X_TO_Y)
        resolved += int(d.confidence in ("Determined", "Indicated", "Assumed"))
    totality_ok = resolved == total

    # the three worked cases: clinics, cell images, digits-to-house-numbers
    clinic = classify(Evidence(
        causality=Causality.X_TO_Y, feature_shift=feature_report(True),
        model_well_specified=N,
        model_metrics={"source_holdout_accuracy": 0.66, "holdout_gap": 0.01}))
    cells = classify(Evidence(
        causality=Causality.Y_TO_X, label_shift=label_test(True),
        expert_assertions=(asserted(CLAIM_CLASS_CONDITIONALS_EQUAL, Y),)))
    digits = classify(Evidence(
        causality=Causality.Y_TO_X, label_shift=label_test(True),
        expert_assertions=(asserted(CLAIM_CLASS_CONDITIONALS_EQUAL, N),)))
    cases_ok = (clinic.scenario.kind is ScenarioKind.COVARIATE
                and cells.scenario.kind is ScenarioKind.PRIOR
                and digits.scenario.kind is ScenarioKind.GENERAL
                and digits.scenario.causality is Causality.Y_TO_X)

    ok = golden_ok and totality_ok and cases_ok
    check("scenario-engine", ok,
          f"5 golden change profiles match; {resolved}/{total} evidence "
          f"combinations resolve; worked cases -> Covariate / Prior / "
          f"General(YtoX)")


CLI = (sys.executable, "-m", "shiftscope.cli")


def _run_cli(*args, stdin=None):
    env = dict(os.environ)
    env.pop("SHIFTSCOPE_SEED", None)
    env.pop("SHIFTSCOPE_DATA_DIR", None)
    return subprocess.run(CLI + args, capture_output=True, text=True,
                          input=stdin, env=env, timeout=300)


def test_determinism(repro_runs, tmp_path):
    # repeat every repro target; the JSON artifact must not move by a byte
    stale = []
    for target, (report, _, first_dir) in repro_runs.items():
        again = tmp_path / f"again_{target}"
        run_repro(target, out_dir=again)
        name = report["name"]
        a = (first_dir / f"{name}.json").read_bytes()
        b = (again / f"{name}.json").read_bytes()
        if a != b:
            stale.append(target)

    # seeded analysis commands must print identical bytes both times
    d = tmp_path / "csv"
    d.mkdir()
    rng = np.random.default_rng(0)
    a_lbl = tuple(np.where(rng.random(200) < 0.5, "+1", "-1"))
    write_dataset_csv(Dataset(rng.normal(0, 1, (200, 1)), a_lbl, name="a"),
                      d / "a.csv")
    b_lbl = tuple(np.where(rng.random(200) < 0.8, "+1", "-1"))
    write_dataset_csv(Dataset(rng.normal(1, 1, (200, 1)), b_lbl, name="b"),
                      d / "b.csv")
    x_s = rng.normal(0.0, 2.0, (300, 1))
    write_dataset_csv(
        Dataset(x_s, tuple(np.where(np.abs(x_s[:, 0]) <= 1, "+1", "-1")),
                name="band source"), d / "band_src.csv")
    write_dataset_csv(Dataset(rng.normal(1.2, 0.6, (400, 1)), None,
                              name="band target"), d / "band_tgt.csv")
    a, b = str(d / "a.csv"), str(d / "b.csv")
    src, tgt = str(d / "band_src.csv"), str(d / "band_tgt.csv")
    model = str(d / "model.json")
    weights = str(d / "w.csv")

    _run_cli("--json", "train", "--data", a, "--kind", "logistic",
             "--out", model)
    commands = [
        (("--json", "divergence", "--source", a, "--target", b,
          "--measure", "kl"), None),
        (("--json", "divergence", "--source", a, "--target", b,
          "--measure", "js"), None),
        (("--json", "divergence", "--source", a, "--target", b,
          "--measure", "renyi", "--alpha", "2.0"), None),
        (("--json", "divergence", "--source", a, "--target", b,
          "--measure", "mmd"), None),
        (("--json", "test", "--source", a, "--target", b, "ks"), None),
        (("--json", "test", "--source", a, "--target", b, "label"), None),
        (("--json", "test", "--source", a, "--target", b, "mmd",
          "--permutations", "100", "--seed", "5"), None),
        (("--json", "train", "--data", a, "--kind", "logistic",
          "--out", model), None),
        (("--json", "eval", "--model", model, "--data", b), None),
        (("--json", "adapt", "covariate", "--source", src, "--target", tgt,
          "--weights-out", weights), None),
        (("--json", "adapt", "prior", "--source", a, "--target", b,
          "--model", model), None),
        (("--json", "diagnose", "--source", src, "--target", tgt),
         "XtoY\nUnknown\nUnknown\nYes\nstable physics\nUnknown\n"),
    ]
    unstable = []
    for args, stdin in commands:
        first = _run_cli(*args, stdin=stdin)
        second = _run_cli(*args, stdin=stdin)
        if not (first.returncode == second.returncode == 0
                and first.stdout == second.stdout):
            unstable.append(args[1] if args[0] == "--json" else args[0])

    ok = not stale and not unstable
    check("determinism", ok,
          f"{len(repro_runs)}/6 repro artifacts byte-identical across two "
          f"runs; {len(commands) - len(unstable)}/{len(commands)} seeded CLI "
          f"commands byte-identical"
          + (f"; unstable: {stale + unstable}" if (stale or unstable) else ""))
