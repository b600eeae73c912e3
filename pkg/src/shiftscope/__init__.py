"""shiftscope: diagnose which kind of distribution shift separates two
datasets and pick the matching adaptation, under an explicit causal reading
of the data-generating process."""

__version__ = "0.1.0"

from .adaptation import (EmPriorResult, KmmResult, adjust_posteriors,
                         confusion_matrix_prior, cortes_covariate_bound,
                         em_prior_adjust, kernel_mean_matching,
                         zhao_js_lower_bound)
from .datamodel import (Causality, DataFormatError, Dataset, DomainPair,
                        LabelSpace, ScenarioKind, ShiftMatrix, ShiftScenario,
                        TriState, WeightKind, WeightVector, empirical_prior,
                        read_dataset_csv, valid_scenarios, validate_domain_pair,
                        write_dataset_csv)
from .density import (DivergenceEstimate, GaussianDensity, KdeModel,
                      MmdEstimate, fit_kde, js_divergence, kl_divergence,
                      median_heuristic_gamma, mmd, numerical_integration_oracle,
                      renyi_divergence)
from .engine import (KNOWN_CLAIMS, CausalityUnknownError, Diagnosis, Evidence,
                     ExpertAssertion, IllegalSessionInput, Recommendation,
                     SessionState, advance_session, classify,
                     derive_shift_matrix, model_well_specification,
                     new_session, recommendation_catalog)
from .learners import EvalReport, TrainedModel, evaluate, load_model, predict
from .learners import predict_posterior, save_model, train
from .stattests import (FeatureShiftReport, TestResult, feature_shift_screen,
                        ks_two_sample, label_shift_test, mmd_permutation_test)
from .synthgen import ScenarioSpec, generate

__all__ = [
    "__version__",
    # data model
    "TriState", "Causality", "ScenarioKind", "ShiftScenario", "ShiftMatrix",
    "LabelSpace", "Dataset", "DomainPair", "WeightKind", "WeightVector",
    "DataFormatError", "empirical_prior", "valid_scenarios",
    "validate_domain_pair", "read_dataset_csv", "write_dataset_csv",
    # densities and divergences
    "GaussianDensity", "KdeModel", "fit_kde", "DivergenceEstimate",
    "MmdEstimate", "kl_divergence", "js_divergence", "renyi_divergence",
    "mmd", "median_heuristic_gamma", "numerical_integration_oracle",
    # tests
    "TestResult", "FeatureShiftReport", "ks_two_sample",
    "feature_shift_screen", "label_shift_test", "mmd_permutation_test",
    # learners
    "TrainedModel", "EvalReport", "train", "predict", "predict_posterior",
    "evaluate", "save_model", "load_model",
    # adaptation
    "EmPriorResult", "KmmResult", "em_prior_adjust", "adjust_posteriors",
    "kernel_mean_matching", "confusion_matrix_prior", "cortes_covariate_bound",
    "zhao_js_lower_bound",
    # diagnosis
    "Evidence", "ExpertAssertion", "Diagnosis", "Recommendation", "classify",
    "derive_shift_matrix", "recommendation_catalog",
    "model_well_specification", "KNOWN_CLAIMS", "CausalityUnknownError",
    "IllegalSessionInput", "SessionState", "new_session", "advance_session",
    # generators
    "ScenarioSpec", "generate",
]
