import numpy as np
import pytest

from shiftscope.datamodel import (Causality, Dataset, DomainPair, LabelSpace,
                                  ScenarioKind, ShiftScenario)
from shiftscope.synthgen import ScenarioSpec, generate, misspecified_band_pair

# Acceptance one-liners collected here and printed at the end of the run, so
# the terminal shows one verdict per criterion regardless of capture mode.
ACCEPTANCE_LINES = []


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append((name, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LINES:
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}: {detail}")


@pytest.fixture(scope="session")
def band_pair():
    pair, eval_ds = misspecified_band_pair(seed=0)
    return pair, eval_ds


@pytest.fixture(scope="session")
def prior_pair():
    return generate(ScenarioSpec(
        ShiftScenario(ScenarioKind.PRIOR, Causality.Y_TO_X),
        n_source=400, n_target=400, seed=3))


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def two_blob_dataset(seed=0, n=200, delta=2.0, d=2, name="blobs") -> Dataset:
    """Two well-separated Gaussian blobs; accuracy near 1 for any learner."""
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, 2, size=n)
    x = np.where(idx[:, None] == 0, delta, -delta) + rng.standard_normal((n, d))
    labels = tuple("+1" if i == 0 else "-1" for i in idx)
    return Dataset(x, labels, name=name)
