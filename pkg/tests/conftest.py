import numpy as np
import pytest

from toothalign.synthetic import generate_synthetic_case

# Shared corpora are generated once per session. They are treated as
# read-only: tests that mutate geometry must copy first.

CORPUS_SIZE = 100


@pytest.fixture(scope="session")
def corpus():
    return [
        generate_synthetic_case(seed=1000 + k, case_id=f"c{k:03d}")
        for k in range(CORPUS_SIZE)
    ]


@pytest.fixture(scope="session")
def small_corpus(corpus):
    return corpus[:10]


@pytest.fixture()
def case7():
    return generate_synthetic_case(seed=7, case_id="case7")


def gt_view(case):
    """Copy of a case with every present tooth at its target position."""
    out = case.copy()
    for jaw in (out.upper, out.lower):
        for t in jaw.present_teeth():
            t.points = t.gt_points.copy()
    return out


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
