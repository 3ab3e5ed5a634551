import importlib.resources
import json
import warnings

import numpy as np
import pytest

from mjlq.errors import IndefiniteCrossWeightWarning
from mjlq.model import problem_from_dict


def fixture_doc(name: str) -> dict:
    ref = importlib.resources.files("mjlq.fixtures") / name
    return json.loads(ref.read_text())


@pytest.fixture(scope="session")
def benchmark_lq():
    return problem_from_dict(fixture_doc("benchmark_lq.json"))


@pytest.fixture(scope="session")
def benchmark_lq_expected():
    doc = fixture_doc("benchmark_lq.expected.json")
    return {key: np.asarray(value, dtype=np.float64) for key, value in doc.items()}


@pytest.fixture(scope="session")
def benchmark_game():
    # The bundled two-player problem legitimately weights the rival's
    # control with an indefinite block.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IndefiniteCrossWeightWarning)
        return problem_from_dict(fixture_doc("benchmark_game.json"))


@pytest.fixture(scope="session")
def benchmark_game_expected():
    doc = fixture_doc("benchmark_game.expected.json")
    return {key: np.asarray(value, dtype=np.float64) for key, value in doc.items()}
