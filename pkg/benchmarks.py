"""Built-in host/guest benchmark: three third-order LTV systems sharing B and C.

Sigma1 is the host. Sigma2 is a close guest with slightly perturbed dynamics; Sigma3 is a
further guest. All three have D = 0 and A(t) drifting by 0.05 t on the diagonal.
"""

import math

from scenario import Scenario, parse_scenario

HORIZON = 25
DRIFT = [[0.05, 0.0, 0.0], [0.0, 0.05, 0.0], [0.0, 0.0, 0.05]]
INPUT_MATRIX = [[6.0], [0.0], [0.5]]
OUTPUT_MATRIX = [[2.0, math.sqrt(2.0), 0.0]]

# Last row of A(0) and initial state per system
SYSTEM_TABLE = {
    "sigma1": ([-0.5, -1.85, -2.5], [0.0, 0.0, 1.02]),
    "sigma2": ([-0.512, -1.92, -2.4], [0.0, 0.0, 1.0]),
    "sigma3": ([-0.6, -2.0, -2.3], [0.0, 0.0, 1.1]),
}

REFERENCES = {
    "r1": {"type": "sine", "amplitude": 1.0, "period": 8.0, "phase": 0.0},
    "r2": {"type": "pulse", "amplitude": 1.0, "period": 8, "on": [1, 2, 3, 4]},
}

EXAMPLES = {
    1: {
        "systems": ["sigma1", "sigma2"],
        "tasks": [("sigma2", "r1"), ("sigma2", "r2")],
    },
    2: {
        "systems": ["sigma1", "sigma2", "sigma3"],
        "tasks": [("sigma2", "r1"), ("sigma3", "r1")],
    },
}
HOST = "sigma1"


def system_document(name: str) -> dict:
    """Raw description of one benchmark system, A(t) in affine shorthand."""
    last_row, x0 = SYSTEM_TABLE[name]
    return {
        "A": {"base": [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], list(last_row)], "slope": DRIFT},
        "B": INPUT_MATRIX,
        "C": OUTPUT_MATRIX,
        "D": [[0.0]],
        "x0": list(x0),
    }


def example_document(example_id: int) -> dict:
    if example_id not in EXAMPLES:
        raise ValueError(f"unknown example {example_id}; choose one of {sorted(EXAMPLES)}")
    example = EXAMPLES[example_id]
    references = sorted({reference for _, reference in example["tasks"]})
    return {
        "horizon": HORIZON,
        "systems": {name: system_document(name) for name in example["systems"]},
        "references": {name: dict(REFERENCES[name]) for name in references},
        "tasks": [
            {"guest": guest, "host": HOST, "reference": reference} for guest, reference in example["tasks"]
        ],
        # the benchmark pairs fail the exact similarity test, so transfer runs by override
        "allow_dissimilar": True,
    }


def example_scenario(example_id: int) -> Scenario:
    return parse_scenario(example_document(example_id))
