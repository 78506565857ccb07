"""The fifteen acceptance criteria at the standard tier.

Each criterion is one test; a PASS/FAIL line per criterion is printed in the
terminal summary. Run directly (``python3 tests/test_acceptance.py``) to get
the same lines without pytest.
"""

import pytest

from fbms import acceptance
from fbms.config import RunConfig

pytestmark = pytest.mark.slow

CONFIG = RunConfig(tier="standard", seed=0)
RESULTS: dict[int, acceptance.CriterionResult] = {}


@pytest.fixture(scope="module")
def suite():
    results = acceptance.run_checks(CONFIG)
    RESULTS.update({r.number: r for r in results})
    return results


def check(number: int, result: acceptance.CriterionResult) -> None:
    RESULTS[number] = result
    assert result.passed, f"{result.line()}: {result.details}"


@pytest.mark.parametrize("number", sorted(acceptance.CHECKS))
def test_criterion(suite, number):
    check(number, next(r for r in suite if r.number == number))


def test_criterion_15_determinism(suite):
    check(15, acceptance.criterion_15(CONFIG, suite))


@pytest.mark.parametrize("h0", [0.05, 0.15, 0.3])
def test_criterion_3_other_cutoffs(h0):
    result = acceptance.criterion_3(acceptance.Context(CONFIG), h0=h0)
    assert result.passed, f"h0 = {h0}: {result.details}"


def summary_lines() -> list[str]:
    return [RESULTS[n].line() for n in sorted(RESULTS)]


if __name__ == "__main__":
    results = acceptance.verify_all(CONFIG)
    for r in results:
        print(r.line())
