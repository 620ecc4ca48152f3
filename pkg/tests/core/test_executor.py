import pytest

from subreg_kit.utils.core.errors import (
    InconclusiveError,
    PreconditionError,
    ProblemInputError,
    RetractionError,
)
from subreg_kit.utils.core.executor import (
    ERROR,
    EXIT_INCONCLUSIVE,
    EXIT_INPUT,
    EXIT_OK,
    EXIT_REFUTED,
    FAIL,
    INCONCLUSIVE,
    INFO,
    PASS,
    SKIP,
    exit_code,
    run_checks,
)
from subreg_kit.utils.data.models import CheckResult


def returning(status):
    return lambda: CheckResult("X", status)


def raising(error):
    def check():
        raise error

    return check


@pytest.mark.parametrize(
    "error, status",
    [
        (PreconditionError("bad point"), FAIL),
        (InconclusiveError("not enough samples"), INCONCLUSIVE),
        (RetractionError("retractions failed"), INCONCLUSIVE),
        (NotImplementedError("later"), SKIP),
        (ZeroDivisionError("boom"), ERROR),
    ],
)
def test_exceptions_become_results(error, status):
    (result,) = run_checks([("CHECK", raising(error), True)])
    assert result.name == "CHECK"
    assert result.status == status
    assert result.gating


def test_input_errors_propagate():
    with pytest.raises(ProblemInputError):
        run_checks([("CHECK", raising(ProblemInputError("bad file")), True)])


def test_failing_check_does_not_stop_the_rest():
    results = run_checks(
        [
            ("A", raising(PreconditionError("no")), True),
            ("B", returning(PASS), False),
        ]
    )
    assert [r.status for r in results] == [FAIL, PASS]
    assert not results[1].gating


@pytest.mark.parametrize(
    "statuses, expected",
    [
        ([(PASS, True), (INFO, False)], EXIT_OK),
        ([(PASS, True), (FAIL, False)], EXIT_OK),
        ([(FAIL, True), (INCONCLUSIVE, True)], EXIT_REFUTED),
        ([(PASS, True), (INCONCLUSIVE, True)], EXIT_INCONCLUSIVE),
        ([(INCONCLUSIVE, False)], EXIT_OK),
        ([(FAIL, True), (ERROR, False)], EXIT_INPUT),
        ([], EXIT_OK),
    ],
)
def test_exit_code(statuses, expected):
    results = [CheckResult("X", status, gating=gating) for status, gating in statuses]
    assert exit_code(results) == expected
