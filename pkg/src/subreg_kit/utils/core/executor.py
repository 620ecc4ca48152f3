"""
Running named checks with uniform error handling.

Each check is a zero-argument callable returning a CheckResult. The runner logs an
[OK]/[FAIL]/[SKIP] line per check and turns expected failures into results, so one
failing check never hides the others.
"""

from typing import Callable

from subreg_kit.utils.core.errors import (
    InconclusiveError,
    PreconditionError,
    ProblemInputError,
    RetractionError,
)
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.data.models import CheckResult

logger = get_logger(__name__)

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"
SKIP = "skip"
ERROR = "error"
INFO = "info"

EXIT_OK = 0
EXIT_REFUTED = 1
EXIT_INPUT = 2
EXIT_INCONCLUSIVE = 3


# (name, check, gating)
Check = tuple[str, Callable[[], CheckResult], bool]


def run_checks(checks: list[Check]) -> list[CheckResult]:
    """Run checks in order.

    Precondition failures become FAIL, inconclusive evidence becomes INCONCLUSIVE and
    NotImplementedError becomes SKIP. Input errors propagate to the caller; anything
    else is logged with its traceback and reported as ERROR.
    """
    results = []
    for name, check, gating in checks:
        logger.debug(f"Running check: {name}")
        try:
            result = check()
            result.gating = gating
        except ProblemInputError:
            raise
        except NotImplementedError as e:
            logger.warning(f"[SKIP] {name} not available: {e}")
            result = CheckResult(name, SKIP, gating=gating, message=str(e))
        except (InconclusiveError, RetractionError) as e:
            logger.warning(f"[SKIP] {name} inconclusive: {e}")
            result = CheckResult(name, INCONCLUSIVE, gating=gating, message=str(e))
        except PreconditionError as e:
            logger.error(f"[FAIL] {name} failed - precondition: {e}")
            result = CheckResult(name, FAIL, gating=gating, message=str(e))
        except Exception as e:
            logger.error(f"[FAIL] {name} failed: {e}", exc_info=True)
            result = CheckResult(name, ERROR, gating=gating, message=f"unexpected error: {e}")
        else:
            if result.status == FAIL:
                logger.info(f"[FAIL] {name} refuted")
            elif result.status in (SKIP, INCONCLUSIVE):
                logger.info(f"[SKIP] {name} {result.status}")
            else:
                logger.info(f"[OK] {name} {result.status}")
        results.append(result)
    return results


def exit_code(results: list[CheckResult]) -> int:
    """2 for any error, else 1 for any refuted gating check, else 3 if inconclusive."""
    gating = [r for r in results if r.gating]
    if any(r.status == ERROR for r in results):
        return EXIT_INPUT
    if any(r.status == FAIL for r in gating):
        return EXIT_REFUTED
    if any(r.status == INCONCLUSIVE for r in gating):
        return EXIT_INCONCLUSIVE
    return EXIT_OK
