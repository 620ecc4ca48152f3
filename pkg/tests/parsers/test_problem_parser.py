import numpy as np
import pytest

from subreg_kit.parsers.problem_parser import (
    parse_problem_file,
    parse_problem_text,
    serialize_problem,
)
from subreg_kit.utils.core.errors import ProblemInputError, ProblemSyntaxError
from subreg_kit.utils.core.registry import PROBLEMS_DIR
from subreg_kit.utils.data.models import MayerProblem, NlpProblem, OcpProblem

EQ_QUADRATIC = """\
# min x1^2 + x2^2 s.t. x1 + x2 = 1
class: nlp
dims: 2
objective:
  x1^2 + x2^2
eq:
  x1 + x2 - 1
solution:
  x = 0.5, 0.5
  y = -1.0
"""


def test_nlp_equality_problem():
    parsed = parse_problem_text(EQ_QUADRATIC)
    assert parsed.kind == "nlp"
    problem = parsed.problem
    assert isinstance(problem, NlpProblem)
    assert (problem.n, problem.m, problem.k) == (2, 0, 1)
    assert problem.objective.value(np.array([1.0, 2.0])) == pytest.approx(5.0)
    assert problem.equalities[0].value(np.array([0.5, 0.5])) == pytest.approx(0.0)
    np.testing.assert_allclose(parsed.solution["x"], [0.5, 0.5])
    np.testing.assert_allclose(parsed.solution["y"], [-1.0])


def test_name_defaults_to_source_stem():
    parsed = parse_problem_text(EQ_QUADRATIC, "problems/eq_quadratic.txt")
    assert parsed.name == "eq_quadratic"


def test_example1_is_an_augmented_ocp():
    parsed = parse_problem_file(PROBLEMS_DIR / "example1.txt")
    problem = parsed.problem
    assert isinstance(problem, OcpProblem)
    assert (problem.n, problem.m, problem.k) == (2, 1, 1)
    assert problem.horizon == (0.0, 1.0)
    # x2' = x1 u - u^2 at x1 = t = 0.5, u = 0.2
    assert problem.dynamics[1].value(np.array([0.5, 0.0, 0.2])) == pytest.approx(0.06)
    assert problem.control_constraints[0].value(np.array([0.3])) == pytest.approx(-0.3)


def test_mayer_problem_with_horizon():
    parsed = parse_problem_file(PROBLEMS_DIR / "mayer_terminal_eq.txt")
    problem = parsed.problem
    assert isinstance(problem, MayerProblem)
    assert (problem.n, problem.m) == (2, 1)
    assert len(problem.endpoint_equalities) == 3
    assert problem.horizon == (0.0, 1.0)
    assert parsed.solution["alpha0"][0] == pytest.approx(1.0)


def test_malformed_exponent_reports_position():
    text = "class: nlp\ndims: 1\nobjective:\n  x1^a\n"
    with pytest.raises(ProblemSyntaxError) as info:
        parse_problem_text(text)
    assert info.value.line == 4
    assert info.value.column == 6
    assert "exponent" in str(info.value)


@pytest.mark.parametrize(
    "text, message",
    [
        ("class: sdp\ndims: 1\n", "Unknown problem class"),
        ("class: nlp\ndims: one\n", "dims must be integers"),
        ("objective:\n  x1\n", "must precede"),
        ("class: nlp\ndims: 1\nobjective:\n  x1 x1\n", "Expected '+' or '-'"),
        ("class: nlp\ndims: 1\nobjective:\n  u1\n", "Unknown variable 'u1'"),
        ("class: nlp\ndims: 1\ndynamics:\n  x1\n", "not valid for class"),
        ("class: nlp\ndims: 1\nobjective:\n  x1 $ 2\n", "Unexpected character"),
    ],
)
def test_syntax_errors(text, message):
    with pytest.raises(ProblemSyntaxError, match=message):
        parse_problem_text(text)


def test_missing_objective_is_an_input_error():
    with pytest.raises(ProblemInputError, match="exactly one objective"):
        parse_problem_text("class: nlp\ndims: 1\n")


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        parse_problem_file(PROBLEMS_DIR / "does_not_exist.txt")


@pytest.mark.parametrize("filename", sorted(p.name for p in PROBLEMS_DIR.glob("*.txt")))
def test_serialized_problem_parses_to_the_same_fields(filename):
    original = parse_problem_file(PROBLEMS_DIR / filename)
    reparsed = parse_problem_text(serialize_problem(original.problem, original.solution))
    assert reparsed.kind == original.kind
    assert reparsed.name == original.name
    for key, values in original.solution.items():
        np.testing.assert_allclose(reparsed.solution[key], values)
    point = np.linspace(-0.7, 0.9, 8)
    if original.kind == "nlp":
        pairs = [(original.problem.objective, reparsed.problem.objective)]
    else:
        pairs = [(original.problem.cost, reparsed.problem.cost)]
        pairs += list(zip(original.problem.dynamics, reparsed.problem.dynamics))
    for before, after in pairs:
        x = point[: before.dimension]
        assert after.value(x) == pytest.approx(before.value(x))
