"""
Parser and serializer for problem files.

Grammar (one item per line, `#` starts a comment):

    class: nlp | mayer | ocp
    dims: n[, m[, k]]
    horizon: t0, t1            # mayer only
    name: label                # optional
    objective: / ineq: / eq: / dynamics: / endpoint: / control_ineq: / solution:

Block lines are polynomial expressions, one function per line, built from terms
`coef * var^pow * ...` joined by + and -. Variables are x1..xn, u1..um and q1..q2n
depending on the block. Solution lines read `name = v1, v2, ...`.
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from subreg_kit.parsers.base_parser import BaseParser
from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.data.constants import PROBLEM_CLASSES
from subreg_kit.utils.data.models import (
    MayerProblem,
    NlpProblem,
    OcpProblem,
    Problem,
    ScalarField,
)
from subreg_kit.utils.data.polynomial import PolynomialField

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<var>[A-Za-z_]\w*)|(?P<op>[-+*^]))"
)
_VARIABLE = re.compile(r"^([xuq])(\d+)$")

# block -> variable families it may use, per problem class
_BLOCK_VARIABLES = {
    "nlp": {"objective": "x", "ineq": "x", "eq": "x"},
    "mayer": {"dynamics": "xu", "endpoint": "q", "eq": "q", "ineq": "q"},
    "ocp": {"dynamics": "xu", "endpoint": "q", "control_ineq": "u"},
}

_SOLUTION_KEYS = {
    "nlp": ("x", "lambda", "y"),
    "mayer": ("x0", "u", "alpha0", "alpha", "beta"),
    "ocp": ("x0", "u", "lambda"),
}


@dataclass
class ProblemFile:
    """A parsed problem file: the problem plus its optional analytic-solution block."""

    kind: str
    problem: Problem
    solution: dict[str, np.ndarray] = field(default_factory=dict)
    name: str = ""


class ProblemParser(BaseParser):
    """Parser for the problem-file grammar."""

    _sections = [
        "objective:",
        "ineq:",
        "eq:",
        "dynamics:",
        "endpoint:",
        "control_ineq:",
        "solution:",
    ]
    _header_keys = ("class", "dims", "horizon", "name")

    def __init__(self, config=None, source_name: str = "<string>"):
        super().__init__(config, source_name)
        self.kind: Optional[str] = None
        self.dims: tuple[int, ...] = ()
        self.horizon = (0.0, 1.0)
        self.name = ""
        self.blocks: dict[str, list[PolynomialField]] = {}
        self.solution: dict[str, np.ndarray] = {}

    # region Headers

    def parse_header(self, key: str, value: str) -> None:
        if key == "class":
            kind = value.lower()
            if kind not in PROBLEM_CLASSES:
                raise self.syntax_error(
                    f"Unknown problem class '{value}', expected one of {PROBLEM_CLASSES}",
                    column=len("class: ") + 1,
                )
            self.kind = kind
        elif key == "dims":
            try:
                dims = tuple(int(part) for part in value.split(","))
            except ValueError:
                raise self.syntax_error(f"dims must be integers, got '{value}'", len("dims: ") + 1)
            if not dims or any(d < 0 for d in dims) or dims[0] < 1:
                raise self.syntax_error(f"Invalid dims '{value}'", len("dims: ") + 1)
            self.dims = dims
        elif key == "horizon":
            try:
                t0, t1 = (float(part) for part in value.split(","))
            except ValueError:
                raise self.syntax_error(f"horizon must be 't0, t1', got '{value}'", 10)
            self.horizon = (t0, t1)
        elif key == "name":
            self.name = value

    def handle_section_change(self, new_section: str) -> None:
        if self.kind is None or not self.dims:
            raise self.syntax_error("'class:' and 'dims:' must precede every block")
        block = new_section.rstrip(":")
        if block != "solution" and block not in _BLOCK_VARIABLES[self.kind]:
            raise self.syntax_error(f"Block '{block}' is not valid for class '{self.kind}'")
        super().handle_section_change(new_section)

    # endregion

    # region Blocks

    def _parse_block_line(self, line: str) -> None:
        block = self._current_section.rstrip(":")
        self.blocks.setdefault(block, []).append(self.parse_expression(line, block))

    parse_objective = _parse_block_line
    parse_ineq = _parse_block_line
    parse_eq = _parse_block_line
    parse_dynamics = _parse_block_line
    parse_endpoint = _parse_block_line
    parse_control_ineq = _parse_block_line

    def parse_solution(self, line: str) -> None:
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        assert self.kind is not None
        if not sep or key not in _SOLUTION_KEYS[self.kind]:
            raise self.syntax_error(
                f"Solution lines read 'name = values' with name in {_SOLUTION_KEYS[self.kind]}"
            )
        try:
            values = [float(v) for v in value.split(",") if v.strip()]
        except ValueError:
            raise self.syntax_error(
                f"Non-numeric solution value in '{value.strip()}'", line.find("=") + 2
            )
        self.solution[key] = np.asarray(values, dtype=float)

    def _variable_layout(self, block: str) -> tuple[int, list[str]]:
        assert self.kind is not None
        n = self.dims[0]
        m = self.dims[1] if len(self.dims) > 1 else 0
        families = _BLOCK_VARIABLES[self.kind][block]
        names: list[str] = []
        for family in families:
            count = {"x": n, "u": m, "q": 2 * n}[family]
            names.extend(f"{family}{i + 1}" for i in range(count))
        return len(names), names

    def parse_expression(self, text: str, block: str) -> PolynomialField:
        """Parse one polynomial expression valid in `block`."""
        dimension, names = self._variable_layout(block)
        index = {name: i for i, name in enumerate(names)}
        tokens = self._tokenize(text)
        terms: list[tuple[float, dict[int, int]]] = []
        pos = 0

        def peek() -> Optional[tuple[str, str, int]]:
            return tokens[pos] if pos < len(tokens) else None

        sign = 1.0
        expect_term = True
        while pos < len(tokens):
            kind, value, column = tokens[pos]
            if kind == "op" and value in "+-":
                expect_term = True
                sign = sign * (-1.0 if value == "-" else 1.0)
                pos += 1
                continue
            if not expect_term:
                raise self.syntax_error(f"Expected '+' or '-' before '{value}'", column)

            coef = sign
            powers: dict[int, int] = {}
            while True:
                token = peek()
                if token is None:
                    raise self.syntax_error("Expression ends inside a term", len(text) + 1)
                kind, value, column = token
                if kind == "num":
                    coef *= float(value)
                    pos += 1
                elif kind == "var":
                    match = _VARIABLE.match(value)
                    if value not in index or match is None:
                        raise self.syntax_error(
                            f"Unknown variable '{value}' in block '{block}'", column
                        )
                    pos += 1
                    power = 1
                    nxt = peek()
                    if nxt is not None and nxt[1] == "^":
                        pos += 1
                        exp_token = peek()
                        if exp_token is None or exp_token[0] != "num" or not exp_token[1].isdigit():
                            col = exp_token[2] if exp_token else len(text) + 1
                            raise self.syntax_error("Malformed exponent, expected an integer", col)
                        power = int(exp_token[1])
                        pos += 1
                    powers[index[value]] = powers.get(index[value], 0) + power
                else:
                    raise self.syntax_error(f"Unexpected '{value}'", column)

                nxt = peek()
                if nxt is not None and nxt[1] == "*":
                    pos += 1
                    continue
                break

            terms.append((coef, powers))
            sign = 1.0
            expect_term = False

        if expect_term:
            raise self.syntax_error("Empty or dangling expression", len(text) + 1)
        return PolynomialField.from_terms(dimension, terms, names)

    def _tokenize(self, text: str) -> list[tuple[str, str, int]]:
        tokens = []
        pos = 0
        while pos < len(text):
            if text[pos].isspace():
                pos += 1
                continue
            match = _TOKEN.match(text, pos)
            if match is None or match.end() == pos:
                raise self.syntax_error(f"Unexpected character '{text[pos]}'", pos + 1)
            kind = match.lastgroup
            assert kind is not None
            tokens.append((kind, match.group(kind), match.start(kind) + 1))
            pos = match.end()
        return tokens

    # endregion

    def finalize(self) -> ProblemFile:
        """Assemble the problem object.

        Raises:
            ProblemInputError: If required headers or blocks are missing or
                inconsistent with the declared dimensions.
        """
        if self.kind is None:
            raise ProblemInputError(f"{self.source_name}: missing 'class:' header")
        if not self.dims:
            raise ProblemInputError(f"{self.source_name}: missing 'dims:' header")

        blocks = self.blocks
        name = self.name or Path(self.source_name).stem
        n = self.dims[0]

        if self.kind == "nlp":
            objective = blocks.get("objective", [])
            if len(objective) != 1:
                raise ProblemInputError(f"{name}: nlp needs exactly one objective line")
            problem: Problem = NlpProblem(
                n=n,
                objective=objective[0],
                inequalities=tuple(blocks.get("ineq", [])),
                equalities=tuple(blocks.get("eq", [])),
                name=name,
            )
        else:
            if len(self.dims) < 2:
                raise ProblemInputError(f"{name}: {self.kind} needs 'dims: n, m'")
            m = self.dims[1]
            cost = blocks.get("endpoint", [])
            if len(cost) != 1:
                raise ProblemInputError(f"{name}: {self.kind} needs exactly one endpoint line")
            dynamics = tuple(blocks.get("dynamics", []))
            if self.kind == "mayer":
                problem = MayerProblem(
                    n=n,
                    m=m,
                    dynamics=dynamics,
                    cost=cost[0],
                    endpoint_equalities=tuple(blocks.get("eq", [])),
                    endpoint_inequalities=tuple(blocks.get("ineq", [])),
                    horizon=self.horizon,
                    name=name,
                )
            else:
                constraints = tuple(blocks.get("control_ineq", []))
                k = self.dims[2] if len(self.dims) > 2 else len(constraints)
                problem = OcpProblem(
                    n=n,
                    m=m,
                    k=k,
                    dynamics=dynamics,
                    cost=cost[0],
                    control_constraints=constraints,
                    name=name,
                )

        self.logger.debug(f"Parsed {self.kind} problem '{name}' from {self.source_name}")
        return ProblemFile(self.kind, problem, dict(self.solution), name)


def parse_problem_text(text: str, source_name: str = "<string>", config=None) -> ProblemFile:
    """Parse problem-file text."""
    parser = ProblemParser(config, source_name)
    parser.parse(text)
    return parser.finalize()


def parse_problem_file(path: Union[str, Path], config=None) -> ProblemFile:
    """Parse the problem file at `path`.

    Raises:
        FileNotFoundError: If the file does not exist.
        ProblemSyntaxError: With line and column on malformed input.
        ProblemInputError: On dimension mismatches or unknown class tags.
    """
    return ProblemParser(config).run(Path(path))


def _render(fields: tuple[ScalarField, ...], block: str) -> list[str]:
    lines = []
    for f in fields:
        if not isinstance(f, PolynomialField):
            raise ProblemInputError(f"Only polynomial fields can be serialized ({block}: {f!r})")
        lines.append(f"  {f.to_text()}")
    return lines


def serialize_problem(problem: Problem, solution: Optional[dict[str, np.ndarray]] = None) -> str:
    """Render `problem` (and an optional solution block) in the problem-file grammar."""
    lines = [f"class: {problem.kind}"]
    if isinstance(problem, NlpProblem):
        lines.append(f"dims: {problem.n}")
    elif isinstance(problem, MayerProblem):
        lines.append(f"dims: {problem.n}, {problem.m}")
        lines.append(f"horizon: {problem.horizon[0]!r}, {problem.horizon[1]!r}")
    else:
        lines.append(f"dims: {problem.n}, {problem.m}, {problem.k}")
    if problem.name:
        lines.append(f"name: {problem.name}")

    if isinstance(problem, NlpProblem):
        sections = [
            ("objective", (problem.objective,)),
            ("ineq", problem.inequalities),
            ("eq", problem.equalities),
        ]
    elif isinstance(problem, MayerProblem):
        sections = [
            ("dynamics", problem.dynamics),
            ("endpoint", (problem.cost,)),
            ("eq", problem.endpoint_equalities),
            ("ineq", problem.endpoint_inequalities),
        ]
    else:
        sections = [
            ("dynamics", problem.dynamics),
            ("endpoint", (problem.cost,)),
            ("control_ineq", problem.control_constraints),
        ]
    for block, fields in sections:
        if fields:
            lines.append(f"{block}:")
            lines.extend(_render(fields, block))

    if solution:
        lines.append("solution:")
        for key, values in solution.items():
            rendered = ", ".join(repr(float(v)) for v in np.atleast_1d(values))
            lines.append(f"  {key} = {rendered}")
    return "\n".join(lines) + "\n"
