"""Algebraic feature expressions: trees, evaluation, text form, complexity taxonomy.

A constructed feature is a binary expression tree over input columns
``x0 .. x{d-1}`` and the operators ``+ - * /``. Division is protected so that
evaluation is total, and every operation clamps overflow, keeping transformed
matrices free of NaN and infinities.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import ColumnOutOfRangeError, ExpressionSyntaxError
from .validation import check_matrix

DIVISION_GUARD = 1e-9
DIVISION_FALLBACK = 1.0

_CLAMP = np.finfo(np.float64).max


class FeatureClass(Enum):
    """Construction complexity of a single feature."""

    ORIGINAL = "original"      # a column selected verbatim
    ENGINEERED = "engineered"  # exactly one operator
    COMPLEX = "complex"        # two or more operators


@dataclass(frozen=True)
class Var:
    """Leaf node referencing input column ``index``."""

    index: int
    operator_count: int = field(default=0, init=False, compare=False)

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"column index must be non-negative, got {self.index}")


@dataclass(frozen=True)
class BinOp:
    """Binary operator node; ``op`` is one of ``+ - * /``."""

    op: str
    left: "ExpressionTree"
    right: "ExpressionTree"
    operator_count: int = field(default=0, init=False, compare=False)

    def __post_init__(self):
        if self.op not in ("+", "-", "*", "/"):
            raise ValueError(f"unknown operator {self.op!r}")
        object.__setattr__(
            self, "operator_count",
            1 + self.left.operator_count + self.right.operator_count)


ExpressionTree = Var | BinOp


@dataclass(frozen=True)
class FeatureProgram:
    """An ordered list of feature expressions plus genotype provenance."""

    features: tuple[ExpressionTree, ...]
    source_genotype_hash: str = ""

    def __post_init__(self):
        if len(self.features) < 1:
            raise ValueError("a feature program must contain at least one feature")

    def __len__(self):
        return len(self.features)


def genotype_hash(genes) -> str:
    """Stable short digest of nested integer gene lists."""
    h = hashlib.blake2b(digest_size=8)
    for row in genes:
        h.update(b"|")
        h.update(",".join(str(g) for g in row).encode())
    return h.hexdigest()


def max_column_index(program: FeatureProgram) -> int:
    """Largest input column referenced by any feature."""

    def walk(node):
        if isinstance(node, Var):
            return node.index
        return max(walk(node.left), walk(node.right))

    return max(walk(f) for f in program.features)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def _eval_node(node: ExpressionTree, X: np.ndarray) -> np.ndarray:
    if isinstance(node, Var):
        if node.index >= X.shape[1]:
            raise ColumnOutOfRangeError(
                f"feature references column x{node.index} but input has "
                f"{X.shape[1]} columns")
        return X[:, node.index]
    left = _eval_node(node.left, X)
    right = _eval_node(node.right, X)
    if node.op == "+":
        out = left + right
    elif node.op == "-":
        out = left - right
    elif node.op == "*":
        out = left * right
    else:
        out = np.full_like(left, DIVISION_FALLBACK)
        np.divide(left, right, out=out, where=np.abs(right) > DIVISION_GUARD)
    # overflow clamp: finite operands can overflow to +/-inf under + - * /
    return np.nan_to_num(out, nan=0.0, posinf=_CLAMP, neginf=-_CLAMP)


def evaluate(program: FeatureProgram, X) -> np.ndarray:
    """Evaluate every feature column-wise over an n x d matrix.

    Returns an n x k matrix, k = number of features. Division by a
    denominator with magnitude <= 1e-9 yields 1.0; all outputs are finite.
    """
    X = check_matrix(X)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        columns = [_eval_node(f, X) for f in program.features]
    return np.column_stack(columns)


# --------------------------------------------------------------------------
# taxonomy
# --------------------------------------------------------------------------

def classify(expr: ExpressionTree) -> FeatureClass:
    """Original (0 operators), engineered (exactly 1) or complex (2+)."""
    if expr.operator_count == 0:
        return FeatureClass.ORIGINAL
    if expr.operator_count == 1:
        return FeatureClass.ENGINEERED
    return FeatureClass.COMPLEX


@dataclass(frozen=True)
class ComplexityReport:
    """Feature counts per class and their ratios of the program total."""

    n_total: int
    n_selected: int
    n_engineered: int
    n_complex: int
    r_o: float
    r_e: float
    r_c: float


def complexity_report(program: FeatureProgram) -> ComplexityReport:
    counts = {cls: 0 for cls in FeatureClass}
    for feat in program.features:
        counts[classify(feat)] += 1
    total = len(program.features)
    return ComplexityReport(
        n_total=total,
        n_selected=counts[FeatureClass.ORIGINAL],
        n_engineered=counts[FeatureClass.ENGINEERED],
        n_complex=counts[FeatureClass.COMPLEX],
        r_o=counts[FeatureClass.ORIGINAL] / total,
        r_e=counts[FeatureClass.ENGINEERED] / total,
        r_c=counts[FeatureClass.COMPLEX] / total,
    )


# --------------------------------------------------------------------------
# text round-trip
# --------------------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def render(expr: ExpressionTree) -> str:
    """Infix text with the minimal parentheses needed to round-trip."""
    if isinstance(expr, Var):
        return f"x{expr.index}"
    prec = _PRECEDENCE[expr.op]
    left = render(expr.left)
    if isinstance(expr.left, BinOp) and _PRECEDENCE[expr.left.op] < prec:
        left = f"({left})"
    right = render(expr.right)
    # parse is left-associative, so an equal-precedence right child needs parens
    if isinstance(expr.right, BinOp) and _PRECEDENCE[expr.right.op] <= prec:
        right = f"({right})"
    return f"{left} {expr.op} {right}"


def render_program(program: FeatureProgram) -> str:
    return " ; ".join(render(f) for f in program.features)


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def tokens(self):
        out = []
        text, n = self.text, len(self.text)
        i = 0
        while i < n:
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch in "+-*/()":
                out.append((ch, i))
                i += 1
                continue
            if ch == "x":
                j = i + 1
                while j < n and text[j].isdigit():
                    j += 1
                if j == i + 1:
                    raise ExpressionSyntaxError("expected digits after 'x'", i)
                out.append((text[i:j], i))
                i = j
                continue
            raise ExpressionSyntaxError(f"unexpected character {ch!r}", i)
        out.append(("", n))  # end marker
        return out


def parse_expr(text: str) -> ExpressionTree:
    """Parse infix feature text (e.g. ``x1 + x2 * x3``) into a tree.

    Standard precedence (* and / bind tighter than + and -), left
    associativity, parentheses allowed.
    """
    toks = _Tokenizer(text).tokens()
    idx = 0

    def peek():
        return toks[idx][0]

    def advance():
        nonlocal idx
        tok = toks[idx]
        idx += 1
        return tok

    def parse_sum():
        node = parse_term()
        while peek() in ("+", "-"):
            op, _ = advance()
            node = BinOp(op, node, parse_term())
        return node

    def parse_term():
        node = parse_factor()
        while peek() in ("*", "/"):
            op, _ = advance()
            node = BinOp(op, node, parse_factor())
        return node

    def parse_factor():
        tok, pos = advance()
        if tok == "(":
            node = parse_sum()
            closing, cpos = advance()
            if closing != ")":
                raise ExpressionSyntaxError("expected ')'", cpos)
            return node
        if tok.startswith("x"):
            return Var(int(tok[1:]))
        raise ExpressionSyntaxError(
            f"expected variable or '(', got {tok!r}" if tok else "unexpected end of input",
            pos)

    tree = parse_sum()
    tok, pos = toks[idx]
    if tok != "":
        raise ExpressionSyntaxError(f"unexpected trailing token {tok!r}", pos)
    return tree


def parse_program(text: str, source_genotype_hash: str = "") -> FeatureProgram:
    """Parse a ``;``-separated list of feature expressions."""
    parts = [p for p in text.split(";")]
    if not any(p.strip() for p in parts):
        raise ExpressionSyntaxError("empty feature program", 0)
    return FeatureProgram(
        features=tuple(parse_expr(p) for p in parts),
        source_genotype_hash=source_genotype_hash,
    )
