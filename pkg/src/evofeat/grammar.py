"""BNF grammars and structured genotypes over them.

The genotype keeps one integer list per nonterminal; mapping consumes each
list left to right, the i-th value selecting the production used at the i-th
expansion of that nonterminal (leftmost derivation). Near the depth bound the
choice is restricted to productions that can still finish in the remaining
levels, taking the gene modulo the number of surviving options, so every
genotype maps to a finite phenotype.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DuplicateDefinitionError,
    EmptyProductionError,
    GrammarMismatchError,
    InvalidGeneError,
    UndefinedNonterminalError,
    UnsatisfiableDepthError,
)
from .expressions import FeatureProgram, genotype_hash, parse_program
from .validation import ensure_rng

FEATURE_SEPARATOR = ";"


@dataclass(frozen=True)
class Symbol:
    """One right-hand-side token: a nonterminal reference or a terminal."""

    value: str
    is_nonterminal: bool

    def __str__(self):
        return f"<{self.value}>" if self.is_nonterminal else self.value


class Grammar:
    """A parsed context-free grammar with per-nonterminal production tables.

    Production order follows the source text and defines gene semantics.
    Instances are immutable after construction and safe to share.
    """

    def __init__(self, nonterminals, productions, start_symbol):
        self.nonterminals: list[str] = list(nonterminals)
        self.productions: dict[str, list[tuple[Symbol, ...]]] = {
            nt: [tuple(p) for p in productions[nt]] for nt in self.nonterminals
        }
        self.start_symbol: str = start_symbol
        self._index = {nt: i for i, nt in enumerate(self.nonterminals)}
        self._validate()
        self.recursion_flags: dict[str, bool] = self._compute_recursion()
        # minimum derivation-tree depth to finish each nonterminal/production
        self.min_depths, self._production_min_depths = self._compute_min_depths()
        # maximum reachable depth (math.inf when recursion allows unbounded trees)
        self.max_depths, self._production_max_depths = self._compute_max_depths()

    # -- construction helpers -------------------------------------------

    def _validate(self):
        if self.start_symbol not in self._index:
            raise UndefinedNonterminalError(
                f"start symbol <{self.start_symbol}> is not defined")
        for nt in self.nonterminals:
            prods = self.productions[nt]
            if not prods:
                raise EmptyProductionError(f"<{nt}> has no productions")
            for prod in prods:
                if not prod:
                    raise EmptyProductionError(f"<{nt}> has an empty alternative")
                for sym in prod:
                    if sym.is_nonterminal and sym.value not in self._index:
                        raise UndefinedNonterminalError(
                            f"<{sym.value}> referenced by <{nt}> is never defined")

    def _compute_recursion(self):
        reach = {nt: set() for nt in self.nonterminals}
        for nt in self.nonterminals:
            for prod in self.productions[nt]:
                reach[nt].update(s.value for s in prod if s.is_nonterminal)
        # transitive closure
        changed = True
        while changed:
            changed = False
            for nt in self.nonterminals:
                extra = set()
                for other in reach[nt]:
                    extra |= reach[other]
                if not extra <= reach[nt]:
                    reach[nt] |= extra
                    changed = True
        return {nt: nt in reach[nt] for nt in self.nonterminals}

    def _compute_min_depths(self):
        depth = {nt: math.inf for nt in self.nonterminals}
        changed = True
        while changed:
            changed = False
            for nt in self.nonterminals:
                for prod in self.productions[nt]:
                    nts = [s for s in prod if s.is_nonterminal]
                    cand = 1 + max((depth[s.value] for s in nts), default=0)
                    if cand < depth[nt]:
                        depth[nt] = cand
                        changed = True
        per_prod = {
            nt: [
                1 + max((depth[s.value] for s in prod if s.is_nonterminal), default=0)
                for prod in self.productions[nt]
            ]
            for nt in self.nonterminals
        }
        return depth, per_prod

    def _compute_max_depths(self):
        # nonterminals that can reach a recursive one have unbounded depth
        reach_recursive = {}
        for nt in self.nonterminals:
            seen, stack = set(), [nt]
            flag = False
            while stack:
                cur = stack.pop()
                if self.recursion_flags[cur]:
                    flag = True
                    break
                for prod in self.productions[cur]:
                    for s in prod:
                        if s.is_nonterminal and s.value not in seen:
                            seen.add(s.value)
                            stack.append(s.value)
            reach_recursive[nt] = flag
        depth = {}

        def walk(nt):
            if nt in depth:
                return depth[nt]
            if reach_recursive[nt]:
                depth[nt] = math.inf
                return math.inf
            best = 0
            for prod in self.productions[nt]:
                nts = [s for s in prod if s.is_nonterminal]
                best = max(best, 1 + max((walk(s.value) for s in nts), default=0))
            depth[nt] = best
            return best

        for nt in self.nonterminals:
            walk(nt)
        per_prod = {
            nt: [
                1 + max((depth[s.value] for s in prod if s.is_nonterminal), default=0)
                for prod in self.productions[nt]
            ]
            for nt in self.nonterminals
        }
        return depth, per_prod

    # -- public surface ---------------------------------------------------

    def index_of(self, nonterminal: str) -> int:
        return self._index[nonterminal]

    def n_productions(self, nonterminal: str) -> int:
        return len(self.productions[nonterminal])

    def __eq__(self, other):
        if not isinstance(other, Grammar):
            return NotImplemented
        return (self.nonterminals == other.nonterminals
                and self.productions == other.productions
                and self.start_symbol == other.start_symbol)

    def __repr__(self):
        return (f"Grammar(start=<{self.start_symbol}>, "
                f"{len(self.nonterminals)} nonterminals)")


# --------------------------------------------------------------------------
# BNF text parsing / serialization
# --------------------------------------------------------------------------

def _tokenize_rhs(text: str, nonterminal: str) -> tuple[Symbol, ...]:
    symbols = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "<":
            j = text.find(">", i)
            if j < 0:
                raise EmptyProductionError(
                    f"unterminated nonterminal reference in <{nonterminal}>")
            symbols.append(Symbol(text[i + 1:j], True))
            i = j + 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] != "<":
            j += 1
        symbols.append(Symbol(text[i:j], False))
        i = j
    return tuple(symbols)


def parse_grammar(text: str) -> Grammar:
    """Parse BNF source: ``<sym> ::= alt | alt``, one rule per line with
    continuation lines allowed for additional alternatives."""
    rules: list[tuple[str, list[str]]] = []
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "::=" in line:
            head, _, rhs = line.partition("::=")
            head = head.strip()
            if not (head.startswith("<") and head.endswith(">")):
                raise UndefinedNonterminalError(
                    f"rule head must be a <nonterminal>, got {head!r}")
            name = head[1:-1]
            if any(name == existing for existing, _ in rules):
                raise DuplicateDefinitionError(f"<{name}> is defined twice")
            rules.append((name, [rhs]))
        else:
            if not rules:
                raise UndefinedNonterminalError(
                    f"alternatives before any rule definition: {line!r}")
            rules[-1][1].append(line)

    if not rules:
        raise EmptyProductionError("grammar source contains no rules")

    nonterminals = [name for name, _ in rules]
    productions = {}
    for name, chunks in rules:
        joined = " ".join(chunks)
        alternatives = [alt.strip() for alt in joined.split("|")]
        prods = []
        for alt in alternatives:
            if not alt:
                raise EmptyProductionError(f"<{name}> has an empty alternative")
            prods.append(_tokenize_rhs(alt, name))
        productions[name] = prods
    return Grammar(nonterminals, productions, start_symbol=nonterminals[0])


def serialize_grammar(grammar: Grammar) -> str:
    """Canonical BNF text; ``parse_grammar(serialize_grammar(g)) == g``."""
    lines = []
    for nt in grammar.nonterminals:
        alts = [" ".join(str(s) for s in prod) for prod in grammar.productions[nt]]
        lines.append(f"<{nt}> ::= " + " | ".join(alts))
    return "\n".join(lines) + "\n"


def default_grammar_text(n_columns: int, max_features: int = 60) -> str:
    """The shipped algebraic grammar: 1..max_features features, each a
    binary +-*/ tree over the input columns."""
    if n_columns < 1:
        raise ValueError("n_columns must be >= 1")
    if max_features < 1:
        raise ValueError("max_features must be >= 1")
    feature_lists = " | ".join(
        " ; ".join(["<feature>"] * k) for k in range(1, max_features + 1))
    variables = " | ".join(f"x{i}" for i in range(n_columns))
    return (
        f"<features> ::= {feature_lists}\n"
        "<feature> ::= <expr>\n"
        "<expr> ::= <var> | ( <expr> <op> <expr> )\n"
        "<op> ::= + | - | * | /\n"
        f"<var> ::= {variables}\n"
    )


def default_grammar(n_columns: int, max_features: int = 60) -> Grammar:
    return parse_grammar(default_grammar_text(n_columns, max_features))


# --------------------------------------------------------------------------
# genotypes
# --------------------------------------------------------------------------

@dataclass
class Genotype:
    """Per-nonterminal production choices, aligned with ``grammar.nonterminals``."""

    grammar: Grammar
    genes: list[list[int]]
    depth_bound: int

    def copy(self) -> "Genotype":
        return Genotype(self.grammar, [list(row) for row in self.genes],
                        self.depth_bound)

    def validate(self):
        if len(self.genes) != len(self.grammar.nonterminals):
            raise InvalidGeneError(
                f"expected {len(self.grammar.nonterminals)} gene lists, "
                f"got {len(self.genes)}")
        for nt, row in zip(self.grammar.nonterminals, self.genes):
            limit = self.grammar.n_productions(nt)
            for g in row:
                if not 0 <= g < limit:
                    raise InvalidGeneError(
                        f"gene {g} out of range for <{nt}> with {limit} productions")


def _allowed_productions(grammar: Grammar, nt: str, remaining: int) -> list[int]:
    mins = grammar._production_min_depths[nt]
    return [i for i, m in enumerate(mins) if m <= remaining]


class _GeneCursor:
    """Reads genes per nonterminal; optionally appends fresh ones on exhaustion."""

    def __init__(self, grammar, genes, rng=None):
        self.grammar = grammar
        self.genes = genes
        self.positions = [0] * len(genes)
        self.rng = rng

    def next_gene(self, nt: str) -> int:
        idx = self.grammar.index_of(nt)
        row = self.genes[idx]
        pos = self.positions[idx]
        if pos >= len(row):
            if self.rng is None:
                raise InvalidGeneError(
                    f"gene list for <{nt}> exhausted at expansion {pos}")
            row.append(int(self.rng.integers(self.grammar.n_productions(nt))))
        self.positions[idx] += 1
        return row[pos]


def _derive(grammar: Grammar, cursor: _GeneCursor, nt: str, depth: int,
            depth_bound: int, tokens: list[str]) -> int:
    """Expand ``nt`` leftmost-first, returning the subtree depth."""
    remaining = depth_bound - depth + 1
    prods = grammar.productions[nt]
    allowed = _allowed_productions(grammar, nt, remaining)
    if not allowed:
        raise InvalidGeneError(
            f"<{nt}> cannot finish within the depth bound {depth_bound}")
    gene = cursor.next_gene(nt)
    if not 0 <= gene < len(prods):
        raise InvalidGeneError(
            f"gene {gene} out of range for <{nt}> with {len(prods)} productions")
    if len(allowed) == len(prods):
        choice = gene
    else:
        choice = allowed[gene % len(allowed)]
    deepest = depth
    for sym in prods[choice]:
        if sym.is_nonterminal:
            sub = _derive(grammar, cursor, sym.value, depth + 1, depth_bound, tokens)
            deepest = max(deepest, sub)
        else:
            tokens.append(sym.value)
    return deepest


def derive_text(grammar: Grammar, genotype: Genotype) -> str:
    """The terminal token string produced by the genotype's derivation."""
    cursor = _GeneCursor(grammar, genotype.genes)
    tokens: list[str] = []
    _derive(grammar, cursor, grammar.start_symbol, 1, genotype.depth_bound, tokens)
    return " ".join(tokens)


def derivation_depth(grammar: Grammar, genotype: Genotype) -> int:
    cursor = _GeneCursor(grammar, genotype.genes)
    return _derive(grammar, cursor, grammar.start_symbol, 1,
                   genotype.depth_bound, [])


def map_genotype(grammar: Grammar, genotype: Genotype,
                 max_features: int | None = 60) -> FeatureProgram:
    """Deterministically map a genotype to its feature program.

    Identical (grammar, genotype) inputs always produce an identical program.
    The grammar's terminal language must spell ``;``-separated algebraic
    expressions over ``x{i}`` variables.
    """
    if genotype.grammar is not grammar and genotype.grammar != grammar:
        raise GrammarMismatchError("genotype was built for a different grammar")
    text = derive_text(grammar, genotype)
    program = parse_program(text, source_genotype_hash=genotype_hash(genotype.genes))
    if max_features is not None and len(program) > max_features:
        raise InvalidGeneError(
            f"program has {len(program)} features, exceeding the "
            f"configured maximum {max_features}")
    return program


# --------------------------------------------------------------------------
# random generation
# --------------------------------------------------------------------------

def random_genotype(grammar: Grammar, min_depth: int, max_depth: int,
                    rng) -> Genotype:
    """Draw a genotype whose derivation depth lies in [min_depth, max_depth].

    One derivation path is forced deep enough to reach ``min_depth``; the
    depth mask keeps every path within ``max_depth``.
    """
    if not 1 <= min_depth <= max_depth:
        raise ValueError(f"need 1 <= min_depth <= max_depth, got "
                         f"[{min_depth}, {max_depth}]")
    rng = ensure_rng(rng)
    start = grammar.start_symbol
    if grammar.min_depths[start] > max_depth:
        raise UnsatisfiableDepthError(
            f"grammar needs at least depth {grammar.min_depths[start]}, "
            f"max_depth is {max_depth}")
    if grammar.max_depths[start] < min_depth:
        raise UnsatisfiableDepthError(
            f"grammar cannot exceed depth {grammar.max_depths[start]}, "
            f"min_depth is {min_depth}")

    genes: list[list[int]] = [[] for _ in grammar.nonterminals]

    def grow(nt: str, depth: int, need: int):
        remaining = max_depth - depth + 1
        prods = grammar.productions[nt]
        allowed = _allowed_productions(grammar, nt, remaining)
        if need > 1:
            maxes = grammar._production_max_depths[nt]
            candidates = [i for i in allowed if maxes[i] >= need]
        else:
            candidates = allowed
        choice = candidates[int(rng.integers(len(candidates)))]
        # store the gene value that the mapper will resolve back to `choice`
        if len(allowed) == len(prods):
            genes[grammar.index_of(nt)].append(choice)
        else:
            genes[grammar.index_of(nt)].append(allowed.index(choice))
        nt_positions = [i for i, s in enumerate(prods[choice]) if s.is_nonterminal]
        carrier = -1
        if need > 1 and nt_positions:
            capable = [i for i in nt_positions
                       if grammar.max_depths[prods[choice][i].value] >= need - 1]
            carrier = capable[int(rng.integers(len(capable)))]
        for i in nt_positions:
            grow(prods[choice][i].value, depth + 1, need - 1 if i == carrier else 0)

    grow(start, 1, min_depth)
    return Genotype(grammar, genes, depth_bound=max_depth)


def _ensure_coverage(genotype: Genotype, rng) -> Genotype:
    """Extend gene lists so the full derivation never runs out of genes."""
    cursor = _GeneCursor(genotype.grammar, genotype.genes, rng=rng)
    _derive(genotype.grammar, cursor, genotype.grammar.start_symbol, 1,
            genotype.depth_bound, [])
    return genotype


# --------------------------------------------------------------------------
# variation operators
# --------------------------------------------------------------------------

def _crossover_with_mask(a: Genotype, b: Genotype, mask) -> tuple[Genotype, Genotype]:
    depth = max(a.depth_bound, b.depth_bound)
    child1 = Genotype(a.grammar, [], depth)
    child2 = Genotype(a.grammar, [], depth)
    for take_a, row_a, row_b in zip(mask, a.genes, b.genes):
        if take_a:
            child1.genes.append(list(row_a))
            child2.genes.append(list(row_b))
        else:
            child1.genes.append(list(row_b))
            child2.genes.append(list(row_a))
    return child1, child2


def crossover(a: Genotype, b: Genotype, rng) -> tuple[Genotype, Genotype]:
    """Uniform per-nonterminal exchange: a fair coin decides which parent
    donates each whole gene list to child 1 (the other goes to child 2)."""
    if a.grammar is not b.grammar and a.grammar != b.grammar:
        raise GrammarMismatchError("parents come from different grammars")
    rng = ensure_rng(rng)
    mask = [bool(rng.integers(2)) for _ in a.genes]
    child1, child2 = _crossover_with_mask(a, b, mask)
    return _ensure_coverage(child1, rng), _ensure_coverage(child2, rng)


def mutate(genotype: Genotype, per_gene_rate: float, rng) -> Genotype:
    """Resample each gene uniformly over its valid values with the given
    probability; the input genotype is left untouched."""
    if not 0.0 <= per_gene_rate <= 1.0:
        raise ValueError(f"mutation rate must be in [0, 1], got {per_gene_rate}")
    rng = ensure_rng(rng)
    out = genotype.copy()
    for nt, row in zip(out.grammar.nonterminals, out.genes):
        limit = out.grammar.n_productions(nt)
        for i in range(len(row)):
            if rng.random() < per_gene_rate:
                row[i] = int(rng.integers(limit))
    return _ensure_coverage(out, rng)
