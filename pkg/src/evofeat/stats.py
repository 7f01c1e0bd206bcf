"""Nonparametric comparison battery: Kruskal-Wallis, Dunn/Bonferroni, Cliff's delta.

Everything here is self-contained (rank computation, chi-squared and normal
tail probabilities included) so results can be cross-checked against external
references rather than depending on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

DELTA_BINS = (0.147, 0.33, 0.474)
MAGNITUDE_SYMBOLS = {
    "negligible": "~",
    "small": "+",
    "medium": "++",
    "large": "+++",
}


# --------------------------------------------------------------------------
# special functions
# --------------------------------------------------------------------------

_EPS = 1e-16
_ITMAX = 500
_FPMIN = 1e-300


def _gamma_p_series(a: float, x: float) -> float:
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_ITMAX):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _ITMAX + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) for a > 0, x >= 0."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def chi2_sf(x: float, df: int) -> float:
    """Chi-squared survival function via the regularized incomplete gamma."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if x <= 0:
        return 1.0
    return min(1.0, max(0.0, regularized_gamma_q(df / 2.0, x / 2.0)))


def normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# --------------------------------------------------------------------------
# ranking
# --------------------------------------------------------------------------

def _rank_with_ties(values: np.ndarray) -> tuple[np.ndarray, float]:
    """Average ranks (1-based) and the tie term sum(t^3 - t)."""
    n = values.shape[0]
    order = np.argsort(values, kind="stable")
    sv = values[order]
    ranks = np.empty(n, dtype=np.float64)
    tie_term = 0.0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        t = j - i + 1
        if t > 1:
            tie_term += t ** 3 - t
        i = j + 1
    return ranks, tie_term


def _as_groups(groups) -> tuple[list[str], list[np.ndarray]]:
    if isinstance(groups, dict):
        names = list(groups.keys())
        arrays = [np.asarray(groups[k], dtype=np.float64) for k in names]
    else:
        names = [f"group{i}" for i in range(len(groups))]
        arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(arrays) < 2:
        raise ValueError("need at least 2 groups")
    for name, arr in zip(names, arrays):
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError(f"group {name!r} must be a non-empty 1-D sequence")
    return names, arrays


# --------------------------------------------------------------------------
# tests
# --------------------------------------------------------------------------

class KruskalResult(NamedTuple):
    h: float
    p_value: float
    degenerate: bool  # every observation identical; H undefined, p forced to 1


def kruskal_wallis(groups) -> KruskalResult:
    """Tie-corrected Kruskal-Wallis H and its chi-squared p-value."""
    _, arrays = _as_groups(groups)
    pooled = np.concatenate(arrays)
    n = pooled.shape[0]
    if n < 5:
        raise ValueError("need a total of at least 5 observations")
    ranks, tie_term = _rank_with_ties(pooled)
    correction = 1.0 - tie_term / (n ** 3 - n)
    if correction <= 0.0:
        return KruskalResult(h=0.0, p_value=1.0, degenerate=True)
    offset = 0
    h = 0.0
    for arr in arrays:
        r = ranks[offset:offset + arr.size]
        h += r.sum() ** 2 / arr.size
        offset += arr.size
    h = (12.0 / (n * (n + 1))) * h - 3.0 * (n + 1)
    h /= correction
    return KruskalResult(h=float(h), p_value=chi2_sf(h, len(arrays) - 1),
                         degenerate=False)


def dunn_posthoc(groups, correction: str = "bonferroni") -> np.ndarray:
    """Two-sided Dunn z-test p-values on pooled ranks, Bonferroni-corrected.

    Returns a symmetric g x g matrix with unit diagonal.
    """
    if correction not in ("bonferroni", "none"):
        raise ValueError(f"unknown correction {correction!r}")
    _, arrays = _as_groups(groups)
    g = len(arrays)
    pooled = np.concatenate(arrays)
    n = pooled.shape[0]
    ranks, tie_term = _rank_with_ties(pooled)
    mean_ranks = []
    sizes = []
    offset = 0
    for arr in arrays:
        mean_ranks.append(ranks[offset:offset + arr.size].mean())
        sizes.append(arr.size)
        offset += arr.size
    base_var = n * (n + 1) / 12.0 - tie_term / (12.0 * (n - 1))
    n_pairs = g * (g - 1) // 2
    multiplier = n_pairs if correction == "bonferroni" else 1
    p = np.ones((g, g))
    for i in range(g):
        for j in range(i + 1, g):
            var = base_var * (1.0 / sizes[i] + 1.0 / sizes[j])
            if var <= 0.0:
                raw = 1.0
            else:
                z = (mean_ranks[i] - mean_ranks[j]) / math.sqrt(var)
                raw = 2.0 * normal_sf(abs(z))
            p[i, j] = p[j, i] = min(1.0, raw * multiplier)
    return p


@dataclass(frozen=True)
class EffectSize:
    delta: float
    magnitude: str


def _delta_magnitude(delta: float) -> str:
    ad = abs(delta)
    if ad < DELTA_BINS[0]:
        return "negligible"
    if ad < DELTA_BINS[1]:
        return "small"
    if ad < DELTA_BINS[2]:
        return "medium"
    return "large"


def cliffs_delta(a, b) -> EffectSize:
    """delta = (#{a_i > b_j} - #{a_i < b_j}) / (|a| * |b|), binned by magnitude."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    b_sorted = np.sort(b)
    greater = int(np.searchsorted(b_sorted, a, side="left").sum())
    not_less = int(np.searchsorted(b_sorted, a, side="right").sum())
    less = a.size * b.size - not_less
    delta = (greater - less) / (a.size * b.size)
    return EffectSize(delta=float(delta), magnitude=_delta_magnitude(delta))


# --------------------------------------------------------------------------
# combined report
# --------------------------------------------------------------------------

@dataclass
class StatisticalReport:
    methods: list[str]
    kruskal: KruskalResult
    alpha: float
    posthoc_performed: bool
    p_matrix: np.ndarray | None
    effects: dict[tuple[int, int], EffectSize]

    def symbol(self, i: int, j: int) -> str:
        """Effect-size symbol for a significant pair, empty otherwise."""
        if not self.posthoc_performed:
            return ""
        key = (min(i, j), max(i, j))
        if self.p_matrix[key] >= self.alpha:
            return ""
        return MAGNITUDE_SYMBOLS[self.effects[key].magnitude]

    def render_text(self, title: str = "scores") -> str:
        lines = [
            f"Kruskal-Wallis: H = {self.kruskal.h:.4f}, "
            f"p = {self.kruskal.p_value:.6g}"
            + (" (all values identical)" if self.kruskal.degenerate else ""),
        ]
        if not self.posthoc_performed:
            lines.append(f"no posthoc performed (p >= {self.alpha})")
            return "\n".join(lines) + "\n"
        header = [title] + self.methods[:-1]
        rows = []
        for i in range(1, len(self.methods)):
            cells = [self.methods[i]]
            for j in range(len(self.methods) - 1):
                cells.append(self.symbol(i, j) if j < i else "")
            rows.append(cells)
        widths = [max(len(row[c]) for row in [header] + rows)
                  for c in range(len(header))]
        out = []
        for row in [header] + rows:
            out.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)))
        lines.extend(out)
        return "\n".join(lines) + "\n"


def comparison_report(groups, alpha: float = 0.05) -> StatisticalReport:
    """Omnibus test, then posthoc + effect sizes only when it rejects."""
    names, arrays = _as_groups(groups)
    kres = kruskal_wallis(dict(zip(names, arrays)))
    perform = (not kres.degenerate) and kres.p_value < alpha
    p_matrix = None
    effects: dict[tuple[int, int], EffectSize] = {}
    if perform:
        p_matrix = dunn_posthoc(dict(zip(names, arrays)))
        for i in range(len(arrays)):
            for j in range(i + 1, len(arrays)):
                effects[(i, j)] = cliffs_delta(arrays[i], arrays[j])
    return StatisticalReport(methods=names, kruskal=kres, alpha=alpha,
                             posthoc_performed=perform, p_matrix=p_matrix,
                             effects=effects)
