"""Inequality summaries (Gini, Lorenz) and cross-vector correlation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DataError
from .retrievability import RetrievabilityVector

log = logging.getLogger(__name__)


def _values(v) -> np.ndarray:
    return np.asarray(v.scores if isinstance(v, RetrievabilityVector) else v, dtype=np.float64)


def gini(v) -> float:
    """``sum_i (2i - N - 1) r_i / (N sum_j r_j)`` over scores sorted ascending."""
    x = np.sort(_values(v), kind="stable")
    n = len(x)
    if n == 0:
        raise DataError("undefined Gini (no documents)")
    total = x.sum()
    if total <= 0:
        raise DataError("undefined Gini (zero mass)")
    weights = 2 * np.arange(1, n + 1, dtype=np.float64) - n - 1
    # shares plus an exactly rounded sum: equal vectors give 0.0 and a single
    # holder gives (N-1)/N with no rounding drift
    return math.fsum(weights * (x / total)) / n


@dataclass(frozen=True)
class LorenzCurve:
    pop: np.ndarray
    share: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.pop.tolist(), self.share.tolist()))

    def area(self) -> float:
        """Trapezoid area under the curve."""
        return float(np.sum(np.diff(self.pop) * (self.share[1:] + self.share[:-1]) / 2))

    def to_csv(self) -> str:
        return "pop_frac,score_frac\n" + "".join(f"{p!r},{s!r}\n" for p, s in self.points)


def lorenz(v, resolution: int | None = None) -> LorenzCurve:
    """Origin plus one point per document in ascending score order.

    ``resolution`` keeps that many evenly spaced points (endpoints always kept).
    """
    x = np.sort(_values(v), kind="stable")
    n = len(x)
    total = x.sum()
    if n == 0 or total <= 0:
        raise DataError("Lorenz curve undefined for zero mass")
    pop = np.arange(n + 1, dtype=np.float64) / n
    share = np.concatenate(([0.0], np.cumsum(x) / total))
    share[-1] = 1.0
    if resolution is not None and resolution < n + 1:
        keep = np.unique(np.round(np.linspace(0, n, max(resolution, 2))).astype(int))
        pop, share = pop[keep], share[keep]
    return LorenzCurve(pop, share)


def pearson(x, y) -> float:
    x, y = _values(x), _values(y)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("pearson needs two aligned vectors of length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0:
        raise DataError("pearson undefined: first vector has zero variance")
    if syy == 0:
        raise DataError("pearson undefined: second vector has zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _tied_pairs(sorted_vals: np.ndarray) -> int:
    if not len(sorted_vals):
        return 0
    boundaries = np.flatnonzero(np.diff(sorted_vals)) + 1
    runs = np.diff(np.concatenate(([0], boundaries, [len(sorted_vals)])))
    return int((runs * (runs - 1) // 2).sum())


def count_inversions(a) -> int:
    """Pairs ``i < j`` with ``a[i] > a[j]``, by bottom-up merge sort.

    Each pass merges neighbouring sorted blocks; the inversions that cross a
    block pair are counted with one vectorised binary search per pass.
    """
    a = np.unique(np.asarray(a), return_inverse=True)[1].astype(np.int64).ravel()
    n = len(a)
    span = np.int64(n + 1)
    pos = np.arange(n)
    total = 0
    width = 1
    while width < n:
        block = pos // width
        pair = block // 2
        keys = pair * span + a
        right = (block % 2) == 1
        left_keys = keys[~right]
        right_keys, right_pair = keys[right], pair[right]
        # left blocks are sorted and laid out by pair, so left_keys is sorted
        not_greater = np.searchsorted(left_keys, right_keys, side="right")
        left_end = np.searchsorted(left_keys, (right_pair + 1) * span, side="left")
        total += int((left_end - not_greater).sum())
        a = np.sort(keys) - pair * span
        width *= 2
    return total


def kendall_tau_b(x, y) -> float:
    """Tie-corrected Kendall rank correlation in O(n log n)."""
    x, y = _values(x), _values(y)
    n = len(x)
    if len(y) != n or n < 2:
        raise ValueError("kendall_tau_b needs two aligned vectors of length >= 2")
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    n0 = n * (n - 1) // 2
    tx = _tied_pairs(xs)
    # pairs tied on both coordinates: runs of equal (x, y) in lexicographic order
    same = np.flatnonzero((np.diff(xs) != 0) | (np.diff(ys) != 0)) + 1
    runs = np.diff(np.concatenate(([0], same, [n])))
    txy = int((runs * (runs - 1) // 2).sum())
    ty = _tied_pairs(np.sort(ys))
    if tx == n0:
        raise DataError("kendall tau-b undefined: first vector is constant")
    if ty == n0:
        raise DataError("kendall tau-b undefined: second vector is constant")
    discordant = count_inversions(ys)
    concordant_minus_discordant = n0 - tx - ty + txy - 2 * discordant
    return concordant_minus_discordant / math.sqrt((n0 - tx) * (n0 - ty))


@dataclass(frozen=True)
class BiasReport:
    label: str
    gini: float
    lorenz: LorenzCurve
    n_docs: int
    total_mass: float
    provenance: str
    query_count: int


def bias_report(label: str, v: RetrievabilityVector, resolution: int | None = None) -> BiasReport:
    return BiasReport(label, gini(v), lorenz(v, resolution), len(v), v.total, v.meta.provenance, v.meta.query_count)


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: list[str]
    pearson: np.ndarray
    kendall: np.ndarray

    def to_dict(self) -> dict:
        """JSON-ready; undefined entries become ``None``."""
        def clean(m):
            return [[None if math.isnan(x) else x for x in row] for row in m.tolist()]
        return {"labels": self.labels, "pearson": clean(self.pearson), "kendall": clean(self.kendall)}


def align(vectors: Mapping[str, RetrievabilityVector]) -> dict[str, np.ndarray]:
    """Score arrays ordered by sorted doc_id; all vectors must cover the same documents."""
    items = list(vectors.items())
    ref_label, ref = items[0]
    ref_ids = set(ref.doc_ids)
    for label, v in items[1:]:
        ids = set(v.doc_ids)
        if ids != ref_ids:
            diff = sorted(ids ^ ref_ids)
            shown = ", ".join(diff[:10]) + (" ..." if len(diff) > 10 else "")
            raise DataError(f"document sets of {ref_label!r} and {label!r} differ "
                            f"({len(diff)} ids in symmetric difference: {shown})")
    out = {}
    for label, v in items:
        lookup = v.as_dict()
        out[label] = np.array([lookup[d] for d in sorted(ref_ids)])
    return out


def _or_nan(fn, a, b, what: str) -> float:
    try:
        return fn(a, b)
    except DataError as e:
        log.warning("%s: %s", what, e)
        return math.nan


def correlate_all(vectors: Mapping[str, RetrievabilityVector]) -> CorrelationMatrix:
    """Pairwise Pearson and Kendall matrices; pairs involving a constant vector are NaN."""
    labels = list(vectors)
    arrays = align(vectors)
    k = len(labels)
    p = np.eye(k)
    t = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            a, b = arrays[labels[i]], arrays[labels[j]]
            what = f"{labels[i]} vs {labels[j]}"
            p[i, j] = p[j, i] = _or_nan(pearson, a, b, what)
            t[i, j] = t[j, i] = _or_nan(kendall_tau_b, a, b, what)
    return CorrelationMatrix(labels, p, t)
