"""Validity-based accuracy, solution-count binning, McNemar, and diagnostics.

A prediction is correct iff it is a valid solution of the underlying puzzle
and agrees with the query's givens; membership in the stored (possibly
capped) target set is deliberately not required and no partial credit is
given.  Queries split into OS (exactly one solution) and MS (more than one,
including counts beyond the generation filter).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import losses, puzzles
from .data import Dataset
from .errors import InputError
from .network import Network, Params
from .selection import Selector, SelectorState

EXACT_MCNEMAR_THRESHOLD = 25


@dataclass
class BinStat:
    label: str
    lo: int
    hi: int | None            # None = overflow bin for counts beyond the filter
    count: int
    accuracy: float | None    # None for an empty bin
    mean_givens: float | None


@dataclass
class EvalReport:
    overall: float
    os_accuracy: float | None
    ms_accuracy: float | None
    os_count: int
    ms_count: int
    correct: np.ndarray               # per-record correctness bits
    bins: list[BinStat] | None = field(default=None)


def accuracy(net: Network, theta: Params, dataset: Dataset) -> EvalReport:
    records = dataset.records
    if not records:
        raise InputError("cannot evaluate an empty dataset")
    log_probs, _ = net.forward_records(theta, records)
    yhat = (np.argmax(log_probs, axis=2) + 1).astype(np.int8)
    correct = np.zeros(len(records), dtype=bool)
    for i, rec in enumerate(records):
        correct[i] = (puzzles.is_valid(rec.task, yhat[i])
                      and puzzles.respects_givens(rec.x, yhat[i]))
    is_ms = np.array([rec.is_ms for rec in records])
    os_n = int((~is_ms).sum())
    ms_n = int(is_ms.sum())
    return EvalReport(
        overall=float(correct.mean()),
        os_accuracy=float(correct[~is_ms].mean()) if os_n else None,
        ms_accuracy=float(correct[is_ms].mean()) if ms_n else None,
        os_count=os_n, ms_count=ms_n, correct=correct)


DEFAULT_BIN_EDGES = ((1, 1), (2, 2), (3, 3), (4, 10), (11, 50))


def bin_by_solution_count(report: EvalReport, dataset: Dataset,
                          edges=DEFAULT_BIN_EDGES) -> EvalReport:
    """Per-bin accuracy, population, and mean givens, keyed by solution count.

    Records whose count exceeded the generation filter go to an overflow bin.
    Empty bins are reported with a null accuracy rather than dropped.
    """
    if len(report.correct) != len(dataset.records):
        raise InputError("report does not match the dataset")
    bins = [BinStat(label=f"{lo}" if lo == hi else f"{lo}-{hi}",
                    lo=lo, hi=hi, count=0, accuracy=None, mean_givens=None)
            for lo, hi in edges]
    overflow = BinStat(label="overflow", lo=0, hi=None, count=0,
                       accuracy=None, mean_givens=None)
    members: dict[int, list[int]] = {i: [] for i in range(len(bins) + 1)}
    for idx, rec in enumerate(dataset.records):
        total = rec.total_solutions
        slot = len(bins)
        if total is not None:
            for b_i, (lo, hi) in enumerate(edges):
                if lo <= total <= hi:
                    slot = b_i
                    break
        members[slot].append(idx)
    for b_i, bin_stat in enumerate([*bins, overflow]):
        idxs = members[b_i]
        bin_stat.count = len(idxs)
        if idxs:
            bin_stat.accuracy = float(report.correct[idxs].mean())
            bin_stat.mean_givens = float(np.mean(
                [dataset.records[i].num_givens for i in idxs]))
    return EvalReport(overall=report.overall, os_accuracy=report.os_accuracy,
                      ms_accuracy=report.ms_accuracy, os_count=report.os_count,
                      ms_count=report.ms_count, correct=report.correct,
                      bins=[*bins, overflow])


@dataclass(frozen=True)
class McNemarResult:
    statistic: float
    p_value: float
    b: int                 # A correct, B wrong
    c: int                 # A wrong, B correct
    method: str            # "chi2" | "exact" | "degenerate"


def mcnemar(correct_a, correct_b, exact: bool | None = None) -> McNemarResult:
    """Paired comparison of two correctness vectors over identical records.

    Continuity-corrected chi-square statistic on the discordant pairs; the
    p-value falls back to the exact binomial tail when the discordant count
    is small (fewer than 25), unless `exact` forces one path.
    """
    a = np.asarray(correct_a, dtype=bool)
    bvec = np.asarray(correct_b, dtype=bool)
    if a.shape != bvec.shape:
        raise InputError("correctness vectors must cover the same records")
    b = int((a & ~bvec).sum())
    c = int((~a & bvec).sum())
    n = b + c
    if n == 0:
        return McNemarResult(statistic=0.0, p_value=1.0, b=b, c=c,
                             method="degenerate")
    statistic = (abs(b - c) - 1) ** 2 / n
    use_exact = n < EXACT_MCNEMAR_THRESHOLD if exact is None else exact
    if use_exact:
        k = min(b, c)
        tail = sum(math.comb(n, i) for i in range(k + 1)) / 2.0 ** n
        p = min(1.0, 2.0 * tail)
        method = "exact"
    else:
        p = chi2_sf_1df(statistic)
        method = "chi2"
    return McNemarResult(statistic=float(statistic), p_value=float(p),
                         b=b, c=c, method=method)


def chi2_sf_1df(stat: float) -> float:
    """Upper tail of the chi-square distribution with one degree of freedom."""
    if stat <= 0:
        return 1.0
    return math.erfc(math.sqrt(stat / 2.0))


def exploratory_fraction(selector_or_fn, theta: Params, dataset: Dataset,
                         net: Network | None = None,
                         state: SelectorState | None = None) -> float:
    """Fraction of records where the selector's argmax target is not the
    target closest to the current prediction (the greedy min-loss choice).

    `selector_or_fn` is either a Selector (paired with `state`) or any
    callable mapping a record to a distribution over its targets, which is
    how the prediction-network-driven exploration strategy plugs in.
    """
    if isinstance(selector_or_fn, Selector):
        if state is None:
            raise InputError("a SelectorState is required with a Selector")
        sel = selector_or_fn
        net = sel.net
        dist_fn = lambda rec: sel.g_phi_forward(state, rec)
    else:
        if net is None:
            raise InputError("a Network is required with a distribution callable")
        dist_fn = selector_or_fn
    records = dataset.records
    if not records:
        raise InputError("cannot analyze an empty dataset")
    log_probs, _ = net.forward_records(theta, records)
    diff = 0
    for i, rec in enumerate(records):
        ce = losses.cross_entropies(net, log_probs[i], rec.targets)
        y_c = int(np.argmin(ce))
        chosen = int(np.argmax(dist_fn(rec)))
        diff += int(chosen != y_c)
    return diff / len(records)
