"""Supervised loss formulations over per-query target sets.

Four training losses plus the greedy per-record weight selection:

* naive:    sum cross-entropy over every stored target.
* cc:       negative log of the total probability mass on the target set,
            evaluated entirely in log space (max-target shift), so it stays
            finite whenever any single target log-prob is finite.
* weighted: per-target weights on the simplex; one-hot weights recover
            single-target supervision, probability weights give the expected
            loss used by the RL trainer.
* min-select: one-hot weights on the current minimum-loss target.

The `*_value` helpers work on plain cross-entropy vectors so they can be
reused on any model that produces per-cell log-probabilities; the top-level
functions bind them to a Network and a record batch and also return exact
parameter gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .network import Network, Params

ONE_HOT_TOL = 1e-9


@dataclass
class LossReport:
    value: float
    per_target: list[np.ndarray]   # cross-entropy of every stored target
    grad_theta: Params | None
    kind: str                      # "naive" | "cc" | "weighted"
    weights: list[np.ndarray] | None = field(default=None)


def check_weights(weights, records, strict: bool) -> None:
    if len(weights) != len(records):
        raise InputError("one weight vector per record is required")
    for w, rec in zip(weights, records):
        w = np.asarray(w, dtype=float)
        if w.shape != (len(rec.targets),):
            raise InputError(
                f"weight vector must have length {len(rec.targets)}, "
                f"got shape {w.shape}")
        if (w < 0).any() or (w > 1).any():
            raise InputError("weights must lie in [0, 1]")
        if abs(float(w.sum()) - 1.0) > ONE_HOT_TOL:
            raise InputError("weights must sum to 1 per record")
        if strict:
            ones = int((w == 1.0).sum())
            if ones != 1 or int((w == 0.0).sum()) != len(w) - 1:
                raise InputError("strict mode requires exactly one weight of 1")


def cross_entropies(net: Network, log_probs_row: np.ndarray, targets) -> np.ndarray:
    return -net.target_log_probs(log_probs_row, targets)


def naive_value(ce_list) -> float:
    m = len(ce_list)
    return float(sum(ce.sum() for ce in ce_list) / m)


def cc_value(ce_list) -> float:
    """Mean of -log sum_j Pr(y_j), via the max-target shift in log space."""
    m = len(ce_list)
    total = 0.0
    for ce in ce_list:
        lp = -np.asarray(ce, dtype=float)
        top = lp.max()
        total += -(top + np.log(np.exp(lp - top).sum()))
    return float(total / m)


def weighted_value(ce_list, weights) -> float:
    m = len(ce_list)
    return float(sum(float(np.dot(w, ce)) for w, ce in zip(weights, ce_list)) / m)


def _loss_report(net, params, records, coeffs, value, kind, weights=None):
    """Assemble gradient from per-target coefficients c_ij on -log Pr(y_ij)."""
    log_probs, cache = net.forward_records(params, records)
    upstream = np.zeros_like(log_probs)
    rows = np.arange(net.r)[None, :]
    ce_list = []
    for i, rec in enumerate(records):
        ce = cross_entropies(net, log_probs[i], rec.targets)
        ce_list.append(ce)
        c = np.asarray(coeffs(i, ce), dtype=float)
        idx = np.stack([np.asarray(t, dtype=int) - 1 for t in rec.targets])
        np.add.at(upstream[i], (rows, idx), -c[:, None])
    grads = net.backward_features(params, cache, upstream)
    return LossReport(value=value(ce_list), per_target=ce_list, grad_theta=grads,
                      kind=kind, weights=weights)


def naive_loss(net: Network, params: Params, records) -> LossReport:
    if not records:
        raise InputError("empty batch")
    m = len(records)
    return _loss_report(net, params, records,
                        coeffs=lambda i, ce: np.full(len(ce), 1.0 / m),
                        value=naive_value, kind="naive")


def cc_loss(net: Network, params: Params, records) -> LossReport:
    if not records:
        raise InputError("empty batch")
    m = len(records)

    def coeffs(i, ce):
        lp = -np.asarray(ce, dtype=float)
        q = np.exp(lp - lp.max())
        return (q / q.sum()) / m

    return _loss_report(net, params, records, coeffs=coeffs,
                        value=cc_value, kind="cc")


def weighted_loss(net: Network, params: Params, weights, records,
                  strict: bool = False) -> LossReport:
    if not records:
        raise InputError("empty batch")
    check_weights(weights, records, strict)
    m = len(records)
    weights = [np.asarray(w, dtype=float) for w in weights]
    return _loss_report(net, params, records,
                        coeffs=lambda i, ce: weights[i] / m,
                        value=lambda ce_list: weighted_value(ce_list, weights),
                        kind="weighted", weights=weights)


def minloss_select(net: Network, params: Params, record) -> np.ndarray:
    """One-hot weights on the argmin-loss target; ties go to the lowest index."""
    pred = net.forward(params, record)
    ce = cross_entropies(net, pred.log_probs, record.targets)
    w = np.zeros(len(record.targets))
    w[int(np.argmin(ce))] = 1.0
    return w


def minloss_select_batch(net: Network, params: Params, records) -> list[np.ndarray]:
    log_probs, _ = net.forward_records(params, records)
    out = []
    for i, rec in enumerate(records):
        ce = cross_entropies(net, log_probs[i], rec.targets)
        w = np.zeros(len(rec.targets))
        w[int(np.argmin(ce))] = 1.0
        out.append(w)
    return out


def zero_one_estimators(net: Network, params: Params, records):
    """(naive, min-weight, empirical) zero-one error estimates.

    Requires complete solution sets: with capped targets the min-weight
    estimator no longer equals the empirical error, so such batches are
    rejected outright.
    """
    if not records:
        raise InputError("empty batch")
    for rec in records:
        if rec.total_solutions is None or rec.total_solutions != len(rec.targets):
            raise InputError(
                "zero-one estimators require complete solution sets "
                "(total_solutions == stored targets)")
    log_probs, _ = net.forward_records(params, records)
    yhat = (np.argmax(log_probs, axis=2) + 1).astype(np.int8)
    m = len(records)
    naive01 = minw01 = emp = 0.0
    for i, rec in enumerate(records):
        mismatch = np.array([0.0 if np.array_equal(yhat[i], t) else 1.0
                             for t in rec.targets])
        naive01 += mismatch.sum()
        minw01 += mismatch.min()
        emp += float(mismatch.min() > 0)
    return naive01 / m, minw01 / m, emp / m
