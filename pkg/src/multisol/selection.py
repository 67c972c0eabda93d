"""Reinforcement-learned target selection.

A small scoring network ranks the stored targets of a query.  Its input for
each target is the signed one-hot difference between that target and the
argmax prediction of a stale copy of the prediction network, concatenated with
the query's constraint indicator channels where the task has any (futoshiki).
Scores are softmax-normalized over the target set.

Rewards count coordinate matches between a target and the live network's
prediction.  Because the action space (the target set) is enumerable, the
expected reward and its gradient are computed exactly; no sampling estimator
is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import puzzles
from .errors import InputError, ParseError
from .network import (Network, Params, load_checkpoint, mlp_backward,
                      mlp_forward, save_checkpoint, _check_finite_params)

SELECTOR_TAG = "selector-net"

SIMPLEX_TOL = 1e-9


@dataclass
class SelectorState:
    params: Params           # scorer weights
    stale_theta: Params      # lagged copy of the prediction network
    steps_since_copy: int
    copyitr: int


class Selector:
    """Scorer architecture bound to a prediction network's task geometry."""

    def __init__(self, net: Network, hidden: int = 32, seed: int = 0):
        self.net = net
        self.hidden = int(hidden)
        self.seed = int(seed)
        self.input_dim = net.r * net.v + 2 * len(net.pairs)

    def config_echo(self) -> dict:
        return {"task": self.net.task.geometry(), "hidden": self.hidden,
                "seed": self.seed, "predictor_hidden": list(self.net.hidden)}

    def init_params(self, seed: int | None = None) -> Params:
        rng = np.random.default_rng(self.seed if seed is None else seed)
        layers = []
        for d_in, d_out in ((self.input_dim, self.hidden), (self.hidden, 1)):
            bound = 1.0 / np.sqrt(d_in)
            layers.append((rng.uniform(-bound, bound, size=(d_in, d_out)),
                           rng.uniform(-bound, bound, size=d_out)))
        return tuple(layers)

    def init_state(self, theta: Params, copyitr: int,
                   seed: int | None = None) -> SelectorState:
        return SelectorState(params=self.init_params(seed), stale_theta=theta,
                             steps_since_copy=0, copyitr=int(copyitr))

    # ---- features and scoring ----

    def target_features(self, record, stale_prediction) -> np.ndarray:
        """(n_targets, input_dim) signed one-hot differences plus constraints."""
        r, v = self.net.r, self.net.v
        feats = np.zeros((len(record.targets), self.input_dim))
        pred_onehot = np.zeros((r, v))
        pred_onehot[np.arange(r), np.asarray(stale_prediction, dtype=int) - 1] = 1.0
        for j, t in enumerate(record.targets):
            t_onehot = np.zeros((r, v))
            t_onehot[np.arange(r), np.asarray(t, dtype=int) - 1] = 1.0
            feats[j, :r * v] = (t_onehot - pred_onehot).ravel()
        if self.net.pairs and record.task.kind == puzzles.FUTOSHIKI:
            embedded = self.net.encode(record)
            feats[:, r * v:] = embedded[-2 * len(self.net.pairs):]
        return feats

    def g_phi_forward(self, state: SelectorState, record) -> np.ndarray:
        """Selection distribution over the record's targets (sums to 1)."""
        stale_pred = self.net.forward(state.stale_theta, record).argmax
        feats = self.target_features(record, stale_pred)
        scores, _ = mlp_forward(state.params, feats)
        return _softmax(scores[:, 0])

    def _dist_with_cache(self, state, record, stale_pred):
        feats = self.target_features(record, stale_pred)
        scores, cache = mlp_forward(state.params, feats)
        return _softmax(scores[:, 0]), feats, cache

    # ---- rewards ----

    def expected_reward(self, state: SelectorState, theta: Params, records) -> float:
        """Mean over records of sum_j Pr(target j) * reward(prediction, target j)."""
        total = 0.0
        for rec in records:
            yhat = self.net.forward(theta, rec).argmax
            dist = self.g_phi_forward(state, rec)
            rewards = np.array([reward(yhat, t) for t in rec.targets], dtype=float)
            total += float(dist @ rewards)
        return total / len(records)

    def grad_phi(self, state: SelectorState, theta: Params, records) -> Params:
        """Exact gradient of the expected reward with respect to scorer weights."""
        _, grads, _ = self.step_bundle(state, theta, records)
        return grads

    def step_bundle(self, state: SelectorState, theta: Params, records):
        """(distributions, reward gradient, expected reward) in one pass.

        The live and stale predictions are computed with two batched forward
        passes; only the per-target scorer work stays per record.
        """
        _check_finite_params(state.params)
        live_lp, _ = self.net.forward_records(theta, records)
        yhats = np.argmax(live_lp, axis=2) + 1
        stale_lp, _ = self.net.forward_records(state.stale_theta, records)
        stale_preds = np.argmax(stale_lp, axis=2) + 1
        m = len(records)
        grads = None
        dists = []
        total = 0.0
        for i, rec in enumerate(records):
            dist, feats, cache = self._dist_with_cache(state, rec, stale_preds[i])
            dists.append(dist)
            rewards = np.array([reward(yhats[i], t) for t in rec.targets],
                               dtype=float)
            expected = float(dist @ rewards)
            total += expected
            # d(expected)/d(score_j) = p_j * (R_j - expected)
            dscores = (dist * (rewards - expected))[:, None] / m
            g = mlp_backward(state.params, cache, dscores)
            grads = g if grads is None else tuple(
                (aW + bW, ab + bb) for (aW, ab), (bW, bb) in zip(grads, g))
        return dists, grads, total / m

    def maybe_refresh_copy(self, state: SelectorState,
                           theta_current: Params) -> SelectorState:
        """Advance the lag counter, refreshing the stale copy every copyitr steps."""
        count = state.steps_since_copy + 1
        if count >= state.copyitr:
            return SelectorState(params=state.params, stale_theta=theta_current,
                                 steps_since_copy=0, copyitr=state.copyitr)
        return SelectorState(params=state.params, stale_theta=state.stale_theta,
                             steps_since_copy=count, copyitr=state.copyitr)


def reward(yhat, y) -> int:
    """Number of coordinates where the prediction matches the target."""
    yhat = np.asarray(yhat)
    y = np.asarray(y)
    if yhat.shape != y.shape:
        raise InputError(f"shape mismatch: {yhat.shape} vs {y.shape}")
    return int((yhat == y).sum())


def sample_target(dist, rng) -> np.ndarray:
    """One-hot weight vector with the index drawn from the distribution."""
    dist = check_distribution(dist)
    idx = int(rng.choice(len(dist), p=dist))
    w = np.zeros(len(dist))
    w[idx] = 1.0
    return w


def iexplr_distribution(net: Network, theta: Params, record) -> np.ndarray:
    """Targets weighted by the prediction network's own normalized probabilities."""
    pred = net.forward(theta, record)
    lp = net.target_log_probs(pred.log_probs, record.targets)
    return _softmax(lp)


def check_distribution(dist) -> np.ndarray:
    dist = np.asarray(dist, dtype=float)
    if (dist < 0).any() or abs(float(dist.sum()) - 1.0) > SIMPLEX_TOL:
        raise InputError("distribution must be nonnegative and sum to 1")
    return dist


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = np.exp(scores - scores.max())
    return z / z.sum()


def save_selector_checkpoint(path, selector: Selector, state: SelectorState,
                             step: int) -> None:
    """Scorer weights and the stale predictor copy in one parameter block."""
    config = selector.config_echo()
    config["n_phi_layers"] = len(state.params)
    config["steps_since_copy"] = state.steps_since_copy
    config["copyitr"] = state.copyitr
    save_checkpoint(path, SELECTOR_TAG, config, step=step, seed=selector.seed,
                    params=state.params + state.stale_theta)


def load_selector_checkpoint(path, net: Network):
    header, params = load_checkpoint(path, expect_tag=SELECTOR_TAG)
    cfg = header["config"]
    if cfg["task"] != net.task.geometry():
        raise ParseError("selector checkpoint belongs to a different task")
    n_phi = cfg["n_phi_layers"]
    selector = Selector(net, hidden=cfg["hidden"], seed=cfg.get("seed", 0))
    state = SelectorState(params=params[:n_phi], stale_theta=params[n_phi:],
                          steps_since_copy=cfg["steps_since_copy"],
                          copyitr=cfg["copyitr"])
    return selector, state
