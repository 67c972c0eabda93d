"""Non-autoregressive prediction network with hand-written gradients.

The network maps an encoded query to r independent categorical distributions
over the value vocabulary: a fully connected rectifier MLP ending in a
per-cell log-softmax.  Parameters are immutable snapshots (tuples of (W, b)
pairs); every function here is pure, so snapshots can be shared freely across
threads and optimizer steps simply produce new snapshots.

Checkpoint layout: one JSON header line (tag, config echo, step, seed, shapes)
followed by the raw little-endian float64 parameter block, matrices and bias
vectors in declaration order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import puzzles
from .data import QueryRecord
from .errors import ConfigError, InputError, NumericError, ParseError
from .puzzles import FUTOSHIKI, NQUEENS, TaskSpec

Params = tuple[tuple[np.ndarray, np.ndarray], ...]

CKPT_FORMAT = "multisol-ckpt-v1"
NET_TAG = "prediction-net"


@dataclass
class Prediction:
    log_probs: np.ndarray  # (r, v)
    argmax: np.ndarray     # (r,) values in 1..v; ties break to the lowest value


@dataclass
class OptState:
    m: Params
    v: Params
    step: int
    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adjacent_pairs(n: int) -> list[tuple[int, int]]:
    """Orthogonally adjacent cell pairs of an n x n grid, low index first."""
    pairs = []
    for cell in range(n * n):
        row, col = divmod(cell, n)
        if col < n - 1:
            pairs.append((cell, cell + 1))
        if row < n - 1:
            pairs.append((cell, cell + n))
    return pairs


def _peer_matrix(task: TaskSpec) -> np.ndarray:
    """A[k, p] = 1 where a given at cell p constrains the value of cell k."""
    r, _ = puzzles.dims(task)
    side = task.side
    A = np.zeros((r, r))
    for k in range(r):
        rk, ck = divmod(k, side)
        for p in range(r):
            if p == k:
                continue
            rp, cp = divmod(p, side)
            same_unit = rk == rp or ck == cp
            if task.kind == puzzles.NQUEENS:
                same_unit = same_unit or abs(rk - rp) == abs(ck - cp)
            elif task.kind == puzzles.SUDOKU:
                same_unit = same_unit or (rk // task.box_rows == rp // task.box_rows
                                          and ck // task.box_cols == cp // task.box_cols)
            if same_unit:
                A[k, p] = 1.0
    return A


class Network:
    """Static architecture description; parameters travel separately."""

    def __init__(self, task: TaskSpec, hidden=(96, 96), seed: int = 0,
                 conflict_features: bool = True):
        if len(hidden) < 1:
            raise ConfigError("at least one hidden layer is required")
        self.task = task
        self.r, self.v = puzzles.dims(task)
        self.hidden = tuple(int(h) for h in hidden)
        self.seed = int(seed)
        self.conflict_features = bool(conflict_features)
        self.pairs = adjacent_pairs(task.side) if task.kind == FUTOSHIKI else []
        self.input_dim = (self.r * (self.v + 1)
                          + (self.r * self.v if self.conflict_features else 0)
                          + 2 * len(self.pairs))
        self.output_dim = self.r * self.v
        self._pair_index = {p: i for i, p in enumerate(self.pairs)}
        self._peer_matrix = _peer_matrix(task) if self.conflict_features else None

    def config_echo(self) -> dict:
        return {"task": self.task.geometry(), "hidden": list(self.hidden),
                "seed": self.seed, "conflict_features": self.conflict_features}

    # ---- parameters ----

    def layer_dims(self) -> list[tuple[int, int]]:
        sizes = [self.input_dim, *self.hidden, self.output_dim]
        return list(zip(sizes[:-1], sizes[1:]))

    def init_params(self, seed: int | None = None) -> Params:
        rng = np.random.default_rng(self.seed if seed is None else seed)
        layers = []
        for d_in, d_out in self.layer_dims():
            bound = 1.0 / np.sqrt(d_in)
            W = rng.uniform(-bound, bound, size=(d_in, d_out))
            b = rng.uniform(-bound, bound, size=d_out)
            layers.append((W, b))
        return tuple(layers)

    def zero_params(self) -> Params:
        return tuple((np.zeros((d_in, d_out)), np.zeros(d_out))
                     for d_in, d_out in self.layer_dims())

    # ---- encoding ----

    def _task_and_x(self, query):
        if isinstance(query, QueryRecord):
            return query.task, query.x
        return self.task, np.asarray(query, dtype=np.int8)

    def encode(self, query) -> np.ndarray:
        """Per-cell one-hot over blank+values, optional per-value counts of
        conflicting givens in the cell's constraint neighborhood, and
        inequality indicator channels where the task has any."""
        task, x = self._task_and_x(query)
        return self._encode_many([task], x[None, :])[0]

    def encode_records(self, records) -> np.ndarray:
        tasks = [rec.task if isinstance(rec, QueryRecord) else self.task
                 for rec in records]
        xs = np.stack([rec.x if isinstance(rec, QueryRecord)
                       else np.asarray(rec, dtype=np.int8) for rec in records])
        return self._encode_many(tasks, xs)

    def _encode_many(self, tasks, xs) -> np.ndarray:
        B = xs.shape[0]
        out = np.zeros((B, self.input_dim))
        onehot = out[:, :self.r * (self.v + 1)].reshape(B, self.r, self.v + 1)
        rows = np.arange(self.r)[None, :]
        onehot[np.arange(B)[:, None], rows, xs.astype(int)] = 1.0
        base = self.r * (self.v + 1)
        if self.conflict_features:
            counts = np.einsum("kp,bpv->bkv", self._peer_matrix,
                               onehot[:, :, 1:])
            if self.task.kind == NQUEENS:
                counts[:, :, 0] = 0.0   # an empty cell never blocks a peer
            out[:, base:base + self.r * self.v] = counts.reshape(B, -1)
            base += self.r * self.v
        for i, task in enumerate(tasks):
            self._fill_pair_channels(out[i], task, base)
        return out

    def _fill_pair_channels(self, out, task, base: int) -> None:
        if not self.pairs or task.kind != FUTOSHIKI:
            return
        for ineq in task.inequalities:
            lo, hi = min(ineq.left, ineq.right), max(ineq.left, ineq.right)
            rel = ineq.relation
            if ineq.left != lo:
                rel = puzzles.LESS_THAN if rel == puzzles.GREATER_THAN \
                    else puzzles.GREATER_THAN
            offset = 0 if rel == puzzles.LESS_THAN else 1
            out[base + 2 * self._pair_index[(lo, hi)] + offset] = 1.0

    # ---- forward / backward ----

    def forward_features(self, params: Params, X: np.ndarray):
        """Batched forward pass; returns ((B, r, v) log-probs, cache)."""
        _check_finite_params(params)
        out, cache = mlp_forward(params, X)
        logits = out.reshape(X.shape[0], self.r, self.v)
        log_probs = log_softmax(logits)
        return log_probs, (cache, logits)

    def forward_records(self, params: Params, records):
        return self.forward_features(params, self.encode_records(records))

    def forward(self, params: Params, query) -> Prediction:
        task, x = self._task_and_x(query)
        X = self.encode(query)[None, :]
        log_probs, _ = self.forward_features(params, X)
        lp = log_probs[0]
        return Prediction(log_probs=lp,
                          argmax=(np.argmax(lp, axis=1) + 1).astype(np.int8))

    def backward_features(self, params: Params, cache, upstream: np.ndarray):
        """Exact gradient wrt parameters of sum(upstream * log_probs)."""
        mlp_cache, logits = cache
        B = logits.shape[0]
        if upstream.shape != logits.shape:
            raise InputError(
                f"upstream gradient must have shape {logits.shape}, "
                f"got {upstream.shape}")
        probs = np.exp(log_softmax(logits))
        dlogits = upstream - probs * upstream.sum(axis=2, keepdims=True)
        return mlp_backward(params, mlp_cache, dlogits.reshape(B, -1))

    def backward(self, params: Params, query, upstream: np.ndarray):
        """Single-query convenience wrapper; upstream is (r, v) on log-probs."""
        X = self.encode(query)[None, :]
        _, cache = self.forward_features(params, X)
        return self.backward_features(params, cache, np.asarray(upstream)[None, :, :])

    def log_prob_of(self, params: Params, query, y) -> float:
        task, x = self._task_and_x(query)
        y = np.asarray(y, dtype=int)
        if y.shape != (self.r,):
            raise InputError(f"assignment must have length {self.r}")
        pred = self.forward(params, query)
        return float(pred.log_probs[np.arange(self.r), y - 1].sum())

    def target_log_probs(self, log_probs_row: np.ndarray, targets) -> np.ndarray:
        """log Pr(y | x) for each target under one query's (r, v) log-probs."""
        idx = np.stack([np.asarray(t, dtype=int) - 1 for t in targets])
        return log_probs_row[np.arange(self.r), idx].sum(axis=1)


def mlp_forward(params: Params, X: np.ndarray):
    acts = [X]
    pre = []
    h = X
    last = len(params) - 1
    for i, (W, b) in enumerate(params):
        z = h @ W + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    return h, (acts, pre)


def mlp_backward(params: Params, cache, dout: np.ndarray) -> Params:
    acts, pre = cache
    grads: list = [None] * len(params)
    delta = dout
    for i in reversed(range(len(params))):
        W, _ = params[i]
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ W.T) * (pre[i - 1] > 0)
    return tuple(grads)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check_finite_params(params: Params) -> None:
    for W, b in params:
        if not (np.isfinite(W).all() and np.isfinite(b).all()):
            raise NumericError("non-finite network parameter")


def _check_finite_grads(grads: Params) -> None:
    for gW, gb in grads:
        if not (np.isfinite(gW).all() and np.isfinite(gb).all()):
            raise NumericError("non-finite gradient")


def zeros_like_params(params: Params) -> Params:
    return tuple((np.zeros_like(W), np.zeros_like(b)) for W, b in params)


def add_grads(a: Params, b: Params) -> Params:
    return tuple((ga + gb, ba + bb) for (ga, ba), (gb, bb) in zip(a, b))


def scale_grads(a: Params, s: float) -> Params:
    return tuple((W * s, b * s) for W, b in a)


def init_opt_state(params: Params, lr: float, weight_decay: float = 0.0,
                   beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> OptState:
    return OptState(m=zeros_like_params(params), v=zeros_like_params(params),
                    step=0, lr=lr, weight_decay=weight_decay,
                    beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: Params, grads: Params, state: OptState):
    """One Adam update with bias correction and decoupled weight decay."""
    _check_finite_grads(grads)
    t = state.step + 1
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    new_params, new_m, new_v = [], [], []
    for (W, b), (gW, gb), (mW, mb), (vW, vb) in zip(params, grads,
                                                    state.m, state.v):
        upd = []
        for p, g, m, v in ((W, gW, mW, vW), (b, gb, mb, vb)):
            m2 = state.beta1 * m + (1 - state.beta1) * g
            v2 = state.beta2 * v + (1 - state.beta2) * g * g
            step = state.lr * (m2 / c1) / (np.sqrt(v2 / c2) + state.eps)
            p2 = p - step - state.lr * state.weight_decay * p
            upd.append((p2, m2, v2))
        new_params.append((upd[0][0], upd[1][0]))
        new_m.append((upd[0][1], upd[1][1]))
        new_v.append((upd[0][2], upd[1][2]))
    new_state = OptState(m=tuple(new_m), v=tuple(new_v), step=t, lr=state.lr,
                         weight_decay=state.weight_decay, beta1=state.beta1,
                         beta2=state.beta2, eps=state.eps)
    return tuple(new_params), new_state


def save_checkpoint(path, tag: str, config: dict, step: int, seed: int,
                    params: Params) -> None:
    shapes = [[list(W.shape), list(b.shape)] for W, b in params]
    header = {"format": CKPT_FORMAT, "tag": tag, "config": config,
              "step": step, "seed": seed, "shapes": shapes}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        for W, b in params:
            fh.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path, expect_tag: str | None = None):
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad checkpoint header: {exc}") from exc
    if header.get("format") != CKPT_FORMAT:
        raise ParseError(f"unknown checkpoint format {header.get('format')!r}")
    if expect_tag is not None and header.get("tag") != expect_tag:
        raise ParseError(f"expected {expect_tag!r} checkpoint, "
                         f"found {header.get('tag')!r}")
    params = []
    offset = 0
    for w_shape, b_shape in header["shapes"]:
        n_w = int(np.prod(w_shape))
        n_b = int(np.prod(b_shape))
        need = (n_w + n_b) * 8
        if offset + need > len(blob):
            raise ParseError("checkpoint truncated: parameter block too short")
        W = np.frombuffer(blob, dtype="<f8", count=n_w,
                          offset=offset).reshape(w_shape).copy()
        offset += n_w * 8
        b = np.frombuffer(blob, dtype="<f8", count=n_b,
                          offset=offset).reshape(b_shape).copy()
        offset += n_b * 8
        params.append((W, b))
    if offset != len(blob):
        raise ParseError("checkpoint has trailing bytes")
    return header, tuple(params)


def network_from_checkpoint_header(header: dict) -> Network:
    cfg = header["config"]
    geom = cfg["task"]
    kind = geom["kind"]
    if kind == puzzles.SUDOKU:
        task = TaskSpec.sudoku(geom["box_rows"], geom["box_cols"])
    elif kind == puzzles.FUTOSHIKI:
        task = TaskSpec.futoshiki(geom["n"])
    else:
        task = TaskSpec.nqueens(geom["n"])
    return Network(task, hidden=tuple(cfg["hidden"]), seed=cfg.get("seed", 0),
                   conflict_features=cfg.get("conflict_features", True))
