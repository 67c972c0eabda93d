"""Seeded corpus generation for the three puzzle families, plus (de)serialization.

Queries are built by masking complete boards.  Every record stores the query,
the (possibly capped) target set, and the true solution count.  Generation is
deterministic given the config seed: each record index owns a spawned RNG
stream, retries stay inside that stream, and assembly order is fixed by record
index, so the output is identical regardless of how generation is scheduled.

Dataset file format (UTF-8, line-delimited JSON):
  line 1    header object: {"task": geometry, "split": ..., "seed": ..., "config": ...}
  line 2..  one record per line: {"x": [...], "targets": [[...], ...],
            "n_solutions": int or "gt_filter"} plus, for futoshiki only,
            "inequalities": [[left, right, "lt"|"gt"], ...].
Blanks in "x" are 0; boards are row-major.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import puzzles
from .errors import ConfigError, GenerationError, InputError, ParseError
from .puzzles import FUTOSHIKI, NQUEENS, SUDOKU, Inequality, TaskSpec

TRAIN, DEV, TEST = "train", "dev", "test"
SPLITS = (TRAIN, DEV, TEST)

EXCEEDS_FILTER = "gt_filter"


@dataclass(eq=False)
class QueryRecord:
    task: TaskSpec
    x: np.ndarray
    targets: list[np.ndarray]
    total_solutions: int | None  # None means "more than the filter cap"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.int8)
        self.x.setflags(write=False)
        self.targets = [np.asarray(t, dtype=np.int8) for t in self.targets]
        for t in self.targets:
            t.setflags(write=False)
        if not self.targets:
            raise InputError("record must store at least one target")
        if self.total_solutions is not None and len(self.targets) > self.total_solutions:
            raise InputError("stored targets exceed the total solution count")

    @property
    def is_ms(self) -> bool:
        return self.total_solutions is None or self.total_solutions > 1

    @property
    def num_givens(self) -> int:
        return int((self.x != puzzles.BLANK).sum())

    def key(self) -> bytes:
        ineq = ";".join(f"{q.left},{q.right},{q.relation}"
                        for q in self.task.inequalities)
        return self.x.tobytes() + b"|" + ineq.encode()

    def __eq__(self, other) -> bool:
        if not isinstance(other, QueryRecord):
            return NotImplemented
        return (self.task == other.task
                and self.total_solutions == other.total_solutions
                and np.array_equal(self.x, other.x)
                and len(self.targets) == len(other.targets)
                and all(np.array_equal(a, b)
                        for a, b in zip(self.targets, other.targets)))


@dataclass(eq=False)
class Dataset:
    records: list[QueryRecord]
    split: str
    seed: int
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.split == other.split and self.seed == other.seed
                and self.provenance == other.provenance
                and self.records == other.records)


@dataclass(frozen=True)
class GenConfig:
    kind: str
    n: int = 0
    box_rows: int = 0
    box_cols: int = 0
    num_masked: int = 1
    num_inequalities: int = 0
    target_cap: int = 5
    solution_filter: int = 50
    n_train: int = 100
    n_dev: int = 25
    n_test: int = 50
    seed: int = 0
    # sudoku multi-solution pipeline: givens are balanced uniformly over
    # [ms_givens_lo, ms_givens_hi]; up to ms_addback_max digits are restored
    ms_givens_lo: int = 4
    ms_givens_hi: int = 8
    ms_addback_max: int = 7
    max_attempts: int = 400

    def task(self) -> TaskSpec:
        if self.kind == SUDOKU:
            return TaskSpec.sudoku(self.box_rows, self.box_cols)
        if self.kind == FUTOSHIKI:
            return TaskSpec.futoshiki(self.n)
        return TaskSpec.nqueens(self.n)

    def validate(self) -> None:
        task = self.task()
        r, _ = puzzles.dims(task)
        for name in ("n_train", "n_dev", "n_test", "target_cap",
                     "solution_filter", "max_attempts"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not 1 <= self.num_masked <= r:
            raise ConfigError(f"num_masked must be in 1..{r}")
        if self.num_inequalities < 0:
            raise ConfigError("num_inequalities must be nonnegative")
        if self.target_cap > self.solution_filter:
            raise ConfigError("target_cap must not exceed solution_filter")
        if self.kind == SUDOKU and self.ms_givens_lo > self.ms_givens_hi:
            raise ConfigError("ms_givens_lo must not exceed ms_givens_hi")

    def echo(self) -> dict:
        return asdict(self)


def desk_nqueens(**over) -> GenConfig:
    cfg = dict(kind=NQUEENS, n=6, num_masked=34, target_cap=5, solution_filter=50,
               n_train=400, n_dev=100, n_test=200, seed=0)
    cfg.update(over)
    return GenConfig(**cfg)


def desk_futoshiki(**over) -> GenConfig:
    cfg = dict(kind=FUTOSHIKI, n=4, num_masked=6, num_inequalities=3,
               target_cap=5, solution_filter=50,
               n_train=400, n_dev=100, n_test=200, seed=0)
    cfg.update(over)
    return GenConfig(**cfg)


def desk_sudoku(**over) -> GenConfig:
    cfg = dict(kind=SUDOKU, box_rows=2, box_cols=2, num_masked=9,
               target_cap=5, solution_filter=50,
               n_train=4000, n_dev=300, n_test=400, seed=0)
    cfg.update(over)
    return GenConfig(**cfg)


def split_seed(seed: int, split: str) -> int:
    idx = SPLITS.index(split)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(idx,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _record_rng(dataset_seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=dataset_seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(ss))


def _store_targets(solutions, cap: int, rng) -> list[np.ndarray]:
    if len(solutions) <= cap:
        return list(solutions)
    picked = sorted(rng.choice(len(solutions), size=cap, replace=False))
    return [solutions[int(i)] for i in picked]


def _sample_futoshiki_inequalities(solution, n: int, per_direction: int, rng):
    lt_pool, gt_pool = [], []
    for cell in range(n * n):
        row, col = divmod(cell, n)
        for other in ((cell + 1) if col < n - 1 else None,
                      (cell + n) if row < n - 1 else None):
            if other is None:
                continue
            rel = puzzles.LESS_THAN if solution[cell] < solution[other] \
                else puzzles.GREATER_THAN
            (lt_pool if rel == puzzles.LESS_THAN else gt_pool).append(
                Inequality(cell, other, rel))
    chosen = []
    for pool in (lt_pool, gt_pool):
        take = min(per_direction, len(pool))
        if take:
            idx = sorted(rng.choice(len(pool), size=take, replace=False))
            chosen.extend(pool[int(i)] for i in idx)
    return tuple(chosen)


def gen_masking_dataset(cfg: GenConfig, split: str = TRAIN,
                        exclude: set[bytes] | None = None) -> Dataset:
    """Masking-based corpus: sample a complete board, blank positions, enumerate.

    Records whose solution count exceeds cfg.solution_filter are dropped and
    resampled.  Queries already present in `exclude` (or earlier in this
    dataset) are also resampled, which is how cross-split leakage is avoided.
    """
    cfg.validate()
    base_task = cfg.task()
    grids = puzzles.complete_grids(base_task)
    seed = split_seed(cfg.seed, split)
    count = getattr(cfg, f"n_{split}")
    seen = set() if exclude is None else set(exclude)
    records = []
    for i in range(count):
        rng = _record_rng(seed, i)
        rec = None
        for _ in range(cfg.max_attempts):
            rec = _sample_masked_record(cfg, base_task, grids, rng)
            if rec is not None and rec.key() not in seen:
                break
            rec = None
        if rec is None:
            raise GenerationError(
                f"could not build record {i} of {split} within "
                f"{cfg.max_attempts} attempts (solution_filter="
                f"{cfg.solution_filter}, num_masked={cfg.num_masked}); "
                "the query space may be exhausted")
        seen.add(rec.key())
        records.append(rec)
    return Dataset(records=records, split=split, seed=seed, provenance=cfg.echo())


def _sample_masked_record(cfg, base_task, grids, rng):
    r, _ = puzzles.dims(base_task)
    source = grids[int(rng.integers(len(grids)))]
    masked = rng.choice(r, size=cfg.num_masked, replace=False)
    x = source.copy()
    x[masked] = puzzles.BLANK
    task = base_task
    if cfg.kind == FUTOSHIKI and cfg.num_inequalities > 0:
        ineqs = _sample_futoshiki_inequalities(source, cfg.n,
                                               cfg.num_inequalities, rng)
        task = TaskSpec.futoshiki(cfg.n, ineqs)
    sols = puzzles.enumerate_solutions(task, x, cap=cfg.solution_filter)
    if not sols or len(sols) > cfg.solution_filter:
        return None
    return QueryRecord(task=task, x=x,
                       targets=_store_targets(sols, cfg.target_cap, rng),
                       total_solutions=len(sols))


def gen_unique_pool(cfg: GenConfig, count: int, pool_seed: int,
                    exclude: set[bytes] | None = None) -> Dataset:
    """Unique-solution puzzles spanning the configured givens range (sudoku).

    Record i targets the givens level `lo + i % (hi - lo + 1)` so every level
    is evenly represented even where unique puzzles are rare (few givens).
    """
    cfg.validate()
    task = cfg.task()
    r, _ = puzzles.dims(task)
    grids = puzzles.complete_grids(task)
    seen = set() if exclude is None else set(exclude)
    levels = list(range(cfg.ms_givens_lo, cfg.ms_givens_hi + 1))
    records = []
    for i in range(count):
        rng = _record_rng(pool_seed, i)
        givens = levels[i % len(levels)]
        rec = None
        for _ in range(cfg.max_attempts):
            source = grids[int(rng.integers(len(grids)))]
            keep = rng.choice(r, size=givens, replace=False)
            x = np.zeros(r, dtype=np.int8)
            x[keep] = source[keep]
            sols = puzzles.enumerate_solutions(task, x, cap=1)
            if len(sols) == 1:
                cand = QueryRecord(task=task, x=x, targets=sols, total_solutions=1)
                if cand.key() not in seen:
                    rec = cand
                    break
        if rec is None:
            raise GenerationError(
                f"unique pool exhausted after {cfg.max_attempts} attempts "
                f"per record at {givens} givens")
        seen.add(rec.key())
        records.append(rec)
    return Dataset(records=records, split="pool", seed=pool_seed,
                   provenance=cfg.echo())


def _minimize_unique(task, x, rng) -> np.ndarray:
    """Drop givens (in random order) while the puzzle keeps a unique solution."""
    x = np.array(x, dtype=np.int8)
    order = [int(i) for i in rng.permutation(np.flatnonzero(x != puzzles.BLANK))]
    for i in order:
        saved = x[i]
        x[i] = puzzles.BLANK
        if len(puzzles.enumerate_solutions(task, x, cap=1)) != 1:
            x[i] = saved
    return x


def gen_sudoku_multisolution(cfg: GenConfig, unique_pool: Dataset,
                             split: str = TRAIN,
                             exclude: set[bytes] | None = None) -> Dataset:
    """Multi-solution sudoku corpus mixed 50/50 with unique-solution queries.

    Each multi-solution record starts from a pool puzzle reduced to a minimal
    unique puzzle; removing one more given then guarantees multiplicity.  A
    random number of digits from the original solution is added back while
    re-checking that more than one solution remains.  Record counts per givens
    level are balanced to uniform over [ms_givens_lo, ms_givens_hi].
    """
    cfg.validate()
    if cfg.kind != SUDOKU:
        raise ConfigError("multi-solution pipeline is sudoku-only")
    task = cfg.task()
    for rec in unique_pool.records:
        if rec.total_solutions != 1:
            raise InputError("unique_pool must contain only unique-solution records")
    count = getattr(cfg, f"n_{split}")
    n_ms = count // 2
    n_os = count - n_ms
    seed = split_seed(cfg.seed, split)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    seen = set() if exclude is None else set(exclude)

    levels = list(range(cfg.ms_givens_lo, cfg.ms_givens_hi + 1))
    quota = {g: n_ms // len(levels) for g in levels}
    for g in levels[:n_ms % len(levels)]:
        quota[g] += 1

    ms_records: list[QueryRecord] = []
    budget = cfg.max_attempts * max(1, n_ms)
    while any(quota[g] > 0 for g in levels) and budget > 0:
        budget -= 1
        rec = _sample_ms_record(cfg, task, unique_pool, rng)
        if rec is None or rec.key() in seen:
            continue
        g = rec.num_givens
        if g in quota and quota[g] > 0:
            quota[g] -= 1
            seen.add(rec.key())
            ms_records.append(rec)
    if any(quota[g] > 0 for g in levels):
        missing = {g: q for g, q in quota.items() if q > 0}
        raise GenerationError(
            f"could not fill multi-solution givens quota {missing} "
            f"within the attempt budget; widen ms_givens range or enlarge the pool")

    os_records = _balanced_unique_sample(unique_pool, n_os, levels, rng, seen)
    records = ms_records + os_records
    order = rng.permutation(len(records))
    records = [records[int(i)] for i in order]
    return Dataset(records=records, split=split, seed=seed, provenance=cfg.echo())


def _sample_ms_record(cfg, task, unique_pool, rng):
    pool_rec = unique_pool.records[int(rng.integers(len(unique_pool.records)))]
    solution = pool_rec.targets[0]
    minimal = _minimize_unique(task, pool_rec.x, rng)
    givens = np.flatnonzero(minimal != puzzles.BLANK)
    x = np.array(minimal)
    x[int(rng.choice(givens))] = puzzles.BLANK
    blanks = np.flatnonzero(x == puzzles.BLANK)
    q = int(rng.integers(1, cfg.ms_addback_max + 1))
    q = min(q, len(blanks) - 1)  # keep at least one blank
    if q > 0:
        back = rng.choice(blanks, size=q, replace=False)
        x[back] = solution[back]
    sols = puzzles.enumerate_solutions(task, x, cap=cfg.solution_filter)
    if len(sols) < 2 or len(sols) > cfg.solution_filter:
        return None
    return QueryRecord(task=task, x=x,
                       targets=_store_targets(sols, cfg.target_cap, rng),
                       total_solutions=len(sols))


def _balanced_unique_sample(unique_pool, n_os, levels, rng, seen):
    by_givens: dict[int, list[QueryRecord]] = {g: [] for g in levels}
    for rec in unique_pool.records:
        g = rec.num_givens
        if g in by_givens and rec.key() not in seen:
            by_givens[g].append(rec)
    for g in levels:
        order = rng.permutation(len(by_givens[g]))
        by_givens[g] = [by_givens[g][int(i)] for i in order]
    quota = {g: n_os // len(levels) for g in levels}
    for g in levels[:n_os % len(levels)]:
        quota[g] += 1
    out = []
    for g in levels:
        if len(by_givens[g]) < quota[g]:
            raise GenerationError(
                f"unique pool exhausted: need {quota[g]} puzzles with {g} givens, "
                f"pool has {len(by_givens[g])}")
        for rec in by_givens[g][:quota[g]]:
            seen.add(rec.key())
            out.append(rec)
    return out


def gen_corpus(cfg: GenConfig) -> dict[str, Dataset]:
    """Train/dev/test datasets with pairwise-distinct queries."""
    cfg.validate()
    out: dict[str, Dataset] = {}
    seen: set[bytes] = set()
    if cfg.kind == SUDOKU:
        pool_need = max(cfg.n_train, cfg.n_dev, cfg.n_test) * 3
        for split in SPLITS:
            pool = gen_unique_pool(cfg, pool_need,
                                   split_seed(cfg.seed ^ 0x5EED, split), seen)
            out[split] = gen_sudoku_multisolution(cfg, pool, split, seen)
            seen.update(rec.key() for rec in out[split].records)
    else:
        for split in SPLITS:
            out[split] = gen_masking_dataset(cfg, split, seen)
            seen.update(rec.key() for rec in out[split].records)
    return out


@dataclass(frozen=True)
class StatsReport:
    num_queries: int
    ms_percent: float
    avg_targets_per_ms: float


def dataset_stats(d: Dataset) -> StatsReport:
    if not d.records:
        raise InputError("cannot compute statistics of an empty dataset")
    ms = [rec for rec in d.records if rec.is_ms]
    avg = float(np.mean([len(rec.targets) for rec in ms])) if ms else 0.0
    return StatsReport(num_queries=len(d.records),
                       ms_percent=100.0 * len(ms) / len(d.records),
                       avg_targets_per_ms=avg)


def save(d: Dataset, path) -> None:
    task0 = d.records[0].task if d.records else None
    header = {
        "task": task0.geometry() if task0 else None,
        "split": d.split,
        "seed": d.seed,
        "config": d.provenance,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in d.records:
            row = {
                "x": [int(v) for v in rec.x],
                "targets": [[int(v) for v in t] for t in rec.targets],
                "n_solutions": EXCEEDS_FILTER if rec.total_solutions is None
                               else rec.total_solutions,
            }
            if rec.task.kind == FUTOSHIKI:
                row["inequalities"] = [[q.left, q.right, q.relation]
                                       for q in rec.task.inequalities]
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _parse_task(geom, lineno) -> TaskSpec:
    if not isinstance(geom, dict) or "kind" not in geom:
        raise ParseError(f"line {lineno}: header field 'task' malformed")
    kind = geom["kind"]
    if kind not in puzzles.KINDS:
        raise ParseError(f"line {lineno}: unknown value {kind!r} in field 'task.kind'")
    try:
        if kind == SUDOKU:
            task = TaskSpec.sudoku(int(geom["box_rows"]), int(geom["box_cols"]))
        elif kind == FUTOSHIKI:
            task = TaskSpec.futoshiki(int(geom["n"]))
        else:
            task = TaskSpec.nqueens(int(geom["n"]))
        task.validate()
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        raise ParseError(f"line {lineno}: bad task geometry: {exc}") from exc
    return task


def load(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("line 1: missing dataset header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"line 1: {exc}") from exc
    for key in ("task", "split", "seed", "config"):
        if key not in header:
            raise ParseError(f"line 1: header missing field {key!r}")
    base_task = _parse_task(header["task"], 1)
    r, v = puzzles.dims(base_task)
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        for key in ("x", "targets", "n_solutions"):
            if key not in row:
                raise ParseError(f"line {lineno}: record missing field {key!r}")
        task = base_task
        if base_task.kind == FUTOSHIKI:
            try:
                ineqs = tuple(Inequality(int(l), int(rt), str(rel))
                              for l, rt, rel in row.get("inequalities", []))
                task = TaskSpec.futoshiki(base_task.n, ineqs)
                task.validate()
            except (TypeError, ValueError, ConfigError) as exc:
                raise ParseError(f"line {lineno}: bad field 'inequalities': {exc}") from exc
        total = row["n_solutions"]
        if total == EXCEEDS_FILTER:
            total = None
        elif not isinstance(total, int) or total < 1:
            raise ParseError(f"line {lineno}: bad field 'n_solutions': {total!r}")
        x = np.asarray(row["x"], dtype=np.int8)
        if x.shape != (r,) or ((x < 0) | (x > v)).any():
            raise ParseError(f"line {lineno}: bad field 'x'")
        targets = [np.asarray(t, dtype=np.int8) for t in row["targets"]]
        for t in targets:
            if t.shape != (r,) or ((t < 1) | (t > v)).any():
                raise ParseError(f"line {lineno}: bad field 'targets'")
        try:
            records.append(QueryRecord(task=task, x=x, targets=targets,
                                       total_solutions=total))
        except InputError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    return Dataset(records=records, split=header["split"],
                   seed=header["seed"], provenance=header["config"])
