import numpy as np
import pytest

from multisol import data, puzzles
from multisol.data import Dataset, GenConfig, QueryRecord
from multisol.errors import ConfigError, GenerationError, InputError, ParseError
from multisol.puzzles import TaskSpec


@pytest.fixture(scope="module")
def nq4_cfg():
    return GenConfig(kind=puzzles.NQUEENS, n=4, num_masked=16,
                     n_train=1, n_dev=1, n_test=1, seed=3)


@pytest.fixture(scope="module")
def sudoku_cfg():
    return data.desk_sudoku(n_train=40, n_dev=8, n_test=8, seed=11)


@pytest.fixture(scope="module")
def sudoku_pool(sudoku_cfg):
    return data.gen_unique_pool(sudoku_cfg, 150, pool_seed=77)


def make_record(task, x, targets, total):
    return QueryRecord(task=task, x=np.asarray(x, dtype=np.int8),
                       targets=[np.asarray(t, dtype=np.int8) for t in targets],
                       total_solutions=total)


class TestMaskingGen:
    def test_empty_nqueens_query(self, nq4_cfg):
        ds = data.gen_masking_dataset(nq4_cfg, data.TRAIN)
        rec = ds.records[0]
        assert rec.num_givens == 0
        assert rec.total_solutions == 2
        assert len(rec.targets) == 2

    def test_postconditions(self):
        cfg = data.desk_nqueens(n_train=30, n_dev=5, n_test=5, seed=1)
        ds = data.gen_masking_dataset(cfg, data.TRAIN)
        for rec in ds.records:
            assert 1 <= rec.total_solutions <= cfg.solution_filter
            assert len(rec.targets) <= cfg.target_cap
            for t in rec.targets:
                assert puzzles.is_valid(rec.task, t)
                assert puzzles.respects_givens(rec.x, t)

    def test_deterministic(self):
        cfg = data.desk_nqueens(n_train=10, n_dev=2, n_test=2, seed=5)
        assert data.gen_masking_dataset(cfg, data.TRAIN) == \
            data.gen_masking_dataset(cfg, data.TRAIN)

    def test_targets_subset_of_enumeration(self):
        cfg = data.desk_futoshiki(n_train=12, n_dev=2, n_test=2, seed=2)
        ds = data.gen_masking_dataset(cfg, data.TRAIN)
        for rec in ds.records:
            if rec.total_solutions is None:
                continue
            sols = {tuple(s) for s in puzzles.enumerate_solutions(rec.task, rec.x)}
            assert len(sols) == rec.total_solutions
            assert {tuple(t) for t in rec.targets} <= sols

    def test_futoshiki_per_direction_sampling(self):
        cfg = data.desk_futoshiki(n_train=12, n_dev=2, n_test=2,
                                  num_inequalities=2, seed=4)
        ds = data.gen_masking_dataset(cfg, data.TRAIN)
        for rec in ds.records:
            lt = [q for q in rec.task.inequalities if q.relation == puzzles.LESS_THAN]
            gt = [q for q in rec.task.inequalities if q.relation == puzzles.GREATER_THAN]
            assert len(lt) == 2 and len(gt) == 2

    def test_unsatisfiable_config_raises(self):
        # only one empty 4-queens query exists, so asking for two must fail
        cfg = GenConfig(kind=puzzles.NQUEENS, n=4, num_masked=16,
                        n_train=2, n_dev=1, n_test=1, seed=0, max_attempts=20)
        with pytest.raises(GenerationError):
            data.gen_masking_dataset(cfg, data.TRAIN)

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            GenConfig(kind=puzzles.NQUEENS, n=4, num_masked=0).validate()
        with pytest.raises(ConfigError):
            GenConfig(kind=puzzles.NQUEENS, n=4, target_cap=9,
                      solution_filter=5).validate()


class TestCorpus:
    def test_splits_pairwise_distinct(self):
        cfg = data.desk_nqueens(n_train=25, n_dev=8, n_test=8, seed=9)
        corpus = data.gen_corpus(cfg)
        keys = [rec.key() for split in data.SPLITS
                for rec in corpus[split].records]
        assert len(keys) == len(set(keys))

    def test_split_seeds_differ(self):
        cfg = data.desk_nqueens(n_train=5, n_dev=5, n_test=5, seed=9)
        corpus = data.gen_corpus(cfg)
        seeds = {corpus[s].seed for s in data.SPLITS}
        assert len(seeds) == 3


class TestSudokuMS:
    def test_minimal_minus_one_is_multisolution(self, sudoku_cfg, sudoku_pool):
        task = sudoku_cfg.task()
        rng = np.random.default_rng(0)
        for rec in sudoku_pool.records[:10]:
            minimal = data._minimize_unique(task, rec.x, rng)
            for i in np.flatnonzero(minimal != puzzles.BLANK):
                x = np.array(minimal)
                x[i] = puzzles.BLANK
                sols = puzzles.enumerate_solutions(task, x, cap=2)
                assert len(sols) >= 2

    def test_pipeline_postconditions(self, sudoku_cfg, sudoku_pool):
        ds = data.gen_sudoku_multisolution(sudoku_cfg, sudoku_pool, data.TRAIN)
        ms = [r for r in ds.records if r.is_ms]
        assert len(ds.records) == sudoku_cfg.n_train
        assert len(ms) == sudoku_cfg.n_train // 2
        for rec in ms:
            assert 2 <= rec.total_solutions <= sudoku_cfg.solution_filter
            assert len(rec.targets) <= sudoku_cfg.target_cap
            assert sudoku_cfg.ms_givens_lo <= rec.num_givens <= sudoku_cfg.ms_givens_hi

    def test_givens_balanced_uniform(self, sudoku_cfg, sudoku_pool):
        ds = data.gen_sudoku_multisolution(sudoku_cfg, sudoku_pool, data.TRAIN)
        ms = [r for r in ds.records if r.is_ms]
        counts = {}
        for rec in ms:
            counts[rec.num_givens] = counts.get(rec.num_givens, 0) + 1
        assert max(counts.values()) - min(counts.values()) <= 1

    def test_rejects_nonunique_pool(self, sudoku_cfg):
        task = sudoku_cfg.task()
        grid = puzzles.complete_grids(task)[0]
        bad = Dataset(records=[make_record(task, np.zeros(16), [grid], 288)],
                      split="pool", seed=0)
        with pytest.raises(InputError):
            data.gen_sudoku_multisolution(sudoku_cfg, bad, data.TRAIN)


class TestStats:
    def test_mixed(self):
        task = TaskSpec.nqueens(4)
        sols = puzzles.enumerate_solutions(task, puzzles.empty_query(task))
        x1 = np.array(sols[0])
        recs = [make_record(task, np.zeros(16), [sols[0], sols[1], sols[0]], 3),
                make_record(task, x1, [sols[0]], 1),
                make_record(task, np.array(sols[1]), [sols[1]], 1),
                make_record(task, np.where(np.arange(16) < 8, x1, 0), [sols[0]], 1)]
        st = data.dataset_stats(Dataset(records=recs, split="train", seed=0))
        assert st.num_queries == 4
        assert st.ms_percent == 25.0
        assert st.avg_targets_per_ms == 3.0

    def test_all_singletons(self):
        task = TaskSpec.nqueens(4)
        sols = puzzles.enumerate_solutions(task, puzzles.empty_query(task))
        recs = [make_record(task, np.array(sols[0]), [sols[0]], 1)]
        st = data.dataset_stats(Dataset(records=recs, split="train", seed=0))
        assert st.ms_percent == 0.0
        assert st.avg_targets_per_ms == 0.0

    def test_avg_over_ms_only(self):
        task = TaskSpec.nqueens(4)
        sols = puzzles.enumerate_solutions(task, puzzles.empty_query(task))
        recs = [make_record(task, np.zeros(16), [sols[0], sols[1]], 2),
                make_record(task, np.zeros(16), [sols[0], sols[1], sols[0], sols[1]], 4)]
        st = data.dataset_stats(Dataset(records=recs, split="train", seed=0))
        assert st.avg_targets_per_ms == 3.0

    def test_empty_errors(self):
        with pytest.raises(InputError):
            data.dataset_stats(Dataset(records=[], split="train", seed=0))


class TestIO:
    def test_round_trip(self, tmp_path):
        cfg = data.desk_futoshiki(n_train=8, n_dev=2, n_test=2, seed=6)
        ds = data.gen_masking_dataset(cfg, data.DEV)
        path = tmp_path / "ds.jsonl"
        data.save(ds, path)
        assert data.load(path) == ds

    def test_file_bytes_deterministic(self, tmp_path):
        cfg = data.desk_nqueens(n_train=6, n_dev=2, n_test=2, seed=8)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        data.save(data.gen_masking_dataset(cfg, data.TRAIN), p1)
        data.save(data.gen_masking_dataset(cfg, data.TRAIN), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_truncated_file(self, tmp_path):
        cfg = data.desk_nqueens(n_train=4, n_dev=2, n_test=2, seed=8)
        path = tmp_path / "ds.jsonl"
        data.save(data.gen_masking_dataset(cfg, data.TRAIN), path)
        raw = path.read_text()
        path.write_text(raw[:-20])
        with pytest.raises(ParseError, match=r"line \d+"):
            data.load(path)

    def test_unknown_kind(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        path.write_text('{"task": {"kind": "kakuro", "n": 4}, "split": "train", '
                        '"seed": 0, "config": {}}\n')
        with pytest.raises(ParseError, match="task.kind"):
            data.load(path)

    def test_exceeds_filter_round_trip(self, tmp_path):
        task = TaskSpec.sudoku(2, 2)
        grids = puzzles.complete_grids(task)
        rec = make_record(task, np.zeros(16), grids[:3], None)
        ds = Dataset(records=[rec], split="test", seed=1)
        path = tmp_path / "ds.jsonl"
        data.save(ds, path)
        loaded = data.load(path)
        assert loaded.records[0].total_solutions is None
        assert loaded == ds
