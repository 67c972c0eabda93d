"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured runtime.  Run with `pytest tests/test_acceptance.py -v -s`.

The two corpora are session fixtures (generation is shared infrastructure);
each criterion's budget is enforced on the work the criterion itself does.
"""

import statistics
import time

import numpy as np
import pytest

from multisol import cli, data, evaluation, losses, network, puzzles, training
from multisol.data import GenConfig, QueryRecord
from multisol.network import Network
from multisol.puzzles import TaskSpec
from multisol.selection import Selector, SelectorState
from multisol.training import TrainConfig

import oracles

DATASET_SEED = 20240601
BENCH_SEEDS = (1, 2, 3)


def _pass(num, elapsed, budget, detail):
    assert elapsed < budget, (f"criterion {num} took {elapsed:.1f}s, "
                              f"budget {budget:.0f}s")
    print(f"\n[criterion {num}] PASS in {elapsed:.1f}s (< {budget:.0f}s): {detail}")


@pytest.fixture(scope="session")
def queens_corpus():
    return data.gen_corpus(data.desk_nqueens(seed=DATASET_SEED))


@pytest.fixture(scope="session")
def sudoku_corpus():
    return data.gen_corpus(data.desk_sudoku(seed=DATASET_SEED))


def test_criterion_1_toy_logistic_reproduction():
    t0 = time.time()
    rep = training.toy_example_logistic()
    assert rep["minloss"]["boundary"] == pytest.approx(-0.55, abs=0.05)
    assert rep["minloss"]["accuracy"] == 0.9
    assert rep["selectr"]["accuracy"] == 1.0
    _pass(1, time.time() - t0, 5,
          f"greedy boundary {rep['minloss']['boundary']:.3f} at 90% accuracy; "
          f"selector run reaches 100%")


def test_criterion_2_toy_xor_reproduction():
    t0 = time.time()
    rep = training.toy_example_xor()
    naive = rep["strategies"]["naive"]
    for p in naive["bit_probabilities"]:
        assert p == pytest.approx(0.5, abs=0.01)
    minloss = rep["strategies"]["minloss"]["target_concentration"]
    selectr = rep["strategies"]["selectr"]["target_concentration"]
    assert minloss >= 0.99
    assert selectr >= 0.99
    _pass(2, time.time() - t0, 5,
          f"summed-loss training lands on 0.5/0.5 bits; "
          f"greedy {minloss:.4f} and selector {selectr:.4f} mass on one target")


def _complete_set_batch(kind_cfg):
    ds = data.gen_masking_dataset(kind_cfg, data.TRAIN)
    for rec in ds.records:
        assert rec.total_solutions == len(rec.targets)
    return ds.records


def test_criterion_3_zero_one_estimator_equivalence():
    t0 = time.time()
    q_cfg = GenConfig(kind=puzzles.NQUEENS, n=4, num_masked=14, target_cap=50,
                      solution_filter=50, n_train=20, n_dev=1, n_test=1,
                      seed=71, max_attempts=4000)
    s_cfg = GenConfig(kind=puzzles.SUDOKU, box_rows=2, box_cols=2,
                      num_masked=8, target_cap=288, solution_filter=288,
                      n_train=20, n_dev=1, n_test=1, seed=72)
    batches = {
        "4-queens": (_complete_set_batch(q_cfg), TaskSpec.nqueens(4)),
        "2x2 sudoku": (_complete_set_batch(s_cfg), TaskSpec.sudoku(2, 2)),
    }
    checked = 0
    for name, (records, task) in batches.items():
        net = Network(task, hidden=(12,), seed=0)
        for seed in range(50):
            theta = net.init_params(seed=seed)
            _, minw01, emp = losses.zero_one_estimators(net, theta, records)
            assert minw01 == emp, f"{name} seed {seed}"
            checked += 1
    assert checked == 100

    # a case where the summed zero-one estimate strictly exceeds the
    # min-weight one: the prediction IS one of two stored solutions
    task = TaskSpec.nqueens(4)
    sols = puzzles.enumerate_solutions(task, puzzles.empty_query(task))
    net = Network(task, hidden=(8,), seed=0)
    params = list(net.zero_params())
    W, b = params[-1]
    bias = b.reshape(net.r, net.v).copy()
    bias[np.arange(net.r), np.asarray(sols[0], dtype=int) - 1] = 25.0
    params[-1] = (W, bias.reshape(-1))
    rec = QueryRecord(task=task, x=puzzles.empty_query(task), targets=sols,
                      total_solutions=2)
    naive01, minw01, emp = losses.zero_one_estimators(net, tuple(params), [rec])
    assert naive01 == 1.0 and minw01 == 0.0 and emp == 0.0
    assert naive01 > minw01
    _pass(3, time.time() - t0, 30,
          "min-weight zero-one loss equals empirical error on 100 random "
          "parameter draws (exact); summed estimator strictly overcounts")


def test_criterion_4_cc_loss_stability():
    t0 = time.time()
    rng = np.random.default_rng(4)
    # stabilized == direct wherever the direct form is representable
    for _ in range(200):
        ce = [rng.uniform(0.05, 200.0, size=rng.integers(1, 8))]
        direct = -np.log(np.exp(-np.asarray(ce[0])).sum())
        if np.isfinite(direct):
            assert losses.cc_value(ce) == pytest.approx(direct, abs=1e-9)
    # the same equality through the network-bound path
    task = TaskSpec.nqueens(2)
    net = Network(task, hidden=(6,), seed=0)
    theta = net.init_params(seed=3)
    recs = [QueryRecord(task=task, x=np.zeros(4, dtype=np.int8),
                        targets=[np.array([1, 2, 2, 1], dtype=np.int8),
                                 np.array([2, 1, 1, 2], dtype=np.int8)],
                        total_solutions=2)]
    rep = losses.cc_loss(net, theta, recs)
    lp = np.array([net.log_prob_of(theta, recs[0], t) for t in recs[0].targets])
    assert rep.value == pytest.approx(-np.log(np.exp(lp).sum()), abs=1e-9)
    # 81 cells, 9 values, uniform rows: the analytic value stays finite while
    # the direct float32 probability product underflows to zero
    uniform_ce = [np.array([81 * np.log(9.0)])]
    value = losses.cc_value(uniform_ce)
    assert value == pytest.approx(81 * np.log(9.0), abs=1e-9)
    assert value == pytest.approx(177.9752, abs=1e-3)
    f32_product = np.prod(np.full(81, np.float32(1.0) / np.float32(9.0),
                                  dtype=np.float32))
    assert f32_product == 0.0
    _pass(4, time.time() - t0, 1,
          f"log-space value {value:.4f} (= 81 ln 9) where the float32 "
          f"probability product underflows to {f32_product}")


def _fd_theta_check(loss_value_fn, grads, params):
    for li in range(len(params)):
        for pi in range(2):
            def f(p):
                trial = [list(lay) for lay in params]
                trial[li][pi] = p
                return loss_value_fn(tuple((W, b) for W, b in trial))
            fd = oracles.finite_difference_gradient(f, params[li][pi].copy())
            worst, ok = oracles.fd_check(grads[li][pi], fd, tol=1e-4)
            assert ok, f"rel err {worst:.2e} at layer {li} param {pi}"


def test_criterion_5_gradient_referee():
    t0 = time.time()
    task = TaskSpec.nqueens(2)
    net = Network(task, hidden=(6,), seed=0)
    rng = np.random.default_rng(55)

    def random_records(n=3):
        recs = []
        for _ in range(n):
            x = rng.integers(0, 3, size=4).astype(np.int8)
            n_targets = int(rng.integers(2, 4))
            targets = []
            while len(targets) < n_targets:
                t = rng.integers(1, 3, size=4).astype(np.int8)
                if not any(np.array_equal(t, u) for u in targets):
                    targets.append(t)
            recs.append(QueryRecord(task=task, x=x, targets=targets,
                                    total_solutions=n_targets))
        return recs

    for i in range(20):
        params = net.init_params(seed=100 + i)
        recs = random_records()
        rep = losses.naive_loss(net, params, recs)
        _fd_theta_check(lambda p: losses.naive_loss(net, p, recs).value,
                        rep.grad_theta, params)
        rep = losses.cc_loss(net, params, recs)
        _fd_theta_check(lambda p: losses.cc_loss(net, p, recs).value,
                        rep.grad_theta, params)
        w = [np.array(rng.dirichlet(np.ones(len(r.targets)))) for r in recs]
        rep = losses.weighted_loss(net, params, w, recs)
        _fd_theta_check(lambda p: losses.weighted_loss(net, p, w, recs).value,
                        rep.grad_theta, params)

    sel = Selector(net, hidden=5, seed=9)
    for i in range(20):
        theta = net.init_params(seed=300 + i)
        recs = random_records()
        state = sel.init_state(theta, copyitr=1, seed=400 + i)
        analytic = sel.grad_phi(state, theta, recs)
        params = state.params
        for li in range(len(params)):
            for pi in range(2):
                def f(p):
                    trial = [list(lay) for lay in params]
                    trial[li][pi] = p
                    st = SelectorState(params=tuple((W, b) for W, b in trial),
                                       stale_theta=state.stale_theta,
                                       steps_since_copy=0, copyitr=1)
                    return sel.expected_reward(st, theta, recs)
                fd = oracles.finite_difference_gradient(f, params[li][pi].copy())
                worst, ok = oracles.fd_check(analytic[li][pi], fd, tol=1e-4)
                assert ok, f"phi rel err {worst:.2e}"
    _pass(5, time.time() - t0, 60,
          "naive, cc, weighted, and expected-reward gradients all match "
          "central differences on 20 random instances each (rel err <= 1e-4)")


def test_criterion_6_enumeration_golden_values():
    t0 = time.time()
    q4 = TaskSpec.nqueens(4)
    got4 = [tuple(s) for s in
            puzzles.enumerate_solutions(q4, puzzles.empty_query(q4))]
    oracle4 = oracles.brute_force_solutions(q4, puzzles.empty_query(q4))
    assert got4 == oracle4
    assert len(got4) == 2

    q8 = TaskSpec.nqueens(8)
    got8 = puzzles.enumerate_solutions(q8, puzzles.empty_query(q8))
    assert len(got8) == oracles.permutation_queens_count(8) == 92

    s22 = TaskSpec.sudoku(2, 2)
    got_s = [tuple(s) for s in
             puzzles.enumerate_solutions(s22, puzzles.empty_query(s22))]
    oracle_s = oracles.sudoku_grids_by_row_permutations(2, 2)
    assert got_s == oracle_s
    assert len(got_s) == 288
    _pass(6, time.time() - t0, 60,
          "4-queens: 2, 8-queens: 92, 2x2-box grids: 288, all matching "
          "independent generate-and-test referees")


def test_criterion_7_desk_benchmark(queens_corpus):
    t0 = time.time()
    train_ds, dev_ds = queens_corpus["train"], queens_corpus["dev"]
    test_ds = queens_corpus["test"]
    strategies = ("naive", "ccloss", "minloss", "iexplr", "selectr")
    ms_acc = {s: [] for s in strategies}
    for seed in BENCH_SEEDS:
        for strategy in strategies:
            cfg = TrainConfig(strategy=strategy, seed=seed)
            res = training.train(cfg, train_ds, dev_ds)
            rep = evaluation.accuracy(res.net, res.state.best_theta, test_ds)
            ms_acc[strategy].append(rep.ms_accuracy)
    med = {s: statistics.median(v) for s, v in ms_acc.items()}
    for aware in ("ccloss", "minloss", "iexplr", "selectr"):
        assert med[aware] >= med["naive"] + 0.10, \
            f"{aware} median {med[aware]:.3f} vs naive {med['naive']:.3f}"
    assert med["selectr"] >= med["minloss"]
    detail = ", ".join(f"{s}={med[s]:.3f}" for s in strategies)
    _pass(7, time.time() - t0, 1800, f"median MS accuracy {detail}")


def test_criterion_8_determinism(tmp_path):
    t0 = time.time()
    gen_cfg = tmp_path / "gen.cfg"
    gen_cfg.write_text("kind = nqueens\nn = 4\nnum_masked = 14\n"
                       "n_train = 10\nn_dev = 4\nn_test = 4\nseed = 33\n"
                       "max_attempts = 4000\n")
    outs = [tmp_path / "g1", tmp_path / "g2"]
    for out in outs:
        assert cli.main(["gen", "--config", str(gen_cfg), "--out", str(out)]) == 0
    for name in ("train.jsonl", "dev.jsonl", "test.jsonl"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    train_cfg = tmp_path / "train.cfg"
    train_cfg.write_text(
        f"strategy = selectr\ntrain_data = {outs[0]}/train.jsonl\n"
        f"dev_data = {outs[0]}/dev.jsonl\nmax_updates = 20\neval_every = 5\n"
        "batch_size = 4\nhidden = 16\npretrain_updates = 10\n"
        "phi_pretrain_updates = 6\nsel_hidden = 8\nseed = 12\n")
    runs = [tmp_path / "r1", tmp_path / "r2"]
    for out in runs:
        assert cli.main(["train", "--config", str(train_cfg),
                         "--out", str(out)]) == 0
    assert (runs[0] / "metrics.jsonl").read_bytes() == \
        (runs[1] / "metrics.jsonl").read_bytes()
    assert (runs[0] / "theta.ckpt").read_bytes() == \
        (runs[1] / "theta.ckpt").read_bytes()
    _pass(8, time.time() - t0, 120,
          "regenerated datasets and re-run training logs are byte-identical")


SUDOKU_BINS = ((1, 1), (2, 2), (3, 3), (4, 50))


def test_criterion_9_monotone_degradation(sudoku_corpus):
    t0 = time.time()
    train_ds, dev_ds = sudoku_corpus["train"], sudoku_corpus["dev"]
    test_ds = sudoku_corpus["test"]
    cfg = TrainConfig(strategy="selectr", seed=1, hidden=(192, 192),
                      max_updates=8000, batch_size=64, patience=6,
                      eval_every=250, pretrain_updates=5000)
    res = training.train(cfg, train_ds, dev_ds)
    rep = evaluation.accuracy(res.net, res.state.best_theta, test_ds)
    rep = evaluation.bin_by_solution_count(rep, test_ds, edges=SUDOKU_BINS)
    accs = [b.accuracy for b in rep.bins
            if b.hi is not None and b.accuracy is not None]
    assert len(accs) >= 3, "need populated bins to assess the trend"
    inversions = sum(1 for a, b in zip(accs, accs[1:]) if b > a + 1e-12)
    assert inversions <= 1, f"bin accuracies {accs} invert more than once"
    _pass(9, time.time() - t0, 300,
          "bin accuracies " + ", ".join(f"{a:.3f}" for a in accs) +
          f" ({inversions} inversion(s) from the unique-solution bin up)")
