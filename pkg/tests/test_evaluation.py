import numpy as np
import pytest
import scipy.stats

from multisol import evaluation, puzzles, selection
from multisol.data import Dataset, QueryRecord
from multisol.errors import InputError
from multisol.evaluation import mcnemar
from multisol.network import Network
from multisol.puzzles import TaskSpec
from multisol.selection import Selector


TASK = TaskSpec.nqueens(4)
SOLS = puzzles.enumerate_solutions(TASK, puzzles.empty_query(TASK))


def rec_of(x, targets, total="auto"):
    return QueryRecord(task=TASK, x=np.asarray(x, dtype=np.int8),
                       targets=[np.asarray(t, dtype=np.int8) for t in targets],
                       total_solutions=len(targets) if total == "auto" else total)


def confident_net_params(net, y):
    """Parameters whose argmax prediction is exactly y for every input."""
    params = list(net.zero_params())
    W, b = params[-1]
    bias = b.reshape(net.r, net.v).copy()
    bias[np.arange(net.r), np.asarray(y, dtype=int) - 1] = 25.0
    params[-1] = (W, bias.reshape(-1))
    return tuple(params)


@pytest.fixture(scope="module")
def net():
    return Network(TASK, hidden=(8,), seed=0)


class TestAccuracy:
    def test_prediction_in_targets_counts(self, net):
        theta = confident_net_params(net, SOLS[0])
        ds = Dataset(records=[rec_of(np.zeros(16), SOLS, total=2)],
                     split="test", seed=0)
        rep = evaluation.accuracy(net, theta, ds)
        assert rep.overall == 1.0 and rep.ms_accuracy == 1.0

    def test_valid_outside_capped_targets_counts(self, net):
        # stored targets omit the predicted solution, yet it is valid
        theta = confident_net_params(net, SOLS[1])
        ds = Dataset(records=[rec_of(np.zeros(16), [SOLS[0]], total=2)],
                     split="test", seed=0)
        rep = evaluation.accuracy(net, theta, ds)
        assert rep.overall == 1.0

    def test_invalid_prediction_scores_zero(self, net):
        theta = net.zero_params()  # predicts all-ones: no queens, invalid
        ds = Dataset(records=[rec_of(np.zeros(16), SOLS, total=2)],
                     split="test", seed=0)
        rep = evaluation.accuracy(net, theta, ds)
        assert rep.overall == 0.0

    def test_givens_must_be_respected(self, net):
        theta = confident_net_params(net, SOLS[0])
        x = np.array(SOLS[1])           # fully-given query for the other board
        x[:8] = 0
        ds = Dataset(records=[rec_of(x, [SOLS[1]], total=1)], split="test", seed=0)
        rep = evaluation.accuracy(net, theta, ds)
        assert rep.overall == 0.0

    def test_overall_is_weighted_mean(self, net):
        theta = confident_net_params(net, SOLS[0])
        recs = [rec_of(np.zeros(16), SOLS, total=2),
                rec_of(np.array(SOLS[0]), [SOLS[0]], total=1),
                rec_of(np.array(SOLS[1]), [SOLS[1]], total=1)]
        rep = evaluation.accuracy(net, theta, Dataset(records=recs, split="t", seed=0))
        blended = (rep.os_accuracy * rep.os_count + rep.ms_accuracy * rep.ms_count) \
            / (rep.os_count + rep.ms_count)
        assert rep.overall == blended

    def test_order_invariant(self, net):
        theta = net.init_params(seed=4)
        recs = [rec_of(np.zeros(16), SOLS, total=2),
                rec_of(np.array(SOLS[0]), [SOLS[0]], total=1)]
        a = evaluation.accuracy(net, theta, Dataset(records=recs, split="t", seed=0))
        b = evaluation.accuracy(net, theta, Dataset(records=recs[::-1], split="t", seed=0))
        assert a.overall == b.overall

    def test_ms_classification_uses_total_not_stored(self, net):
        theta = confident_net_params(net, SOLS[0])
        recs = [rec_of(np.zeros(16), [SOLS[0]], total=2)]   # capped to 1 stored
        rep = evaluation.accuracy(net, theta, Dataset(records=recs, split="t", seed=0))
        assert rep.ms_count == 1 and rep.os_count == 0


class TestBinning:
    def test_single_bin_matches_overall(self, net):
        theta = confident_net_params(net, SOLS[0])
        recs = [rec_of(np.zeros(16), SOLS, total=2) for _ in range(3)]
        ds = Dataset(records=recs, split="t", seed=0)
        rep = evaluation.bin_by_solution_count(
            evaluation.accuracy(net, theta, ds), ds, edges=((1, 50),))
        assert rep.bins[0].accuracy == rep.overall
        assert rep.bins[0].count == 3

    def test_populations_partition(self, net):
        theta = net.init_params(seed=1)
        recs = [rec_of(np.zeros(16), SOLS, total=2),
                rec_of(np.array(SOLS[0]), [SOLS[0]], total=1),
                rec_of(np.zeros(16), SOLS, total=None)]
        ds = Dataset(records=recs, split="t", seed=0)
        rep = evaluation.bin_by_solution_count(
            evaluation.accuracy(net, theta, ds), ds)
        assert sum(b.count for b in rep.bins) == len(recs)

    def test_overflow_routing(self, net):
        theta = net.init_params(seed=1)
        recs = [rec_of(np.zeros(16), SOLS, total=None)]
        ds = Dataset(records=recs, split="t", seed=0)
        rep = evaluation.bin_by_solution_count(
            evaluation.accuracy(net, theta, ds), ds)
        assert rep.bins[-1].label == "overflow"
        assert rep.bins[-1].count == 1

    def test_empty_bin_has_null_accuracy(self, net):
        theta = net.init_params(seed=1)
        recs = [rec_of(np.array(SOLS[0]), [SOLS[0]], total=1)]
        ds = Dataset(records=recs, split="t", seed=0)
        rep = evaluation.bin_by_solution_count(
            evaluation.accuracy(net, theta, ds), ds)
        assert rep.bins[1].count == 0 and rep.bins[1].accuracy is None


class TestMcNemar:
    def test_identical_vectors(self):
        v = np.array([True, False, True])
        res = mcnemar(v, v)
        assert res.statistic == 0.0 and res.p_value == 1.0
        assert res.method == "degenerate"

    def test_spec_example_chi2(self):
        a = np.array([True] * 10 + [False] * 2 + [True] * 5)
        b = np.array([False] * 10 + [True] * 2 + [True] * 5)
        res = mcnemar(a, b, exact=False)
        assert res.statistic == pytest.approx(49 / 12, abs=1e-12)
        assert res.p_value == pytest.approx(
            scipy.stats.chi2.sf(49 / 12, df=1), abs=1e-12)
        assert res.p_value == pytest.approx(0.043, abs=5e-4)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        a = rng.random(100) < 0.7
        b = rng.random(100) < 0.6
        r1, r2 = mcnemar(a, b), mcnemar(b, a)
        assert r1.statistic == r2.statistic and r1.p_value == r2.p_value

    def test_exact_fallback_matches_binomial(self):
        a = np.array([True] * 8 + [False] * 3 + [True] * 4)
        b = np.array([False] * 8 + [True] * 3 + [True] * 4)
        res = mcnemar(a, b)
        assert res.method == "exact"
        expect = scipy.stats.binomtest(3, 11, 0.5).pvalue
        assert res.p_value == pytest.approx(expect, abs=1e-12)

    def test_chi2_used_for_large_counts(self):
        a = np.array([True] * 20 + [False] * 10 + [True] * 5)
        b = np.array([False] * 20 + [True] * 10 + [True] * 5)
        res = mcnemar(a, b)
        assert res.method == "chi2"
        assert res.p_value == pytest.approx(
            scipy.stats.chi2.sf(res.statistic, df=1), abs=1e-12)

    def test_p_in_unit_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a = rng.random(30) < 0.5
            b = rng.random(30) < 0.5
            res = mcnemar(a, b)
            assert 0 < res.p_value <= 1.0
            assert res.statistic >= 0

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            mcnemar([True, False], [True])


class TestExploratoryFraction:
    def test_iexplr_is_zero(self, net):
        theta = net.init_params(seed=6)
        recs = [rec_of(np.zeros(16), SOLS, total=2) for _ in range(4)]
        ds = Dataset(records=recs, split="t", seed=0)
        frac = evaluation.exploratory_fraction(
            lambda rec: selection.iexplr_distribution(net, theta, rec),
            theta, ds, net=net)
        assert frac == 0.0

    def test_singletons_are_zero(self, net):
        sel = Selector(net, hidden=6, seed=2)
        theta = net.init_params(seed=6)
        state = sel.init_state(theta, copyitr=1, seed=9)
        recs = [rec_of(np.array(SOLS[0]), [SOLS[0]], total=1) for _ in range(3)]
        ds = Dataset(records=recs, split="t", seed=0)
        assert evaluation.exploratory_fraction(sel, theta, ds, state=state) == 0.0

    def test_constructed_half(self, net):
        theta = net.init_params(seed=6)
        recs = [rec_of(np.zeros(16), SOLS, total=2) for _ in range(4)]
        ds = Dataset(records=recs, split="t", seed=0)
        flip = {0: 1, 1: 0}
        log_probs, _ = net.forward_records(theta, recs)
        greedy = []
        from multisol import losses as L
        for i in range(4):
            ce = L.cross_entropies(net, log_probs[i], recs[i].targets)
            greedy.append(int(np.argmin(ce)))
        calls = {"i": -1}

        def fn(rec):
            calls["i"] += 1
            i = calls["i"]
            d = np.zeros(2)
            d[greedy[i] if i % 2 == 0 else flip[greedy[i]]] = 1.0
            return d

        frac = evaluation.exploratory_fraction(fn, theta, ds, net=net)
        assert frac == 0.5
