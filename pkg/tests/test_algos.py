"""Tests for the offline estimators, cache baselines, and streaming learner."""

import math

import numpy as np
import pytest

from offcmab.core import Action, Dataset, OfflineRecord
from offcmab.algos import (
    ALGORITHM_IDS,
    CLCB,
    CLCBCascade,
    CLCBIMN,
    CLCBLLMC,
    CLCBLLMStd,
    CUCBLLMStream,
    CUCBOffline,
    EMP,
    LEC,
    LFU,
    make_algorithm,
)
from offcmab.envs import (
    CacheDataset,
    CacheInstance,
    CacheRecord,
    IcInstance,
    ic_generate,
)
from offcmab.oracles import WeightedGraph, top_k


def _single(arm: int, value: float) -> OfflineRecord:
    return OfflineRecord(Action.of_list([arm]), frozenset({arm}), {arm: value})


def _two_arm_dataset() -> Dataset:
    # arm 0: mean 0.6 over 18 observations; arm 1: mean 0.9 over 2
    recs = [_single(0, 0.6) for _ in range(18)] + [_single(1, 0.9), _single(1, 0.9)]
    return Dataset(recs, m=2)


def _pick_one(weights: np.ndarray) -> Action:
    return top_k(weights, 1, "max")


def test_clcb_prefers_well_observed_arm():
    est = CLCB(oracle=_pick_one, delta=0.05).fit(_two_arm_dataset())
    assert est.action_.members == (0,)
    assert est.diagnostics_["counts"].tolist() == [18, 2]


def test_cucb_and_emp_prefer_lucky_arm():
    ds = _two_arm_dataset()
    assert CUCBOffline(oracle=_pick_one, delta=0.05).fit(ds).action_.members == (1,)
    assert EMP(oracle=_pick_one).fit(ds).action_.members == (1,)


def test_clcb_never_selects_unobserved_arm():
    ds = Dataset([_single(0, 0.1) for _ in range(5)], m=3)
    est = CLCB(oracle=lambda w: top_k(w, 2, "max")).fit(ds)
    # arms 1 and 2 are unobserved (-inf) but the oracle must take two arms;
    # the observed arm is always kept first
    assert 0 in est.action_
    assert est.diagnostics_["weights"][1] == -math.inf


def test_emp_unobserved_value():
    ds = Dataset([_single(0, 0.1) for _ in range(5)], m=2)
    assert EMP(oracle=_pick_one).fit(ds).action_.members == (0,)
    est = EMP(oracle=_pick_one, unobserved_value=0.5).fit(ds)
    assert est.action_.members == (1,)


def test_estimators_reject_empty_dataset():
    with pytest.raises(ValueError):
        CLCB(oracle=_pick_one).fit(Dataset([], m=2))


def test_clcb_cascade_orders_by_lcb():
    recs = (
        [_single(0, 0.9) for _ in range(50)]
        + [_single(1, 0.5) for _ in range(50)]
        + [_single(2, 0.95)]
    )
    est = CLCBCascade(K=2, delta=0.05).fit(Dataset(recs, m=3))
    # arm 2 has a high mean but a huge radius; the ranked list is by LCB
    assert est.action_.kind == "list"
    assert est.action_.members == (0, 1)
    w = est.diagnostics_["weights"]
    assert w[est.action_.members[0]] >= w[est.action_.members[1]]


def _cache_dataset() -> CacheDataset:
    # m=3: query 0 arrives 4 times (cost 0.2), query 1 twice (cost 0.9),
    # query 2 once but its cost is hidden by a hit
    recs = (
        [CacheRecord(frozenset(), 0, 0.2) for _ in range(4)]
        + [CacheRecord(frozenset(), 1, 0.9) for _ in range(2)]
        + [CacheRecord(frozenset({2}), 2, None)]
    )
    return CacheDataset(recs, m=3)


def test_lfu_ranks_by_arrivals():
    est = LFU(k=2).fit(_cache_dataset())
    assert est.action_.members == (0, 1)


def test_lec_hidden_cost_counts_as_zero():
    est = LEC(k=1).fit(_cache_dataset())
    # p*c: 0 -> (4/7)*0.2 = 0.114, 1 -> (2/7)*0.9 = 0.257, 2 -> 0
    assert est.action_.members == (1,)
    assert est.diagnostics_["weights"][2] == 0.0


def test_lec_all_unobserved_fills_lowest_ids():
    recs = [CacheRecord(frozenset({0}), 0, None), CacheRecord(frozenset({1}), 1, None)]
    est = LEC(k=2).fit(CacheDataset(recs, m=4))
    assert est.action_.members == (0, 1)


def test_clcb_llm_c_weight_definition():
    est = CLCBLLMC(k=1, delta=0.05).fit(_cache_dataset())
    w = est.diagnostics_["weights"]
    n, m = 7, 3
    log_term = math.log(4 * m * n / 0.05)
    assert w[0] == pytest.approx((4 / 7) * (0.2 + math.sqrt(2 * log_term / 4)))
    assert w[1] == pytest.approx((2 / 7) * (0.9 + math.sqrt(2 * log_term / 2)))
    # arrived but never processed: cost UCB is infinite
    assert w[2] == math.inf
    # never arrived at all: weight pinned to 0, not NaN
    recs = [CacheRecord(frozenset(), 0, 0.5)]
    est = CLCBLLMC(k=1).fit(CacheDataset(recs, m=2))
    assert est.diagnostics_["weights"][1] == 0.0


def test_clcb_llm_std_bonus_on_arrivals():
    est = CLCBLLMStd(k=1, delta=0.05).fit(_cache_dataset())
    d = est.diagnostics_
    n, m = 7, 3
    log_term = math.log(4 * m * n / 0.05)
    bonus = math.sqrt(2 * log_term / n)
    assert d["p_bar"][0] == pytest.approx(4 / 7 + bonus)
    # a never-arrived query keeps an infinite weight under the std variant
    recs = [CacheRecord(frozenset(), 0, 0.5)]
    est = CLCBLLMStd(k=1).fit(CacheDataset(recs, m=2))
    assert est.diagnostics_["weights"][1] == math.inf


def test_clcb_im_n_recovers_strong_edges():
    g = WeightedGraph(4, ((0, 1, 0.9), (0, 2, 0.9), (3, 1, 0.1)))
    inst = IcInstance(g, seed_probs=(0.5, 0.4, 0.4, 0.5))
    casc = ic_generate(inst, n=30000, seed=0)
    est = CLCBIMN(
        edges=[(0, 1), (0, 2), (3, 1)], n_nodes=4, k=1, delta=0.1, exact_oracle=True
    ).fit(casc)
    lcbs = est.diagnostics_["edge_lcbs"]
    assert est.action_.members == (0,)
    # the LCBs stay below the true weights and preserve the strong/weak order
    assert (lcbs <= np.array([0.9, 0.9, 0.1]) + 1e-9).all()
    assert lcbs[0] > lcbs[2]


def test_clcb_im_n_small_sample_lcbs_are_conservative():
    g = WeightedGraph(3, ((0, 1, 0.5), (1, 2, 0.5)))
    inst = IcInstance(g, seed_probs=(0.5, 0.5, 0.5))
    casc = ic_generate(inst, n=20, seed=1)
    lcbs = CLCBIMN(edges=[(0, 1), (1, 2)], n_nodes=3, k=1, delta=0.1).edge_lcbs(casc)
    assert (lcbs >= 0.0).all() and (lcbs <= 0.5).all()


def test_streaming_cache_fill_then_replace():
    alg = CUCBLLMStream(m=3, k=1)
    assert alg.step(0, 0.2) is False  # miss fills the empty slot
    assert alg.cache == {0}
    assert alg.step(0, None) is True  # hit consumes no cost
    # repeated expensive misses of query 1 lift its cost LCB until it
    # evicts the cheap cached query
    for _ in range(500):
        alg.step(1, 1.0)
    assert alg.cache == {1}


def test_streaming_cache_requires_cost_on_miss():
    alg = CUCBLLMStream(m=2, k=1)
    with pytest.raises(ValueError):
        alg.step(0, None)


def test_streaming_cache_tracks_top_k_weights():
    inst = CacheInstance(
        m=5, p=(0.4, 0.25, 0.15, 0.1, 0.1), c=(0.9, 0.2, 0.7, 0.4, 0.6), k=2,
        noise="bernoulli",
    )
    alg = CUCBLLMStream(m=5, k=2)
    rng = np.random.default_rng(0)
    p = np.asarray(inst.p)
    for t in range(400):
        q = int(rng.choice(5, p=p))
        cost = None if q in alg.cache else inst.sample_cost(q, rng)
        alg.step(q, cost)
        if len(alg.cache) < alg.k:
            continue
        w = alg.weights
        cached = list(alg.cache)
        uncached = [j for j in range(5) if j not in alg.cache]
        assert min(w[cached]) >= max(w[uncached]) - 1e-12


def test_streaming_run_regret_trace():
    inst = CacheInstance(m=4, p=(0.4, 0.3, 0.2, 0.1), c=(0.9, 0.1, 0.8, 0.2), k=2,
                         noise="none")
    trace = CUCBLLMStream(m=4, k=2).run(inst, T=300, seed=5)
    assert trace.shape == (300,)
    assert (trace >= -1e-12).all()
    # the learner should settle on the optimal cache eventually
    assert trace[-50:].mean() < trace[:50].mean()


def test_make_algorithm_registry():
    assert len(ALGORITHM_IDS) == 10
    assert isinstance(make_algorithm("lfu", k=2), LFU)
    assert isinstance(make_algorithm("cucb-llm-s", m=3, k=1), CUCBLLMStream)
    with pytest.raises(ValueError):
        make_algorithm("dqn")
