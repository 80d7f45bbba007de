import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocnna import layers as L
from ocnna.graph import ModelGraph, count_parameters, infer_shapes, tensors_equal
from ocnna.inference import forward_all, predict
from ocnna.pruner import (PruneConfig, PrunePlan, apply_prune, keep_all_plan, ocnna, plan_prune,
                          prune_manifest, score_model, select_all)
from ocnna.scoring import ImportanceReport, select_filters
from factories import random_chain_model, random_dataset


def report(mask, idx=None):
    mask = np.asarray(mask, dtype=bool)
    return ImportanceReport(idx, mask.astype(float), mask, 0.0, 0.0)


def conv(rng, cin, cout, padding="same"):
    return L.conv2d(rng.standard_normal((3, 3, cin, cout)).astype(np.float32),
                    rng.standard_normal(cout).astype(np.float32), 1, padding)


def test_keep_everything_is_identity():
    rng = np.random.default_rng(0)
    g = random_chain_model(rng, hidden=5)
    reports = [select_filters(rng.random(g.layers[i].filters), 0, i) for i in g.conv_indices()]
    out = apply_prune(g, plan_prune(g, reports))
    assert tensors_equal(g, out)
    assert tensors_equal(g, apply_prune(g, keep_all_plan(g)))


def test_flatten_rows_follow_kept_channels():
    rng = np.random.default_rng(1)
    g = ModelGraph("f", (2, 2, 1), [conv(rng, 1, 4), L.relu(), L.flatten(),
                                     L.dense(rng.standard_normal((16, 3)).astype(np.float32), np.zeros(3, np.float32))])
    plan = plan_prune(g, [report([1, 0, 1, 0])])
    # NHWC flatten: row = (h * 2 + w) * 4 + c for the 2x2 grid, channels 0 and 2
    assert plan.kept_in[3] == [0, 2, 4, 6, 8, 10, 12, 14]
    out = apply_prune(g, plan)
    np.testing.assert_array_equal(out.layers[3].params["weights"], g.layers[3].params["weights"][[0, 2, 4, 6, 8, 10, 12, 14]])


def test_stacked_convs_slice_inputs():
    rng = np.random.default_rng(2)
    g = ModelGraph("s", (5, 5, 2), [conv(rng, 2, 3), L.relu(), conv(rng, 3, 4)])
    plan = plan_prune(g, [report([0, 1, 0]), report([1, 1, 1, 1])])
    out = apply_prune(g, plan)
    k2 = out.layers[2].params["kernel"]
    assert k2.shape == (3, 3, 1, 4)
    assert k2.tobytes() == np.ascontiguousarray(g.layers[2].params["kernel"][:, :, 1:2, :]).tobytes()


def test_conv_output_slicing():
    rng = np.random.default_rng(3)
    g = ModelGraph("c", (4, 4, 2), [conv(rng, 2, 4)])
    out = apply_prune(g, plan_prune(g, [report([0, 1, 0, 1])]))
    k = out.layers[0].params["kernel"]
    assert k.shape == (3, 3, 2, 2)
    np.testing.assert_array_equal(k[..., 0], g.layers[0].params["kernel"][..., 1])
    np.testing.assert_array_equal(k[..., 1], g.layers[0].params["kernel"][..., 3])
    np.testing.assert_array_equal(out.layers[0].params["bias"], g.layers[0].params["bias"][[1, 3]])


def test_batchnorm_moves_with_its_conv():
    rng = np.random.default_rng(4)
    g = random_chain_model(rng, batchnorm=True)
    assert g.layers[1].kind == "batchnorm"
    m = g.layers[0].filters
    mask = np.zeros(m, bool)
    mask[[0, m - 1]] = True
    reports = [report(mask)] + [report(np.ones(g.layers[i].filters)) for i in g.conv_indices()[1:]]
    out = apply_prune(g, plan_prune(g, reports))
    for name in ("gamma", "beta", "mean", "var"):
        np.testing.assert_array_equal(out.layers[1].params[name], g.layers[1].params[name][[0, m - 1]])


def test_plan_errors():
    rng = np.random.default_rng(5)
    g = random_chain_model(rng)
    convs = g.conv_indices()
    with pytest.raises(ValueError, match="reports"):
        plan_prune(g, [report(np.ones(g.layers[convs[0]].filters))])
    with pytest.raises(ValueError, match="filters"):
        plan_prune(g, [report([1]), report([1])])
    wrong = [report(np.ones(g.layers[i].filters), idx=i + 1) for i in convs]
    with pytest.raises(ValueError, match="expected"):
        plan_prune(g, wrong)
    with pytest.raises(ValueError, match="no filters"):
        plan_prune(g, [report(np.zeros(g.layers[i].filters)) for i in convs])


def test_inconsistent_plan_rejected():
    rng = np.random.default_rng(6)
    g = random_chain_model(rng)
    plan = keep_all_plan(g)
    dense_idx = max(plan.kept_in)
    bad = PrunePlan(plan.kept_out, dict(plan.kept_in))
    bad.kept_in[dense_idx] = plan.kept_in[dense_idx][:-1]
    with pytest.raises(ValueError, match="inconsistent"):
        apply_prune(g, bad)
    unsorted = PrunePlan({**plan.kept_out, g.conv_indices()[0]: [1, 0]}, plan.kept_in)
    with pytest.raises(ValueError, match="ascending"):
        apply_prune(g, unsorted)


def _source_lookup(g, out, plan):
    """Check every pruned tensor element against the original through the plan's index lists."""
    for i, (a, b) in enumerate(zip(g.layers, out.layers)):
        if a.kind == "conv2d":
            kin, kout = plan.kept_in[i], plan.kept_out[i]
            for ci, c in enumerate(kin):
                for oi, o in enumerate(kout):
                    assert np.array_equal(b.params["kernel"][:, :, ci, oi], a.params["kernel"][:, :, c, o])
            assert np.array_equal(b.params["bias"], a.params["bias"][kout])
        elif a.kind == "dense":
            for ri, r in enumerate(plan.kept_in[i]):
                assert b.params["weights"][ri].tobytes() == a.params["weights"][r].tobytes()
        elif a.kind == "batchnorm":
            for name in a.params:
                assert b.params[name].tobytes() == a.params[name][plan.kept_in[i]].tobytes()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 99))
def test_pruned_weights_come_from_original(seed, k):
    rng = np.random.default_rng(seed)
    g = random_chain_model(rng, hidden=4)
    reports = [select_filters(rng.random(g.layers[i].filters), k, i) for i in g.conv_indices()]
    plan = plan_prune(g, reports)
    out = apply_prune(g, plan)
    infer_shapes(out)
    _source_lookup(g, out, plan)
    forward_all(out, random_dataset(rng, n=3))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 99), st.floats(0, 99))
def test_parameter_count_monotone_in_k(seed, k1, k2):
    rng = np.random.default_rng(seed)
    g = random_chain_model(rng)
    scores = {i: rng.random(g.layers[i].filters) for i in g.conv_indices()}
    lo, hi = sorted((k1, k2))
    n_lo = count_parameters(apply_prune(g, plan_prune(g, select_all(scores, PruneConfig(k=lo)))))
    n_hi = count_parameters(apply_prune(g, plan_prune(g, select_all(scores, PruneConfig(k=hi)))))
    assert n_hi <= n_lo


def test_ocnna_k0_is_functionally_identical():
    rng = np.random.default_rng(7)
    g = random_chain_model(rng, hidden=6)
    d_var, test = random_dataset(rng, n=12), random_dataset(rng, n=40)
    pruned, reports = ocnna(g, d_var, PruneConfig(k=0))
    assert count_parameters(pruned) == count_parameters(g)
    assert np.array_equal(predict(pruned, test), predict(g, test))
    assert len(reports) == len(g.conv_indices())


def test_ocnna_k90_smaller_than_k40():
    rng = np.random.default_rng(8)
    g = random_chain_model(rng)
    d_var = random_dataset(rng, n=10)
    a, _ = ocnna(g, d_var, PruneConfig(k=40))
    b, _ = ocnna(g, d_var, PruneConfig(k=90))
    assert count_parameters(b) < count_parameters(a)


def test_ocnna_is_deterministic_and_composed():
    rng = np.random.default_rng(9)
    g = random_chain_model(rng)
    d_var = random_dataset(rng, n=10)
    cfg = PruneConfig(k=50, workers=3)
    a, ra = ocnna(g, d_var, cfg)
    b, _ = ocnna(g, d_var, PruneConfig(k=50))
    assert tensors_equal(a, b)
    by_hand = apply_prune(g, plan_prune(g, select_all(score_model(g, d_var), cfg)))
    assert tensors_equal(a, by_hand)


def test_per_layer_k_override():
    rng = np.random.default_rng(10)
    g = random_chain_model(rng)
    first, second = g.conv_indices()
    pruned, reports = ocnna(g, random_dataset(rng, n=8), PruneConfig(k=0, layer_k={second: 99}))
    assert pruned.layers[first].filters == g.layers[first].filters
    assert pruned.layers[second].filters == 1


def test_prune_config_validation():
    with pytest.raises(ValueError):
        PruneConfig(k=100)
    with pytest.raises(ValueError):
        PruneConfig(workers=0)
    with pytest.raises(ValueError):
        PruneConfig(capture_policy="pre-activation")


def test_manifest_contents():
    rng = np.random.default_rng(11)
    g = random_chain_model(rng)
    pruned, reports = ocnna(g, random_dataset(rng, n=8), PruneConfig(k=50))
    man = prune_manifest(g, pruned, reports)
    assert man["np_original"] == count_parameters(g)
    assert man["np_pruned"] == count_parameters(pruned)
    assert man["rpr"] == pytest.approx(man["np_pruned"] / man["np_original"])
    for entry, idx in zip(man["layers"], g.conv_indices()):
        assert entry["layer_index"] == idx
        assert entry["filters_after"] == pruned.layers[idx].filters == len(entry["kept"])
