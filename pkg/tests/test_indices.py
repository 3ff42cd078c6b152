from fractions import Fraction as Fr
from itertools import combinations

import pytest
from hypothesis import given, strategies as st

from dagkernels.arch import build_dcnn, build_mlp, build_scnn, d_cnn, hr_cnn, mlp, preset
from dagkernels.dual import centered_exp_dual, gaussian_dual
from dagkernels.eigenfunctions import MODE_IDS, mode_multi_index
from dagkernels.indices import (IndexTriple, MultiIndex, brute_force_dimension, budget_partition,
                                eigenspace_dimension, index_triple, learnable, learning_sequence,
                                spatial_index, steiner_dp, tree_steiner)

ACT = gaussian_dual(1.0)


def _values(seq):
    return [lv.L for lv in seq]


def test_multi_index():
    r = MultiIndex({3: 2, 1: 0, 5: 1})
    assert r.support == (3, 5) or set(r.support) == {3, 5}
    assert r.degree == 3
    assert r[3] == 2 and r[1] == 0 and r[7] == 0
    with pytest.raises(ValueError):
        MultiIndex({0: -1})


def test_spatial_index_basics():
    dag = hr_cnn(4, ACT)
    assert spatial_index(dag, []) == 0
    assert spatial_index(dag, [dag.input_nodes[5]]) == 0
    m = build_mlp(3, 64, ACT)
    assert spatial_index(m, list(m.input_nodes) + [m.output_node]) == 0
    r = mode_multi_index("Y2", dag, 4)
    assert spatial_index(dag, list(r.support) + [dag.output_node]) == Fr(3, 4)


def test_index_triples_from_table():
    h = hr_cnn(4, ACT)
    assert index_triple(h, mode_multi_index("Y2", h, 4)) == IndexTriple(Fr(3, 4), Fr(2, 4), Fr(5, 4))
    assert index_triple(h, mode_multi_index("Y5", h, 4)) == IndexTriple(Fr(6, 4), Fr(2, 4), Fr(8, 4))
    m = mlp(4, ACT)
    assert index_triple(m, mode_multi_index("Y1", m, 4)) == IndexTriple(Fr(0), Fr(1), Fr(1))


def test_learnability():
    m = mlp(3, ACT)
    assert learnable(m, {m.input_nodes[0]: 3})
    s = build_scnn(4, 4, ACT)
    a, b = s.input_nodes[:2]
    assert not learnable(s, {a: 1, b: 1})
    assert learnable(s, {a: 2})
    assert index_triple(s, {a: 1, b: 1}).L == float("inf")
    d = d_cnn(3, ACT)
    assert learnable(d, {d.input_nodes[0]: 1, d.input_nodes[-1]: 2})
    with pytest.raises(ValueError):
        learnable(d, {})


def test_learning_sequences():
    assert _values(learning_sequence(mlp(3, ACT), 5)) == [1, 2, 3, 4, 5]
    vals = _values(learning_sequence(hr_cnn(4, ACT), 4, Fr(3)))
    assert Fr(5, 4) in vals and Fr(6, 4) in vals
    assert vals == sorted(set(vals))
    for name in ("mlp", "d_cnn", "hr_cnn", "s_cnn", "hr_cnn_gap"):
        assert min(_values(learning_sequence(preset(name, 3, ACT), 3))) == 1


@pytest.mark.parametrize("p", [2, 3, 4])
def test_mlp_depth_invariance(p):
    ref = _values(learning_sequence(build_mlp(1, p ** 4, ACT), 6))
    for depth in (2, 4, 7):
        assert _values(learning_sequence(build_mlp(depth, p ** 4, ACT), 6)) == ref


def test_refinement_superset():
    coarse = set(_values(learning_sequence(d_cnn(4, ACT), 4, Fr(3))))
    fine = set(_values(learning_sequence(hr_cnn(4, ACT), 6, Fr(3))))
    assert coarse <= fine


def test_budget_partition():
    h = hr_cnn(4, ACT)
    learn, not_learn = budget_partition(h, Fr(228, 100), 6)
    assert all(lv.L < Fr(228, 100) for lv in learn)
    assert all(lv.L > Fr(228, 100) for lv in not_learn)
    Ls = {m: index_triple(h, mode_multi_index(m, h, 4)).L for m in MODE_IDS}
    assert all(Ls[m] < Fr(228, 100) for m in MODE_IDS if m != "Y7")
    assert Ls["Y7"] == Fr(10, 4)
    m = mlp(4, ACT)
    learn, _ = budget_partition(m, Fr(228, 100), 5)
    assert sorted(lv.L for lv in learn) == [1, 2]
    learn, _ = budget_partition(m, Fr(1, 2), 5)
    assert learn == [] or len(learn) == 0
    with pytest.raises(ValueError):
        budget_partition(h, Fr(5, 4), 4)


def test_eigenspace_dimension_mlp():
    assert eigenspace_dimension(build_mlp(2, 81, ACT), 1) == 81


def test_eigenspace_dimension_vs_brute_force():
    dag = build_dcnn(2, 2, 1, 1, activation=ACT)
    seen = set()
    for r in range(1, 5):
        for L in {index_triple(dag, {v: r}).L for v in dag.input_nodes}:
            seen.add(L)
    for L in sorted(x for x in seen if x <= Fr(4) * min(dag.nodes[v].alpha for v in dag.input_nodes)):
        assert eigenspace_dimension(dag, L) == brute_force_dimension(dag, L, 4)


def test_tree_steiner_equals_dp():
    for name in ("d_cnn", "hr_cnn", "s_cnn", "mlp"):
        dag = preset(name, 2, ACT)
        ins = list(dag.input_nodes)
        for k in range(1, min(4, len(ins)) + 1):
            for sub in combinations(ins, k):
                nodes = list(sub) + [dag.output_node]
                assert tree_steiner(dag, nodes) == steiner_dp(dag, nodes)


@given(st.data())
def test_index_invariants(data):
    dag = hr_cnn(3, centered_exp_dual(1.0))
    ins = list(dag.input_nodes)
    sup = data.draw(st.lists(st.sampled_from(ins), min_size=1, max_size=4, unique=True))
    r = {v: data.draw(st.integers(1, 3)) for v in sup}
    tri = index_triple(dag, r)
    assert tri.L == tri.S + tri.F
    assert tri.F == sum(k * dag.nodes[v].alpha for v, k in r.items())
    # raising a degree never lowers F, adding a node never lowers S
    v0 = sup[0]
    bumped = dict(r)
    bumped[v0] += 1
    assert index_triple(dag, bumped).F >= tri.F
    extra = data.draw(st.sampled_from(ins))
    base = list(sup) + [dag.output_node]
    assert spatial_index(dag, base + [extra]) >= spatial_index(dag, base)
