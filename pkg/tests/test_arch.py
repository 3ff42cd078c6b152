from fractions import Fraction as Fr

import pytest
from hypothesis import given, strategies as st

from dagkernels.arch import (PRESETS, ArchDag, NodeRecord, ancestors, arch_string, build_dcnn,
                             build_mlp, build_scnn, common_ancestors, d_cnn, format_layers,
                             gap_layout, hr_cnn, mlp, parse_arch_string, parse_layers, preset,
                             validate_assumptions)
from dagkernels.dual import gaussian_dual, identity_dual
from dagkernels.indices import spatial_index

ACT = gaussian_dual(1.0)


def _path_to_root(dag, v):
    path = [v]
    while dag.parents[path[-1]]:
        (p,) = dag.parents[path[-1]]
        path.append(p)
    return path


def test_mlp_linked_list():
    dag = build_mlp(4, 256, ACT)
    assert len(dag.nodes) == 6
    assert dag.is_tree
    assert dag.n_inputs == 1 and dag.input_dims == (256,)
    assert dag.nodes[dag.input_nodes[0]].alpha == 1
    assert all(n.alpha == 0 for n in dag.nodes if n.kind != "input")
    assert dag.nodes[dag.output_node].activation.name == "identity"
    assert spatial_index(dag, list(dag.input_nodes) + [dag.output_node]) == 0
    assert arch_string(dag) == "[Input]->[Dense-Act]^4->[Dense]"


def test_mlp_invalid():
    with pytest.raises(ValueError):
        build_mlp(0, 16, ACT)
    with pytest.raises(ValueError):
        build_mlp(2, 1, ACT)


def test_dcnn_cnn4_layout():
    dag = build_dcnn(4, 4, 2, 4, activation=ACT, exponents=(Fr(1, 4),) * 3)
    assert dag.reference_dim == 256
    assert dag.n_inputs == 4 ** 2 * 4
    assert all(dv == 4 for dv in dag.input_dims)
    assert sum(dag.input_dims) == dag.reference_dim
    assert dag.is_tree
    assert validate_assumptions(dag).ok
    for v in dag.input_nodes:
        assert len(_path_to_root(dag, v)) <= 2 + 3 + 1


def test_dcnn_inexact_sizes_need_exponents():
    with pytest.raises(ValueError):
        build_dcnn(3, 2, 1, 2, activation=ACT)
    dag = build_dcnn(3, 2, 1, 2, activation=ACT, exponents=(Fr(1, 2), Fr(1, 4), Fr(1, 4)))
    assert dag.reference_dim == 12


def test_dcnn_dimension_mismatch():
    with pytest.raises(ValueError):
        build_dcnn(4, 4, 3, 4, activation=ACT, reference_dim=256)


def test_hr_cnn_preset():
    dag = hr_cnn(4, ACT)
    assert dag.reference_dim == 256
    assert arch_string(dag) == "[Input]->[Conv(4)-Act]^3->[Flatten-Dense-Act]->[Dense]"
    assert validate_assumptions(dag).ok


def test_scnn_is_dcnn_with_no_hidden_conv():
    s = build_scnn(4, 4, ACT)
    assert arch_string(s) == "[Input]->[Conv(4)-Act]->[Flatten-Dense]"
    assert s.nodes[s.output_node].activation.name == "identity"
    d = build_dcnn(4, 1, 0, 4, act_after_readout=False, activation=ACT,
                   exponents=(Fr(1, 2), Fr(0), Fr(1, 2)))
    assert arch_string(d) == arch_string(s)


@pytest.mark.parametrize("name", sorted(PRESETS))
@pytest.mark.parametrize("p", [2, 3, 4])
def test_presets_validate_and_round_trip(name, p):
    dag = preset(name, p, ACT)
    assert validate_assumptions(dag).ok
    s = arch_string(dag)
    ex = tuple(dag.nodes[u].alpha for u in range(len(dag.nodes)))
    back = parse_arch_string(s, dag.reference_dim, ACT)
    assert arch_string(back) == s
    assert parse_layers(format_layers(dag)) is not None
    assert ex is not None


@given(st.sampled_from([2, 3]), st.integers(1, 2), st.integers(0, 1), st.integers(0, 2),
       st.integers(0, 1))
def test_dcnn_builder_always_valid(q, a, b, L, c):
    p, k, w = q ** a, q ** b, q ** c
    dag = build_dcnn(p, k, L, w, activation=ACT)
    assert dag.reference_dim == p * k ** L * w
    assert dag.n_inputs == k ** L * w
    assert validate_assumptions(dag).ok
    assert dag.is_tree
    for v in dag.input_nodes:
        assert len(_path_to_root(dag, v)) <= L + 4


def _manual(children, alphas, dims, ref, kinds=None):
    n = len(children)
    kinds = kinds or ["input" if not c else "hidden" for c in children]
    kinds[-1] = "output"
    nodes = []
    for i in range(n):
        act = identity_dual() if kinds[i] in ("input", "output") else ACT
        nodes.append(NodeRecord(i, 0, kinds[i], Fr(alphas[i]), dims[i], act))
    return ArchDag(tuple(nodes), tuple(tuple(c) for c in children), n - 1, ref)


def test_validation_flags_skip_connection():
    # node 2 is first hidden; node 3 (layer two) also reads input 1 directly
    dag = _manual([(), (), (0,), (2, 1), (3,)], [Fr(1, 2), Fr(1, 2), 0, 0, 0],
                  [2, 2, 1, 2, 1], 4)
    rep = validate_assumptions(dag)
    assert not rep.ok
    assert any(c.name.startswith("G(c)") and not c.passed for c in rep.checks)


def test_validation_flags_degree():
    ref = 4
    kids = tuple(range(2 * ref))
    children = [()] * (2 * ref) + [kids, (2 * ref,)]
    dims = [1] * (2 * ref) + [2 * ref, 1]
    alphas = [Fr(1, 4)] * (2 * ref) + [0, 0]
    # input dims deliberately fine in total, the fan-in is not
    dag = _manual(children, alphas, dims, 2 * ref)
    rep = validate_assumptions(dag)
    assert any(c.name.startswith("G(a)") and not c.passed for c in rep.checks)


def test_ancestors():
    dag = mlp(3, ACT, depth=3)
    assert ancestors(dag, [dag.output_node]) == {dag.output_node}
    chain = {n.id for n in dag.nodes if n.kind != "input"}
    assert chain <= common_ancestors(dag, dag.input_nodes)
    with pytest.raises((KeyError, ValueError)):
        ancestors(dag, [999])


def test_same_patch_inputs_share_parent():
    dag = d_cnn(3, ACT)
    a, b = dag.input_nodes[:2]
    assert dag.parents[a] == dag.parents[b] or common_ancestors(dag, [a, b]) - {dag.output_node}


def test_gap_layout():
    dag = preset("hr_cnn_gap", 3, ACT)
    lay = gap_layout(dag)
    assert lay.width == 3
    assert lay.block_dim * lay.width == dag.reference_dim
    assert set(lay.head) <= {n.id for n in dag.nodes}
    with pytest.raises(ValueError):
        gap_layout(mlp(3, ACT))
