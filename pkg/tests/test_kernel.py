import math
import struct
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dagkernels.arch import build_dcnn, build_mlp, build_scnn, d_cnn, gap_layout, hr_cnn, preset
from dagkernels.dual import centered_exp_dual, gaussian_dual, identity_dual
from dagkernels.eigenfunctions import mode_multi_index
from dagkernels.indices import index_triple
from dagkernels.kernel import (KernelMatrix, derivative_at_zero, eigenvalue_estimate,
                               kernel_array, kernel_matrix, nngp_eval, nngp_gap_eval, ntk_eval,
                               ntk_gap_eval, with_dual)
from dagkernels.regression import sample_inputs

G = gaussian_dual(1.0)
CE = centered_exp_dual(1.0)


def _points(dag, m, seed=0):
    p = dag.input_dims[0]
    return sample_inputs(m, dag.reference_dim // p, p, seed).X


# -- pointwise recursions ---------------------------------------------------------------
@given(st.floats(-1, 1))
def test_mlp_depth2_nngp(t):
    dag = build_mlp(2, 16, G)
    assert nngp_eval(dag, [t]) == pytest.approx(G(G(t)), rel=1e-14)


@given(st.floats(-1, 1))
def test_mlp_depth1_ntk(t):
    dag = build_mlp(1, 16, G)
    assert ntk_eval(dag, [t]) == pytest.approx(G(t) + t * G.deriv(t), rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("name", ["mlp", "d_cnn", "hr_cnn", "s_cnn"])
def test_all_ones_fixed_point(name):
    dag = preset(name, 3, G)
    assert nngp_eval(dag, np.ones(dag.n_inputs)) == pytest.approx(1.0, abs=1e-14)


@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_scnn_closed_forms(ts):
    dag = build_scnn(4, 4, G)
    t = np.array(ts)
    assert nngp_eval(dag, t) == pytest.approx(np.mean(G(t)), rel=1e-13, abs=1e-15)
    # general recursion keeps the t_v factor
    assert ntk_eval(dag, t) == pytest.approx(np.mean(G(t) + t * G.deriv(t)), rel=1e-12, abs=1e-14)


def test_eval_errors():
    dag = d_cnn(2, G)
    with pytest.raises(KeyError):
        nngp_eval(dag, {0: 0.1})
    with pytest.raises(ValueError):
        nngp_eval(dag, [1.5, 0, 0, 0])
    with pytest.raises(ValueError):
        nngp_eval(preset("hr_cnn_gap", 2, G), np.zeros(8))


@given(st.integers(0, 7), st.floats(-1, 1), st.floats(0, 0.5))
def test_monotone_in_each_coordinate(v, base, step):
    dag = hr_cnn(2, G)
    t = np.full(dag.n_inputs, base)
    s = t.copy()
    s[v] = min(1.0, s[v] + step)
    assert nngp_eval(dag, s) >= nngp_eval(dag, t) - 1e-15
    assert ntk_eval(dag, s) >= ntk_eval(dag, t) - 1e-15


# -- GAP ---------------------------------------------------------------------------------
def test_gap_width_one_equals_flatten():
    kw = dict(activation=G, act_after_readout=False)
    gap = build_dcnn(3, 3, 1, 1, readout="gap", **kw)
    flat = build_dcnn(3, 3, 1, 1, readout="flatten", **kw)
    X = _points(flat, 30)
    for kind in ("nngp", "ntk"):
        np.testing.assert_allclose(kernel_array(gap, None, kind, X),
                                   kernel_array(flat, None, kind, X), rtol=1e-14, atol=1e-15)


def test_gap_translation_invariance():
    dag = preset("hr_cnn_gap", 3, G)
    lay = gap_layout(dag)
    X = _points(dag, 6, seed=1)
    Y = _points(dag, 5, seed=2)
    shifted = np.roll(X, lay.block_dim, axis=1)
    for kind in ("nngp", "ntk"):
        np.testing.assert_allclose(kernel_array(dag, None, kind, shifted, Y),
                                   kernel_array(dag, None, kind, X, Y), rtol=1e-13)


def test_gap_diagonal_below_flatten():
    dag = preset("hr_cnn_gap", 3, G)
    lay = gap_layout(dag)
    X = _points(dag, 5, seed=3)
    diag = np.diag(kernel_array(dag, None, "nngp", X))
    assert np.all(diag < 1.0)
    block = X[:1, :lay.block_dim]
    same = np.tile(block, (1, lay.width))
    assert kernel_array(dag, None, "nngp", same)[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_gap_pointwise_matches_matrix():
    dag = preset("hr_cnn_gap", 2, G)
    lay = gap_layout(dag)
    X = _points(dag, 2, seed=4)
    w = lay.width
    nin = dag.n_inputs // w
    pd = dag.input_dims[0]
    P = X.reshape(2, w, nin, pd)
    T = np.einsum("uik,vik->uvi", P[0], P[1]) / pd
    km = kernel_array(dag, None, "nngp", X[:1], X[1:])[0, 0]
    assert nngp_gap_eval(dag, T) == pytest.approx(km, rel=1e-13)
    tm = kernel_array(dag, None, "ntk", X[:1], X[1:])[0, 0]
    assert ntk_gap_eval(dag, T) == pytest.approx(tm, rel=1e-13)
    with pytest.raises(ValueError):
        nngp_gap_eval(hr_cnn(2, G), T)


# -- matrices ----------------------------------------------------------------------------
@pytest.mark.parametrize("name", ["mlp", "d_cnn", "hr_cnn", "hr_cnn_gap"])
def test_matrix_properties(name):
    dag = preset(name, 3, G)
    X = _points(dag, 200, seed=5)
    for kind in ("nngp", "ntk"):
        K = kernel_matrix(dag, None, kind, X)
        A = np.asarray(K)
        assert np.array_equal(A, A.T)
        ev = np.linalg.eigvalsh(A)
        assert ev.min() >= -1e-8 * np.trace(A)
        if kind == "nngp" and name != "hr_cnn_gap":
            np.testing.assert_allclose(np.diag(A), 1.0, atol=1e-13)


def test_single_point_matrix():
    dag = d_cnn(2, G)
    X = _points(dag, 1)
    assert np.asarray(kernel_matrix(dag, None, "nngp", X)).tolist() == [[pytest.approx(1.0)]]


def test_matrix_matches_pointwise():
    dag = d_cnn(2, CE)
    X, Y = _points(dag, 4, 1), _points(dag, 3, 2)
    A = kernel_array(dag, None, "ntk", X, Y)
    for i, j in product(range(4), range(3)):
        t = (X[i].reshape(-1, 4) * Y[j].reshape(-1, 4)).sum(1) / 4
        assert A[i, j] == pytest.approx(ntk_eval(dag, t), rel=1e-13)


def test_matrix_input_errors():
    dag = d_cnn(2, G)
    X = _points(dag, 3)
    with pytest.raises(ValueError):
        kernel_array(dag, None, "nngp", X * 1.001)
    with pytest.raises(ValueError):
        kernel_array(dag, None, "nngp", X[:, :8])
    with pytest.raises(ValueError):
        kernel_array(dag, None, "rbf", X)


def test_kernel_matrix_immutable_and_metadata():
    dag = d_cnn(2, G)
    K = kernel_matrix(dag, G, "ntk", _points(dag, 3))
    assert K.kind == "ntk" and K.readout == "flatten"
    with pytest.raises(ValueError):
        K.values[0, 0] = 2.0


def test_nkrm_round_trip(tmp_path):
    dag = d_cnn(2, G)
    X, Y = _points(dag, 3, 1), _points(dag, 2, 2)
    K = kernel_matrix(dag, None, "nngp", X, Y)
    path = tmp_path / "k.nkrm"
    K.save(path)
    raw = path.read_bytes()
    assert raw[:4] == b"NKRM"
    version, rows = struct.unpack("<IQ", raw[4:16])
    assert (version, rows) == (1, 3)
    assert len(raw) == 16 + 3 * 2 * 8
    np.testing.assert_array_equal(np.frombuffer(raw[16:], "<f8").reshape(3, 2), K.values)
    L = KernelMatrix.load(path)
    np.testing.assert_array_equal(L.values, K.values)


def test_with_dual_swaps_activations():
    dag = d_cnn(2, G)
    d2 = with_dual(dag, CE)
    assert {n.activation.name for n in d2.nodes if n.kind == "hidden"} == {"centered_exp"}


# -- derivatives ---------------------------------------------------------------------------
def test_identity_mlp_derivatives():
    dag = build_mlp(3, 16, identity_dual())
    assert derivative_at_zero(dag, None, "nngp", {0: 1}) == pytest.approx(1.0)
    assert derivative_at_zero(dag, None, "nngp", {0: 2}) == 0.0


@pytest.mark.parametrize("r", [1, 2, 3, 5, 8])
def test_depth1_centered_exp_derivatives(r):
    dag = build_mlp(1, 16, CE)
    assert derivative_at_zero(dag, None, "nngp", {0: r}) == pytest.approx(1 / (math.e - 1), rel=1e-12)


def _fd_derivative(f, n_vars, r, h):
    # tensor product of central stencils for orders 1 and 2
    stencils = {0: [(0, 1.0)], 1: [(-1, -0.5), (1, 0.5)], 2: [(-1, 1.0), (0, -2.0), (1, 1.0)]}
    total = 0.0
    keys = sorted(r)
    for combo in product(*(stencils[r[k]] for k in keys)):
        t = np.zeros(n_vars)
        w = 1.0
        for k, (off, c) in zip(keys, combo):
            t[k] = off * h
            w *= c
        total += w * f(t)
    return total / h ** sum(r.values())


@pytest.mark.parametrize("kind", ["nngp", "ntk"])
def test_derivatives_match_finite_differences(kind):
    dag = build_dcnn(2, 2, 1, 2, activation=CE)
    ev = nngp_eval if kind == "nngp" else ntk_eval
    n = dag.n_inputs
    for a in range(n):
        for b in range(a, n):
            r = {a: 2} if a == b else {a: 1, b: 1}
            exact = derivative_at_zero(dag, None, kind, r)
            fd = _fd_derivative(lambda t: ev(dag, t), n, r, 1e-3)
            assert fd == pytest.approx(exact, rel=1e-4)


def test_derivative_limits():
    dag = hr_cnn(3, CE)
    ins = dag.input_nodes
    with pytest.raises(ValueError):
        derivative_at_zero(dag, None, "nngp", {v: 1 for v in ins[:7]})
    with pytest.raises(ValueError):
        derivative_at_zero(dag, None, "nngp", {ins[0]: 9})


@given(st.data())
def test_derivative_sign(data):
    dag = d_cnn(2, CE)
    sup = data.draw(st.lists(st.sampled_from(dag.input_nodes), min_size=1, max_size=3, unique=True))
    r = {v: data.draw(st.integers(1, 2)) for v in sup}
    for kind in ("nngp", "ntk"):
        assert derivative_at_zero(dag, None, kind, r) > 0


def test_non_learnable_zero():
    dag = build_scnn(4, 4, CE)
    a, b = dag.input_nodes[:2]
    r = {a: 1, b: 1}
    assert derivative_at_zero(dag, None, "nngp", r) == 0.0
    assert eigenvalue_estimate(dag, None, "nngp", r).value < 1e-12


# -- eigenvalues -------------------------------------------------------------------------
def test_jet_vs_monte_carlo_dcnn():
    dag = d_cnn(3, CE)
    r = {dag.input_nodes[0]: 1, dag.input_nodes[1]: 1}
    jet = eigenvalue_estimate(dag, None, "nngp", r)
    mc = eigenvalue_estimate(dag, None, "nngp", r, method="monte_carlo", samples=200000, seed=3)
    assert jet.stderr == 0 and mc.stderr > 0
    assert abs(mc.value - jet.value) < 3 * mc.stderr


def test_eigenvalue_slope_small_p():
    xs, ys = [], []
    for p in (2, 3, 4):
        dag = d_cnn(p, CE)
        r = {dag.input_nodes[0]: 1, dag.input_nodes[1]: 1}
        xs.append(math.log(dag.reference_dim))
        ys.append(math.log(eigenvalue_estimate(dag, None, "ntk", r).value))
    L = index_triple(dag, r).L
    assert L == 2
    assert np.polyfit(xs, ys, 1)[0] == pytest.approx(-float(L), abs=0.3)


def test_gap_flatten_eigenvalues_agree():
    g, f = preset("hr_cnn_gap", 3, G), preset("hr_cnn_flatten", 3, G)
    for mode in ("Y1", "Y3", "Y6"):
        a = eigenvalue_estimate(g, None, "ntk", mode_multi_index(mode, g, 3)).value
        b = eigenvalue_estimate(f, None, "ntk", mode_multi_index(mode, f, 3)).value
        assert a == pytest.approx(b, rel=1e-10)


def test_eigenvalue_errors():
    dag = d_cnn(2, CE)
    with pytest.raises(ValueError):
        eigenvalue_estimate(dag, None, "nngp", {})
    with pytest.raises(ValueError):
        eigenvalue_estimate(dag, None, "nngp", {0: 1}, method="mc", samples=10)
    with pytest.raises(ValueError):
        eigenvalue_estimate(dag, None, "nngp", {0: 1}, method="quadrature")
