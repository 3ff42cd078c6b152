import math

import numpy as np
import pytest

from dagkernels.arch import hr_cnn
from dagkernels.dual import gaussian_dual
from dagkernels.eigenfunctions import (DEGREES, MODE_IDS, NON_HARMONIC, Eigenfunction,
                                       build_appendix_eigenfunctions, constant_mode_targets,
                                       eval_eigenfunction, harmonic_projection, is_harmonic_mode,
                                       laplacian, make_eigenfunction, mode_multi_index,
                                       patch_factors, sample_product_sphere)


@pytest.fixture(scope="module")
def funcs():
    return build_appendix_eigenfunctions(3, seed=11, n_norm=20000)


@pytest.fixture(scope="module")
def fresh():
    return sample_product_sphere(100000, 3, np.random.default_rng(99))


def test_degrees():
    assert tuple(DEGREES[m] for m in ("Y1", "Y2", "Y3", "Y4", "Y5star", "Y5", "Y6", "Y7")) == \
        (1, 2, 2, 3, 5, 2, 4, 4)


def test_build_all(funcs):
    assert [f.id for f in funcs] == list(MODE_IDS)
    assert all(f.coefficients.shape == (3, 3, 3, 3) for f in funcs)


def test_unit_norm_on_fresh_sample(funcs, fresh):
    for f in funcs:
        assert np.mean(f(fresh) ** 2) == pytest.approx(1.0, rel=0.05)


def test_total_norm(funcs, fresh):
    Y = sum(f(fresh) for f in funcs)
    assert np.mean(Y ** 2) == pytest.approx(8.0, rel=0.05)


def test_pairwise_orthogonality(funcs, fresh):
    vals = [f(fresh) for f in funcs]
    n = len(fresh)
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            prod = vals[i] * vals[j]
            assert abs(prod.mean()) < 3.5 * prod.std() / math.sqrt(n) + 1e-3


def test_linear_evaluation():
    f = make_eigenfunction("Y1", 3, seed=4, n_norm=2000)
    # every patch (last axis of length p) points along its first coordinate
    X = np.zeros((1, 3, 3, 3, 3))
    X[..., 0] = math.sqrt(3)
    X = X.reshape(1, -1)
    # Y1 = sum_k c_k x_k picks the coordinates with k_4 = 0
    expect = f.normalization * math.sqrt(3) * f.coefficients[..., 0].sum()
    assert f(X)[0] == pytest.approx(expect, rel=1e-12)


def test_off_sphere_rejected():
    f = make_eigenfunction("Y2", 3, seed=0, n_norm=1000)
    X = sample_product_sphere(4, 3, np.random.default_rng(0)) * 1.01
    with pytest.raises(ValueError):
        eval_eigenfunction(f, X)


def test_y5star_needs_p3():
    with pytest.raises(ValueError, match="p >= 3"):
        make_eigenfunction("Y5star", 2, n_norm=100)
    make_eigenfunction("Y5star", 3, n_norm=100)


def test_seeded_determinism():
    a = make_eigenfunction("Y4", 3, seed=7, n_norm=500)
    b = make_eigenfunction("Y4", 3, seed=7, n_norm=500)
    c = make_eigenfunction("Y4", 3, seed=8, n_norm=500)
    assert a.to_json() == b.to_json()
    assert a.to_json() != c.to_json()


def test_json_round_trip(fresh):
    f = make_eigenfunction("Y6", 3, seed=3, n_norm=500)
    g = Eigenfunction.from_json(f.to_json())
    np.testing.assert_array_equal(f(fresh[:100]), g(fresh[:100]))
    assert g.to_json() == f.to_json()


def test_constant_mode():
    f = make_eigenfunction("Y3", 3, coefficient_mode="constant", n_norm=500)
    assert np.all(f.coefficients == f.coefficients.flat[0])
    targets = constant_mode_targets(3, n_norm=500)
    assert "Y5" not in [t.id for t in targets]


def test_harmonicity_flags():
    for m in MODE_IDS:
        assert is_harmonic_mode(m, 4) == (m not in NON_HARMONIC)
    # x_i x_j (x_i^2 - x_j^2) is harmonic
    poly = {(3, 1): 1.0, (1, 3): -1.0}
    assert not any(abs(c) > 0 for c in laplacian(poly).values())
    assert patch_factors("Y5star", 4)


def test_harmonic_projection():
    # x^2 - |x|^2/n is the harmonic part of x^2 in n variables
    n = 3
    proj = harmonic_projection({(2, 0, 0): 1.0}, n)
    assert not any(abs(c) > 1e-12 for c in laplacian(proj).values())
    assert proj[(2, 0, 0)] == pytest.approx(1 - 1 / n)
    assert proj[(0, 2, 0)] == pytest.approx(-1 / n)


def test_mode_multi_index_under_hr():
    dag = hr_cnn(4, gaussian_dual(1.0))
    for m in MODE_IDS:
        r = mode_multi_index(m, dag, 4)
        assert r.degree == DEGREES[m]
