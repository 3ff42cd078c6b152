import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from dagkernels import _accel
from dagkernels.arch import preset
from dagkernels.dual import centered_exp_dual, gaussian_dual, poly_dual, relu_dual
from dagkernels.kernel import kernel_array
from dagkernels.regression import sample_inputs

needs_numba = pytest.mark.skipif(not _accel.USE_NUMBA, reason="numba disabled")


def _pts(dag, m, seed):
    p = dag.input_dims[0]
    return sample_inputs(m, dag.reference_dim // p, p, seed).X


@needs_numba
@pytest.mark.parametrize("name", ["mlp", "d_cnn", "hr_cnn", "s_cnn", "hr_cnn_gap"])
@pytest.mark.parametrize("dual", [gaussian_dual(0.7), centered_exp_dual(1.3), poly_dual(3),
                                  relu_dual()], ids=lambda d: d.spec)
def test_numba_matches_numpy(name, dual):
    dag = preset(name, 3, dual)
    X, Y = _pts(dag, 25, 1), _pts(dag, 17, 2)
    # relu's derivative dual has an infinite slope at t=1, so a one-ulp change
    # in a diagonal correlation moves the NTK by about sqrt(eps)
    rtol = 1e-7 if dual.name == "relu" else 1e-13
    for kind in ("nngp", "ntk"):
        a = kernel_array(dag, None, kind, X, Y, use_numba=True)
        b = kernel_array(dag, None, kind, X, Y, use_numba=False)
        np.testing.assert_allclose(a, b, rtol=rtol, atol=1e-14)
        s1 = kernel_array(dag, None, kind, X, use_numba=True)
        s2 = kernel_array(dag, None, kind, X, use_numba=False)
        np.testing.assert_allclose(s1, s2, rtol=rtol, atol=1e-14)


@needs_numba
def test_thread_count_does_not_change_bits():
    import numba
    dag = preset("hr_cnn", 3, gaussian_dual())
    X = _pts(dag, 60, 3)
    before = numba.get_num_threads()
    try:
        _accel.set_threads(1)
        a = kernel_array(dag, None, "ntk", X)
        _accel.set_threads(numba.config.NUMBA_NUM_THREADS)
        b = kernel_array(dag, None, "ntk", X)
    finally:
        numba.set_num_threads(before)
    assert a.tobytes() == b.tobytes()


def test_disable_flag_in_subprocess(tmp_path):
    script = textwrap.dedent("""
        import numpy as np
        from dagkernels import _accel
        from dagkernels.arch import preset
        from dagkernels.dual import gaussian_dual
        from dagkernels.kernel import kernel_array
        from dagkernels.regression import sample_inputs
        assert not _accel.USE_NUMBA
        dag = preset("d_cnn", 2, gaussian_dual())
        X = sample_inputs(12, 4, 4, 0).X
        np.save(r"{out}", kernel_array(dag, None, "ntk", X))
    """).format(out=tmp_path / "k.npy")
    env = dict(os.environ, DAGKERNELS_DISABLE_NUMBA="1")
    subprocess.run([sys.executable, "-c", script], check=True, env=env)
    ref = np.load(tmp_path / "k.npy")
    dag = preset("d_cnn", 2, gaussian_dual())
    X = sample_inputs(12, 4, 4, 0).X
    np.testing.assert_allclose(kernel_array(dag, None, "ntk", X), ref, rtol=1e-13, atol=1e-14)
