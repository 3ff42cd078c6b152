"""NNGP and NTK kernels of an architecture graph.

The kernels are functions of the input correlations ``t_v = <x_v, x'_v> / d_v``
(one per input node), evaluated by the recursions

    K_u = phi*_u(mean_v K_v),   Theta_u = phi*'_u(mean_v K_v) * mean_v (K_v + Theta_v)

with ``K_v = t_v`` and ``Theta_v = 0`` at the inputs.  GAP readouts average the
penultimate kernels over all pairs of spatial positions instead of only the
diagonal ones.
"""
from collections.abc import Mapping
from dataclasses import dataclass, replace
from functools import lru_cache
from math import factorial
import struct

import numpy as np

from . import _kernel_nb as nb
from ._accel import USE_NUMBA
from .arch import INPUT, ArchDag, ancestors, gap_layout, subdag
from .dual import DualActivation
from .harmonics import correlation_sample, gegenbauer_eval, harmonic_count
from .indices import MultiIndex
from .jets import TaylorJet, jet_mean

KINDS = ("nngp", "ntk")
MAX_JET_SUPPORT = 6
MAX_JET_DEGREE = 8
SPHERE_TOL = 1e-6


def _check_kind(kind):
    if kind not in KINDS:
        raise ValueError(f"kind must be 'nngp' or 'ntk', got {kind!r}")


def with_dual(dag, dual):
    """Copy of ``dag`` with every non-linear node switched to ``dual``."""
    if dual is None:
        return dag
    if not isinstance(dual, DualActivation):
        raise TypeError("dual must be a DualActivation")
    nodes = tuple(r if r.activation.name == "identity" else replace(r, activation=dual)
                  for r in dag.nodes)
    return ArchDag(nodes, dag.children, dag.output_node, dag.reference_dim,
                   dag.readout, dag.readout_node)


# -- pointwise evaluation ------------------------------------------------------

def _as_correlations(dag, t):
    n_in = dag.n_inputs
    if isinstance(t, Mapping):
        missing = [v for v in dag.input_nodes if v not in t]
        if missing:
            raise KeyError(f"missing correlation for input nodes {missing}")
        arr = np.array([t[v] for v in dag.input_nodes], dtype=float)
    else:
        arr = np.asarray(t, dtype=float)
        if arr.shape[-1:] != (n_in,):
            raise ValueError(f"expected {n_in} correlations, got shape {arr.shape}")
    if np.any(np.abs(arr) > 1.0 + 1e-12):
        raise ValueError("correlations must lie in [-1, 1]")
    return arr


def forward(dag, T, ntk=True):
    """Vectorized recursion: ``T`` has shape ``(n, n_inputs)``; returns (K, Theta) arrays."""
    T = np.atleast_2d(T)
    n_in = dag.n_inputs
    K = [None] * len(dag.nodes)
    Th = [None] * len(dag.nodes)
    zero = np.zeros(T.shape[0])
    for v in range(n_in):
        K[v] = T[:, v]
        Th[v] = zero
    # free intermediate arrays once every parent has consumed them
    remaining = [len(p) for p in dag.parents]
    for u in range(n_in, len(dag.nodes)):
        ch = dag.children[u]
        s = sum(K[c] for c in ch) / len(ch)
        act = dag.nodes[u].activation
        K[u] = act(s)
        if ntk:
            Th[u] = act.deriv(s) * (sum(K[c] + Th[c] for c in ch) / len(ch))
        for c in ch:
            remaining[c] -= 1
            if remaining[c] == 0 and c >= n_in:
                K[c] = Th[c] = None
    out = dag.output_node
    return K[out], (Th[out] if ntk else None)


def nngp_eval(dag, t):
    """NNGP kernel at one correlation vector (sequence or {input node: t_v})."""
    if dag.readout == "gap":
        raise ValueError("GAP architectures take a w x w correlation array; use nngp_gap_eval")
    return float(forward(dag, _as_correlations(dag, t)[None, :], ntk=False)[0][0])


def ntk_eval(dag, t):
    if dag.readout == "gap":
        raise ValueError("GAP architectures take a w x w correlation array; use ntk_gap_eval")
    return float(forward(dag, _as_correlations(dag, t)[None, :])[1][0])


@lru_cache(maxsize=64)
def _gap_parts(dag):
    lay = gap_layout(dag)
    return lay, subdag(dag, dag.children[lay.readout_node][0])


def _head(dag, lay, sk, skt):
    """Apply the readout node and the chain above it to pooled (K, K + Theta)."""
    act = dag.nodes[lay.readout_node].activation
    K = act(sk)
    T = act.deriv(sk) * skt
    for u in lay.head[1:]:
        act = dag.nodes[u].activation
        K, T = act(K), act.deriv(K) * (K + T)
    return K, T


def gap_forward(dag, Tpairs, ntk=True):
    """``Tpairs`` has shape ``(n, w, w, n_template_inputs)``."""
    lay, tmpl = _gap_parts(dag)
    w = lay.width
    Tpairs = np.asarray(Tpairs, dtype=float)
    if Tpairs.shape[1:] != (w, w, tmpl.n_inputs):
        raise ValueError(f"expected correlations of shape (n, {w}, {w}, {tmpl.n_inputs})")
    sk = 0.0
    skt = 0.0
    for a in range(w):
        for b in range(w):
            k, th = forward(tmpl, Tpairs[:, a, b, :], ntk=True)
            sk = sk + k
            skt = skt + k + th
    K, T = _head(dag, lay, sk / w ** 2, skt / w ** 2)
    return K, (T if ntk else None)


def _gap_single(dag, T):
    if dag.readout != "gap":
        raise ValueError("this architecture has a flatten readout; use nngp_eval / ntk_eval")
    T = np.asarray(T, dtype=float)
    if np.any(np.abs(T) > 1.0 + 1e-12):
        raise ValueError("correlations must lie in [-1, 1]")
    return gap_forward(dag, T[None])


def nngp_gap_eval(dag, T):
    """GAP NNGP kernel from the ``w x w`` array of penultimate-block correlation vectors."""
    return float(_gap_single(dag, T)[0][0])


def ntk_gap_eval(dag, T):
    return float(_gap_single(dag, T)[1][0])


# -- kernel matrices -----------------------------------------------------------

def check_inputs(dag, X, tol=SPHERE_TOL):
    """Validate a data array against the input layout of ``dag``.

    Each input node's block must have squared norm ``d_v`` (so that ``t_v`` is
    a correlation); for products of radius-sqrt(p) spheres this holds
    whenever every sphere factor does.
    """
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != dag.reference_dim:
        raise ValueError(f"expected data of shape (m, {dag.reference_dim}), got {X.shape}")
    off = dag.input_offsets
    sq = np.add.reduceat(X * X, off[:-1], axis=1) if len(X) else np.zeros((0, len(off) - 1))
    dims = dag.input_dims.astype(float)
    bad = np.abs(np.sqrt(sq) - np.sqrt(dims)) > tol * np.sqrt(dims)
    if bad.any():
        i = int(np.argwhere(bad)[0][0])
        raise ValueError(f"point {i} is off the sphere product (norm deviation above "
                         f"{tol:g} * sqrt(d_v))")
    return X


@dataclass(frozen=True)
class _Program:
    in_off: np.ndarray
    ptr: np.ndarray
    idx: np.ndarray
    code: np.ndarray
    gamma: np.ndarray
    pc: np.ndarray


def _node_params(acts):
    J = max([a.order for a in acts] + [0])
    code = np.array([a.code for a in acts], dtype=np.int64)
    gamma = np.array([a.gamma for a in acts], dtype=float)
    pc = np.zeros((len(acts), J + 1))
    for i, a in enumerate(acts):
        if a.name == "poly":
            pc[i, :a.order + 1] = a.poly_coeffs()
    return code, gamma, pc


def _program(dag):
    ptr = np.zeros(len(dag.nodes) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(c) for c in dag.children])
    idx = np.array([c for ch in dag.children for c in ch], dtype=np.int64)
    code, gamma, pc = _node_params([r.activation for r in dag.nodes])
    return _Program(dag.input_offsets.astype(np.int64), ptr, idx, code, gamma, pc)


def _block_rows(n_cols, per_entry):
    return max(1, int(2e7 // max(1, n_cols * per_entry)))


def _flat_numpy(dag, X, Y, sym, ntk):
    m, n = len(X), len(Y)
    out = np.empty((m, n))
    off = dag.input_offsets
    dims = dag.input_dims
    uniform = bool(np.all(dims == dims[0]))
    n_in = dag.n_inputs
    rows = _block_rows(n, n_in + 4)
    for i0 in range(0, m, rows):
        Xb = X[i0:i0 + rows]
        if uniform:
            dv = int(dims[0])
            T = np.einsum("ikd,jkd->ijk", Xb.reshape(len(Xb), n_in, dv),
                          Y.reshape(n, n_in, dv), optimize=True) / dv
        else:
            T = np.stack([Xb[:, off[v]:off[v + 1]] @ Y[:, off[v]:off[v + 1]].T / dims[v]
                          for v in range(n_in)], axis=-1)
        K, Th = forward(dag, T.reshape(-1, n_in), ntk)
        out[i0:i0 + rows] = (Th if ntk else K).reshape(len(Xb), n)
    return out


def _gap_numpy(dag, X, Y, sym, ntk):
    lay, tmpl = _gap_parts(dag)
    w, block = lay.width, lay.block_dim
    m, n = len(X), len(Y)
    out = np.empty((m, n))
    dims = tmpl.input_dims
    off = tmpl.input_offsets
    n_in = tmpl.n_inputs
    rows = _block_rows(n, n_in + len(tmpl.nodes))
    for i0 in range(0, m, rows):
        Xb = X[i0:i0 + rows]
        sk = 0.0
        skt = 0.0
        for a in range(w):
            Xa = Xb[:, a * block:(a + 1) * block]
            for b in range(w):
                Yb = Y[:, b * block:(b + 1) * block]
                T = np.stack([Xa[:, off[v]:off[v + 1]] @ Yb[:, off[v]:off[v + 1]].T / dims[v]
                              for v in range(n_in)], axis=-1)
                k, th = forward(tmpl, T.reshape(-1, n_in), ntk=True)
                sk = sk + k
                skt = skt + k + th
        K, T = _head(dag, lay, sk / w ** 2, skt / w ** 2)
        out[i0:i0 + rows] = (T if ntk else K).reshape(len(Xb), n)
    return out


def _gap_program(dag):
    lay, tmpl = _gap_parts(dag)
    prog = _program(tmpl)
    hcode, hgamma, hpc = _node_params([dag.nodes[u].activation for u in lay.head])
    return lay, prog, hcode, hgamma, hpc


def _symmetrize(A):
    iu = np.triu_indices(len(A), 1)
    A[(iu[1], iu[0])] = A[iu]
    return A


def _matrix(dag, X, Y, kind, use_numba):
    sym = Y is None
    Y = X if sym else Y
    ntk = kind == "ntk"
    if use_numba:
        if dag.readout == "gap":
            lay, prog, hcode, hgamma, hpc = _gap_program(dag)
            return nb.gap_matrix(X, Y, sym, ntk, lay.width, lay.block_dim, prog.in_off,
                                 prog.ptr, prog.idx, prog.code, prog.gamma, prog.pc,
                                 hcode, hgamma, hpc)
        prog = _program(dag)
        return nb.flat_matrix(X, Y, sym, ntk, prog.in_off, prog.ptr, prog.idx,
                              prog.code, prog.gamma, prog.pc)
    fn = _gap_numpy if dag.readout == "gap" else _flat_numpy
    out = fn(dag, X, Y, sym, ntk)
    return _symmetrize(out) if sym else out


class KernelMatrix:
    """Immutable kernel matrix with provenance metadata."""

    MAGIC = b"NKRM"
    VERSION = 1

    def __init__(self, values, dag_id="", dual="", kind="nngp", readout="flatten", copy=True):
        v = np.array(values, dtype=np.float64, order="C", copy=copy or None)
        if v.ndim != 2:
            raise ValueError("kernel matrix must be two-dimensional")
        v.setflags(write=False)
        self._values = v
        self.dag_id, self.dual, self.kind, self.readout = dag_id, dual, kind, readout

    @property
    def values(self):
        return self._values

    @property
    def shape(self):
        return self._values.shape

    def __array__(self, dtype=None, copy=None):
        return self._values if dtype is None else self._values.astype(dtype)

    def __repr__(self):
        return (f"KernelMatrix(shape={self.shape}, kind={self.kind!r}, readout={self.readout!r}, "
                f"dual={self.dual!r})")

    def save(self, path):
        rows = self.shape[0]
        with open(path, "wb") as fh:
            fh.write(self.MAGIC + struct.pack("<IQ", self.VERSION, rows))
            fh.write(self._values.astype("<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path, **meta):
        with open(path, "rb") as fh:
            head = fh.read(16)
            if len(head) != 16 or head[:4] != cls.MAGIC:
                raise ValueError(f"{path}: not an NKRM kernel file")
            version, rows = struct.unpack("<IQ", head[4:])
            if version != cls.VERSION:
                raise ValueError(f"{path}: unsupported NKRM version {version}")
            data = np.frombuffer(fh.read(), dtype="<f8")
        if rows == 0:
            return cls(np.zeros((0, 0)), **meta)
        if data.size % rows:
            raise ValueError(f"{path}: payload is not a whole number of rows")
        return cls(data.reshape(rows, data.size // rows).astype(np.float64), **meta)


def kernel_array(dag, dual=None, kind="nngp", X=None, Y=None, use_numba=None):
    """Like :func:`kernel_matrix` but returns a fresh writable ndarray."""
    _check_kind(kind)
    if X is None:
        raise ValueError("X is required")
    dag = with_dual(dag, dual)
    X = check_inputs(dag, X)
    Y = None if Y is None else check_inputs(dag, Y)
    use = USE_NUMBA if use_numba is None else (use_numba and USE_NUMBA)
    return _matrix(dag, X, Y, kind, use)


def kernel_matrix(dag, dual=None, kind="nngp", X=None, Y=None, use_numba=None):
    """Dense kernel matrix between the rows of ``X`` and ``Y`` (``Y=None`` means ``X``).

    The square case computes the upper triangle and mirrors it, so the result
    is exactly symmetric.
    """
    vals = kernel_array(dag, dual, kind, X, Y, use_numba)
    dag = with_dual(dag, dual)
    act = next((r.activation for r in dag.nodes if r.activation.name != "identity"), None)
    return KernelMatrix(vals, str(dag), act.spec if act else "identity", kind, dag.readout,
                        copy=False)


def kernel_pairs(dag, kind, X, Y):
    """Kernel values between paired rows ``X[i]``, ``Y[i]`` (vectorized numpy)."""
    _check_kind(kind)
    X, Y = check_inputs(dag, X), check_inputs(dag, Y)
    if len(X) != len(Y):
        raise ValueError("X and Y must have the same number of rows")
    ntk = kind == "ntk"
    if dag.readout == "gap":
        lay, tmpl = _gap_parts(dag)
        T = _pair_correlations(tmpl, X, Y, lay.width, lay.block_dim)
        K, Th = gap_forward(dag, T, ntk)
    else:
        K, Th = forward(dag, _pair_correlations(dag, X, Y), ntk)
    return Th if ntk else K


def _pair_correlations(dag, X, Y, w=None, block=None):
    off = dag.input_offsets
    dims = dag.input_dims.astype(float)
    if w is None:
        return np.add.reduceat(X * Y, off[:-1], axis=1) / dims
    out = np.empty((len(X), w, w, dag.n_inputs))
    for a in range(w):
        for b in range(w):
            prod = X[:, a * block:(a + 1) * block] * Y[:, b * block:(b + 1) * block]
            out[:, a, b, :] = np.add.reduceat(prod, off[:-1], axis=1) / dims
    return out


# -- derivatives at zero ---------------------------------------------------------

def _dual_series(act, c, n):
    try:
        a = act.taylor_at(c, n + 1)
    except ValueError as exc:
        raise ValueError(f"dual {act} has no Taylor data to order {n}: {exc}") from None
    return a[:n + 1], np.arange(1, n + 2) * a[1:n + 2]


def _scalar_values(dag):
    """K and Theta at t = 0 for every node."""
    K = np.zeros(len(dag.nodes))
    T = np.zeros(len(dag.nodes))
    for u in range(dag.n_inputs, len(dag.nodes)):
        ch = list(dag.children[u])
        s = K[ch].mean()
        act = dag.nodes[u].activation
        K[u] = float(act(s))
        T[u] = float(act.deriv(s)) * (K[ch] + T[ch]).mean()
    return K, T


def _jet_forward(dag, support, box):
    """Propagate jets for (K, Theta) with the support inputs as variables, others at 0."""
    K0, T0 = _scalar_values(dag)
    live = ancestors(dag, support)
    D = sum(box)
    K, T = {}, {}
    for i, v in enumerate(support):
        K[v] = TaylorJet.variable(box, i)
        T[v] = TaylorJet.constant(box, 0.0)
    for u in range(dag.n_inputs, len(dag.nodes)):
        if u not in live or u in K:
            continue
        ch = dag.children[u]
        kj = [K[c] if c in K else TaylorJet.constant(box, K0[c]) for c in ch]
        tj = [T[c] if c in T else TaylorJet.constant(box, T0[c]) for c in ch]
        s = jet_mean(kj)
        st = jet_mean([a + b for a, b in zip(kj, tj)])
        a, da = _dual_series(dag.nodes[u].activation, s.value, D)
        K[u] = s.compose(a)
        T[u] = s.compose(da) * st
    out = dag.output_node
    if out not in K:
        return TaylorJet.constant(box, K0[out]), TaylorJet.constant(box, T0[out])
    return K[out], T[out]


def _check_r(dag, r):
    r = r if isinstance(r, MultiIndex) else MultiIndex(r)
    support = sorted(r.support)
    for v in support:
        if not 0 <= v < len(dag.nodes) or dag.nodes[v].kind != INPUT:
            raise ValueError(f"multi-index entry {v} is not an input node")
    if len(support) > MAX_JET_SUPPORT:
        raise ValueError(f"support of size {len(support)} exceeds {MAX_JET_SUPPORT}")
    if r.degree > MAX_JET_DEGREE:
        raise ValueError(f"|r| = {r.degree} exceeds {MAX_JET_DEGREE}")
    return r, support, tuple(r[v] for v in support)


def derivative_at_zero(dag, dual=None, kind="nngp", r=None, pair=None):
    """Mixed derivative ``d^r`` of the kernel at ``t = 0``.

    For GAP architectures the variables are the correlations of one pair
    ``(a, b)`` of pooled positions (default: the position holding ``r``, paired
    with itself); ``r`` is given in the node ids of position ``a``.
    """
    _check_kind(kind)
    dag = with_dual(dag, dual)
    r, support, box = _check_r(dag, r)
    if not support:
        K0, T0 = _scalar_values(dag) if dag.readout != "gap" else (None, None)
        if dag.readout == "gap":
            lay, tmpl = _gap_parts(dag)
            zeros = np.zeros((1, lay.width, lay.width, tmpl.n_inputs))
            k, t = gap_forward(dag, zeros)
            return float((t if kind == "ntk" else k)[0])
        return float((T0 if kind == "ntk" else K0)[dag.output_node])
    if dag.readout == "gap":
        jet = _gap_jet(dag, support, box, pair)[kind == "ntk"]
    else:
        jet = _jet_forward(dag, support, box)[kind == "ntk"]
    return jet.derivative(box)


def _gap_jet(dag, support, box, pair):
    lay, tmpl = _gap_parts(dag)
    w, n_t = lay.width, tmpl.n_inputs
    blocks = {v // n_t for v in support}
    if len(blocks) != 1:
        raise ValueError("under a GAP readout the support must lie in one pooled position")
    a0 = blocks.pop()
    a, b = (a0, a0) if pair is None else pair
    if a != a0:
        raise ValueError("pair[0] must be the pooled position holding the support")
    rel = [v - a0 * n_t for v in support]
    kj, tj = _jet_forward(tmpl, rel, box)
    K0, T0 = _scalar_values(tmpl)
    k0, t0 = K0[tmpl.output_node], T0[tmpl.output_node]
    n_pairs = w * w
    sk = (kj + (n_pairs - 1) * k0) * (1.0 / n_pairs)
    skt = (kj + tj + (n_pairs - 1) * (k0 + t0)) * (1.0 / n_pairs)
    D = sum(box)
    act = dag.nodes[lay.readout_node].activation
    a_, da = _dual_series(act, sk.value, D)
    K, T = sk.compose(a_), sk.compose(da) * skt
    for u in lay.head[1:]:
        act = dag.nodes[u].activation
        a_, da = _dual_series(act, K.value, D)
        K, T = K.compose(a_), K.compose(da) * (K + T)
    return K, T


# -- eigenvalues --------------------------------------------------------------------

@dataclass(frozen=True)
class EigenEstimate:
    value: float
    stderr: float
    method: str
    samples: int = 0


def _harmonic_norm(dag, support, box):
    out = 1.0
    for v, n in zip(support, box):
        out *= factorial(n) * harmonic_count(int(dag.nodes[v].concrete_dim), n)
    return out


def eigenvalue_estimate(dag, dual=None, kind="nngp", r=None, method="jet", samples=200000,
                        seed=0):
    """Eigenvalue of the normalized eigenfunctions of multi-index ``r``.

    ``jet``: the leading-order value ``K^(r)(0) / (r! prod_v N(d_v, r_v))``.
    ``monte_carlo``: ``E[K(t) prod_v P_{r_v}(t_v)]`` over independent uniform
    patch correlations, which equals ``E[K Y(x) Y(x')]`` averaged over an
    orthonormal basis of the eigenspace; reported with its standard error.
    Under a GAP readout both methods refer to the translation-symmetrized
    eigenfunction.
    """
    _check_kind(kind)
    dag = with_dual(dag, dual)
    r, support, box = _check_r(dag, r)
    if not support:
        raise ValueError("r must be nonzero")
    if method == "jet":
        if dag.readout == "gap":
            lay, tmpl = _gap_parts(dag)
            w = lay.width
            n_t = tmpl.n_inputs
            rel = [v % n_t for v in support]
            total = 0.0
            for a in range(w):
                for b in range(w):
                    shifted = {a * n_t + v: e for v, e in zip(rel, box)}
                    total += derivative_at_zero(dag, None, kind, MultiIndex(shifted), (a, b))
            val = total / w / _harmonic_norm(dag, support, box)
        else:
            val = derivative_at_zero(dag, None, kind, r) / _harmonic_norm(dag, support, box)
        return EigenEstimate(float(val), 0.0, "jet")
    if method in ("monte_carlo", "mc"):
        if int(samples) < 100:
            raise ValueError("monte_carlo needs at least 100 samples")
        rng = np.random.default_rng(seed)
        if dag.readout == "gap":
            vals = _mc_gap(dag, kind, support, box, int(samples), rng)
        else:
            vals = _mc_flat(dag, kind, support, box, int(samples), rng)
        return EigenEstimate(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals))),
                             "monte_carlo", int(samples))
    raise ValueError("method must be 'jet' or 'monte_carlo'")


def _mc_flat(dag, kind, support, box, n, rng, chunk=20000):
    dims = dag.input_dims
    K0, T0 = _scalar_values(dag)
    base = (T0 if kind == "ntk" else K0)[dag.output_node]
    out = []
    for i0 in range(0, n, chunk):
        c = min(chunk, n - i0)
        T = np.empty((c, dag.n_inputs))
        for v in range(dag.n_inputs):
            T[:, v] = correlation_sample(c, int(dims[v]), rng)
        K, Th = forward(dag, T, kind == "ntk")
        f = (Th if kind == "ntk" else K) - base     # control variate: E[weight] = 0
        wgt = np.ones(c)
        for v, e in zip(support, box):
            wgt *= gegenbauer_eval(int(dims[v]), e, T[:, v])
        out.append(f * wgt)
    return np.concatenate(out)


def _sample_inputs_for(dag, n, rng):
    X = np.empty((n, dag.reference_dim))
    off = dag.input_offsets
    for v in range(dag.n_inputs):
        g = rng.standard_normal((n, int(dag.input_dims[v])))
        X[:, off[v]:off[v + 1]] = g * (np.sqrt(dag.input_dims[v]) / np.linalg.norm(g, axis=1,
                                                                                  keepdims=True))
    return X


def _mc_gap(dag, kind, support, box, n, rng, chunk=5000):
    lay, tmpl = _gap_parts(dag)
    w, n_t = lay.width, tmpl.n_inputs
    rel = [v % n_t for v in support]
    dims = tmpl.input_dims
    out = []
    for i0 in range(0, n, chunk):
        c = min(chunk, n - i0)
        X = _sample_inputs_for(dag, c, rng)
        Y = _sample_inputs_for(dag, c, rng)
        T = _pair_correlations(tmpl, X, Y, w, lay.block_dim)
        K, Th = gap_forward(dag, T, kind == "ntk")
        f = Th if kind == "ntk" else K
        wgt = np.zeros(c)
        for a in range(w):
            for b in range(w):
                term = np.ones(c)
                for v, e in zip(rel, box):
                    term *= gegenbauer_eval(int(dims[v]), e, T[:, a, b, v])
                wgt += term
        out.append(f * wgt / w)
    return np.concatenate(out)
