"""Kernel regression on products of spheres and per-mode residuals."""
from dataclasses import dataclass, field
import time

import numpy as np
from scipy.linalg import lapack, solve_triangular
from scipy.sparse.linalg import LinearOperator, cg

from .eigenfunctions import Eigenfunction, eval_eigenfunction, mode_multi_index
from .indices import index_triple
from .kernel import kernel_array, with_dual

DEFAULT_MEM_CAP = 3 * 2 ** 30
CHOLESKY_MAX = 20000
JITTER_REL = 1e-8
CSV_FIELDS = ("run_id", "arch", "kernel_kind", "readout", "m_train", "mode_id", "L_index",
              "seed", "residual", "train_mse", "seconds")


class ResourceCapError(RuntimeError):
    """A requested computation exceeds the configured memory cap."""


class NumericalError(RuntimeError):
    """The kernel system could not be factored even after jitter retries."""


# -- data ------------------------------------------------------------------------

@dataclass
class SphereDataset:
    X: np.ndarray        # (m, patches * p)
    p: int
    patches: int
    seed: object
    split: str = "train"

    @property
    def m(self):
        return self.X.shape[0]

    def __len__(self):
        return self.X.shape[0]


_SPLITS = {"train": 0, "test": 1, "normalize": 2, "coefficients": 3}


def seed_streams(master):
    """Disjoint per-purpose seed sequences derived from one master seed."""
    root = np.random.SeedSequence(int(master))
    kids = root.spawn(len(_SPLITS))
    return dict(zip(_SPLITS, kids))


def sample_inputs(m, patches, p, seed, split="train"):
    """``m`` points whose ``patches`` blocks each lie on the radius-sqrt(p) sphere.

    An integer ``seed`` is treated as a master seed and the ``split`` stream is
    drawn from it, so train/test/normalization draws never share a stream.
    """
    if int(m) < 1:
        raise ValueError("m must be >= 1")
    if split not in _SPLITS:
        raise ValueError(f"split must be one of {sorted(_SPLITS)}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else seed_streams(seed)[split]
    g = np.random.default_rng(ss).standard_normal((int(m), int(patches), int(p)))
    g *= np.sqrt(p) / np.linalg.norm(g, axis=2, keepdims=True)
    return SphereDataset(g.reshape(int(m), int(patches) * int(p)), int(p), int(patches), seed, split)


def _size(n):
    for unit, sh in (("GiB", 30), ("MiB", 20), ("KiB", 10)):
        if n >= 2 ** sh:
            return f"{n / 2 ** sh:.2f} {unit}"
    return f"{n} B"


def check_memory(m, n_test=0, cap=DEFAULT_MEM_CAP):
    need = 8 * (int(m) ** 2 + int(m) * int(n_test))
    if need > cap:
        raise ResourceCapError(f"kernel storage of {_size(need)} exceeds the cap "
                               f"of {_size(cap)} (m={m})")
    return need


# -- solvers -------------------------------------------------------------------

class NestedCholesky:
    """Cholesky factor of ``K + jitter I`` whose leading blocks serve every smaller m.

    The factor of a leading principal submatrix is the leading block of the
    full factor, so one factorization answers the whole training schedule.
    ``K`` is factored in place (it is destroyed).
    """

    def __init__(self, K, jitter, retries=3):
        K = np.asarray(K)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("kernel matrix must be square")
        self.m = K.shape[0]
        diag = np.diagonal(K).copy()
        A = K.T if K.flags.c_contiguous else np.asfortranarray(K)
        jit = float(jitter)
        for attempt in range(retries + 1):
            np.fill_diagonal(A, diag + jit)
            c, info = lapack.dpotrf(A, lower=1, overwrite_a=1, clean=0)
            if info == 0:
                break
            if info < 0:
                raise NumericalError(f"dpotrf argument error {info}")
            # restore the lower triangle from the untouched upper one
            _restore_lower(A)
            jit = jit * 10.0 if jit > 0 else 1e-10 * float(np.mean(diag))
        else:
            raise NumericalError(f"kernel matrix not positive definite after {retries} "
                                 f"jitter increases (last jitter {jit / 10:g})")
        self.L = c           # lower triangle holds the factor (Fortran layout)
        self.jitter = jit

    def solve(self, y, m=None):
        m = self.m if m is None else int(m)
        L = self.L if m == self.m else np.asfortranarray(self.L[:m, :m])
        z = solve_triangular(L, y[:m], lower=True, check_finite=False)
        return solve_triangular(L, z, lower=True, trans="T", check_finite=False)


def _restore_lower(A, chunk=2048):
    n = A.shape[0]
    for i0 in range(0, n, chunk):
        i1 = min(n, i0 + chunk)
        blk = A[i0:i1, :i1]
        up = A[:i1, i0:i1].T
        mask = np.tril(np.ones((i1 - i0, i1), bool), k=i0 - 1)
        blk[mask] = up[mask]


def _cg_solve(K, y, jitter, rtol=1e-8):
    op = LinearOperator(K.shape, matvec=lambda v: K @ v + jitter * v, dtype=float)
    x, info = cg(op, y, rtol=rtol, maxiter=10 * len(y))
    if info != 0:
        raise NumericalError(f"conjugate gradient did not converge (info={info})")
    return x


def default_jitter(K, rel=JITTER_REL):
    return rel * float(np.trace(K)) / K.shape[0]


def fit_predict(dag, dual, kind, train, labels, test, jitter=None, solver="auto",
                mem_cap=DEFAULT_MEM_CAP):
    """Kernel regression predictions ``K(test, train) (K(train, train) + jitter I)^-1 labels``.

    ``jitter`` is absolute; ``None`` means ``1e-8 * trace(K) / m``.
    Returns ``(predictions, train_mse)``.
    """
    Xtr = train.X if isinstance(train, SphereDataset) else np.asarray(train)
    Xte = test.X if isinstance(test, SphereDataset) else np.asarray(test)
    y = np.asarray(labels, dtype=float)
    if len(y) != len(Xtr):
        raise ValueError("labels must have one entry per training point")
    check_memory(len(Xtr), len(Xte), mem_cap)
    K = kernel_array(dag, dual, kind, Xtr)
    jit = default_jitter(K) if jitter is None else float(jitter)
    alpha, jit = _solve(K, y, jit, solver)
    Kt = kernel_array(dag, dual, kind, Xte, Xtr)
    return Kt @ alpha, float(np.mean((jit * alpha) ** 2))


def _solve(K, y, jitter, solver):
    if solver not in ("auto", "cholesky", "cg"):
        raise ValueError("solver must be auto, cholesky or cg")
    if solver == "cg" or (solver == "auto" and len(K) > CHOLESKY_MAX):
        return _cg_solve(K, y, jitter), jitter
    ch = NestedCholesky(K, jitter)
    return ch.solve(y), ch.jitter


# -- residuals ---------------------------------------------------------------------

def residual_decomposition(predictions, mode_values):
    """Per-mode residuals ``0.5 (c_i - 1)^2 ||Y_i||^2`` with ``c_i = mean(f * Y_i)``.

    ``mode_values`` maps mode id to ``Y_i`` evaluated on the test points.
    """
    f = np.asarray(predictions, dtype=float)
    out = {}
    for mid, yv in mode_values.items():
        yv = np.asarray(yv, dtype=float)
        c = float(np.mean(f * yv))
        out[mid] = 0.5 * (c - 1.0) ** 2 * float(np.mean(yv * yv))
    return out


def gradient_flow_residual(eigenvalue, t):
    """Residual factor ``exp(-lambda t)`` of one eigenmode under kernel gradient flow."""
    if eigenvalue < 0 or t < 0:
        raise ValueError("eigenvalue and time must be non-negative")
    return float(np.exp(-float(eigenvalue) * float(t)))


# -- experiments -------------------------------------------------------------------

@dataclass
class CurveResult:
    rows: list                                  # one dict per (m, mode, seed)
    totals: list = field(default_factory=list)  # one dict per (m, seed): test MSE and ||Y||^2

    def relative_rows(self):
        """Rows with each residual divided by its untrained value ``0.5 ||Y_i||^2``.

        1 means nothing of the mode was learned, 0 means it was learned exactly.
        """
        norms = {(t["m_train"], t["seed"]): t["norms"] for t in self.totals}
        out = []
        for r in self.rows:
            n = norms[(r["m_train"], r["seed"])][r["mode_id"]]
            out.append(dict(r, residual=r["residual"] / (0.5 * n)))
        return out


def mode_L(mode, dag, p):
    return index_triple(dag, mode_multi_index(mode.id if isinstance(mode, Eigenfunction) else mode,
                                              dag, p)).L


def _targets(target, seed):
    return target(seed) if callable(target) else list(target)


def learning_curve(dag, dual, kind, target, m_schedule, seeds, m_test=2000, jitter_rel=JITTER_REL,
                   mem_cap=DEFAULT_MEM_CAP, run_id="run", record_time=False, data_seed_offset=0):
    """Residual per mode along a training-size schedule.

    For each seed one training set of the largest size is drawn; smaller sizes
    use its leading points, so the curves are nested.  ``target`` is a list of
    eigenfunctions or a callable ``seed -> list``; the regression label is
    their sum.
    """
    sched = [int(m) for m in m_schedule]
    if any(b <= a for a, b in zip(sched, sched[1:])) or not sched or sched[0] < 1:
        raise ValueError("m_schedule must be strictly increasing positive integers")
    M = sched[-1]
    check_memory(M, m_test, mem_cap)
    dag = with_dual(dag, dual)
    p = None
    rows, totals = [], []
    for seed in seeds:
        modes = _targets(target, seed)
        p = modes[0].p
        patches = dag.reference_dim // p
        streams = seed_streams(seed + data_seed_offset)
        tr = sample_inputs(M, patches, p, streams["train"], "train")
        te = sample_inputs(m_test, patches, p, streams["test"], "test")
        ytr = sum(eval_eigenfunction(f, tr.X, check=False) for f in modes)
        yte = {f.id: eval_eigenfunction(f, te.X, check=False) for f in modes}
        ysum = sum(yte.values())
        Ls = {f.id: mode_L(f, dag, p) for f in modes}
        t0 = time.perf_counter()
        K = kernel_array(dag, None, kind, tr.X)
        Kt = kernel_array(dag, None, kind, te.X, tr.X)
        jit = jitter_rel * float(np.trace(K)) / M
        ch = NestedCholesky(K, jit)
        del K
        setup = time.perf_counter() - t0
        for m in sched:
            t1 = time.perf_counter()
            alpha = ch.solve(ytr, m)
            pred = Kt[:, :m] @ alpha
            train_mse = float(np.mean((ch.jitter * alpha) ** 2))
            res = residual_decomposition(pred, yte)
            secs = time.perf_counter() - t1 + (setup if m == sched[0] else 0.0)
            for f in modes:
                rows.append({
                    "run_id": run_id, "arch": str(dag), "kernel_kind": kind,
                    "readout": dag.readout, "m_train": m, "mode_id": f.id,
                    "L_index": Ls[f.id], "seed": seed, "residual": res[f.id],
                    "train_mse": train_mse, "seconds": secs if record_time else "",
                })
            totals.append({"m_train": m, "seed": seed,
                           "test_mse": float(np.mean((pred - ysum) ** 2)),
                           "norms": {k: float(np.mean(v * v)) for k, v in yte.items()}})
        del ch
    return CurveResult(rows, totals)


def gap_vs_flatten(gap_dag, flat_dag, dual, kind, target, m_schedule, seeds, **kw):
    """Paired learning curves for a GAP readout and its flatten counterpart."""
    if gap_dag.readout != "gap" or flat_dag.readout != "flatten":
        raise ValueError("pass (gap architecture, flatten architecture)")
    for seed in seeds[:1]:
        for f in _targets(target, seed):
            if f.coefficient_mode != "constant":
                raise ValueError(f"target {f.id} is not translation invariant; GAP comparisons "
                                 "need constant-coefficient targets")
    g = learning_curve(gap_dag, dual, kind, target, m_schedule, seeds, run_id="gap", **kw)
    f = learning_curve(flat_dag, dual, kind, target, m_schedule, seeds, run_id="flatten", **kw)
    return g, f


def summarize(rows, key=("m_train", "mode_id")):
    """Mean and sample std of residuals grouped by ``key``."""
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in key), []).append(r["residual"])
    out = {}
    for k, v in groups.items():
        a = np.array(v)
        out[k] = (float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0, len(a))
    return out


def first_below(rows, threshold=0.25):
    """Per mode, the first m whose mean residual drops below ``threshold`` (inf if never)."""
    s = summarize(rows)
    ms = sorted({k[0] for k in s})
    out = {}
    for mid in sorted({k[1] for k in s}):
        out[mid] = next((m for m in ms if s[(m, mid)][0] < threshold), float("inf"))
    return out
