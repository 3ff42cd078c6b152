"""Test eigenfunctions on products of spheres.

Inputs live in ``R^(p^4)`` with coordinates ``x_k``, ``k`` in the cyclic group
``Z_p^4``; the fine patches are the ``p``-dimensional blocks ``(k1, k2, k3, :)``.
A target is ``Y(x) = sum_k c_k g(x shifted by k)`` where the pattern ``g`` is a
small polynomial in coordinates at fixed offsets from ``k``.
"""
from dataclasses import dataclass, field
from fractions import Fraction
import json

import numpy as np

from .indices import MultiIndex

E1, E2, E3, E4 = (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)


def _add(*vs):
    return tuple(sum(c) for c in zip(*vs))


def _neg(v):
    return tuple(-c for c in v)


Z = (0, 0, 0, 0)

# pattern: list of (coefficient, ((offset, power), ...)) monomials
PATTERNS = {
    "Y1": [(1, ((Z, 1),))],
    "Y2": [(1, ((Z, 1), (E4, 1)))],
    "Y3": [(1, ((E3, 1), (E4, 1)))],
    "Y4": [(1, ((_add(E3, E4), 1), (E4, 1), (Z, 1)))],
    "Y5star": [(1, ((Z, 3), (E4, 1), (_add(E4, E4), 1))),
               (-1, ((Z, 1), (E4, 3), (_add(E4, E4), 1)))],
    "Y5": [(1, ((Z, 1), (E1, 1)))],
    "Y6": [(3, ((Z, 1), (E3, 1), (_neg(E3), 2))),
           (-1, ((Z, 3), (E3, 1)))],
    "Y7": [(3, ((_add(_neg(E3), E4), 1), (E2, 1), (Z, 2))),
           (-1, ((_add(_neg(E3), E4), 3), (E2, 1)))],
}
MODE_IDS = ("Y1", "Y2", "Y3", "Y4", "Y5star", "Y5", "Y6", "Y7")
DEGREES = {"Y1": 1, "Y2": 2, "Y3": 2, "Y4": 3, "Y5star": 5, "Y5": 2, "Y6": 4, "Y7": 4}
# modes whose per-patch factors are not harmonic as written
NON_HARMONIC = ("Y6", "Y7")


@dataclass
class Eigenfunction:
    id: str
    p: int
    terms: list                 # pattern monomials, see PATTERNS
    coefficients: np.ndarray    # shape (p, p, p, p)
    normalization: float = 1.0
    seed: int = None
    coefficient_mode: str = "random"
    meta: dict = field(default_factory=dict)

    @property
    def degree(self):
        return sum(pw for _, m in self.terms[:1] for _, pw in m)

    def __call__(self, X):
        return eval_eigenfunction(self, X)

    def raw(self, X):
        return _eval_pattern(self.terms, self.coefficients, self.p, X)

    def to_json(self):
        return json.dumps({
            "id": self.id,
            "p": self.p,
            "terms": [[c, [[list(off), pw] for off, pw in m]] for c, m in self.terms],
            "coefficients": [float(v) for v in self.coefficients.ravel()],
            "normalization": float(self.normalization),
            "seed": self.seed,
            "coefficient_mode": self.coefficient_mode,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        o = json.loads(text)
        p = int(o["p"])
        terms = [(c, tuple((tuple(off), pw) for off, pw in m)) for c, m in o["terms"]]
        coef = np.array(o["coefficients"], dtype=float).reshape((p,) * 4)
        return cls(o["id"], p, terms, coef, float(o["normalization"]), o.get("seed"),
                   o.get("coefficient_mode", "random"))


def _eval_pattern(terms, coef, p, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != p ** 4:
        raise ValueError(f"inputs must have p^4 = {p ** 4} coordinates")
    X4 = X.reshape((-1, p, p, p, p))
    cache = {}
    total = np.zeros(X4.shape)
    for c, mono in terms:
        acc = np.full(X4.shape, float(c))
        for off, pw in mono:
            key = tuple(o % p for o in off)
            if key not in cache:
                cache[key] = np.roll(X4, shift=tuple(-o for o in key), axis=(1, 2, 3, 4))
            acc *= cache[key] ** pw
        total += acc
    return np.tensordot(total, coef, axes=([1, 2, 3, 4], [0, 1, 2, 3]))


def eval_eigenfunction(f, X, check=True):
    """Normalized value ``normalization * sum_k c_k g_k(x)`` on a batch of points."""
    X = np.asarray(X, dtype=float)
    if check:
        _check_on_spheres(X, f.p)
    return f.normalization * f.raw(X)


def _check_on_spheres(X, p, tol=1e-6):
    X2 = np.atleast_2d(X)
    norms = np.linalg.norm(X2.reshape(len(X2), -1, p), axis=2)
    if np.any(np.abs(norms - np.sqrt(p)) > tol * np.sqrt(p)):
        raise ValueError("input is off the product of radius-sqrt(p) spheres")


def _check_offsets(mode, p):
    """Refuse patterns whose offsets collide modulo ``p``."""
    for c, mono in PATTERNS[mode]:
        keys = [tuple(o % p for o in off) for off, _ in mono]
        if len(set(keys)) != len(keys):
            raise ValueError(f"{mode} needs p >= 3: its coordinate offsets collide at p={p}")


def sample_product_sphere(n, p, rng, patches=None):
    """``n`` points on the product of ``patches`` radius-sqrt(p) spheres (default p^3)."""
    patches = p ** 3 if patches is None else patches
    g = rng.standard_normal((n, patches, p))
    g *= np.sqrt(p) / np.linalg.norm(g, axis=2, keepdims=True)
    return g.reshape(n, patches * p)


def make_eigenfunction(mode, p, seed=0, coefficient_mode="random", n_norm=20000):
    if mode not in PATTERNS:
        raise ValueError(f"unknown eigenfunction {mode!r}; valid ids: {', '.join(MODE_IDS)}")
    if p < 2:
        raise ValueError("p must be >= 2")
    _check_offsets(mode, p)
    idx = MODE_IDS.index(mode)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(idx,))
    coef_seq, norm_seq = ss.spawn(2)
    if coefficient_mode == "random":
        coef = np.random.default_rng(coef_seq).standard_normal((p,) * 4)
    elif coefficient_mode == "constant":
        coef = np.ones((p,) * 4)
    else:
        raise ValueError("coefficient_mode must be 'random' or 'constant'")
    f = Eigenfunction(mode, p, PATTERNS[mode], coef, 1.0, seed, coefficient_mode)
    Xn = sample_product_sphere(n_norm, p, np.random.default_rng(norm_seq))
    f.normalization = float(1.0 / np.sqrt(np.mean(f.raw(Xn) ** 2)))
    return f


def build_appendix_eigenfunctions(p, seed=0, coefficient_mode="random", modes=MODE_IDS,
                                  n_norm=20000):
    """The eight test modes, each normalized to unit empirical L2 norm."""
    return [make_eigenfunction(m, p, seed, coefficient_mode, n_norm) for m in modes]


# -- structure -----------------------------------------------------------------

def _patch_groups(mono, p):
    """Group a monomial's variables by fine patch: {patch offset: {in-patch offset: power}}."""
    out = {}
    for off, pw in mono:
        key = tuple(o % p for o in off[:3])
        inner = off[3] % p
        grp = out.setdefault(key, {})
        grp[inner] = grp.get(inner, 0) + pw
    return out


def mode_multi_index(mode, dag, p, base=(0, 0, 0, 0), term=0):
    """Multi-index of one pattern monomial (the first by default) on ``dag``.

    ``dag`` must take the ``p^4``-dimensional input in the fine-patch
    coordinate order; each coordinate is charged to the input node owning it.
    """
    _check_offsets(mode, p)
    if dag.reference_dim != p ** 4:
        raise ValueError("architecture dimension does not match p^4")
    _, mono = PATTERNS[mode][term]
    r = {}
    for off, pw in mono:
        k = [(b + o) % p for b, o in zip(base, off)]
        flat = ((k[0] * p + k[1]) * p + k[2]) * p + k[3]
        v = dag.input_of_coordinate(flat)
        r[v] = r.get(v, 0) + pw
    return MultiIndex(r)


def patch_factors(mode, p):
    """Per-term, per-patch polynomial factors as {exponent tuple: coefficient}.

    Exponent tuples run over the ``p`` in-patch coordinates.  The term
    coefficient is folded into the first factor.
    """
    _check_offsets(mode, p)
    # collect terms sharing a support pattern into common per-patch polynomials
    out = []
    for c, mono in PATTERNS[mode]:
        groups = _patch_groups(mono, p)
        factors = []
        for j, (patch, powers) in enumerate(sorted(groups.items())):
            exps = [0] * p
            for inner, pw in powers.items():
                exps[inner] += pw
            factors.append((patch, {tuple(exps): Fraction(c) if j == 0 else Fraction(1)}))
        out.append((Fraction(c), factors))
    return _merge_single_patch(out)


def _merge_single_patch(terms):
    """Terms that differ only inside one shared patch merge into one factor."""
    if len(terms) < 2:
        return terms
    patches = [tuple(pt for pt, _ in fac) for _, fac in terms]
    if len(set(patches)) == 1 and len(patches[0]) == 1:
        poly = {}
        for _, fac in terms:
            for e, v in fac[0][1].items():
                poly[e] = poly.get(e, 0) + v
        return [(Fraction(1), [(patches[0][0], poly)])]
    return terms


def laplacian(poly):
    """Laplacian of a polynomial given as {exponent tuple: coefficient}."""
    out = {}
    for e, c in poly.items():
        for i, k in enumerate(e):
            if k >= 2:
                e2 = list(e)
                e2[i] -= 2
                e2 = tuple(e2)
                out[e2] = out.get(e2, 0) + c * k * (k - 1)
    return {e: c for e, c in out.items() if c != 0}


def is_harmonic_mode(mode, p):
    """True iff every per-patch factor of every term has zero Laplacian."""
    return all(not laplacian(poly) for _, facs in patch_factors(mode, p) for _, poly in facs)


def harmonic_projection(poly, n=None):
    """Harmonic part of a homogeneous polynomial in ``n`` variables.

    Uses ``h = sum_j c_j |x|^(2j) Lap^j f`` with
    ``c_j = (-1)^j / (2^j j! prod_{i=1..j} (n + 2m - 2 - 2i))`` for degree ``m``.
    """
    if not poly:
        return {}
    n = len(next(iter(poly))) if n is None else n
    m = sum(next(iter(poly)))
    if any(sum(e) != m for e in poly):
        raise ValueError("polynomial must be homogeneous")
    out = {}
    lap = dict(poly)
    j = 0
    coef = Fraction(1)
    while lap:
        term = _times_norm_power({e: c * coef for e, c in lap.items()}, j, n)
        for e, c in term.items():
            out[e] = out.get(e, 0) + c
        j += 1
        coef = coef * Fraction(-1, 2 * j * (n + 2 * m - 2 - 2 * j))
        lap = laplacian(lap)
    return {e: c for e, c in out.items() if c != 0}


def _times_norm_power(poly, j, n):
    out = dict(poly)
    for _ in range(j):
        nxt = {}
        for e, c in out.items():
            for i in range(n):
                e2 = list(e)
                e2[i] += 2
                e2 = tuple(e2)
                nxt[e2] = nxt.get(e2, 0) + c
        out = nxt
    return out


def constant_mode_targets(p, seed=0, n_norm=20000):
    """Translation-invariant targets (all c_k equal) for the pooling comparison.

    The cross-block mode ``Y5`` is left out: a linear readout over pooled
    positions cannot represent it.
    """
    modes = [m for m in MODE_IDS if m != "Y5"]
    return build_appendix_eigenfunctions(p, seed, "constant", modes, n_norm)
