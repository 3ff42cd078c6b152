"""Spatial, frequency and learning indices.

For a multi-index ``r`` (a degree per input node) on an architecture graph:

* the spatial index ``S(r)`` is the weight of the lightest connected subgraph
  joining the support of ``r`` and the output, an edge ``child -> u`` weighing
  ``alpha_u``;
* the frequency index is ``F(r) = sum_v r_v alpha_v``;
* the learning index is ``L(r) = S(r) + F(r)``, or infinity when no common
  ancestor of the support can create the interaction.

All indices are exact ``Fraction`` values.
"""
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import inf
import heapq

from .arch import common_ancestors, INPUT
from .harmonics import harmonic_count

STEINER_MAX_TERMINALS = 8
ENUMERATION_LIMIT = 10 ** 7
_BIG = 10 ** 9          # stands in for "any degree" in activation capacity


class MultiIndex:
    """Sparse map input node -> positive degree."""

    __slots__ = ("_items",)

    def __init__(self, mapping=()):
        items = dict(mapping)
        for v, k in items.items():
            if int(k) != k or k < 0:
                raise ValueError("degrees must be non-negative integers")
        self._items = tuple(sorted((int(v), int(k)) for v, k in items.items() if k))

    @classmethod
    def unit(cls, *nodes):
        out = {}
        for v in nodes:
            out[v] = out.get(v, 0) + 1
        return cls(out)

    @property
    def support(self):
        return tuple(v for v, _ in self._items)

    @property
    def degree(self):
        return sum(k for _, k in self._items)

    def items(self):
        return self._items

    def __getitem__(self, v):
        return dict(self._items).get(v, 0)

    def __eq__(self, other):
        return isinstance(other, MultiIndex) and self._items == other._items

    def __hash__(self):
        return hash(self._items)

    def __bool__(self):
        return bool(self._items)

    def __repr__(self):
        return "MultiIndex({" + ", ".join(f"{v}: {k}" for v, k in self._items) + "})"


@dataclass(frozen=True)
class IndexTriple:
    S: object
    F: object
    L: object

    @property
    def learnable(self):
        return self.L != inf


NOT_LEARNABLE = IndexTriple(inf, inf, inf)


# -- spatial index --------------------------------------------------------

def spatial_index(dag, node_set):
    """Minimum Steiner weight of ``node_set`` (0 for at most one node)."""
    nodes = sorted({int(v) for v in node_set})
    for v in nodes:
        if not 0 <= v < len(dag.nodes):
            raise KeyError(f"unknown node id {v}")
    if len(nodes) <= 1:
        return Fraction(0)
    if dag.is_tree:
        return tree_steiner(dag, nodes)
    if len(nodes) > STEINER_MAX_TERMINALS:
        raise ValueError(f"Steiner DP supports at most {STEINER_MAX_TERMINALS} terminals")
    return steiner_dp(dag, nodes)


def _edge_weight(dag, child, parent):
    return dag.nodes[parent].alpha


def tree_steiner(dag, nodes):
    """Union of the paths from every terminal up to their lowest common ancestor."""
    paths = []
    for v in nodes:
        path = [v]
        while dag.parents[path[-1]]:
            path.append(dag.parents[path[-1]][0])
        paths.append(path)
    common = set(paths[0]).intersection(*map(set, paths[1:]))
    used = set()
    for path in paths:
        for c, u in zip(path, path[1:]):
            if c in common:
                break
            used.add((c, u))
    return sum((_edge_weight(dag, c, u) for c, u in used), Fraction(0))


def _undirected(dag):
    adj = [[] for _ in dag.nodes]
    for u, ch in enumerate(dag.children):
        for c in ch:
            w = _edge_weight(dag, c, u)
            adj[u].append((c, w))
            adj[c].append((u, w))
    return adj


def _dijkstra(adj, src):
    dist = [None] * len(adj)
    dist[src] = Fraction(0)
    heap = [(Fraction(0), src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d != dist[u]:
            continue
        for v, w in adj[u]:
            nd = d + w
            if dist[v] is None or nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def steiner_dp(dag, terminals):
    """Dreyfus-Wagner minimum Steiner tree weight on the undirected graph."""
    terminals = list(terminals)
    if len(terminals) <= 1:
        return Fraction(0)
    adj = _undirected(dag)
    n = len(adj)
    dist = [_dijkstra(adj, s) for s in range(n)]
    q, rest = terminals[0], terminals[1:]
    k = len(rest)
    full = (1 << k) - 1
    dp = {}
    for i, t in enumerate(rest):
        dp[1 << i] = list(dist[t])
    for mask in range(1, full + 1):
        if mask in dp:
            continue
        # merge at every vertex, then relax along shortest paths
        merged = [None] * n
        sub = (mask - 1) & mask
        while sub:
            if sub < (mask ^ sub):
                a, b = dp[sub], dp[mask ^ sub]
                for u in range(n):
                    val = a[u] + b[u]
                    if merged[u] is None or val < merged[u]:
                        merged[u] = val
            sub = (sub - 1) & mask
        best = [min(merged[u] + dist[u][v] for u in range(n)) for v in range(n)]
        dp[mask] = best
    return dp[full][q]


# -- learnability and index triples ----------------------------------------

def _capacity(dag, u):
    """Largest interaction degree node ``u`` can create (0 for inputs)."""
    rec = dag.nodes[u]
    if rec.kind == INPUT:
        return 0
    cls = rec.activation.cls
    if cls.kind in ("admissible", "semi_admissible"):
        return _BIG
    if cls.kind == "poly_admissible":
        return cls.order
    if cls.kind == "identity":
        return 1
    return 0


def learnable(dag, r):
    """True iff some common ancestor of the support can create degree ``|r|``."""
    r = _as_multi(r)
    if not r:
        raise ValueError("r must be non-zero")
    n = r.degree
    return any(_capacity(dag, u) >= n for u in common_ancestors(dag, r.support))


def index_triple(dag, r):
    r = _as_multi(r)
    if not r or not learnable(dag, r):
        if not r:
            return IndexTriple(Fraction(0), Fraction(0), Fraction(0))
        return NOT_LEARNABLE
    S = spatial_index(dag, set(r.support) | {dag.output_node})
    F = sum((k * dag.nodes[v].alpha for v, k in r.items()), Fraction(0))
    return IndexTriple(S, F, S + F)


def _as_multi(r):
    return r if isinstance(r, MultiIndex) else MultiIndex(r)


# -- enumeration over supports (tree DP) -------------------------------------

@dataclass(frozen=True)
class LearningLevel:
    L: Fraction
    S: Fraction
    F: Fraction
    r: MultiIndex


def _tree_states(dag, max_degree):
    """Per node: {(weight, alphas, capacity): representative support} for
    non-empty supports below the node, where ``weight`` is the edge weight of
    the union of paths from the support up to the node."""
    states = [None] * len(dag.nodes)
    counter = 0
    for u in range(len(dag.nodes)):
        rec = dag.nodes[u]
        if rec.kind == INPUT:
            states[u] = {(Fraction(0), (rec.alpha,), 0): (u,)}
            continue
        cap_u = _capacity(dag, u)
        a_u = rec.alpha
        # acc maps (weight, alphas, used_children, capacity) -> support
        acc = {(Fraction(0), (), 0, 0): ()}
        for c in dag.children[u]:
            new = dict(acc)
            for (w, al, used, cap), sup in acc.items():
                for (cw, cal, ccap), csup in states[c].items():
                    nal = tuple(sorted(al + cal))
                    if len(nal) > max_degree:
                        continue
                    key = (w + cw + a_u, nal, used + 1, ccap if used == 0 else 0)
                    cand = sup + csup
                    if key not in new or cand < new[key]:
                        new[key] = cand
                    counter += 1
                    if counter > ENUMERATION_LIMIT:
                        raise OverflowError("support enumeration exceeds the pattern limit")
            acc = new
        out = {}
        for (w, al, used, cap), sup in acc.items():
            if not used:
                continue
            cap = max(cap, cap_u) if used == 1 else cap_u
            key = (w, al, cap)
            if key not in out or sup < out[key]:
                out[key] = tuple(sorted(sup))
        states[u] = out
    return states


def _degree_fills(alphas, n):
    """Distinct (F, extra-degree tuple) for total degree ``n`` over ``alphas``."""
    s = len(alphas)
    extra = n - s
    seen = {}
    for combo in _compositions(extra, s):
        F = sum(((1 + e) * a for e, a in zip(combo, alphas)), Fraction(0))
        if F not in seen:
            seen[F] = combo
    return seen


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for i in range(total + 1):
        for rest in _compositions(total - i, parts - 1):
            yield (i,) + rest


def learning_sequence(dag, max_degree, max_L=None):
    """Distinct learning-index values (up to ``max_L``) with a representative each.

    Returns a list of :class:`LearningLevel` in increasing ``L``.  The
    representative is the one with the smallest total degree, then the
    smallest spatial index, then the lexicographically smallest support.
    """
    if max_degree > 8:
        raise ValueError("max_degree must be <= 8")
    max_L = inf if max_L is None else Fraction(max_L)
    best = {}
    for r, tri in _enumerate_classes(dag, max_degree):
        if not tri.learnable or tri.L > max_L:
            continue
        key = (r.degree, tri.S, r.support)
        cur = best.get(tri.L)
        if cur is None or key < cur[0]:
            best[tri.L] = (key, LearningLevel(tri.L, tri.S, tri.F, r))
    return [best[L][1] for L in sorted(best)]


def _enumerate_classes(dag, max_degree):
    """Yield learnable (r, triple) classes; brute force on non-tree graphs."""
    if dag.is_tree:
        root = dag.output_node
        for (w, alphas, cap), sup in _tree_states(dag, max_degree)[root].items():
            for n in range(len(alphas), max_degree + 1):
                if cap < n:
                    continue
                for F, extra in _degree_fills(alphas, n).items():
                    # place the extra degree on support nodes sorted by alpha
                    order = sorted(sup, key=lambda v: (dag.nodes[v].alpha, v))
                    r = MultiIndex({v: 1 + e for v, e in zip(order, extra)})
                    yield r, IndexTriple(w, F, w + F)
        return
    inputs = dag.input_nodes
    count = 0
    for s in range(1, max_degree + 1):
        for sup in combinations(inputs, s):
            for n in range(s, max_degree + 1):
                for extra in _compositions(n - s, s):
                    count += 1
                    if count > ENUMERATION_LIMIT:
                        raise OverflowError("support enumeration exceeds the pattern limit")
                    r = MultiIndex({v: 1 + e for v, e in zip(sup, extra)})
                    yield r, index_triple(dag, r)


def budget_partition(dag, budget_r, max_degree):
    """Split enumerated classes into ``L < budget`` and ``L > budget``."""
    budget = Fraction(str(budget_r)) if isinstance(budget_r, float) else Fraction(budget_r)
    levels = learning_sequence(dag, max_degree)
    if any(lv.L == budget for lv in levels):
        raise ValueError(f"budget {budget} coincides with a learning index")
    return ([lv for lv in levels if lv.L < budget], [lv for lv in levels if lv.L > budget])


# -- eigenspace dimensions -------------------------------------------------

def eigenspace_dimension(dag, L_target, cap=ENUMERATION_LIMIT):
    """Sum over all ``r`` with ``L(r) = L_target`` of ``prod_v N(d_v, r_v)``.

    GAP graphs count symmetric basis elements: the flatten count divided by
    the number ``w`` of pooled positions (each learnable class of a linear GAP
    readout sits in one position block, so its translation orbit has size w).
    """
    L_target = Fraction(L_target)
    min_alpha = min(dag.nodes[v].alpha for v in dag.input_nodes)
    if min_alpha <= 0:
        raise ValueError("input exponents must be positive to bound the degree")
    max_n = int(L_target / min_alpha)
    total = _count_tree(dag, L_target, max_n, cap) if dag.is_tree \
        else _count_brute(dag, L_target, max_n, cap)
    if dag.readout == "gap":
        from .arch import gap_layout
        lay = gap_layout(dag)
        if any(dag.nodes[u].activation.name != "identity" for u in lay.head):
            raise ValueError("symmetric counting needs a linear GAP readout")
        if total % lay.width:
            raise ArithmeticError("flatten count is not divisible by the pooling width")
        total //= lay.width
    return total


def _count_tree(dag, L_target, max_n, cap):
    # states: (weight, F, n, capacity) -> sum of prod N(d_v, r_v)
    states = [None] * len(dag.nodes)
    work = 0
    for u in range(len(dag.nodes)):
        rec = dag.nodes[u]
        if rec.kind == INPUT:
            states[u] = {(Fraction(0), k * rec.alpha, k, 0): harmonic_count(rec.concrete_dim, k)
                         for k in range(1, max_n + 1)}
            continue
        cap_u = _capacity(dag, u)
        acc = {(Fraction(0), Fraction(0), 0, 0, 0): 1}
        for c in dag.children[u]:
            new = dict(acc)
            for (w, F, n, used, cp), cnt in acc.items():
                for (cw, cF, cn, ccp), ccnt in states[c].items():
                    if n + cn > max_n:
                        continue
                    nw = w + cw + rec.alpha
                    if nw + F + cF > L_target:
                        continue
                    key = (nw, F + cF, n + cn, used + 1, ccp if used == 0 else 0)
                    new[key] = new.get(key, 0) + cnt * ccnt
                    work += 1
                    if work > cap:
                        raise OverflowError("eigenspace enumeration exceeds the cap")
            acc = new
        out = {}
        for (w, F, n, used, cp), cnt in acc.items():
            if not used:
                continue
            cp = max(cp, cap_u) if used == 1 else cap_u
            key = (w, F, n, cp)
            out[key] = out.get(key, 0) + cnt
        states[u] = out
    return sum(cnt for (w, F, n, cp), cnt in states[dag.output_node].items()
               if cp >= n and w + F == L_target)


def _count_brute(dag, L_target, max_n, cap):
    total = 0
    for r in _all_multi_indices(dag.input_nodes, max_n, cap):
        tri = index_triple(dag, r)
        if tri.learnable and tri.L == L_target:
            total += _dim_product(dag, r)
    return total


def _dim_product(dag, r):
    out = 1
    for v, k in r.items():
        out *= harmonic_count(dag.nodes[v].concrete_dim, k)
    return out


def _all_multi_indices(inputs, max_n, cap=ENUMERATION_LIMIT):
    count = 0
    inputs = list(inputs)

    def rec(i, left, cur):
        nonlocal count
        if i == len(inputs):
            if cur:
                count += 1
                if count > cap:
                    raise OverflowError("enumeration exceeds the cap")
                yield MultiIndex(cur)
            return
        for k in range(left + 1):
            if k:
                cur[inputs[i]] = k
            yield from rec(i + 1, left - k, cur)
            cur.pop(inputs[i], None)

    yield from rec(0, max_n, {})


def brute_force_dimension(dag, L_target, max_degree):
    """Reference count by looping over every ``r`` with ``|r| <= max_degree``."""
    L_target = Fraction(L_target)
    total = 0
    for r in _all_multi_indices(dag.input_nodes, max_degree):
        tri = index_triple(dag, r)
        if tri.learnable and tri.L == L_target:
            total += _dim_product(dag, r)
    return total
