"""Architecture graphs.

An architecture is a DAG whose leaves are input patches and whose root is the
network output.  Each non-input node ``u`` averages over its children and
applies a dual activation; its fan-in scales like ``d**alpha_u``.  Input nodes
carry the patch dimension ``d_v ~ d**alpha_v`` instead.

Node ids are a topological order: input nodes first (in data order, so that
input ``v`` owns the coordinates ``offset[v]:offset[v] + d_v`` of a flat input
vector), the output node last.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
import re

import numpy as np

from .dual import DualActivation, identity_dual, parse_dual

INPUT, HIDDEN, OUTPUT = "input", "hidden", "output"


@dataclass(frozen=True)
class NodeRecord:
    id: int
    layer_index: int
    kind: str
    alpha: Fraction
    concrete_dim: int
    activation: DualActivation = field(default_factory=identity_dual)


@dataclass(frozen=True)
class ArchDag:
    nodes: tuple
    children: tuple          # children[u] = tuple of child ids
    output_node: int
    reference_dim: int
    readout: str = "flatten"
    readout_node: int = None  # node collapsing the penultimate positions, if any

    def __post_init__(self):
        n = len(self.nodes)
        if len(self.children) != n:
            raise ValueError("children table does not match node count")
        for i, rec in enumerate(self.nodes):
            if rec.id != i:
                raise ValueError("node ids must be 0..n-1 in order")
            for c in self.children[i]:
                if not 0 <= c < i:
                    raise ValueError(f"edge {c}->{i} breaks topological id order")
            if rec.kind == INPUT and self.children[i]:
                raise ValueError(f"input node {i} has children")
            if rec.kind != INPUT and len(self.children[i]) != rec.concrete_dim:
                raise ValueError(f"node {i}: concrete_dim must equal its number of children")
            if not 0 <= rec.alpha <= 1:
                raise ValueError(f"node {i}: alpha outside [0, 1]")
        if self.output_node != n - 1 or self.nodes[-1].kind != OUTPUT:
            raise ValueError("the output node must be the last node")
        if sum(r.kind == OUTPUT for r in self.nodes) != 1:
            raise ValueError("exactly one output node is required")
        # every node reaches the output
        reach = np.zeros(n, bool)
        reach[-1] = True
        for u in range(n - 1, -1, -1):
            if reach[u]:
                reach[list(self.children[u])] = True
        if not reach.all():
            raise ValueError(f"nodes {np.flatnonzero(~reach).tolist()} do not reach the output")
        ins = self.input_nodes
        if list(ins) != list(range(len(ins))):
            raise ValueError("input nodes must come first")
        if int(self.input_dims.sum()) != self.reference_dim:
            raise ValueError("input dimensions do not sum to the reference dimension")
        if self.readout not in ("flatten", "gap"):
            raise ValueError("readout must be 'flatten' or 'gap'")
        if self.readout == "gap":
            gap_layout(self)

    # -- structure ------------------------------------------------------------
    @cached_property
    def parents(self):
        par = [[] for _ in self.nodes]
        for u, ch in enumerate(self.children):
            for c in ch:
                par[c].append(u)
        return tuple(tuple(p) for p in par)

    @cached_property
    def input_nodes(self):
        return tuple(r.id for r in self.nodes if r.kind == INPUT)

    @cached_property
    def input_dims(self):
        return np.array([self.nodes[v].concrete_dim for v in self.input_nodes], dtype=np.int64)

    @cached_property
    def input_offsets(self):
        return np.concatenate([[0], np.cumsum(self.input_dims)]).astype(np.int64)

    @property
    def n_inputs(self):
        return len(self.input_nodes)

    @cached_property
    def is_tree(self):
        return all(len(p) <= 1 for p in self.parents)

    @cached_property
    def depth(self):
        """Longest path length (in edges) from any node to the output."""
        dist = [0] * len(self.nodes)
        for u in range(len(self.nodes) - 1, -1, -1):
            for c in self.children[u]:
                dist[c] = max(dist[c], dist[u] + 1)
        return max(dist)

    @cached_property
    def shape_parameters(self):
        """The set Lambda of exponents appearing in the graph (always contains 0)."""
        return frozenset({Fraction(0)} | {r.alpha for r in self.nodes})

    def input_of_coordinate(self, i):
        """Input node owning flat coordinate ``i``."""
        return int(np.searchsorted(self.input_offsets, i, side="right") - 1)

    def with_readout(self, readout):
        return ArchDag(self.nodes, self.children, self.output_node,
                       self.reference_dim, readout, self.readout_node)

    def __str__(self):
        return arch_string(self)


def ancestors(dag, node_set):
    """Transitive ancestor closure of ``node_set`` (the nodes themselves included)."""
    nodes = _check_nodes(dag, node_set)
    out = set(nodes)
    stack = list(nodes)
    while stack:
        for p in dag.parents[stack.pop()]:
            if p not in out:
                out.add(p)
                stack.append(p)
    return out


def common_ancestors(dag, node_set):
    nodes = _check_nodes(dag, node_set)
    if not nodes:
        return set(range(len(dag.nodes)))
    sets = [ancestors(dag, [v]) for v in nodes]
    return set.intersection(*sets)


def _check_nodes(dag, node_set):
    nodes = [int(v) for v in node_set]
    for v in nodes:
        if not 0 <= v < len(dag.nodes):
            raise KeyError(f"unknown node id {v}")
    return nodes


# -- exact exponents -------------------------------------------------------

def _factor(n):
    out, q = {}, 2
    while q * q <= n:
        while n % q == 0:
            out[q] = out.get(q, 0) + 1
            n //= q
        q += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def exact_exponent(n, d):
    """Rational ``a`` with ``n == d**a`` exactly, or None if there is none."""
    n, d = int(n), int(d)
    if n == 1:
        return Fraction(0)
    fn, fd = _factor(n), _factor(d)
    if set(fn) != set(fd):
        return None
    ratios = {Fraction(fn[q], fd[q]) for q in fd}
    return ratios.pop() if len(ratios) == 1 else None


# -- layer descriptions ------------------------------------------------------

_LAYER_KINDS = ("input", "conv", "flatten-dense-act", "flatten-dense",
                "gap-dense-act", "gap-dense", "dense-act", "dense")


@dataclass(frozen=True)
class Layer:
    kind: str
    size: int = 1
    alpha: Fraction = Fraction(0)


def build_from_layers(layers, activation, reference_dim=None):
    """Build a DAG from a bottom-up list of :class:`Layer`.

    Two shapes are accepted::

        input d a, dense-act..., dense
        conv p a, conv k a..., (flatten|gap)-dense[-act], [dense-act...], dense

    The first ``conv`` line declares the input patches (size ``p``) together
    with the first hidden layer; later ``conv`` lines group ``k`` positions.
    """
    layers = list(layers)
    if not layers:
        raise ValueError("empty layer list")
    for lay in layers:
        if lay.kind not in _LAYER_KINDS:
            raise ValueError(f"unknown layer kind {lay.kind!r}")
        if lay.size < 1:
            raise ValueError(f"layer {lay.kind}: size must be >= 1")
    ident = identity_dual()
    head = layers[0]
    if head.kind == "input":
        sizes = [head.size]
        body = layers[1:]
        if any(l.kind not in ("dense-act", "dense") for l in body):
            raise ValueError("an 'input' layer may only be followed by dense layers")
    elif head.kind == "conv":
        convs = [head]
        i = 1
        while i < len(layers) and layers[i].kind == "conv":
            convs.append(layers[i])
            i += 1
        if i == len(layers) or not layers[i].kind.startswith(("flatten", "gap")):
            raise ValueError("conv layers must be followed by a flatten or gap readout")
        readout_layer = layers[i]
        body = layers[i + 1:]
        if any(l.kind not in ("dense-act", "dense") for l in body):
            raise ValueError("only dense layers may follow the readout")
        group = [c.size for c in convs[1:]] + [readout_layer.size]
        n_in = int(np.prod(group))
        sizes = [head.size] * n_in
    else:
        raise ValueError("the first layer must be 'input' or 'conv'")
    d = int(sum(sizes))
    if reference_dim is not None and int(reference_dim) != d:
        raise ValueError(f"dimension mismatch: layers give d={d}, expected {reference_dim}")

    nodes, children = [], []

    def add(layer_index, kind, alpha, dim, act, ch):
        nodes.append(NodeRecord(len(nodes), layer_index, kind, Fraction(alpha), int(dim), act))
        children.append(tuple(ch))
        return len(nodes) - 1

    readout_node = None
    gap = False
    if head.kind == "input":
        cur = [add(0, INPUT, head.alpha, head.size, ident, ())]
        layer_index = 0
    else:
        cur = [add(0, INPUT, head.alpha, head.size, ident, ()) for _ in range(len(sizes))]
        cur = [add(1, HIDDEN, 0, 1, activation, (v,)) for v in cur]
        layer_index = 1
        for conv in convs[1:]:
            layer_index += 1
            k = conv.size
            cur = [add(layer_index, HIDDEN, conv.alpha, k, activation, cur[j * k:(j + 1) * k])
                   for j in range(len(cur) // k)]
        layer_index += 1
        act = activation if readout_layer.kind.endswith("-act") else ident
        gap = readout_layer.kind.startswith("gap")
        last = not body
        if last and act is not ident:
            raise ValueError("the final layer must be linear (dense, flatten-dense or gap-dense)")
        cur = [add(layer_index, OUTPUT if last else HIDDEN, readout_layer.alpha,
                   readout_layer.size, act, cur)]
        readout_node = cur[0]
    for j, lay in enumerate(body):
        layer_index += 1
        last = j == len(body) - 1
        if last and lay.kind != "dense":
            raise ValueError("the final layer must be 'dense'")
        if not last and lay.kind != "dense-act":
            raise ValueError("only the final dense layer may omit the activation")
        act = ident if last else activation
        cur = [add(layer_index, OUTPUT if last else HIDDEN, lay.alpha, 1, act, cur)]
    if nodes[-1].kind != OUTPUT:
        raise ValueError("the layer list does not end with a linear readout")
    return ArchDag(tuple(nodes), tuple(children), len(nodes) - 1, d,
                   "gap" if gap else "flatten", readout_node)


def build_mlp(depth, input_dim, activation, alpha=Fraction(1)):
    """``depth`` hidden dense-act layers on one input node of dimension ``input_dim``."""
    if int(depth) != depth or depth < 1:
        raise ValueError("depth must be an integer >= 1")
    if int(input_dim) != input_dim or input_dim < 2:
        raise ValueError("input_dim must be an integer >= 2")
    layers = [Layer("input", int(input_dim), Fraction(alpha))]
    layers += [Layer("dense-act")] * int(depth) + [Layer("dense")]
    return build_from_layers(layers, activation)


def build_dcnn(p, k, L, w, readout="flatten", act_after_readout=True, activation=None,
               exponents=None, reference_dim=None):
    """Deep CNN with stride equal to filter size.

    ``[Input] -> [Conv(p)-Act] -> [Conv(k)-Act]^L -> [Flatten-Dense-Act] -> [Dense]``;
    without ``act_after_readout`` the readout is a single linear flatten-dense
    (or GAP-dense) node.  ``exponents`` are the exact rationals
    ``(alpha_p, alpha_k, alpha_w)``; when omitted they are recovered exactly
    from the integer sizes if possible.
    """
    p, k, L, w = int(p), int(k), int(L), int(w)
    if p < 2 or k < 1 or w < 1 or L < 0:
        raise ValueError("need p >= 2, k >= 1, w >= 1, L >= 0")
    if readout not in ("flatten", "gap"):
        raise ValueError("readout must be 'flatten' or 'gap'")
    if activation is None:
        raise ValueError("an activation dual is required")
    d = p * k ** L * w
    if reference_dim is not None and int(reference_dim) != d:
        raise ValueError(f"dimension mismatch: p*k^L*w = {d} != {reference_dim}")
    if exponents is None:
        exponents = tuple(exact_exponent(s, d) for s in (p, k, w))
        if None in exponents:
            raise ValueError("sizes are not exact powers of d; pass exponents explicitly")
    a_p, a_k, a_w = (Fraction(a) for a in exponents)
    for size, a in ((p, a_p), (k, a_k), (w, a_w)):
        target = d ** float(a)
        if not target / 2 <= size <= 2 * target:
            raise ValueError(f"size {size} is not within a factor 2 of d^{a} = {target:.3g}")
    layers = [Layer("conv", p, a_p)] + [Layer("conv", k, a_k)] * L
    kind = f"{readout}-dense"
    if act_after_readout:
        layers += [Layer(kind + "-act", w, a_w), Layer("dense")]
    else:
        layers += [Layer(kind, w, a_w)]
    return build_from_layers(layers, activation, d)


def build_scnn(p, w, activation, exponents=None, readout="flatten"):
    """One weight-shared conv layer followed by a linear flatten-dense readout."""
    if exponents is not None:
        exponents = (exponents[0], Fraction(0), exponents[1])
    return build_dcnn(p, 1, 0, w, readout, False, activation, exponents)


# -- presets used by the experiments --------------------------------------

def hr_cnn(p, activation, readout="flatten", act_after_readout=True):
    """Conv(p)^{x4} on d = p^4: filters of size p at every level (all exponents 1/4)."""
    q = Fraction(1, 4)
    return build_dcnn(p, p, 2, p, readout, act_after_readout, activation, (q, q, q))


def d_cnn(p, activation):
    """Conv(p^2)^{x2} on d = p^4: patches and filter of size p^2 (exponents 1/2, 1/2, 0)."""
    h = Fraction(1, 2)
    return build_dcnn(p * p, p * p, 1, 1, "flatten", True, activation, (h, h, Fraction(0)))


def mlp(p, activation, depth=4):
    return build_mlp(depth, p ** 4, activation)


PRESETS = {
    "mlp": lambda p, act: mlp(p, act, 4),
    "mlp1": lambda p, act: mlp(p, act, 1),
    "d_cnn": d_cnn,
    "hr_cnn": hr_cnn,
    "hr_cnn_flatten": lambda p, act: hr_cnn(p, act, "flatten", False),
    "hr_cnn_gap": lambda p, act: hr_cnn(p, act, "gap", False),
    "s_cnn": lambda p, act: build_scnn(p, p ** 3, act, (Fraction(1, 4), Fraction(3, 4))),
}


def preset(name, p, activation):
    try:
        return PRESETS[name](int(p), activation)
    except KeyError:
        raise ValueError(f"unknown architecture {name!r}; known: {', '.join(sorted(PRESETS))}") from None


# -- text forms ------------------------------------------------------------

def dag_layers(dag):
    """Recover the bottom-up layer list from the graph structure."""
    by_layer = {}
    for r in dag.nodes:
        by_layer.setdefault(r.layer_index, []).append(r)
    out = []
    levels = sorted(by_layer)
    first = by_layer[levels[0]]
    if dag.readout_node is None:
        out.append(Layer("input", first[0].concrete_dim, first[0].alpha))
        rest = levels[1:]
    else:
        out.append(Layer("conv", first[0].concrete_dim, first[0].alpha))
        rest = levels[2:]
    for lev in rest:
        recs = by_layer[lev]
        r = recs[0]
        if any(q.concrete_dim != r.concrete_dim or q.alpha != r.alpha
               or q.activation != r.activation for q in recs):
            raise ValueError(f"layer {lev} is not uniform")
        act = r.activation.name != "identity"
        if dag.readout_node is not None and r.id == dag.readout_node:
            kind = f"{dag.readout}-dense" + ("-act" if act else "")
        elif dag.readout_node is not None and r.id < dag.readout_node:
            kind = "conv"
        else:
            kind = "dense-act" if act else "dense"
        out.append(Layer(kind, r.concrete_dim, r.alpha))
    return out


def format_layers(dag):
    """Plain-text description: one ``kind size exponent`` line per layer."""
    lines = [f"{l.kind} {l.size} {l.alpha}" for l in dag_layers(dag)]
    return "\n".join(lines) + "\n"


def parse_layers(text):
    """Parse the plain-text layer format (``#`` starts a comment)."""
    layers = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0].lower()
        if kind not in _LAYER_KINDS:
            raise ValueError(f"line {lineno}: unknown layer kind {parts[0]!r}")
        try:
            size = int(parts[1]) if len(parts) > 1 else 1
            alpha = Fraction(parts[2]) if len(parts) > 2 else Fraction(0)
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"line {lineno}: expected 'kind size exponent', got {raw!r}") from None
        if len(parts) > 3:
            raise ValueError(f"line {lineno}: too many fields")
        layers.append(Layer(kind, size, alpha))
    return layers


_TOKEN = {"conv": "Conv({size})-Act", "flatten-dense-act": "Flatten-Dense-Act",
          "flatten-dense": "Flatten-Dense", "gap-dense-act": "GAP-Dense-Act",
          "gap-dense": "GAP-Dense", "dense-act": "Dense-Act", "dense": "Dense"}


def arch_string(dag):
    """Architecture string such as ``[Input]->[Conv(3)-Act]->[Conv(3)-Act]^2->[Flatten-Dense-Act]->[Dense]``."""
    toks = ["[Input]"]
    layers = dag_layers(dag)
    if layers[0].kind == "conv":
        toks.append(f"[Conv({layers[0].size})-Act]")
    for lay in layers[1:]:
        tok = "[" + _TOKEN[lay.kind].format(size=lay.size) + "]"
        if toks[-1].split("^")[0] == tok:
            base, _, cnt = toks[-1].partition("^")
            toks[-1] = f"{base}^{int(cnt or 1) + 1}"
        else:
            toks.append(tok)
    return "->".join(toks)


def parse_arch_string(s, reference_dim, activation, exponents=None):
    """Rebuild a DAG from :func:`arch_string` output.

    ``exponents`` maps the roles ``input``/``p``, ``k`` and ``w`` to exact
    rationals; missing ones are recovered exactly from the sizes.
    """
    d = int(reference_dim)
    exponents = dict(exponents or {})
    toks = [t.strip() for t in s.replace("→", "->").split("->")]
    if not toks or toks[0] != "[Input]":
        raise ValueError("architecture string must start with [Input]")
    expanded = []
    for t in toks[1:]:
        m = re.fullmatch(r"\[([^\]]+)\](?:\^(\d+))?", t)
        if not m:
            raise ValueError(f"bad token {t!r}")
        expanded += [m.group(1)] * int(m.group(2) or 1)

    def exp_of(role, size):
        if role in exponents:
            return Fraction(exponents[role])
        a = exact_exponent(size, d)
        if a is None:
            raise ValueError(f"cannot infer the exponent of size {size}; pass it explicitly")
        return a

    conv_sizes = []
    rest = []
    for t in expanded:
        m = re.fullmatch(r"Conv\((\d+)\)-Act", t)
        if m and not rest:
            conv_sizes.append(int(m.group(1)))
        else:
            rest.append(t)
    inv = {v: k for k, v in _TOKEN.items() if k != "conv"}
    if not conv_sizes:
        layers = [Layer("input", d, exp_of("input", d))]
        for t in rest:
            if inv.get(t) not in ("dense-act", "dense"):
                raise ValueError(f"unexpected token {t!r} in a dense network")
            layers.append(Layer(inv[t]))
        return build_from_layers(layers, activation, d)
    p = conv_sizes[0]
    ks = conv_sizes[1:]
    denom = p * int(np.prod(ks)) if ks else p
    if d % denom:
        raise ValueError("reference dimension not divisible by the filter sizes")
    w = d // denom
    layers = [Layer("conv", p, exp_of("p", p))]
    layers += [Layer("conv", k, exp_of("k", k)) for k in ks]
    if not rest or inv.get(rest[0], "").split("-")[0] not in ("flatten", "gap"):
        raise ValueError("conv layers must be followed by a flatten or GAP readout")
    layers.append(Layer(inv[rest[0]], w, exp_of("w", w)))
    for t in rest[1:]:
        if inv.get(t) not in ("dense-act", "dense"):
            raise ValueError(f"unexpected token {t!r} after the readout")
        layers.append(Layer(inv[t]))
    return build_from_layers(layers, activation, d)


# -- GAP layout --------------------------------------------------------------

@dataclass(frozen=True)
class GapLayout:
    readout_node: int
    width: int              # number of penultimate positions w
    template: tuple         # node ids of the first penultimate subtree, topological
    block_dim: int          # input coordinates per penultimate subtree
    head: tuple             # readout node and its ancestors up to the output


def gap_layout(dag):
    """Check that the readout averages ``w`` identical, contiguous subtrees."""
    r = dag.readout_node
    if r is None:
        raise ValueError("this architecture has no spatial readout to pool over")
    pens = dag.children[r]
    subtrees = []
    for u in pens:
        sub = sorted(_descendants(dag, u))
        subtrees.append(sub)
    n = len(subtrees[0])
    for sub in subtrees:
        if len(sub) != n:
            raise ValueError("penultimate subtrees differ in size")
        for a, b in zip(subtrees[0], sub):
            ra, rb = dag.nodes[a], dag.nodes[b]
            if (ra.kind, ra.concrete_dim, ra.alpha, ra.activation) != \
                    (rb.kind, rb.concrete_dim, rb.alpha, rb.activation):
                raise ValueError("penultimate subtrees are not translates of each other")
    if len(set().union(*map(set, subtrees))) != n * len(pens):
        raise ValueError("penultimate subtrees overlap")
    ins0 = [v for v in subtrees[0] if dag.nodes[v].kind == INPUT]
    block = int(sum(dag.nodes[v].concrete_dim for v in ins0))
    for j, sub in enumerate(subtrees):
        ins = [v for v in sub if dag.nodes[v].kind == INPUT]
        if dag.input_offsets[ins[0]] != j * block or ins != list(range(ins[0], ins[0] + len(ins))):
            raise ValueError("penultimate subtrees must own contiguous input blocks in order")
    head = [r]
    while head[-1] != dag.output_node:
        par = dag.parents[head[-1]]
        if len(par) != 1 or len(dag.children[par[0]]) != 1:
            raise ValueError("nodes above the readout must form a chain")
        head.append(par[0])
    return GapLayout(r, len(pens), tuple(subtrees[0]), block, tuple(head))


def _descendants(dag, u):
    out, stack = {u}, [u]
    while stack:
        for c in dag.children[stack.pop()]:
            if c not in out:
                out.add(c)
                stack.append(c)
    return out


def subdag(dag, root):
    """The sub-DAG below ``root`` as a standalone graph with ``root`` as output."""
    ids = sorted(_descendants(dag, root))
    remap = {u: i for i, u in enumerate(ids)}
    nodes, children = [], []
    for u in ids:
        r = dag.nodes[u]
        kind = OUTPUT if u == root else r.kind
        nodes.append(NodeRecord(remap[u], r.layer_index, kind, r.alpha, r.concrete_dim, r.activation))
        children.append(tuple(remap[c] for c in dag.children[u]))
    d = int(sum(n.concrete_dim for n in nodes if n.kind == INPUT))
    return ArchDag(tuple(nodes), tuple(children), len(nodes) - 1, d)


# -- Assumption-G validation ----------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    offending: list
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c.name for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            extra = f" nodes={c.offending}" if c.offending else ""
            lines.append(f"{status}  {c.name}{extra}  {c.detail}".rstrip())
        return "\n".join(lines)


def validate_assumptions(dag, c=Fraction(1, 2), C=2, max_path_length=16):
    """Check the structural assumptions on degrees, inputs, first layer, parents and depth."""
    d = dag.reference_dim
    checks = []
    bad = []
    for r in dag.nodes:
        if r.kind == INPUT:
            continue
        target = d ** float(r.alpha)
        if not float(c) * target <= len(dag.children[r.id]) <= C * target:
            bad.append(r.id)
    checks.append(CheckResult("G(a) degree", not bad, bad, f"c={c}, C={C}"))

    bad = []
    for v in dag.input_nodes:
        r = dag.nodes[v]
        target = d ** float(r.alpha)
        if r.alpha <= 0 or not float(c) * target <= r.concrete_dim <= C * target:
            bad.append(v)
    sum_ok = int(dag.input_dims.sum()) == d
    checks.append(CheckResult("G(b) input dimensions", not bad and sum_ok, bad,
                              "" if sum_ok else "input dims do not sum to d"))

    bad = []
    inputs = set(dag.input_nodes)
    for u, ch in enumerate(dag.children):
        if any(x in inputs for x in ch):
            if not all(x in inputs for x in ch) or dag.nodes[u].alpha != 0:
                bad.append(u)
    for v in dag.input_nodes:
        if dag.nodes[v].activation.name != "identity":
            bad.append(v)
    checks.append(CheckResult("G(c) first layer", not bad, sorted(set(bad))))

    bad = [u for u, par in enumerate(dag.parents) if len(par) > C]
    checks.append(CheckResult("G(d) parents", not bad, bad, f"at most {C}"))
    depth_ok = dag.depth <= max_path_length
    checks.append(CheckResult("G(d) path length", depth_ok, [],
                              f"longest path {dag.depth}, bound {max_path_length}"))
    return ValidationReport(checks)


def dag_from_spec(name, p, dual_spec):
    """Convenience for configs: preset name plus dual spec string."""
    return preset(name, p, parse_dual(dual_spec))
