"""Experiment configuration files.

Plain text, ``[section]`` headers and ``key = value`` lines; ``#`` starts a
comment.  Lists are comma or whitespace separated, fractions are written
``3/4`` and kept exact.  Example::

    [run]
    p = 3
    architectures = hr_cnn, mlp
    dual = gaussian:1.0
    kind = ntk
    modes = Y1 Y2 Y3 Y4 Y5star Y5 Y6 Y7
    m_schedule = 81 243 729 2187
    seeds = 0 1 2

    [arch:my_cnn]
    builder = dcnn
    p = 9
    k = 3
    L = 1
    w = 3
    exponents = 1/2 1/4 1/4
"""
from dataclasses import dataclass, field
from fractions import Fraction
import re

from .arch import PRESETS, build_dcnn, build_from_layers, build_mlp, build_scnn, parse_layers
from .dual import parse_dual
from .eigenfunctions import MODE_IDS


class ConfigError(ValueError):
    def __init__(self, msg, line=None):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


_SIZE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([kmgt]?i?b?)?\s*$", re.I)
_UNITS = {"": 1, "k": 2 ** 10, "m": 2 ** 20, "g": 2 ** 30, "t": 2 ** 40}


def parse_bytes(text):
    m = _SIZE.match(str(text))
    if not m:
        raise ValueError(f"bad byte size {text!r}")
    unit = (m.group(2) or "").lower()[:1]
    return int(float(m.group(1)) * _UNITS[unit])


def read_sections(text):
    """``{section: {key: (value, line)}}``; keys before any header go to ``run``."""
    out = {"run": {}}
    sec = "run"
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"bad section header {raw.strip()!r}", lineno)
            sec = line[1:-1].strip().lower()
            if sec in seen:
                raise ConfigError(f"duplicate section [{sec}]", lineno)
            seen.add(sec)
            out.setdefault(sec, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.lower()
        if not k:
            raise ConfigError("empty key", lineno)
        if k in out[sec]:
            raise ConfigError(f"duplicate key {k!r} in [{sec}]", lineno)
        out[sec][k] = (v, lineno)
    return out


def _items(v):
    return [s for s in re.split(r"[,\s]+", v.strip()) if s]


@dataclass
class ArchSpec:
    name: str
    builder: str
    params: dict = field(default_factory=dict)
    line: int = None

    def build(self, p, activation):
        """Build the DAG; ``p`` is the run's patch size (used by presets)."""
        b = self.builder
        try:
            if b in PRESETS:
                return PRESETS[b](p, activation)
            q = self.params
            if b == "dcnn":
                ex = q.get("exponents")
                return build_dcnn(q["p"], q["k"], q["l"], q["w"], q.get("readout", "flatten"),
                                  q.get("act_after_readout", True), activation, ex)
            if b == "scnn":
                return build_scnn(q["p"], q["w"], activation, q.get("exponents"),
                                  q.get("readout", "flatten"))
            if b == "mlp":
                return build_mlp(q["depth"], q["d"], activation, q.get("alpha", Fraction(1)))
            if b == "layers":
                return build_from_layers(parse_layers(q["layers"].replace(";", "\n")), activation)
        except KeyError as exc:
            raise ConfigError(f"architecture {self.name!r} is missing parameter {exc}", self.line)
        except ValueError as exc:
            raise ConfigError(f"architecture {self.name!r}: {exc}", self.line)
        raise ConfigError(f"architecture {self.name!r}: unknown builder {b!r}", self.line)


@dataclass
class ExperimentConfig:
    p: int = 4
    architectures: list = field(default_factory=lambda: ["mlp", "d_cnn", "hr_cnn"])
    arch_specs: dict = field(default_factory=dict)
    dual: str = "gaussian:1.0"
    kind: str = "ntk"
    modes: list = field(default_factory=lambda: list(MODE_IDS))
    coefficients: str = None      # random for regress, constant for gap-compare
    m_schedule: list = field(default_factory=lambda: [81, 243, 729])
    m_test: int = 1000
    seeds: list = field(default_factory=lambda: [0])
    n_norm: int = 20000
    jitter: float = 1e-8
    mem_cap: int = 3 * 2 ** 30
    out: str = "out"
    # eigenvalue sweeps
    p_values: list = field(default_factory=lambda: [2, 3, 4])
    method: str = "jet"
    mc_samples: int = 100000
    eig_dual: str = "centered_exp:1.0"
    multi_indices: list = field(default_factory=list)
    # gap comparison
    gap_pair: list = field(default_factory=lambda: ["hr_cnn_gap", "hr_cnn_flatten"])
    record_time: bool = False

    def dual_activation(self, which="run"):
        return parse_dual(self.eig_dual if which == "eig" else self.dual)

    def arch(self, name, p=None, activation=None):
        p = self.p if p is None else p
        act = self.dual_activation() if activation is None else activation
        spec = self.arch_specs.get(name) or ArchSpec(name, name)
        if spec.builder not in PRESETS and name not in self.arch_specs:
            raise ConfigError(f"unknown architecture {name!r}; presets: {', '.join(sorted(PRESETS))}")
        return spec.build(p, act)


_INT_KEYS = {"p", "m_test", "n_norm", "mc_samples"}
_LIST_INT_KEYS = {"m_schedule", "seeds", "p_values"}


def parse_config(text):
    secs = read_sections(text)
    cfg = ExperimentConfig()
    for key, (val, line) in secs.pop("run").items():
        try:
            if key in _INT_KEYS:
                setattr(cfg, key, int(val))
            elif key in _LIST_INT_KEYS:
                setattr(cfg, key, [int(x) for x in _items(val)])
            elif key in ("architectures", "gap_pair"):
                setattr(cfg, key, _items(val))
            elif key == "modes":
                modes = _items(val)
                bad = [m for m in modes if m not in MODE_IDS]
                if bad:
                    raise ConfigError(f"unknown eigenfunction {bad[0]!r}; valid ids: "
                                      f"{', '.join(MODE_IDS)}", line)
                cfg.modes = modes
            elif key in ("dual", "eig_dual"):
                parse_dual(val)
                setattr(cfg, key, val)
            elif key == "kind":
                if val not in ("nngp", "ntk"):
                    raise ConfigError("kind must be nngp or ntk", line)
                cfg.kind = val
            elif key == "coefficients":
                if val not in ("random", "constant"):
                    raise ConfigError("coefficients must be random or constant", line)
                cfg.coefficients = val
            elif key == "method":
                if val not in ("jet", "monte_carlo"):
                    raise ConfigError("method must be jet or monte_carlo", line)
                cfg.method = val
            elif key == "jitter":
                cfg.jitter = float(val)
            elif key == "mem_cap":
                cfg.mem_cap = parse_bytes(val)
            elif key == "out":
                cfg.out = val
            elif key == "record_time":
                cfg.record_time = val.lower() in ("1", "true", "yes", "on")
            elif key == "multi_indices":
                cfg.multi_indices = [_parse_multi(s, line) for s in val.split(";") if s.strip()]
            else:
                raise ConfigError(f"unknown key {key!r}", line)
        except ConfigError:
            raise
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{key}: {exc}", line) from None
    for sec, items in secs.items():
        if not sec.startswith("arch:"):
            raise ConfigError(f"unknown section [{sec}]", min(l for _, l in items.values())
                              if items else None)
        name = sec[5:].strip()
        spec = _arch_spec(name, items)
        cfg.arch_specs[name] = spec
    if any(b <= a for a, b in zip(cfg.m_schedule, cfg.m_schedule[1:])):
        raise ConfigError("m_schedule must be strictly increasing")
    for name in cfg.architectures + cfg.gap_pair:
        if name not in cfg.arch_specs and name not in PRESETS:
            raise ConfigError(f"unknown architecture {name!r}; presets: {', '.join(sorted(PRESETS))}")
    return cfg


def _parse_multi(s, line):
    out = {}
    for part in _items(s):
        try:
            v, k = part.split(":")
            out[int(v)] = out.get(int(v), 0) + int(k)
        except ValueError:
            raise ConfigError(f"bad multi-index entry {part!r}; expected node:degree", line)
    return out


def _arch_spec(name, items):
    if "builder" not in items:
        line = min(l for _, l in items.values()) if items else None
        raise ConfigError(f"[arch:{name}] needs a builder", line)
    builder, line = items["builder"]
    params = {}
    for k, (v, ln) in items.items():
        if k == "builder":
            continue
        try:
            if k in ("p", "k", "l", "w", "depth", "d"):
                params[k] = int(v)
            elif k == "exponents":
                params[k] = tuple(Fraction(x) for x in _items(v))
            elif k == "alpha":
                params[k] = Fraction(v)
            elif k == "act_after_readout":
                params[k] = v.lower() in ("1", "true", "yes", "on")
            elif k in ("readout", "layers"):
                params[k] = v
            else:
                raise ConfigError(f"unknown architecture key {k!r}", ln)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{k}: {exc}", ln) from None
    return ArchSpec(name, builder.strip().lower(), params, line)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def format_config(cfg):
    """Render a config back to text (arch sections omitted when empty)."""
    lines = ["[run]",
             f"p = {cfg.p}",
             f"architectures = {', '.join(cfg.architectures)}",
             f"dual = {cfg.dual}",
             f"kind = {cfg.kind}",
             f"modes = {' '.join(cfg.modes)}",
             f"m_schedule = {' '.join(map(str, cfg.m_schedule))}",
             f"m_test = {cfg.m_test}",
             f"seeds = {' '.join(map(str, cfg.seeds))}",
             f"n_norm = {cfg.n_norm}",
             f"jitter = {cfg.jitter!r}",
             f"mem_cap = {cfg.mem_cap}",
             f"p_values = {' '.join(map(str, cfg.p_values))}",
             f"method = {cfg.method}",
             f"mc_samples = {cfg.mc_samples}",
             f"eig_dual = {cfg.eig_dual}",
             f"gap_pair = {', '.join(cfg.gap_pair)}"]
    if cfg.coefficients:
        lines.append(f"coefficients = {cfg.coefficients}")
    if cfg.multi_indices:
        lines.append("multi_indices = " + "; ".join(
            " ".join(f"{v}:{k}" for v, k in sorted(r.items())) for r in cfg.multi_indices))
    for name, spec in cfg.arch_specs.items():
        lines += ["", f"[arch:{name}]", f"builder = {spec.builder}"]
        for k, v in spec.params.items():
            if isinstance(v, tuple):
                v = " ".join(str(x) for x in v)
            lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
