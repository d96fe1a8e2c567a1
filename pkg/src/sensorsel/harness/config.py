"""Experiment configuration: flat ``section.key = value`` text files.

Blank lines and ``#`` comments are ignored. Every key has a default, so an
empty file describes the reference scenario. Lists are comma separated.
"""
import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

from ..sensing import LAYOUTS


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""


SCHEMES = ("fiss", "miubss", "weighted_sum", "fixed_a")
RULES = ("knee", "compromise")
METRICS = ("fi", "miub")
QUANT_KINDS = ("analog", "quantized")


@dataclass(frozen=True)
class FieldSection:
    grid: int = 6
    side: float = 50.0
    layout: str = "track_low"
    probabilities: Tuple[float, ...] = ()
    constant_p: float = 1.0
    layout_seed: int = 0


@dataclass(frozen=True)
class SignalSection:
    p0: float = 1000.0
    alpha: float = 1.0
    n: float = 2.0
    sigma: float = 0.2


@dataclass(frozen=True)
class QuantSection:
    kind: str = "analog"
    bits: int = 5


@dataclass(frozen=True)
class MotionSection:
    interval: float = 1.25
    q: float = 2.5e-3


@dataclass(frozen=True)
class PriorSection:
    mean: Tuple[float, ...] = (-23.0, -24.0, 2.0, 2.0)
    sigma_x: float = 6.0
    sigma_v: float = 0.1


@dataclass(frozen=True)
class FilterSection:
    particles: int = 5000


@dataclass(frozen=True)
class SelectionSection:
    scheme: str = "miubss"
    rule: str = "compromise"
    metric: str = "miub"  # used by weighted_sum and fixed_a
    w1: float = 0.5
    count: int = 1
    prefilter: float = 0.0


@dataclass(frozen=True)
class NsgaSection:
    pop_size: int = 100
    generations: int = 100
    mutation_rate: float = -1.0  # negative -> 1 / N
    seed_extremes: bool = True
    crossover_prob: float = 0.9


@dataclass(frozen=True)
class RunSection:
    steps: int = 20
    trials: int = 500
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    field: FieldSection = dataclasses.field(default_factory=FieldSection)
    signal: SignalSection = dataclasses.field(default_factory=SignalSection)
    quant: QuantSection = dataclasses.field(default_factory=QuantSection)
    motion: MotionSection = dataclasses.field(default_factory=MotionSection)
    prior: PriorSection = dataclasses.field(default_factory=PriorSection)
    filter: FilterSection = dataclasses.field(default_factory=FilterSection)
    selection: SelectionSection = dataclasses.field(default_factory=SelectionSection)
    nsga: NsgaSection = dataclasses.field(default_factory=NsgaSection)
    run: RunSection = dataclasses.field(default_factory=RunSection)

    def replace(self, **dotted):
        """Copy with ``section__key=value`` or ``{"section.key": value}`` style overrides."""
        return apply_overrides(self, {k.replace("__", "."): v for k, v in dotted.items()})


# -- parsing ---------------------------------------------------------------------------

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _coerce(path, kind, raw):
    if not isinstance(raw, str):
        value = raw
        if kind is bool and not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        if kind is Tuple[float, ...]:
            try:
                return tuple(float(v) for v in value)
            except (TypeError, ValueError):
                raise ConfigError(f"{path}: expected a list of numbers, got {value!r}") from None
        try:
            if kind is int and (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: expected {kind.__name__}, got {value!r}") from None
    text = raw.strip()
    if kind is bool:
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{path}: expected a boolean, got {text!r}")
    if kind is Tuple[float, ...]:
        items = [s.strip() for s in text.strip("[]()").split(",") if s.strip()]
        try:
            return tuple(float(s) for s in items)
        except ValueError:
            raise ConfigError(f"{path}: expected a comma-separated list of numbers, got {text!r}") from None
    if kind is str:
        return text.strip("\"'")
    try:
        return int(text, 0) if kind is int else float(text)
    except ValueError:
        raise ConfigError(f"{path}: expected {kind.__name__}, got {text!r}") from None


def _schema():
    out = {}
    for sec in dataclasses.fields(ExperimentConfig):
        for f in dataclasses.fields(sec.default_factory):
            out[f"{sec.name}.{f.name}"] = f.type
    return out


SCHEMA = _schema()


def parse_text(text, source="<string>"):
    """Parse config text into a ``{dotted_key: raw_string}`` mapping."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value', got {line.strip()!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key in values:
            raise ConfigError(f"{key}: set twice ({source}:{lineno})")
        values[key] = raw
    return values


def apply_overrides(config, values):
    """New config with dotted-key ``values`` applied, then validated."""
    sections = {sec.name: {} for sec in dataclasses.fields(ExperimentConfig)}
    for key, raw in values.items():
        if key not in SCHEMA:
            raise ConfigError(f"{key}: unknown key")
        sec, name = key.split(".", 1)
        sections[sec][name] = _coerce(key, SCHEMA[key], raw)
    updated = config
    for sec, changes in sections.items():
        if changes:
            updated = dataclasses.replace(updated, **{sec: dataclasses.replace(getattr(updated, sec), **changes)})
    validate(updated)
    return updated


def loads(text, source="<string>"):
    return apply_overrides(ExperimentConfig(), parse_text(text, source))


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return loads(text, str(path))


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def as_dict(config, include_workers=True):
    out = {}
    for sec in dataclasses.fields(ExperimentConfig):
        for f in dataclasses.fields(sec.default_factory):
            key = f"{sec.name}.{f.name}"
            if key == "run.workers" and not include_workers:
                continue
            value = getattr(getattr(config, sec.name), f.name)
            out[key] = list(value) if isinstance(value, tuple) else value
    return out


def dumps(config, include_workers=True):
    """Canonical text form; ``loads(dumps(c)) == c``."""
    lines = []
    current = None
    for key, value in as_dict(config, include_workers).items():
        sec = key.split(".", 1)[0]
        if sec != current:
            if current is not None:
                lines.append("")
            current = sec
        lines.append(f"{key} = {_fmt(tuple(value) if isinstance(value, list) else value)}")
    return "\n".join(lines) + "\n"


# -- validation --------------------------------------------------------------------------

def _require(ok, path, message):
    if not ok:
        raise ConfigError(f"{path}: {message}")


def validate(c):
    f = c.field
    _require(f.grid >= 1, "field.grid", f"must be >= 1, got {f.grid}")
    _require(f.side > 0, "field.side", f"must be > 0, got {f.side}")
    _require(f.layout in LAYOUTS, "field.layout", f"must be one of {', '.join(LAYOUTS)}, got {f.layout!r}")
    _require(
        not f.probabilities or len(f.probabilities) == f.grid**2,
        "field.probabilities",
        f"needs {f.grid**2} values, got {len(f.probabilities)}",
    )
    _require(all(0.0 <= p <= 1.0 for p in f.probabilities), "field.probabilities", "values must lie in [0, 1]")
    _require(0.0 <= f.constant_p <= 1.0, "field.constant_p", f"must lie in [0, 1], got {f.constant_p}")

    s = c.signal
    _require(s.p0 > 0, "signal.p0", f"must be > 0, got {s.p0}")
    _require(s.alpha >= 0, "signal.alpha", f"must be >= 0, got {s.alpha}")
    _require(s.n > 0, "signal.n", f"must be > 0, got {s.n}")
    _require(s.sigma > 0, "signal.sigma", f"must be > 0, got {s.sigma}")

    q = c.quant
    _require(q.kind in QUANT_KINDS, "quant.kind", f"must be 'analog' or 'quantized', got {q.kind!r}")
    _require(1 <= q.bits <= 16, "quant.bits", f"must lie in [1, 16], got {q.bits}")

    m = c.motion
    _require(m.interval > 0, "motion.interval", f"must be > 0, got {m.interval}")
    _require(m.q >= 0, "motion.q", f"must be >= 0, got {m.q}")

    p = c.prior
    _require(len(p.mean) == 4, "prior.mean", f"needs 4 values (x, y, vx, vy), got {len(p.mean)}")
    _require(p.sigma_x > 0, "prior.sigma_x", f"must be > 0, got {p.sigma_x}")
    _require(p.sigma_v > 0, "prior.sigma_v", f"must be > 0, got {p.sigma_v}")

    _require(c.filter.particles >= 1, "filter.particles", f"must be >= 1, got {c.filter.particles}")

    sel = c.selection
    _require(sel.scheme in SCHEMES, "selection.scheme", f"must be one of {', '.join(SCHEMES)}, got {sel.scheme!r}")
    _require(sel.rule in RULES, "selection.rule", f"must be 'knee' or 'compromise', got {sel.rule!r}")
    _require(sel.metric in METRICS, "selection.metric", f"must be 'fi' or 'miub', got {sel.metric!r}")
    _require(0.0 <= sel.w1 <= 1.0, "selection.w1", f"must lie in [0, 1], got {sel.w1}")
    _require(0 <= sel.count <= f.grid**2, "selection.count", f"must lie in [0, {f.grid**2}], got {sel.count}")
    _require(0.0 <= sel.prefilter <= 1.0, "selection.prefilter", f"must lie in [0, 1], got {sel.prefilter}")

    n = c.nsga
    _require(n.pop_size >= 4 and n.pop_size % 2 == 0, "nsga.pop_size", f"must be even and >= 4, got {n.pop_size}")
    _require(n.generations >= 0, "nsga.generations", f"must be >= 0, got {n.generations}")
    _require(0.0 <= n.crossover_prob <= 1.0, "nsga.crossover_prob", f"must lie in [0, 1], got {n.crossover_prob}")
    _require(n.mutation_rate <= 1.0, "nsga.mutation_rate", f"must be <= 1 (negative means 1/N), got {n.mutation_rate}")

    r = c.run
    _require(r.steps >= 1, "run.steps", f"must be >= 1, got {r.steps}")
    _require(r.trials >= 1, "run.trials", f"must be >= 1, got {r.trials}")
    _require(0 <= r.seed < 2**64, "run.seed", f"must lie in [0, 2**64), got {r.seed}")
    _require(r.workers >= 1, "run.workers", f"must be >= 1, got {r.workers}")
