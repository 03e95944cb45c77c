"""Serialization: configs, CSV tables, JSON reports and plain-text plot data."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .blocks import Cocycle, Instance
from .errors import ConfigError, InvalidInput
from .surd import Surd
from .temporal import TemporalDist

# -- config -------------------------------------------------------------------------

_DEFAULT_CAPS = {
    "cap_explicit": 10**7,
    "cap_stream": 2 * 10**7,
    "cap_extend": 10_000,
    "cap_trials": 10**7,
}


@dataclass(frozen=True)
class InstanceConfig:
    alpha: Surd
    Q: int
    d: int
    phi: np.ndarray
    k_max: int = 40
    seed: int = 0
    out: str = "out"
    formats: tuple[str, ...] = ("csv", "json")
    caps: dict[str, int] = field(default_factory=lambda: dict(_DEFAULT_CAPS))

    def instance(self) -> Instance:
        return Instance(self.alpha, Cocycle(self.phi))


_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


def parse_config_text(text: str) -> InstanceConfig:
    """Parse ``key = value`` lines; values are JSON, bare words are strings.

    Raises
    ------
    ConfigError
        Syntax problems (with line and column), unknown keys or inconsistent
        fields. Rational ``alpha`` and non-centered ``phi`` surface as their
        own ``InvalidInput`` subclasses.
    """
    raw: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        m = _LINE.match(body)
        if m is None:
            col = len(body) - len(body.lstrip()) + 1
            raise ConfigError(f"line {lineno}, column {col}: expected 'key = value'")
        key, val = m.group(1), m.group(2)
        try:
            raw[key] = json.loads(val)
        except json.JSONDecodeError as exc:
            if key == "alpha" or re.fullmatch(r"[A-Za-z0-9_./-]+", val):
                raw[key] = val
            else:
                col = body.index(val) + exc.pos + 1
                raise ConfigError(f"line {lineno}, column {col}: {exc.msg}") from None
    return config_from_mapping(raw)


def config_from_mapping(raw: Mapping[str, Any]) -> InstanceConfig:
    known = {"alpha", "Q", "d", "phi", "k_max", "seed", "out", "formats", *_DEFAULT_CAPS}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown keys: {sorted(extra)}")
    for key in ("alpha", "phi"):
        if key not in raw:
            raise ConfigError(f"missing key: {key}")
    try:
        alpha = Surd.parse(str(raw["alpha"]))
    except InvalidInput as exc:
        raise ConfigError(f"alpha: {exc}") from None
    phi = np.asarray(raw["phi"], dtype=np.int64)
    if phi.ndim == 1:
        phi = phi[:, None]
    Q = int(raw.get("Q", phi.shape[0]))
    d = int(raw.get("d", phi.shape[1]))
    if phi.shape != (Q, d):
        raise ConfigError(f"phi has shape {phi.shape}, expected ({Q}, {d})")
    caps = dict(_DEFAULT_CAPS)
    for key in _DEFAULT_CAPS:
        if key in raw:
            caps[key] = int(raw[key])
            if caps[key] <= 0:
                raise ConfigError(f"{key} must be positive")
    formats = raw.get("formats", ["csv", "json"])
    formats = (formats,) if isinstance(formats, str) else tuple(formats)
    cfg = InstanceConfig(
        alpha, Q, d, phi, int(raw.get("k_max", 40)), int(raw.get("seed", 0)),
        str(raw.get("out", "out")), formats, caps,
    )
    cfg.instance()  # centering and irrationality checks
    return cfg


def parse_config(path: str | Path) -> InstanceConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config not found: {p}")
    return parse_config_text(p.read_text())


def dump_config(cfg: InstanceConfig) -> str:
    a, b, c, D = cfg.alpha.as_tuple()
    lines = [
        f"alpha = ({a}{b:+d}*sqrt({D}))/{c}",
        f"Q = {cfg.Q}",
        f"d = {cfg.d}",
        f"phi = {json.dumps(cfg.phi.tolist())}",
        f"k_max = {cfg.k_max}",
        f"seed = {cfg.seed}",
        f"out = {json.dumps(cfg.out)}",
        f"formats = {json.dumps(list(cfg.formats))}",
    ]
    lines += [f"{k} = {v}" for k, v in cfg.caps.items()]
    return "\n".join(lines) + "\n"


# -- JSON ---------------------------------------------------------------------------


def to_jsonable(obj: Any) -> Any:
    """Exact rationals as ``"p/q"``, big integers as decimal strings, complex as ``[re, im]``."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, Surd):
        a, b, c, D = obj.as_tuple()
        return f"({a}{b:+d}*sqrt({D}))/{c}"
    if isinstance(obj, (int, np.integer)):
        v = int(obj)
        return v if abs(v) < 2**53 else str(v)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()] if obj.ndim else to_jsonable(obj.item())
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "__dataclass_fields__"):
        return {k: to_jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def parse_rational(text: str) -> Fraction:
    return Fraction(text)


def write_json(path: str | Path, obj: Any) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return p


# -- CSV ----------------------------------------------------------------------------


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]],
              comments: Sequence[str] = ()) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else v for v in row])
    return p


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]], list[str]]:
    comments, lines = [], []
    for line in Path(path).read_text().splitlines():
        (comments if line.startswith("#") else lines).append(line)
    rows = list(csv.reader(lines))
    return rows[0], rows[1:], [c[2:] for c in comments]


def dist_csv(path: str | Path, V: TemporalDist, ell: int | None = None) -> Path:
    """Rows ``nu_1..nu_d,weight``; the level, block and length go in a comment header."""
    header = [f"nu_{a + 1}" for a in range(V.d)] + ["weight"]
    meta = [f"k={V.k} i={V.i} eps={V.eps} ell={V.total if ell is None else ell}"]
    return write_csv(path, header, V.to_rows(), meta)


def samples_csv(path: str | Path, Q: int, d: int, empirical: Mapping[int, Any]) -> Path:
    header = ["s_i", "s_eps"] + [f"nu_{a + 1}" for a in range(d)] + ["count"]
    rows = []
    for s in sorted(empirical):
        for nu, c in sorted(empirical[s].counts.items()):
            rows.append([s // Q, s % Q, *nu, c])
    return write_csv(path, header, rows)


RATIO_HEADER = ("k", "ratio0", "ratio1", "ks", "wrllt_p1", "wrllt_p2")


def ratio_csv(path: str | Path, rows: Iterable[Sequence[Any]]) -> Path:
    return write_csv(path, RATIO_HEADER, rows)


def write_xy(path: str | Path, xs: Sequence[float], ys: Sequence[float], title: str = "") -> Path:
    """Whitespace-separated ``x y`` columns for gnuplot."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w") as fh:
        if title:
            fh.write(f"# {title}\n")
        for x, y in zip(xs, ys):
            fh.write(f"{x!r} {y!r}\n")
    return p
