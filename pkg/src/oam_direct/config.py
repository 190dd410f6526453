"""
Experiment configuration: an INI file with sections [state], [measurement],
[noise], [sorter] and [output].

Numeric values may be written as plain numbers or as short arithmetic in
``pi`` (``2*pi/9``).  Every key is checked against the schema below before
anything is computed; unknown sections or keys are errors.  A
``manifest.json`` written by a previous run can be loaded in place of an
INI file and reproduces that run.

Noise defaults are placeholders except the detector dark rate: photon flux,
integration time and background light are free parameters of the model.
"""
import ast
import configparser
import hashlib
import json
import math
import operator
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg, ast.UAdd: operator.pos}


def _eval_number(text):
    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and type(node.value) in (int, float):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](walk(node.operand))
        raise ValueError("not a number")

    if not isinstance(text, str):
        return text
    return walk(ast.parse(text.strip(), mode="eval"))


def _real(lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False):
    def parse(raw):
        if isinstance(raw, bool):
            raise ValueError("expected a number")
        try:
            val = float(_eval_number(raw))
        except (ValueError, SyntaxError, TypeError, ZeroDivisionError, OverflowError):
            raise ValueError(f"expected a number, got {raw!r}") from None
        if not math.isfinite(val):
            raise ValueError("must be finite")
        if val < lo or (lo_open and val == lo) or val > hi or (hi_open and val == hi):
            left, right = "(" if lo_open else "[", ")" if hi_open else "]"
            raise ValueError(f"{val} outside {left}{lo}, {hi}{right}")
        return val
    return parse


def _integer(lo=None, hi=None):
    def parse(raw):
        if isinstance(raw, bool) or isinstance(raw, float):
            raise ValueError(f"expected an integer, got {raw!r}")
        try:
            val = int(str(raw).strip())
        except ValueError:
            raise ValueError(f"expected an integer, got {raw!r}") from None
        if (lo is not None and val < lo) or (hi is not None and val > hi):
            raise ValueError(f"{val} outside [{lo}, {hi}]")
        return val
    return parse


def _boolean(raw):
    if isinstance(raw, bool):
        return raw
    word = str(raw).strip().lower()
    if word in ("1", "true", "yes", "on"):
        return True
    if word in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _text(raw):
    val = str(raw).strip()
    if not val:
        raise ValueError("must not be empty")
    return val


def _auto_or(parse):
    def inner(raw):
        if isinstance(raw, str) and raw.strip().lower() == "auto" or raw is None:
            return None
        return parse(raw)
    return inner


def _formats(raw):
    items = raw if isinstance(raw, list) else [s.strip() for s in str(raw).split(",") if s.strip()]
    bad = [s for s in items if s not in ("csv", "json")]
    if bad or not items:
        raise ValueError(f"formats must be a non-empty subset of csv,json; got {raw!r}")
    return sorted(set(items))


SCHEMA = {
    "state": {
        "delta_theta": (_real(0, 2 * math.pi, lo_open=True), 2 * math.pi / 9),
        "theta0": (_real(-math.pi, math.pi), math.pi / 9),
        "l_max": (_integer(1, 200), 13),
    },
    "measurement": {
        "alpha": (_real(0, math.pi / 2, lo_open=True), math.pi / 9),
        "theta_index": (_integer(0), 0),
        "runs": (_integer(1, 100_000), 50),
        "defocus": (_real(), 0.0),
        "tilt": (_real(), 0.0),
        "drift_tilt": (_real(), 0.0),
    },
    "noise": {
        "photons_per_setting": (_integer(0), 100_000),
        "dark_rate_hz": (_real(0), 100.0),
        "background_rate_hz": (_real(0), 0.0),
        "integration_s": (_real(0), 1.0),
        "seed": (_integer(0, 2**64 - 1), 0),
        "noiseless": (_boolean, False),
    },
    "sorter": {
        "grid": (_integer(64, 8192), 1024),
        "pitch_m": (_real(0, lo_open=True), 10e-6),
        "wavelength_m": (_real(0, lo_open=True), 633e-9),
        "waist_m": (_real(0, lo_open=True), 2.4e-3),
        "f_m": (_real(0, lo_open=True), 0.3),
        "n_index": (_real(1, 2, lo_open=True, hi_open=True), 1.49),
        "strip_fraction": (_real(0, 1, lo_open=True), 0.9),
        "a_m": (_auto_or(_real(0, lo_open=True)), None),
        "b_m": (_auto_or(_real(0, lo_open=True)), None),
        "l_range": (_integer(1, 100), 13),
        "fanout": (_boolean, True),
        "copies": (_integer(1, 15), 3),
        "uniformity_tol": (_real(0, 1, lo_open=True, hi_open=True), 0.01),
        "window_fraction": (_real(0, 1, lo_open=True), 1.0),
        "pad": (_integer(2, 32), 8),
    },
    "output": {
        "directory": (_text, "out"),
        "formats": (_formats, ["csv", "json"]),
        "counts": (_boolean, False),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration; ``values[section][key]``."""

    values: dict

    def __getitem__(self, section):
        return self.values[section]

    def to_dict(self):
        return {sec: dict(keys) for sec, keys in self.values.items()}

    def portable_dict(self):
        """Everything that affects results; the output directory is left out."""
        raw = self.to_dict()
        raw["output"].pop("directory")
        return raw

    def digest(self):
        text = json.dumps(self.portable_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def replace(self, section, **changes):
        raw = self.to_dict()
        raw[section].update(changes)
        return build_config(raw)


def build_config(raw):
    """Validate a nested mapping against :data:`SCHEMA`, filling defaults."""
    values = {}
    for section in raw:
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", key=section)
    for section, keys in SCHEMA.items():
        given = dict(raw.get(section, {}))
        for key in given:
            if key not in keys:
                raise ConfigError("unknown key", key=f"{section}.{key}")
        out = {}
        for key, (parse, default) in keys.items():
            if key not in given:
                out[key] = default
                continue
            try:
                out[key] = parse(given[key])
            except ValueError as exc:
                raise ConfigError(str(exc), key=f"{section}.{key}") from None
        values[section] = out
    d = 2 * values["state"]["l_max"] + 1
    if values["measurement"]["theta_index"] >= d:
        raise ConfigError(f"must be < d = {d}", key="measurement.theta_index")
    sorter = values["sorter"]
    if 2 * math.pi * sorter["waist_m"] / sorter["pitch_m"] / sorter["l_range"] < 8:
        raise ConfigError("phase winding of the highest mode is under-sampled at the waist",
                          key="sorter.l_range")
    if values["sorter"]["copies"] % 2 != 1:
        raise ConfigError("must be odd", key="sorter.copies")
    if values["sorter"]["grid"] % 2:
        raise ConfigError("must be even", key="sorter.grid")
    return ExperimentConfig(values)


def parse_ini(text):
    parser = configparser.ConfigParser(interpolation=None, strict=True, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed file: {exc.message if hasattr(exc, 'message') else exc}",
                          key="<file>") from None
    return build_config({sec: dict(parser[sec]) for sec in parser.sections()})


def load_config(path=None):
    """Load an INI file or a run manifest; ``None`` gives all defaults."""
    if path is None:
        return build_config({})
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed manifest: {exc}", key="<file>") from None
        if not isinstance(data, dict) or not isinstance(data.get("config"), dict):
            raise ConfigError("manifest has no config object", key="config")
        return build_config(data["config"])
    return parse_ini(text)


def default_ini():
    """Commented INI text listing every key with its default."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (_, default) in keys.items():
            if default is None:
                shown = "auto"
            elif isinstance(default, list):
                shown = ",".join(default)
            elif isinstance(default, bool):
                shown = str(default).lower()
            elif isinstance(default, str):
                shown = default
            else:
                shown = repr(default)
            lines.append(f"{key} = {shown}")
        lines.append("")
    return "\n".join(lines)
