"""Flat `key = value` config files.

    # comment
    p = 3
    poly_coeffs = 0, 0, 0, 1
    power_terms = -2:3, 1:2.5
    g_expression = 1.0*sin(1*pi*x) - 0.5*x^2
    u0_expression = 2*sin(pi*x)
    grid_n = 128

Unknown or repeated keys and malformed values are ConfigErrors naming the key
and the line.
"""
import logging
import re
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from dampwave.models.config import CommandOptions, ExpressionTerm, ModelConfig, Nonlinearity
from dampwave.services.errors import ConfigError
from dampwave.services.grid import Grid

log = logging.getLogger("dampwave.config")

MODEL_KEYS = {
    "p": float,
    "grid_n": int,
    "dt": float,
    "t_end": float,
    "newton_tol": float,
    "newton_max_iter": int,
}
OPTION_KEYS = {
    "scheme": str,
    "stride": int,
    "n_starts": int,
    "ensemble_size": int,
    "t_long": float,
    "amplitude_min": float,
    "amplitude_max": float,
    "eps": float,
}
SPECIAL_KEYS = {"poly_coeffs", "power_terms", "g_expression", "g_samples", "u0_expression", "v0_expression"}
KNOWN_KEYS = set(MODEL_KEYS) | set(OPTION_KEYS) | SPECIAL_KEYS

_NUMBER = r"[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?"
_SIN_TERM = re.compile(rf"^(?P<c>{_NUMBER})?\*?sin\(\s*(?P<k>{_NUMBER})?\s*\*?\s*pi\s*\*\s*x\s*\)$")
_POW_TERM = re.compile(rf"^(?P<c>{_NUMBER})?\*?x(?:\^(?P<m>{_NUMBER}))?$")
_CONST_TERM = re.compile(rf"^(?P<c>{_NUMBER})$")


# ---------------------------------------------------------------------------
# Forcing grammar
# ---------------------------------------------------------------------------

def parse_expression(text: str) -> tuple[ExpressionTerm, ...]:
    """Sum of terms c*sin(k*pi*x) and c*x^m (m = 0 for constants); signs allowed."""
    compact = text.replace(" ", "")
    if not compact:
        raise ValueError("empty g expression")
    # split before every sign that is not an exponent sign
    pieces = [s for s in re.split(r"(?<![eE])(?=[+-])", compact) if s]
    terms = []
    for piece in pieces:
        sign = -1.0 if piece.startswith("-") else 1.0
        body = piece.lstrip("+-")
        if m := _SIN_TERM.match(body):
            c = float(m.group("c") or 1.0)
            k = float(m.group("k") or 1.0)
            terms.append(ExpressionTerm(kind="sin", coeff=sign * c, k=k))
        elif m := _POW_TERM.match(body):
            c = float(m.group("c") or 1.0)
            k = float(m.group("m") or 1.0)
            terms.append(ExpressionTerm(kind="pow", coeff=sign * c, k=k))
        elif m := _CONST_TERM.match(body):
            terms.append(ExpressionTerm(kind="pow", coeff=sign * float(m.group("c")), k=0.0))
        else:
            raise ValueError(f"unsupported term '{piece}' (use c*sin(k*pi*x) or c*x^m)")
    return tuple(terms)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _power_terms(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for chunk in text.split(","):
        if not chunk.strip():
            continue
        b, q = chunk.split(":")
        out.append((float(b), float(q)))
    return tuple(out)


# ---------------------------------------------------------------------------
# File parsing
# ---------------------------------------------------------------------------

def read_key_values(path: Path) -> dict[str, tuple[str, int]]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    entries: dict[str, tuple[str, int]] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("expected 'key = value'", line=lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in KNOWN_KEYS:
                raise ConfigError(f"unknown key (known: {', '.join(sorted(KNOWN_KEYS))})", key=key, line=lineno)
            if key in entries:
                raise ConfigError(f"duplicate key, first set on line {entries[key][1]}", key=key, line=lineno)
            entries[key] = (value, lineno)
    return entries


def parse_config(path: Path, overrides: Optional[dict] = None,
                 allow_linear: bool = False) -> tuple[ModelConfig, CommandOptions]:
    """Parse a config file into the model and the command options.

    `overrides` (e.g. p from the command line) win over file values.
    """
    entries = read_key_values(path)
    base_dir = Path(path).parent
    model_data: dict = {"allow_linear": allow_linear}
    option_data: dict = {}
    nl_data: dict = {}

    for key, (value, lineno) in entries.items():
        try:
            if key in MODEL_KEYS:
                model_data[key] = MODEL_KEYS[key](value)
            elif key in OPTION_KEYS:
                option_data[key] = OPTION_KEYS[key](value)
            elif key == "poly_coeffs":
                nl_data["poly_coeffs"] = _floats(value)
            elif key == "power_terms":
                nl_data["power_terms"] = _power_terms(value)
            elif key == "g_expression":
                model_data["g_terms"] = parse_expression(value)
            elif key in ("u0_expression", "v0_expression"):
                option_data[key[:2] + "_terms"] = parse_expression(value)
        except ValueError as e:
            raise ConfigError(f"malformed value '{value}': {e}", key=key, line=lineno) from e

    if "g_expression" in entries and "g_samples" in entries:
        raise ConfigError("give either g_expression or g_samples", key="g_samples",
                          line=entries["g_samples"][1])
    if overrides:
        model_data.update({k: v for k, v in overrides.items() if v is not None})

    def line_of(loc) -> tuple[Optional[str], Optional[int]]:
        key = str(loc[0]) if loc else None
        if key == "nonlinearity" and len(loc) > 1:
            key = str(loc[1])
        if key in entries:
            return key, entries[key][1]
        return key, None

    try:
        model_data["nonlinearity"] = Nonlinearity(**nl_data)
        if "g_samples" in entries:
            from dampwave.storage.artifacts import read_grid_function
            value, lineno = entries["g_samples"]
            n = model_data.get("grid_n", ModelConfig.model_fields["grid_n"].default)
            try:
                samples = read_grid_function(base_dir / value, Grid(n))
            except Exception as e:
                raise ConfigError(str(e), key="g_samples", line=lineno) from e
            model_data["g_samples"] = tuple(samples.values)
        cfg = ModelConfig(**model_data)
        options = CommandOptions(**option_data)
    except ValidationError as e:
        err = e.errors()[0]
        msg = err.get("msg", str(e)).removeprefix("Value error, ")
        key, lineno = line_of(err.get("loc", ()))
        if key is None:
            # model-level checks start their message with the offending key
            first = msg.split(" ", 1)[0]
            key, lineno = line_of((first,)) if first in KNOWN_KEYS else (None, None)
        raise ConfigError(msg, key=key, line=lineno) from e
    log.info(f"config {path}: p={cfg.p}, grid_n={cfg.grid_n}, dt={cfg.dt}, t_end={cfg.t_end}")
    return cfg, options


def echo_config(cfg: ModelConfig, options: CommandOptions) -> dict:
    """Flat view of the effective configuration for the manifest."""
    out = {
        "p": cfg.p,
        "poly_coeffs": ", ".join(repr(c) for c in cfg.nonlinearity.poly_coeffs),
        "power_terms": ", ".join(f"{b!r}:{q!r}" for b, q in cfg.nonlinearity.power_terms),
        "g_expression": " + ".join(_format_term(t) for t in cfg.g_terms),
        "g_samples": "given" if cfg.g_samples is not None else "none",
        "grid_n": cfg.grid_n,
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "newton_tol": cfg.newton_tol,
        "newton_max_iter": cfg.newton_max_iter,
    }
    out.update(options.model_dump(exclude={"u0_terms", "v0_terms"}))
    out["u0_expression"] = " + ".join(_format_term(t) for t in options.u0_terms)
    out["v0_expression"] = " + ".join(_format_term(t) for t in options.v0_terms)
    return out


def _format_term(term: ExpressionTerm) -> str:
    if term.kind == "sin":
        return f"{term.coeff!r}*sin({term.k!r}*pi*x)"
    return f"{term.coeff!r}*x^{term.k!r}"
