"""Experiment configuration: a flat sectioned key = value format.

A config fully determines a run up to thread count; the canonical
serialization (fixed section and key order, 17 significant digits) is
what gets hashed, so two configs that parse equal hash equal.  The
original text travels verbatim into the run's output directory.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from slowfast_ldp.noise import QSpec
from slowfast_ldp.slowfast import SystemSpec
from slowfast_ldp.spectral import BasisSpec, SpectralField, apply_resolvent

__all__ = [
    "KINDS",
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "canonical_text",
    "config_hash",
    "load_config_file",
]

KINDS = (
    "simulate",
    "average-rate",
    "deviation",
    "action-eval",
    "instanton",
    "ssm-compare",
    "ldp-probe",
)

FORMATS = ("csv", "binary")

# Below this the tube probability is not estimable by plain Monte Carlo
# at desk scale; runs must opt in explicitly.
PROBE_EPS_FLOOR = 0.02


class ConfigError(ValueError):
    """Invalid configuration; ``where`` is the dotted field path."""

    def __init__(self, where: str, message: str):
        self.where = where
        super().__init__(f"{where}: {message}")


def _floats(text: str, where: str) -> Tuple[float, ...]:
    try:
        vals = tuple(float(tok) for tok in text.split())
    except ValueError:
        raise ConfigError(where, f"expected space-separated numbers, got {text!r}")
    if not vals:
        raise ConfigError(where, "expected at least one number")
    if not all(np.isfinite(vals)):
        raise ConfigError(where, "values must be finite")
    return vals


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment, fully specified.

    ``q_kind`` selects the noise weights: ``inverse-square`` for
    ``q_i = i**-2``, ``first-modes:k`` for unit weight on the first
    ``k`` modes, ``sine-modes:k`` for weight ``pi/2`` on the first
    ``k`` modes (the convention in which the noise multiplies plain
    ``sin(k x)`` profiles).
    """

    kind: str
    eps_list: Tuple[float, ...]
    sigma: float
    lam: float
    n_modes: int
    q_kind: str
    q_active: int
    u0: Tuple[float, ...]
    v0: Optional[Tuple[float, ...]]  # None means slaved to u0
    t_end: float
    n_steps: int
    n_replicas: int
    seed: int
    out_dir: str
    fmt: str
    # kind-specific knobs; unused ones keep their defaults
    ramp: float = 0.0
    delta: float = 0.4
    gamma_frac: float = 0.5
    allow_small_eps: bool = False
    u_end: Optional[Tuple[float, ...]] = None
    max_iters: int = 2000
    grad_tol: float = 1e-6
    lam_prime: Optional[float] = None
    extras: Dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError("experiment.kind", f"unknown kind {self.kind!r}")
        if any(e <= 0 for e in self.eps_list):
            raise ConfigError("system.epsilon", "every epsilon must be > 0")
        if self.sigma < 0:
            raise ConfigError("system.sigma", "must be >= 0")
        if self.n_modes < 1:
            raise ConfigError("system.n_modes", "must be >= 1")
        if self.q_kind not in ("inverse-square", "first-modes", "sine-modes"):
            raise ConfigError("system.q", f"unknown weight family {self.q_kind!r}")
        if not 1 <= self.q_active <= self.n_modes:
            raise ConfigError("system.q", f"active mode count must be in 1..{self.n_modes}")
        if len(self.u0) > self.n_modes:
            raise ConfigError("system.u0", f"more than {self.n_modes} coefficients")
        if self.v0 is not None and len(self.v0) > self.n_modes:
            raise ConfigError("system.v0", f"more than {self.n_modes} coefficients")
        if self.t_end <= 0 or not np.isfinite(self.t_end):
            raise ConfigError("grid.t_end", "must be positive")
        if self.n_steps < 1:
            raise ConfigError("grid.n_steps", "must be >= 1")
        if self.n_replicas < 1:
            raise ConfigError("mc.n_replicas", "must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("mc.seed", "must fit an unsigned 64-bit integer")
        if self.fmt not in FORMATS:
            raise ConfigError("output.format", f"must be one of {FORMATS}")
        self._check_kind()

    def _check_kind(self) -> None:
        kind = self.kind
        if kind in ("action-eval", "instanton", "ldp-probe") and self.sigma == 0:
            raise ConfigError("system.sigma", f"must be > 0 for kind {kind}")
        if kind == "instanton":
            if self.u_end is None:
                raise ConfigError("instanton.u_end", "required for kind instanton")
            if self.q_kind != "inverse-square" and self.q_active < self.n_modes:
                raise ConfigError(
                    "system.q", "instanton needs noise on every mode (degenerate covariance)"
                )
            if self.max_iters < 1:
                raise ConfigError("instanton.max_iters", "must be >= 1")
            if self.grad_tol <= 0:
                raise ConfigError("instanton.grad_tol", "must be > 0")
            if self.n_steps < 4:
                raise ConfigError("grid.n_steps", "instanton needs at least 4 steps")
        if kind == "ssm-compare":
            if self.lam_prime is None:
                raise ConfigError("ssm.lam_prime", "required for kind ssm-compare")
            if abs(self.lam - (1.5 + self.lam_prime)) > 1e-12:
                raise ConfigError("system.lam", "must equal 3/2 + ssm.lam_prime")
            if self.n_modes < 3:
                raise ConfigError("system.n_modes", "ssm-compare needs at least 3 modes")
            if self.q_kind != "sine-modes" or self.q_active != 3:
                raise ConfigError(
                    "system.q", "ssm-compare uses the sine-modes:3 noise convention"
                )
        if kind == "ldp-probe":
            if self.delta <= 0:
                raise ConfigError("probe.delta", "must be > 0")
            if not 0 < self.gamma_frac:
                raise ConfigError("probe.gamma_frac", "must be > 0")
            if not self.allow_small_eps and min(self.eps_list) < PROBE_EPS_FLOOR:
                raise ConfigError(
                    "system.epsilon",
                    f"below the Monte-Carlo floor {PROBE_EPS_FLOOR}; "
                    "set probe.allow_small_eps = true to override",
                )

    # -- derived objects -------------------------------------------------

    def q_spec(self) -> QSpec:
        if self.q_kind == "inverse-square":
            return QSpec.inverse_square(self.n_modes)
        if self.q_kind == "first-modes":
            return QSpec.first_modes(self.n_modes, self.q_active)
        q = np.zeros(self.n_modes)
        q[: self.q_active] = np.pi / 2.0
        return QSpec(q)

    def basis(self) -> BasisSpec:
        return BasisSpec(self.n_modes)

    def system_spec(self, epsilon: Optional[float] = None) -> SystemSpec:
        eps = self.eps_list[0] if epsilon is None else epsilon
        return SystemSpec(eps, self.sigma, self.lam, self.basis(), self.q_spec())

    def _pad(self, coeffs: Tuple[float, ...]) -> np.ndarray:
        out = np.zeros(self.n_modes)
        out[: len(coeffs)] = coeffs
        return out

    def u0_field(self) -> SpectralField:
        return SpectralField(self._pad(self.u0), self.basis())

    def v0_field(self) -> SpectralField:
        if self.v0 is None:
            return apply_resolvent(self.u0_field())
        return SpectralField(self._pad(self.v0), self.basis())

    def u_end_field(self) -> SpectralField:
        if self.u_end is None:
            raise ConfigError("instanton.u_end", "not set")
        return SpectralField(self._pad(self.u_end), self.basis())


def _parse_q(text: str) -> Tuple[str, int]:
    name, _, count = text.partition(":")
    name = name.strip()
    if name == "inverse-square":
        if count:
            raise ConfigError("system.q", "inverse-square takes no mode count")
        return name, 1
    if name in ("first-modes", "sine-modes"):
        if not count:
            return name, 3
        try:
            return name, int(count)
        except ValueError:
            raise ConfigError("system.q", f"bad mode count {count!r}")
    raise ConfigError("system.q", f"unknown weight family {name!r}")


def _parse_bool(text: str, where: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(where, f"expected a boolean, got {text!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse the sectioned key = value format into a config."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", f"unparseable: {exc}")

    known = {
        "experiment": {"kind"},
        "system": {"epsilon", "sigma", "lam", "n_modes", "q", "u0", "v0"},
        "grid": {"t_end", "n_steps"},
        "mc": {"n_replicas", "seed"},
        "output": {"directory", "format"},
        "probe": {"delta", "gamma_frac", "ramp", "allow_small_eps"},
        "instanton": {"u_end", "max_iters", "grad_tol"},
        "ssm": {"lam_prime"},
    }
    for section in cp.sections():
        if section not in known:
            raise ConfigError(section, "unknown section")
        for key in cp[section]:
            if key not in known[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")

    def need(section: str, key: str) -> str:
        if not cp.has_option(section, key):
            raise ConfigError(f"{section}.{key}", "missing required key")
        return cp.get(section, key)

    def opt(section: str, key: str, default: str) -> str:
        return cp.get(section, key) if cp.has_option(section, key) else default

    def number(section: str, key: str, text_val: str, cast):
        try:
            return cast(text_val)
        except ValueError:
            raise ConfigError(f"{section}.{key}", f"expected a number, got {text_val!r}")

    kind = need("experiment", "kind").strip()
    q_kind, q_active = _parse_q(opt("system", "q", "inverse-square"))
    u0_text = opt("system", "u0", "0").strip()
    v0_text = opt("system", "v0", "slaved").strip()

    try:
        return ExperimentConfig(
            kind=kind,
            eps_list=_floats(need("system", "epsilon"), "system.epsilon"),
            sigma=number("system", "sigma", need("system", "sigma"), float),
            lam=number("system", "lam", need("system", "lam"), float),
            n_modes=number("system", "n_modes", need("system", "n_modes"), int),
            q_kind=q_kind,
            q_active=q_active,
            u0=(0.0,) if u0_text == "zero" else _floats(u0_text, "system.u0"),
            v0=None if v0_text == "slaved" else _floats(v0_text, "system.v0"),
            t_end=number("grid", "t_end", need("grid", "t_end"), float),
            n_steps=number("grid", "n_steps", need("grid", "n_steps"), int),
            n_replicas=number("mc", "n_replicas", need("mc", "n_replicas"), int),
            seed=number("mc", "seed", need("mc", "seed"), int),
            out_dir=need("output", "directory").strip(),
            fmt=opt("output", "format", "csv").strip(),
            ramp=number("probe", "ramp", opt("probe", "ramp", "0"), float),
            delta=number("probe", "delta", opt("probe", "delta", "0.4"), float),
            gamma_frac=number("probe", "gamma_frac", opt("probe", "gamma_frac", "0.5"), float),
            allow_small_eps=_parse_bool(
                opt("probe", "allow_small_eps", "false"), "probe.allow_small_eps"
            ),
            u_end=(
                _floats(cp.get("instanton", "u_end"), "instanton.u_end")
                if cp.has_option("instanton", "u_end")
                else None
            ),
            max_iters=number(
                "instanton", "max_iters", opt("instanton", "max_iters", "2000"), int
            ),
            grad_tol=number(
                "instanton", "grad_tol", opt("instanton", "grad_tol", "1e-6"), float
            ),
            lam_prime=(
                number("ssm", "lam_prime", cp.get("ssm", "lam_prime"), float)
                if cp.has_option("ssm", "lam_prime")
                else None
            ),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("config", str(exc))


def _fmt(x: float) -> str:
    return "%.17g" % x


def canonical_text(config: ExperimentConfig) -> str:
    """Fixed-order serialization; parsing it reproduces the config."""
    cp = configparser.ConfigParser(interpolation=None)
    cp["experiment"] = {"kind": config.kind}
    q = config.q_kind
    if q != "inverse-square":
        q = f"{q}:{config.q_active}"
    cp["system"] = {
        "epsilon": " ".join(_fmt(e) for e in config.eps_list),
        "sigma": _fmt(config.sigma),
        "lam": _fmt(config.lam),
        "n_modes": str(config.n_modes),
        "q": q,
        "u0": " ".join(_fmt(c) for c in config.u0),
        "v0": "slaved" if config.v0 is None else " ".join(_fmt(c) for c in config.v0),
    }
    cp["grid"] = {"t_end": _fmt(config.t_end), "n_steps": str(config.n_steps)}
    cp["mc"] = {"n_replicas": str(config.n_replicas), "seed": str(config.seed)}
    cp["output"] = {"directory": config.out_dir, "format": config.fmt}
    cp["probe"] = {
        "delta": _fmt(config.delta),
        "gamma_frac": _fmt(config.gamma_frac),
        "ramp": _fmt(config.ramp),
        "allow_small_eps": "true" if config.allow_small_eps else "false",
    }
    if config.u_end is not None:
        cp["instanton"] = {
            "u_end": " ".join(_fmt(c) for c in config.u_end),
            "max_iters": str(config.max_iters),
            "grad_tol": _fmt(config.grad_tol),
        }
    if config.lam_prime is not None:
        cp["ssm"] = {"lam_prime": _fmt(config.lam_prime)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_text(config).encode("utf-8")).hexdigest()


def load_config_file(path: str) -> Tuple[ExperimentConfig, str]:
    """Read and parse a config file; returns the config and raw text."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}")
    return parse_config(text), text
