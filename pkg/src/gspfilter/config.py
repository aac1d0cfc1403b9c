"""Flat ``key = value`` run configuration for the command-line tools.

Sections and keys (all optional, defaults shown by :data:`DEFAULTS`)::

    [run]     seed, out
    [grid]    n, L, dim
    [filter]  signal, noise, methods, tau, phi
    [verify]  signal, noise, N, oracle_N, fault
    [gabor]   n2, a, b, L2
    [decay]   symbols, r, radii, t_target

Measures use the textual constructors of
:func:`gspfilter.spectral.measure_from_name`.  Several filter configurations
can be listed in ``filter.signal`` / ``filter.noise`` separated by ``|``;
they are paired in order.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gabor import GaborSystem, default_system
from .grid import Grid
from .spectral import measure_from_name

__all__ = ["DEFAULTS", "RunConfig", "ConfigError", "parse_phi", "METHODS"]

METHODS = ("wss", "commuting", "general", "douglas")

DEFAULTS = {
    "run": {"seed": "0", "out": "gsp-out"},
    "grid": {"n": "64", "L": "8.0", "dim": "1"},
    "filter": {
        "signal": "gaussian 4.0 1.5",
        "noise": "lebesgue 0.5",
        "methods": "wss, commuting, general, douglas",
        "tau": "",
        "phi": "gaussian 0 1; modulated 0 1 2; bump 0 2",
    },
    "verify": {
        "signal": "gaussian 4.0 1.5",
        "noise": "lebesgue 0.5",
        "N": "20000",
        "oracle_N": "20000",
        "fault": "0",
    },
    "gabor": {"n2": "64", "a": "", "b": "", "L2": ""},
    "decay": {"symbols": "gaussian, rough", "r": "12", "radii": "3, 5, 7.5, 10.5", "t_target": "4"},
}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def parse_phi(spec: str):
    """Parse ``kind args; kind args; ...`` into ``(label, kind, params)`` triples.

    Kinds: ``gaussian x0 s`` (centre, width), ``modulated x0 s xi0`` and
    ``bump x0 r`` (smooth compactly supported bump of radius ``r``).
    """
    out = []
    arity = {"gaussian": 2, "modulated": 3, "bump": 2}
    for term in spec.split(";"):
        parts = term.split()
        if not parts:
            continue
        kind = parts[0].lower()
        if kind not in arity:
            raise ConfigError(f"unknown test function {kind!r}")
        try:
            params = tuple(float(v) for v in parts[1:])
        except ValueError as exc:
            raise ConfigError(f"bad parameters in {term.strip()!r}") from exc
        if len(params) != arity[kind]:
            raise ConfigError(f"{kind} expects {arity[kind]} parameters, got {len(params)}")
        out.append((" ".join(parts), kind, params))
    if not out:
        raise ConfigError("no test functions configured")
    return out


def _floats(text: str):
    return [float(v) for v in text.replace(",", " ").split()]


@dataclass
class RunConfig:
    """Validated configuration.

    Build with :meth:`load` (file plus overrides) or :meth:`from_mapping`.
    """

    raw: dict = field(repr=False)
    seed: int = 0
    out: str = "gsp-out"

    # construction -------------------------------------------------------
    @classmethod
    def from_mapping(cls, mapping: Optional[dict] = None) -> "RunConfig":
        raw = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
        for sec, vals in (mapping or {}).items():
            if sec not in raw:
                raise ConfigError(f"unknown section [{sec}]")
            for k, v in vals.items():
                if k not in raw[sec]:
                    raise ConfigError(f"unknown key {k!r} in [{sec}]")
                raw[sec][k] = str(v)
        cfg = cls(raw)
        cfg._validate()
        return cfg

    @classmethod
    def load(cls, path=None, seed: Optional[int] = None, out: Optional[str] = None) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        parser.optionxform = str
        if path is not None:
            with open(path) as fh:
                parser.read_file(fh)
        mapping = {sec: dict(parser[sec]) for sec in parser.sections()}
        if seed is not None:
            mapping.setdefault("run", {})["seed"] = str(seed)
        if out is not None:
            mapping.setdefault("run", {})["out"] = str(out)
        return cls.from_mapping(mapping)

    def get(self, section: str, key: str) -> str:
        return self.raw[section][key].strip()

    # typed accessors ----------------------------------------------------
    def grid(self) -> Grid:
        return Grid(int(self.get("grid", "n")), float(self.get("grid", "L")), int(self.get("grid", "dim")))

    def filter_cases(self):
        """``[(signal, noise), ...]`` measure specs for ``cmd_filter``."""
        sig = [s.strip() for s in self.get("filter", "signal").split("|")]
        noi = [s.strip() for s in self.get("filter", "noise").split("|")]
        if len(sig) != len(noi):
            if len(sig) == 1:
                sig = sig * len(noi)
            elif len(noi) == 1:
                noi = noi * len(sig)
            else:
                raise ConfigError("filter.signal and filter.noise list different numbers of cases")
        return list(zip(sig, noi))

    def methods(self):
        ms = [m.strip().lower() for m in self.get("filter", "methods").split(",") if m.strip()]
        bad = [m for m in ms if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
        return ms

    def tau(self) -> Optional[float]:
        t = self.get("filter", "tau")
        return float(t) if t else None

    def phi(self):
        return parse_phi(self.get("filter", "phi"))

    def gabor_system(self) -> GaborSystem:
        n2 = int(self.get("gabor", "n2"))
        a, b, L2 = self.get("gabor", "a"), self.get("gabor", "b"), self.get("gabor", "L2")
        if not (a or b or L2):
            return default_system(n2)
        if not (a and b and L2):
            raise ConfigError("gabor.a, gabor.b and gabor.L2 must be given together")
        return GaborSystem(Grid(n2, float(L2), dim=2), float(a), float(b))

    def decay_symbols(self):
        names = [s.strip().lower() for s in self.get("decay", "symbols").split(",") if s.strip()]
        bad = [s for s in names if s not in ("gaussian", "rough", "empty")]
        if bad:
            raise ConfigError(f"unknown decay symbols {bad}")
        return names

    def radii(self):
        return _floats(self.get("decay", "radii"))

    # validation ---------------------------------------------------------
    def _validate(self) -> None:
        try:
            self.seed = int(self.get("run", "seed"))
        except ValueError as exc:
            raise ConfigError("run.seed must be an integer") from exc
        if not 0 <= self.seed < 2**64:
            raise ConfigError("run.seed must fit in an unsigned 64-bit integer")
        self.out = self.get("run", "out")
        try:
            g = self.grid()
            for sec in ("filter", "verify"):
                for spec in self.get(sec, "signal").split("|") + self.get(sec, "noise").split("|"):
                    if not spec.strip().lower().startswith("file "):
                        measure_from_name(g, spec)
            for key in ("N", "oracle_N", "fault"):
                float(self.get("verify", key))
            self.filter_cases()
            self.methods()
            self.tau()
            self.phi()
            self.decay_symbols()
            self.radii()
            float(self.get("decay", "r"))
            float(self.get("decay", "t_target"))
            a, b = self.get("gabor", "a"), self.get("gabor", "b")
            if a and b and float(a) * float(b) >= np.pi:
                raise ConfigError(f"lattice too sparse: a*b = {float(a) * float(b):.6g} >= pi")
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
