"""Experiment configuration: JSON loading, defaults and validation."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

from .detect import ALGO_A, DetectionConfig
from .freq import CandidateGrid
from .lattice import delta_opt, is_prime
from .pde import KINDS, PERIODIZATION_FOR, RHS, Mesh, PdeModel
from .periodize import Periodization

#: rhs used by each model family
RHS_FOR = {"periodic": "x2", "affine": "one", "lognormal": "trig"}

DEFAULT_M0 = 4099

# key -> default; None marks a required key
SCHEMA = {
    "model": {"kind": None, "d_y": None, "mu": 2.0, "c": 0.0, "rhs": None},
    "mesh": {"n": 16},
    "detection": {"N": 32, "s": None, "s_local": None, "theta": 1e-12, "r": 5,
                  "algoA": "multiple_r1l", "sample_batch_limit": 65536},
    "periodization": {"kind": None, "alpha": -1.0, "beta": 1.0, "delta": None, "M0": DEFAULT_M0},
    "post": {"n_test": 1000, "n_mc": 0},
    "seed": 0,
    "output": "out",
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field(s)."""


def _merge(schema: dict, data: dict, path: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    unknown = sorted(set(data) - set(schema))
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown key(s): {', '.join(where + k for k in unknown)}")
    out = {}
    for key, default in schema.items():
        name = f"{path}.{key}" if path else key
        if isinstance(default, dict):
            out[key] = _merge(default, data.get(key, {}), name)
        elif key in data:
            out[key] = data[key]
        else:
            out[key] = copy.deepcopy(default)
    return out


def _number(cfg: dict, section: str, key: str, kind=float, minimum=None):
    val = cfg[section][key]
    name = f"{section}.{key}"
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {val!r}")
    if kind is int and int(val) != val:
        raise ConfigError(f"{name}: expected an integer, got {val!r}")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{name}: must be >= {minimum}, got {val!r}")
    return kind(val)


@dataclass
class ExperimentConfig:
    """Resolved experiment: model, mesh, detection, periodization and post options."""

    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = _merge(SCHEMA, data, "")
        m, p = cfg["model"], cfg["periodization"]
        if m["kind"] is None:
            raise ConfigError("model.kind is required")
        if m["kind"] not in KINDS:
            raise ConfigError(f"model.kind: expected one of {KINDS}, got {m['kind']!r}")
        if m["d_y"] is None:
            raise ConfigError("model.d_y is required")
        _number(cfg, "model", "d_y", int, 2)
        if m["rhs"] is None:
            m["rhs"] = RHS_FOR[m["kind"]]
        if m["rhs"] not in RHS:
            raise ConfigError(f"model.rhs: expected one of {RHS}, got {m['rhs']!r}")
        if p["kind"] is None:
            p["kind"] = PERIODIZATION_FOR[m["kind"]]
        if p["kind"] != PERIODIZATION_FOR[m["kind"]]:
            raise ConfigError(f"model.kind={m['kind']!r} is incompatible with periodization.kind="
                              f"{p['kind']!r}; expected {PERIODIZATION_FOR[m['kind']]!r}")
        if m["rhs"] != RHS_FOR[m["kind"]]:
            raise ConfigError(f"model.kind={m['kind']!r} is paired with model.rhs="
                              f"{RHS_FOR[m['kind']]!r}, got {m['rhs']!r}")
        _number(cfg, "model", "mu")
        _number(cfg, "model", "c", minimum=0)
        _number(cfg, "mesh", "n", int, 2)
        d = cfg["detection"]
        if d["s"] is None:
            raise ConfigError("detection.s is required")
        _number(cfg, "detection", "N", int, 0)
        _number(cfg, "detection", "s", int, 1)
        if d["s_local"] is not None:
            _number(cfg, "detection", "s_local", int, 1)
        _number(cfg, "detection", "r", int, 1)
        _number(cfg, "detection", "sample_batch_limit", int, 1)
        if not _number(cfg, "detection", "theta") > 0:
            raise ConfigError("detection.theta: must be positive")
        if d["algoA"] not in ALGO_A:
            raise ConfigError(f"detection.algoA: expected one of {ALGO_A}, got {d['algoA']!r}")
        if p["kind"] == "tent":
            if not _number(cfg, "periodization", "alpha") < _number(cfg, "periodization", "beta"):
                raise ConfigError("periodization.alpha must be below periodization.beta")
        if p["kind"] == "lognormal":
            M0 = _number(cfg, "periodization", "M0", int, 3)
            if not is_prime(M0):
                raise ConfigError(f"periodization.M0: must be prime, got {M0}")
            if p["delta"] is not None and not 0 < _number(cfg, "periodization", "delta") < 0.5:
                raise ConfigError("periodization.delta: must lie in (0, 1/2)")
        _number(cfg, "post", "n_test", int, 0)
        n_mc = _number(cfg, "post", "n_mc", int, 0)
        if n_mc == 1:
            raise ConfigError("post.n_mc: use 0 (off) or at least 2")
        if isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
            raise ConfigError(f"seed: expected a non-negative integer, got {cfg['seed']!r}")
        if not isinstance(cfg["output"], str):
            raise ConfigError("output: expected a path string")
        out = cls(cfg)
        try:
            out.model()
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from None
        return out

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        return cls.from_dict(data)

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        if seed is None:
            return self
        raw = copy.deepcopy(self.raw)
        raw["seed"] = int(seed)
        return ExperimentConfig.from_dict(raw)

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    def config_hash(self) -> str:
        """Short digest of the resolved configuration, seed and output path excluded."""
        body = {k: v for k, v in self.raw.items() if k not in ("seed", "output")}
        text = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    def model(self) -> PdeModel:
        m = self.raw["model"]
        return PdeModel(m["kind"], int(m["d_y"]), float(m["mu"]), float(m["c"]), m["rhs"])

    def mesh(self) -> Mesh:
        return Mesh(int(self.raw["mesh"]["n"]))

    def periodization(self) -> Periodization:
        p = self.raw["periodization"]
        if p["kind"] == "none":
            return Periodization.none()
        if p["kind"] == "tent":
            return Periodization.tent(p["alpha"], p["beta"])
        delta = p["delta"] if p["delta"] is not None else delta_opt(int(p["M0"]))
        return Periodization.lognormal(delta)

    def detection(self) -> DetectionConfig:
        d = self.raw["detection"]
        grid = CandidateGrid.symmetric(int(d["N"]), int(self.raw["model"]["d_y"]))
        return DetectionConfig(grid, int(d["s"]), None if d["s_local"] is None else int(d["s_local"]),
                               float(d["theta"]), int(d["r"]), self.seed, d["algoA"],
                               int(d["sample_batch_limit"]))
