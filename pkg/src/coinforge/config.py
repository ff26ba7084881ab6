"""Experiment configuration: one JSON document pins every output byte.

The parameter block uses exactly the keys n, t, z, k, epsilon, alpha, delta, R
and overrides{q, c, s, d, delta_cap}; experiment documents add protocol,
strategy, trials, confidence, seed, mode and output settings. Flags on the
command line mirror keys one-to-one and override file values. The digest of
the canonical serialization is embedded in every output file.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, asdict

from . import protocols, strategies
from .combinatorics import loads_layout
from .params import CoinParams, ParamError, derive_params

ENV_SEED = "COINFORGE_SEED"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def default_seed() -> int:
    raw = os.environ.get(ENV_SEED, "")
    try:
        return int(raw)
    except ValueError:
        return 0


PARAM_KEYS = ("n", "t", "z", "k", "epsilon", "alpha", "delta", "R")


@dataclass
class ExperimentConfig:
    n: int = 8
    t: int = 0
    z: float = 0.3
    k: float = 2.0
    epsilon: float = 0.05
    alpha: float = 1.0 / 3.0
    delta: float = 1.0
    R: float = 1.0
    overrides: dict = field(default_factory=dict)
    protocol: dict = field(default_factory=lambda: {"kind": "transform"})
    strategy: dict = field(default_factory=lambda: {"name": "fifo"})
    trials: int = 100
    confidence: float = 0.99
    seed: int = field(default_factory=default_seed)
    mode: str = "secure"
    layout_path: str | None = None
    out: str | None = None
    record_log: bool = False

    def coin_params(self) -> CoinParams:
        return CoinParams(n=self.n, t=self.t, z=self.z, k=self.k, epsilon=self.epsilon,
                          alpha=self.alpha, delta=self.delta, R=self.R)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return config_digest(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ParamError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def parse_strategy_spec(text: str) -> dict:
    """Grammar: name[:a,b,...] joined by '+' for composition."""
    parts = []
    for chunk in text.split("+"):
        chunk = chunk.strip()
        if not chunk:
            continue
        name, _, argtext = chunk.partition(":")
        args = [a for a in argtext.split(",") if a != ""]
        parts.append({"name": name, "args": args})
    if not parts:
        raise ParamError("empty strategy specification")
    if len(parts) == 1:
        return parts[0]
    return {"name": "combined", "parts": parts}


def _one_strategy(spec: dict):
    name = spec["name"]
    args = spec.get("args", [])
    if name == "fifo":
        return strategies.FifoStrategy()
    if name == "random_delay":
        return strategies.RandomDelayStrategy(float(args[0]) if args else 1.0)
    if name == "committee_targeter":
        return strategies.CommitteeTargeterStrategy([int(a) for a in args])
    if name == "publish_delayer":
        return strategies.PublishDelayerStrategy(float(args[0]) if args else 1.0)
    if name == "benor_biaser":
        return strategies.BenorBiaserStrategy()
    raise ParamError(f"unknown strategy {name!r}")


def build_strategy(spec: dict):
    """Fresh strategy instance per trial (strategies carry per-run state)."""
    if spec["name"] == "combined":
        return strategies.CombinedStrategy(*[_one_strategy(p) for p in spec["parts"]])
    return _one_strategy(spec)


def load_layout_file(path: str):
    if not os.path.exists(path):
        raise ParamError(f"missing layout file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return loads_layout(fh.read())


def build_protocol(cfg: ExperimentConfig):
    """Protocol factory + derived params from one config document."""
    kind = cfg.protocol.get("kind", "transform")
    if kind in ("transform", "multivalued"):
        if not cfg.layout_path:
            raise ParamError("missing layout file: transform runs need --layout")
        layout, graphs = load_layout_file(cfg.layout_path)
        cp = cfg.coin_params()
        dp = derive_params(cp, cfg.overrides or None)
        base = protocols.TransformProtocol(cp, dp, layout, graphs,
                                           coin_mode=cfg.protocol.get("coin", "ideal"))
        if kind == "multivalued":
            return protocols.MultiTransformProtocol(base, int(cfg.protocol.get("ell", 1))), dp
        return base, dp
    if kind == "crusader":
        s = int(cfg.protocol.get("s", cfg.n))
        inputs = cfg.protocol.get("inputs", "random")
        if inputs == "random":
            make = lambda rng: [rng.getrandbits(1) for _ in range(s)]
        elif inputs in ("0", "1", 0, 1):
            bit = int(inputs)
            make = [bit] * s
        else:
            make = [int(b) for b in inputs]
        return protocols.CrusaderProtocol(s, make, cfg.protocol.get("t_local")), None
    if kind == "benor":
        s = int(cfg.protocol.get("s", cfg.n))
        return protocols.BenorCoinProtocol(s, int(cfg.protocol.get("t_local", 0))), None
    raise ParamError(f"unknown protocol kind {kind!r}")
