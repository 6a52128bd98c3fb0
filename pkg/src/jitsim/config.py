"""Flat run/experiment configuration with TOML input and output.

Every key has a default; unknown keys are rejected. A single run is a
``SimConfig``; an ``ExperimentConfig`` adds the sweep axes. Any of
``policy``, ``routing`` and ``traffic`` may be given as a list in an
experiment file, and ``protocols`` ("policy/routing" pairs) replaces the
policy x routing product when present.
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .radio import RadioConfig
from .rtsched import POLICIES, SchedulerConfig
from .scenarios import (
    BURSTY, CONGESTION, CONSTANT, GRID, LOAD_I, LOAD_II, LOAD_III, RANDOM, TRAFFIC_KINDS,
    TWO_LEVEL, TrafficSpec, load_profile,
)
from .speed import VARIANTS, SpeedConfig

ROUTINGS = ("sp", "gf", "speed")

FAMILIES = (
    "jits_vs_vms", "sp_vs_gf", "bursty", "random_deploy", "two_level",
    "speed_routing", "jits_vs_speed",
)


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    # radio / MAC
    tx_range_m: float = 250.0
    interference_range_m: float = 550.0
    bandwidth_bps: int = 2_000_000
    basic_rate_bps: int = 1_000_000
    slot_us: int = 20
    difs_us: int = 50
    sifs_us: int = 10
    cw_min: int = 31
    cw_max: int = 1023
    retry_limit: int = 7
    etd_beta: float = 0.8
    phy_header_us: int = 192
    mac_header_bytes: int = 28
    net_header_bytes: int = 20
    data_bytes: int = 32
    mac_buffer: int = 8
    # routing
    routing: str = "sp"
    routing_period_s: float = 5.0
    gf_one_hop: str = "progress"
    # scheduling
    policy: str = "jits_d"
    alpha: float = 0.7
    queue_capacity: int = 64
    idle_detection: bool = False
    vms_t1_mps: float = 500.0
    vms_t2_mps: float = 1500.0
    # SPEED
    speed_setpoint_mps: float = 1000.0
    speed_variant: str = "speed"
    beacon_period_s: float = 1.0
    # scenario
    topology: str = GRID
    topo_seed: int = 1
    node_count: int = 100
    area_side_m: float = 1000.0
    traffic: str = CONSTANT
    rate_pps: float = 2.0
    deadline_s: float = 1.0
    burst_period_s: float = 10.0
    burst_on_s: float = 5.0
    sync_bursts: bool = True
    congestion_flow_count: int = 2
    congestion_flow_rate_pps: float = 10.0
    congestion_seed: int = 7
    warmup_s: float = 1.0
    sim_time_s: float = 120.0
    drain_s: float = 10.0
    seed: int = 1

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.routing not in ROUTINGS:
            raise ConfigError(f"routing must be one of {ROUTINGS}, got {self.routing!r}")
        if self.gf_one_hop not in ("progress", "range"):
            raise ConfigError("gf_one_hop must be 'progress' or 'range'")
        if self.topology not in (GRID, RANDOM):
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.traffic not in TRAFFIC_KINDS:
            raise ConfigError(f"unknown traffic {self.traffic!r}")
        if self.speed_variant not in VARIANTS:
            raise ConfigError(f"unknown speed_variant {self.speed_variant!r}")
        for name in ("routing_period_s", "sim_time_s", "deadline_s"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.warmup_s < 0 or self.drain_s < 0:
            raise ConfigError("warmup_s and drain_s must be non-negative")
        if self.node_count < 1 or self.area_side_m <= 0:
            raise ConfigError("need node_count >= 1 and a positive area_side_m")
        if self.topology == GRID and (math.isqrt(self.node_count) ** 2 != self.node_count
                                      or self.node_count < 4):
            raise ConfigError("grid node_count must be a square >= 4")
        try:
            self.radio_config()
            self.scheduler_config()
            self.speed_config()
            self.traffic_spec()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def radio_config(self) -> RadioConfig:
        return RadioConfig(
            tx_range_m=self.tx_range_m, interference_range_m=self.interference_range_m,
            bandwidth_bps=self.bandwidth_bps, basic_rate_bps=self.basic_rate_bps,
            slot_us=self.slot_us, difs_us=self.difs_us,
            sifs_us=self.sifs_us, cw_min=self.cw_min, cw_max=self.cw_max,
            retry_limit=self.retry_limit, etd_beta=self.etd_beta,
            phy_header_us=self.phy_header_us, mac_header_bytes=self.mac_header_bytes,
            net_header_bytes=self.net_header_bytes, data_bytes=self.data_bytes, control_bytes=self.data_bytes,
            mac_buffer=self.mac_buffer,
        )

    def scheduler_config(self) -> SchedulerConfig:
        policy = "fifo" if self.routing == "speed" else self.policy
        return SchedulerConfig(policy=policy, alpha=self.alpha,
                               queue_capacity=self.queue_capacity,
                               idle_detection=self.idle_detection,
                               vms_t1_mps=self.vms_t1_mps, vms_t2_mps=self.vms_t2_mps)

    def speed_config(self) -> SpeedConfig:
        return SpeedConfig(self.speed_setpoint_mps, self.beacon_period_s, self.speed_variant)

    def traffic_spec(self) -> TrafficSpec:
        t = self.traffic
        if t in (LOAD_I, LOAD_II, LOAD_III):
            spec = load_profile(t)
            spec.deadline_s = self.deadline_s
            return spec
        common = dict(rate_pps=self.rate_pps, burst_period_s=self.burst_period_s,
                      burst_on_s=self.burst_on_s, sync_bursts=self.sync_bursts)
        if t == TWO_LEVEL:
            # deadline_s names the level-2 deadline; level 1 gets half
            return TrafficSpec(pattern=TWO_LEVEL, deadline_s=self.deadline_s / 2,
                               deadline_l2_s=self.deadline_s, **common)
        if t == CONGESTION:
            return TrafficSpec(pattern=CONGESTION, deadline_s=self.deadline_s,
                               congestion_flow_count=self.congestion_flow_count,
                               congestion_flow_rate_pps=self.congestion_flow_rate_pps,
                               **common)
        return TrafficSpec(pattern=t if t == BURSTY else CONSTANT,
                           deadline_s=self.deadline_s, **common)

    @property
    def routing_label(self) -> str:
        return self.speed_variant if self.routing == "speed" else self.routing

    @property
    def scenario_label(self) -> str:
        return f"{self.topology}-{self.traffic}"

    @property
    def policy_label(self) -> str:
        return "fifo" if self.routing == "speed" else self.policy


SIM_KEYS = tuple(f.name for f in fields(SimConfig))


@dataclass
class ExperimentConfig:
    base: SimConfig = field(default_factory=SimConfig)
    policies: list[str] = field(default_factory=lambda: ["jits_d"])
    routings: list[str] = field(default_factory=lambda: ["sp"])
    traffics: list[str] = field(default_factory=lambda: [CONSTANT])
    protocols: list[str] | None = None
    deadlines: list[float] = field(default_factory=lambda: [1.0])
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3])
    family: str = ""
    out: str = "results"

    def combos(self) -> list[tuple[str, str]]:
        """(policy, routing) pairs; routing may name a SPEED variant."""
        if self.protocols:
            pairs = []
            for p in self.protocols:
                pol, _, rt = p.partition("/")
                pairs.append((pol, rt or self.base.routing))
            return pairs
        return [(p, r) for p in self.policies for r in self.routings]

    def expand(self) -> list[SimConfig]:
        runs = []
        for traffic in self.traffics:
            for pol, rt in self.combos():
                extra = {}
                if rt in VARIANTS:
                    extra = {"routing": "speed", "speed_variant": rt, "policy": "fifo"}
                for d in self.deadlines:
                    for s in self.seeds:
                        kw = dict(policy=pol, routing=rt, traffic=traffic,
                                  deadline_s=d, seed=s)
                        kw.update(extra)
                        runs.append(dataclasses.replace(self.base, **kw))
        return runs

    def validate(self) -> None:
        for pol, rt in self.combos():
            if pol not in POLICIES:
                raise ConfigError(f"unknown policy {pol!r}")
            if rt not in ROUTINGS and rt not in VARIANTS:
                raise ConfigError(f"unknown routing {rt!r}")
        for t in self.traffics:
            if t not in TRAFFIC_KINDS:
                raise ConfigError(f"unknown traffic {t!r}")
        if not self.deadlines or any(not d > 0 for d in self.deadlines):
            raise ConfigError("deadlines must be a non-empty list of positive values")
        if self.family and self.family not in FAMILIES:
            raise ConfigError(f"unknown figure family {self.family!r}")
        for run in self.expand()[:1]:
            run.validate()


def sweep_values(start: float, stop: float, step: float) -> list[float]:
    if not step > 0 or stop < start:
        raise ConfigError("deadline_sweep needs start <= stop and step > 0")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + k * step, 6) for k in range(n + 1)]


def _as_list(v: Any) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def from_dict(d: dict[str, Any]) -> ExperimentConfig:
    d = dict(d)
    exp_keys = {"seeds", "deadline_sweep", "family", "out", "protocols", "deadlines"}
    unknown = set(d) - set(SIM_KEYS) - exp_keys
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    policies = _as_list(d.pop("policy", "jits_d"))
    routings = _as_list(d.pop("routing", "sp"))
    traffics = _as_list(d.pop("traffic", CONSTANT))
    # absent -> the default triple; an explicit empty list -> seed 1
    seeds = [int(s) for s in _as_list(d.pop("seeds", [1, 2, 3]))] or [1]
    if "deadline_sweep" in d:
        sw = d.pop("deadline_sweep")
        if len(sw) != 3:
            raise ConfigError("deadline_sweep must be [start, stop, step]")
        deadlines = sweep_values(*map(float, sw))
    elif "deadlines" in d:
        deadlines = [float(x) for x in _as_list(d.pop("deadlines"))]
    else:
        deadlines = [float(d.get("deadline_s", 1.0))]
    d.pop("deadline_s", None)
    protocols = d.pop("protocols", None)
    family = d.pop("family", "")
    out = d.pop("out", "results")
    types = {f.name: f.type for f in fields(SimConfig)}
    base_kw = {}
    for k, v in d.items():
        base_kw[k] = _coerce(k, v, types[k])
    try:
        base = SimConfig(policy=policies[0], routing=routings[0], traffic=traffics[0],
                         deadline_s=deadlines[0], **base_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg = ExperimentConfig(base=base, policies=policies, routings=routings,
                           traffics=traffics, protocols=protocols, deadlines=deadlines,
                           seeds=seeds, family=family, out=out)
    cfg.validate()
    return cfg


def _coerce(key: str, v: Any, typ: str) -> Any:
    if typ == "bool":
        if not isinstance(v, bool):
            raise ConfigError(f"{key} must be a boolean")
        return v
    if typ == "int":
        if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
            raise ConfigError(f"{key} must be an integer")
        return int(v)
    if typ == "float":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key} must be a number")
        return float(v)
    if not isinstance(v, str):
        raise ConfigError(f"{key} must be a string")
    return v


def to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    """Flat mapping that ``from_dict`` maps back to an equal config."""
    out: dict[str, Any] = {}
    for f in fields(SimConfig):
        if f.name in ("policy", "routing", "traffic", "deadline_s"):
            continue
        out[f.name] = getattr(cfg.base, f.name)
    out["policy"] = list(cfg.policies)
    out["routing"] = list(cfg.routings)
    out["traffic"] = list(cfg.traffics)
    if cfg.protocols:
        out["protocols"] = list(cfg.protocols)
    out["deadlines"] = list(cfg.deadlines)
    out["seeds"] = list(cfg.seeds)
    out["family"] = cfg.family
    out["out"] = cfg.out
    return out


def _toml_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {v!r}")


def dumps(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {_toml_value(v)}\n" for k, v in to_dict(cfg).items())


def loads(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config syntax: {exc}") from exc
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; found tables: {', '.join(nested)}")
    return from_dict(data)


def load(path: str | Path) -> ExperimentConfig:
    return loads(Path(path).read_text())
