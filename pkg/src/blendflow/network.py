"""Network data model, file I/O and incidence structure.

A network file is a YAML document with top-level sections ``junctions``,
``pipes``, ``compressors``, ``gnodes`` and optional ``gas_constants``,
``scaling`` and ``solver`` overrides.  See ``docs/network_format.md`` for the
schema.  Networks are immutable after loading; the ``with_*`` helpers return
modified copies for parameter sweeps.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import yaml

from .constants import DEFAULT_GAS_CONSTANTS, GasConstants

FORMAT_VERSION = 1


class NetworkError(Exception):
    """Base class for network file problems."""


class NetworkParseError(NetworkError):
    """The file is malformed or does not match the schema."""


class NetworkValidationError(NetworkError):
    """A structural invariant is violated; carries the offending element id."""

    def __init__(self, element: str, message: str):
        self.element = element
        super().__init__(f"{element}: {message}")


class GNodeKind(str, Enum):
    H2_SUPPLY = "h2_supply"
    NG_SUPPLY = "ng_supply"
    DEMAND_OPTIMIZED = "demand_optimized"
    DEMAND_FIXED = "demand_fixed"

    @property
    def is_supply(self) -> bool:
        return self in (GNodeKind.H2_SUPPLY, GNodeKind.NG_SUPPLY)

    @property
    def is_demand(self) -> bool:
        return not self.is_supply


@dataclass(frozen=True)
class Junction:
    id: str
    p_min: float                           # minimum pressure [Pa]
    gamma_min: float = 0.0                 # hydrogen mass fraction bounds
    gamma_max: float = 1.0
    slack_pressure: Optional[float] = None  # fixed pressure if slack node [Pa]

    def validate(self):
        if self.p_min <= 0.0:
            raise NetworkValidationError(self.id, "p_min must be positive")
        if not 0.0 <= self.gamma_min <= self.gamma_max <= 1.0:
            raise NetworkValidationError(
                self.id, "require 0 <= gamma_min <= gamma_max <= 1")
        if self.slack_pressure is not None and self.slack_pressure < self.p_min:
            raise NetworkValidationError(self.id, "slack_pressure below p_min")

    @property
    def is_slack(self) -> bool:
        return self.slack_pressure is not None


@dataclass(frozen=True)
class Pipe:
    id: str
    from_junction: str
    to_junction: str
    length: float      # [m]
    diameter: float    # [m]
    area: float        # [m^2]; loaders fill pi D^2 / 4 when omitted
    friction: float    # dimensionless

    def validate(self):
        for name in ("length", "diameter", "area", "friction"):
            if getattr(self, name) <= 0.0:
                raise NetworkValidationError(self.id, f"{name} must be positive")
        if self.from_junction == self.to_junction:
            raise NetworkValidationError(self.id, "pipe endpoints must differ")


@dataclass(frozen=True)
class Compressor:
    id: str
    from_junction: str
    to_junction: str
    alpha_max: float          # maximum boost ratio
    p_discharge_max: float    # maximum allowable discharge pressure [Pa]

    def validate(self):
        if self.alpha_max < 1.0:
            raise NetworkValidationError(self.id, "alpha_max must be >= 1")
        if self.p_discharge_max <= 0.0:
            raise NetworkValidationError(self.id, "p_discharge_max must be positive")
        if self.from_junction == self.to_junction:
            raise NetworkValidationError(self.id, "compressor endpoints must differ")


@dataclass(frozen=True)
class GNode:
    id: str
    junction: str
    kind: GNodeKind
    offer_price: float = 0.0        # supply price [$/kg]
    energy_bid_price: float = 0.0   # demand bid [$/MJ]
    carbon_price: float = 0.0       # CO2 offset value [$/kg]
    s_max: float = 0.0              # supply capacity [kg/s]
    g_max: float = 0.0              # optimized demand cap [MJ/s]
    g_fixed: float = 0.0            # fixed energy delivery [MJ/s]

    def validate(self):
        for name in ("offer_price", "energy_bid_price", "carbon_price",
                     "s_max", "g_max", "g_fixed"):
            if getattr(self, name) < 0.0:
                raise NetworkValidationError(self.id, f"{name} must be nonnegative")
        if self.kind.is_supply and self.s_max <= 0.0:
            raise NetworkValidationError(self.id, "supply gNode needs s_max > 0")
        if self.kind == GNodeKind.DEMAND_OPTIMIZED and self.g_max <= 0.0:
            raise NetworkValidationError(self.id, "optimized demand needs g_max > 0")
        if self.kind == GNodeKind.DEMAND_FIXED and self.g_fixed <= 0.0:
            raise NetworkValidationError(self.id, "fixed demand needs g_fixed > 0")


@dataclass(frozen=True)
class Network:
    junctions: dict[str, Junction]
    pipes: dict[str, Pipe]
    compressors: dict[str, Compressor]
    gnodes: dict[str, GNode]
    gas_constants: GasConstants = DEFAULT_GAS_CONSTANTS
    scaling_overrides: dict = field(default_factory=dict)
    solver_overrides: dict = field(default_factory=dict)

    # -- derived views ----------------------------------------------------

    @property
    def junction_ids(self) -> list[str]:
        return sorted(self.junctions)

    @property
    def pipe_ids(self) -> list[str]:
        return sorted(self.pipes)

    @property
    def compressor_ids(self) -> list[str]:
        return sorted(self.compressors)

    @property
    def edge_ids(self) -> list[str]:
        """Pipes and compressors together, id-sorted."""
        return sorted([*self.pipes, *self.compressors])

    @property
    def slack_junction_ids(self) -> list[str]:
        return [j for j in self.junction_ids if self.junctions[j].is_slack]

    def edge(self, edge_id: str):
        return self.pipes.get(edge_id) or self.compressors[edge_id]

    def gnodes_of_kind(self, *kinds: GNodeKind) -> list[str]:
        return sorted(g for g, gn in self.gnodes.items() if gn.kind in kinds)

    def incidence(self, junction_id: str) -> tuple[list[str], list[str], list[str]]:
        """Incoming edge ids, outgoing edge ids and attached gNode ids for a junction.

        Flow directions are fixed, so the partition is static.  Lists are
        id-sorted for deterministic iteration order.
        """
        if junction_id not in self.junctions:
            raise KeyError(f"unknown junction {junction_id!r}")
        incoming, outgoing = [], []
        for eid in self.edge_ids:
            e = self.edge(eid)
            if e.to_junction == junction_id:
                incoming.append(eid)
            if e.from_junction == junction_id:
                outgoing.append(eid)
        attached = sorted(g for g, gn in self.gnodes.items() if gn.junction == junction_id)
        return incoming, outgoing, attached

    # -- validation --------------------------------------------------------

    def validate(self):
        for coll in (self.junctions, self.pipes, self.compressors, self.gnodes):
            for element in coll.values():
                element.validate()
        for eid in self.edge_ids:
            e = self.edge(eid)
            for endpoint in (e.from_junction, e.to_junction):
                if endpoint not in self.junctions:
                    raise NetworkValidationError(eid, f"unknown junction {endpoint!r}")
        for gid, gn in self.gnodes.items():
            if gn.junction not in self.junctions:
                raise NetworkValidationError(gid, f"unknown junction {gn.junction!r}")
        if not self.slack_junction_ids:
            raise NetworkValidationError(
                "network", "at least one slack junction is required")
        by_junction: dict[str, set[bool]] = {}
        for gn in self.gnodes.values():
            by_junction.setdefault(gn.junction, set()).add(gn.kind.is_supply)
        for jid, roles in by_junction.items():
            if len(roles) > 1:
                raise NetworkValidationError(
                    jid, "junction mixes supply and withdrawal gNodes")
        self._check_connected()

    def _check_connected(self):
        ids = self.junction_ids
        if not ids:
            raise NetworkValidationError("network", "no junctions")
        adjacency: dict[str, set[str]] = {j: set() for j in ids}
        for eid in self.edge_ids:
            e = self.edge(eid)
            adjacency[e.from_junction].add(e.to_junction)
            adjacency[e.to_junction].add(e.from_junction)
        seen = {ids[0]}
        stack = [ids[0]]
        while stack:
            for nxt in adjacency[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if len(seen) != len(ids):
            missing = sorted(set(ids) - seen)[0]
            raise NetworkValidationError(missing, "junction not connected to the network")

    # -- sweep helpers -----------------------------------------------------

    def with_gnode(self, gnode_id: str, **changes) -> "Network":
        """Copy of the network with one gNode's fields replaced."""
        if gnode_id not in self.gnodes:
            raise KeyError(f"unknown gNode {gnode_id!r}")
        gnodes = dict(self.gnodes)
        gnodes[gnode_id] = dataclasses.replace(gnodes[gnode_id], **changes)
        return dataclasses.replace(self, gnodes=gnodes)

    def with_junction(self, junction_id: str, **changes) -> "Network":
        """Copy of the network with one junction's fields replaced."""
        if junction_id not in self.junctions:
            raise KeyError(f"unknown junction {junction_id!r}")
        junctions = dict(self.junctions)
        junctions[junction_id] = dataclasses.replace(junctions[junction_id], **changes)
        return dataclasses.replace(self, junctions=junctions)


# -- file I/O ---------------------------------------------------------------

_JUNCTION_KEYS = {"p_min", "gamma_min", "gamma_max", "slack_pressure"}
_PIPE_KEYS = {"from", "to", "length", "diameter", "area", "friction"}
_COMPRESSOR_KEYS = {"from", "to", "alpha_max", "p_discharge_max"}
_GNODE_KEYS = {"junction", "kind", "offer_price", "energy_bid_price",
               "carbon_price", "s_max", "g_max", "g_fixed"}


def _section(doc: dict, name: str, required: bool = True) -> dict:
    value = doc.get(name)
    if value is None:
        if required:
            raise NetworkParseError(f"missing section {name!r}")
        return {}
    if not isinstance(value, dict):
        raise NetworkParseError(f"section {name!r} must be a mapping")
    return value


def _fields(name: str, raw: dict, allowed: set[str]) -> dict:
    if not isinstance(raw, dict):
        raise NetworkParseError(f"{name}: entry must be a mapping")
    unknown = set(raw) - allowed
    if unknown:
        raise NetworkParseError(f"{name}: unknown keys {sorted(unknown)}")
    return raw


def network_from_dict(doc: dict) -> Network:
    """Build and validate a Network from a parsed YAML document."""
    if not isinstance(doc, dict):
        raise NetworkParseError("top level must be a mapping")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise NetworkParseError(f"unsupported format_version {version!r}")

    junctions = {}
    for jid, raw in _section(doc, "junctions").items():
        raw = _fields(jid, raw, _JUNCTION_KEYS)
        junctions[str(jid)] = Junction(
            id=str(jid),
            p_min=float(raw["p_min"]),
            gamma_min=float(raw.get("gamma_min", 0.0)),
            gamma_max=float(raw.get("gamma_max", 1.0)),
            slack_pressure=(None if raw.get("slack_pressure") is None
                            else float(raw["slack_pressure"])),
        )

    pipes = {}
    for pid, raw in _section(doc, "pipes", required=False).items():
        raw = _fields(pid, raw, _PIPE_KEYS)
        diameter = float(raw["diameter"])
        area = raw.get("area")
        pipes[str(pid)] = Pipe(
            id=str(pid),
            from_junction=str(raw["from"]),
            to_junction=str(raw["to"]),
            length=float(raw["length"]),
            diameter=diameter,
            area=(math.pi * diameter**2 / 4.0 if area is None else float(area)),
            friction=float(raw["friction"]),
        )

    compressors = {}
    for cid, raw in _section(doc, "compressors", required=False).items():
        raw = _fields(cid, raw, _COMPRESSOR_KEYS)
        compressors[str(cid)] = Compressor(
            id=str(cid),
            from_junction=str(raw["from"]),
            to_junction=str(raw["to"]),
            alpha_max=float(raw["alpha_max"]),
            p_discharge_max=float(raw["p_discharge_max"]),
        )

    gnodes = {}
    for gid, raw in _section(doc, "gnodes").items():
        raw = _fields(gid, raw, _GNODE_KEYS)
        try:
            kind = GNodeKind(raw["kind"])
        except (KeyError, ValueError):
            raise NetworkParseError(f"{gid}: bad gNode kind {raw.get('kind')!r}")
        gnodes[str(gid)] = GNode(
            id=str(gid),
            junction=str(raw["junction"]),
            kind=kind,
            offer_price=float(raw.get("offer_price", 0.0)),
            energy_bid_price=float(raw.get("energy_bid_price", 0.0)),
            carbon_price=float(raw.get("carbon_price", 0.0)),
            s_max=float(raw.get("s_max", 0.0)),
            g_max=float(raw.get("g_max", 0.0)),
            g_fixed=float(raw.get("g_fixed", 0.0)),
        )

    gc_raw = _section(doc, "gas_constants", required=False)
    gas_constants = (dataclasses.replace(DEFAULT_GAS_CONSTANTS,
                                         **{k: float(v) for k, v in gc_raw.items()})
                     if gc_raw else DEFAULT_GAS_CONSTANTS)

    network = Network(
        junctions=junctions,
        pipes=pipes,
        compressors=compressors,
        gnodes=gnodes,
        gas_constants=gas_constants,
        scaling_overrides={k: float(v) for k, v in
                           _section(doc, "scaling", required=False).items()},
        solver_overrides=dict(_section(doc, "solver", required=False)),
    )
    network.validate()
    return network


def load_network(path) -> Network:
    """Load and validate a network description file."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise NetworkParseError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise NetworkParseError(f"bad YAML in {path}: {exc}") from exc
    return network_from_dict(doc)


def network_to_dict(network: Network) -> dict:
    """Plain-dict form of a network, suitable for YAML serialization."""
    doc: dict = {"format_version": FORMAT_VERSION}
    doc["junctions"] = {
        j.id: {k: v for k, v in (("p_min", j.p_min),
                                 ("gamma_min", j.gamma_min),
                                 ("gamma_max", j.gamma_max),
                                 ("slack_pressure", j.slack_pressure))
               if v is not None}
        for j in network.junctions.values()
    }
    doc["pipes"] = {
        p.id: {"from": p.from_junction, "to": p.to_junction, "length": p.length,
               "diameter": p.diameter, "area": p.area, "friction": p.friction}
        for p in network.pipes.values()
    }
    doc["compressors"] = {
        c.id: {"from": c.from_junction, "to": c.to_junction,
               "alpha_max": c.alpha_max, "p_discharge_max": c.p_discharge_max}
        for c in network.compressors.values()
    }
    doc["gnodes"] = {}
    for g in network.gnodes.values():
        entry = {"junction": g.junction, "kind": g.kind.value}
        if g.kind.is_supply:
            entry.update(offer_price=g.offer_price, s_max=g.s_max)
        else:
            entry.update(energy_bid_price=g.energy_bid_price,
                         carbon_price=g.carbon_price)
            if g.kind == GNodeKind.DEMAND_OPTIMIZED:
                entry["g_max"] = g.g_max
            else:
                entry["g_fixed"] = g.g_fixed
        doc["gnodes"][g.id] = entry
    if network.gas_constants != DEFAULT_GAS_CONSTANTS:
        doc["gas_constants"] = dataclasses.asdict(network.gas_constants)
    if network.scaling_overrides:
        doc["scaling"] = dict(network.scaling_overrides)
    if network.solver_overrides:
        doc["solver"] = dict(network.solver_overrides)
    return doc


def save_network(network: Network, path) -> None:
    """Serialize a network back to YAML; round-trips through load_network."""
    with open(path, "w") as fh:
        yaml.safe_dump(network_to_dict(network), fh, sort_keys=True)
