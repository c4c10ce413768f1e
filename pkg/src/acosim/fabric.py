"""Physical-plant data model and light-path tracing.

The fabric is a set of GPUs, low-radix optical switches, and unidirectional
fibers wired between GPU lanes and switch ports.  A switch configuration
assigns one state to every switch; tracing follows light from a GPU tx lane
through switch states until it lands on a GPU rx lane or goes dark.

Port conventions:
  * 1xN selectors (topology selection, bypass, offsetting, shared backup):
    port 0 is the common port, ports 1..N are the selectable leaves.  State s
    connects port 0 with leaf 1+s.  Light entering a non-selected leaf is
    dropped (dark), which is how inactive links stay dark.
  * 2x2 adaptation switches: ports 0,1 on one side, ports 2,3 on the other.
    BAR maps 0-2 and 1-3, CROSS maps 0-3 and 1-2.  A 2x2 always passes light.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

FORMAT_VERSION = 1

# 2x2 adaptation states
BAR = 0
CROSS = 1

DEFAULT_DEPTH_BUDGET = 6


class FabricError(Exception):
    """Base class for fabric construction and tracing errors."""


class WiringError(FabricError):
    """Raised when a fiber endpoint is reused or otherwise miswired."""


class CycleDetected(FabricError):
    """A light path revisited a switch port: the fabric is miswired."""


class DepthExceeded(FabricError):
    """A light path crossed more switch stages than the depth budget."""


@dataclass(frozen=True)
class SwitchKind:
    """A low-radix switch model: family plus radix.

    family is one of "sel", "bypass", "offset", "shared" (all 1xN selectors
    differing only in role and price) or "adapt" (2x2 BAR/CROSS).
    """

    family: str
    radix: int = 2

    def __post_init__(self):
        if self.family == "adapt":
            if self.radix != 2:
                raise ValueError("2x2 adaptation switches have radix 2")
        elif self.family in ("sel", "shared"):
            if self.radix < 2:
                raise ValueError(f"1xN selector radix must be >= 2, got {self.radix}")
        elif self.family == "bypass":
            if self.radix != 2:
                raise ValueError("bypass switches are 1x2")
        elif self.family == "offset":
            if self.radix not in (2, 3, 4):
                raise ValueError("offsetting switches are 1x2, 1x3 or 1x4")
        else:
            raise ValueError(f"unknown switch family {self.family!r}")

    @property
    def state_count(self) -> int:
        return 2 if self.family == "adapt" else self.radix

    @property
    def port_count(self) -> int:
        return 4 if self.family == "adapt" else self.radix + 1

    def price_key(self) -> str:
        """Price-list key: 1xN switches price by radix, 2x2 by shape."""
        return "2x2" if self.family == "adapt" else f"1x{self.radix}"

    def route(self, state: int, in_port: int) -> Optional[int]:
        """Output port for light entering in_port under state, None if dark."""
        if self.family == "adapt":
            if state == BAR:
                return {0: 2, 1: 3, 2: 0, 3: 1}[in_port]
            return {0: 3, 1: 2, 3: 0, 2: 1}[in_port]
        selected = 1 + state
        if in_port == 0:
            return selected
        if in_port == selected:
            return 0
        return None


SEL = lambda n: SwitchKind("sel", n)  # noqa: E731 - terse constructors
BYPASS = SwitchKind("bypass", 2)
OFFSET3 = SwitchKind("offset", 3)
OFFSET4 = SwitchKind("offset", 4)
ADAPT = SwitchKind("adapt", 2)
SHARED = lambda n: SwitchKind("shared", n)  # noqa: E731


def gpu_tx(gpu_id: int, lane: int) -> tuple:
    return ("gpu", gpu_id, lane, "tx")


def gpu_rx(gpu_id: int, lane: int) -> tuple:
    return ("gpu", gpu_id, lane, "rx")


def sw_port(switch_id: str, port: int) -> tuple:
    return ("sw", switch_id, port)


@dataclass(frozen=True)
class Gpu:
    gpu_id: int
    node_id: int
    rack_id: int
    lane_count: int
    lane_rate_gbps: float


@dataclass(frozen=True)
class Switch:
    switch_id: str
    kind: SwitchKind
    dimension: str
    purpose: str  # selection | adaptation | resilience
    category: str  # census row label, e.g. "TP 4 - 8"


@dataclass(frozen=True)
class Fiber:
    fiber_id: int
    a: tuple
    b: tuple
    dimension: Optional[str]


class FabricGraph:
    """Immutable physical plant.  Build through FabricBuilder."""

    def __init__(self, gpus, switches, fibers, meta=None):
        self.gpus: dict[int, Gpu] = dict(gpus)
        self.switches: dict[str, Switch] = dict(switches)
        self.fibers: dict[int, Fiber] = dict(fibers)
        self.meta: dict = dict(meta or {})
        self._by_endpoint: dict[tuple, tuple] = {}
        for f in self.fibers.values():
            for here, there in ((f.a, f.b), (f.b, f.a)):
                if here in self._by_endpoint:
                    raise WiringError(f"endpoint {here} used by two fibers")
                self._by_endpoint[here] = (f.fiber_id, there)

    # --- lookups -------------------------------------------------------

    def fiber_at(self, endpoint: tuple) -> Optional[tuple]:
        """(fiber_id, far_endpoint) for the fiber touching endpoint, if any."""
        return self._by_endpoint.get(endpoint)

    @property
    def dimensions(self) -> list[str]:
        dims = {f.dimension for f in self.fibers.values() if f.dimension}
        return sorted(dims)

    def gpu_count(self) -> int:
        return len(self.gpus)

    def switch_ids(self) -> Iterable[str]:
        return self.switches.keys()

    # --- serialization -------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "meta": self.meta,
            "gpus": [
                {
                    "gpu_id": g.gpu_id,
                    "node_id": g.node_id,
                    "rack_id": g.rack_id,
                    "lane_count": g.lane_count,
                    "lane_rate_gbps": g.lane_rate_gbps,
                }
                for g in sorted(self.gpus.values(), key=lambda g: g.gpu_id)
            ],
            "switches": [
                {
                    "switch_id": s.switch_id,
                    "family": s.kind.family,
                    "radix": s.kind.radix,
                    "dimension": s.dimension,
                    "purpose": s.purpose,
                    "category": s.category,
                }
                for s in sorted(self.switches.values(), key=lambda s: s.switch_id)
            ],
            "fibers": [
                {
                    "fiber_id": f.fiber_id,
                    "a": list(f.a),
                    "b": list(f.b),
                    "dimension": f.dimension,
                }
                for f in sorted(self.fibers.values(), key=lambda f: f.fiber_id)
            ],
        }

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FabricGraph":
        if obj.get("version") != FORMAT_VERSION:
            raise FabricError(f"unsupported fabric format version {obj.get('version')}")
        gpus = {
            g["gpu_id"]: Gpu(g["gpu_id"], g["node_id"], g["rack_id"], g["lane_count"], g["lane_rate_gbps"])
            for g in obj["gpus"]
        }
        switches = {
            s["switch_id"]: Switch(
                s["switch_id"], SwitchKind(s["family"], s["radix"]), s["dimension"], s["purpose"], s["category"]
            )
            for s in obj["switches"]
        }
        fibers = {
            f["fiber_id"]: Fiber(f["fiber_id"], tuple(f["a"]), tuple(f["b"]), f["dimension"])
            for f in obj["fibers"]
        }
        return cls(gpus, switches, fibers, obj.get("meta"))

    @classmethod
    def load(cls, path: str) -> "FabricGraph":
        with open(path) as fh:
            return cls.from_json_obj(json.load(fh))


class FabricBuilder:
    """Mutable accumulator that freezes into a FabricGraph."""

    def __init__(self):
        self._gpus: dict[int, Gpu] = {}
        self._switches: dict[str, Switch] = {}
        self._fibers: dict[int, Fiber] = {}
        self._used_endpoints: set[tuple] = set()
        self._next_fiber = 0
        self.meta: dict = {}

    def add_gpu(self, gpu_id, node_id=0, rack_id=0, lane_count=2, lane_rate_gbps=400.0) -> int:
        if gpu_id in self._gpus:
            raise WiringError(f"gpu {gpu_id} added twice")
        self._gpus[gpu_id] = Gpu(gpu_id, node_id, rack_id, lane_count, lane_rate_gbps)
        return gpu_id

    def add_switch(self, switch_id: str, kind: SwitchKind, dimension: str, purpose: str, category: str) -> str:
        if switch_id in self._switches:
            raise WiringError(f"switch {switch_id} added twice")
        self._switches[switch_id] = Switch(switch_id, kind, dimension, purpose, category)
        return switch_id

    def add_fiber(self, a: tuple, b: tuple, dimension: Optional[str] = None) -> int:
        for ep in (a, b):
            if ep in self._used_endpoints:
                raise WiringError(f"endpoint {ep} already wired")
            self._used_endpoints.add(ep)
        fid = self._next_fiber
        self._next_fiber += 1
        self._fibers[fid] = Fiber(fid, a, b, dimension)
        return fid

    def build(self) -> FabricGraph:
        return FabricGraph(self._gpus, self._switches, self._fibers, self.meta)


class SwitchConfiguration:
    """Total assignment of a state to every switch (missing entries read 0)."""

    __slots__ = ("states",)

    def __init__(self, states: Mapping[str, int]):
        self.states = dict(states)

    @classmethod
    def default(cls, fabric: FabricGraph) -> "SwitchConfiguration":
        return cls({sid: 0 for sid in fabric.switch_ids()})

    def state_of(self, switch_id: str) -> int:
        return self.states.get(switch_id, 0)

    def updated(self, delta: Mapping[str, int]) -> "SwitchConfiguration":
        merged = dict(self.states)
        merged.update(delta)
        return SwitchConfiguration(merged)

    def delta_from(self, other: "SwitchConfiguration") -> dict[str, int]:
        """Minimal state changes taking `other` to `self`."""
        out = {}
        keys = set(self.states) | set(other.states)
        for k in keys:
            if self.state_of(k) != other.state_of(k):
                out[k] = self.state_of(k)
        return out

    def validate(self, fabric: FabricGraph) -> None:
        for sid, st in self.states.items():
            sw = fabric.switches.get(sid)
            if sw is None:
                raise FabricError(f"configuration names unknown switch {sid}")
            if not 0 <= st < sw.kind.state_count:
                raise FabricError(f"switch {sid} state {st} out of range")

    def __eq__(self, other):
        return isinstance(other, SwitchConfiguration) and self.states == other.states


@dataclass(frozen=True)
class LightPath:
    source: tuple
    hops: tuple  # ((switch_id, in_port, out_port), ...)
    sink: Optional[tuple]  # gpu rx endpoint, or None when dark

    @property
    def dark(self) -> bool:
        return self.sink is None

    @property
    def depth(self) -> int:
        return len(self.hops)


def trace_light_path(
    fabric: FabricGraph,
    config: SwitchConfiguration,
    gpu_id: int,
    lane: int,
    depth_budget: int = DEFAULT_DEPTH_BUDGET,
) -> LightPath:
    """Follow light from a GPU tx lane through switch states.

    Terminates on a GPU rx lane or dark (unlit selector leaf / unterminated
    port).  Raises CycleDetected on a revisited switch port and DepthExceeded
    past the configured budget.
    """
    source = gpu_tx(gpu_id, lane)
    if gpu_id not in fabric.gpus:
        raise FabricError(f"gpu {gpu_id} not in fabric")
    hops = []
    fibers_seen = []
    visited: set[tuple] = set()
    hop = fabric.fiber_at(source)
    if hop is None:
        return LightPath(source, (), None)
    while True:
        fiber_id, endpoint = hop
        fibers_seen.append(fiber_id)
        if endpoint[0] == "gpu":
            if endpoint[3] == "rx":
                return LightPath(source, tuple(hops), endpoint)
            return LightPath(source, tuple(hops), None)  # tx-tx miswire reads dark
        _, switch_id, in_port = endpoint
        if (switch_id, in_port) in visited:
            raise CycleDetected(f"loop through {switch_id} port {in_port}")
        visited.add((switch_id, in_port))
        sw = fabric.switches[switch_id]
        out_port = sw.kind.route(config.state_of(switch_id), in_port)
        if out_port is None:
            return LightPath(source, tuple(hops), None)
        hops.append((switch_id, in_port, out_port))
        if len(hops) > depth_budget:
            raise DepthExceeded(
                f"path from gpu {gpu_id} lane {lane} exceeds {depth_budget} switch stages"
            )
        hop = fabric.fiber_at(sw_port(switch_id, out_port))
        if hop is None:
            return LightPath(source, tuple(hops), None)


def trace_fiber_dimensions(fabric: FabricGraph, config, gpu_id, lane, depth_budget=DEFAULT_DEPTH_BUDGET):
    """Like trace_light_path but also reports the dimensions of fibers crossed."""
    source = gpu_tx(gpu_id, lane)
    dims = set()
    hop = fabric.fiber_at(source)
    path = trace_light_path(fabric, config, gpu_id, lane, depth_budget)
    # Re-walk quickly to collect fiber tags (paths are short).
    if hop is not None:
        dims.add(fabric.fibers[hop[0]].dimension)
        for switch_id, _in_port, out_port in path.hops:
            nxt = fabric.fiber_at(sw_port(switch_id, out_port))
            if nxt is None:
                break
            dims.add(fabric.fibers[nxt[0]].dimension)
    dims.discard(None)
    return path, dims


@dataclass
class LogicalTopology:
    """Rank-labelable directed multigraph of live GPU-to-GPU lanes.

    edges maps (src_gpu, dst_gpu) -> live lane count.  labels, when set, maps
    gpu_id -> an opaque hashable rank label; equality of labeled topologies is
    equality of the relabeled edge multisets.
    """

    dimension: str
    edges: dict = field(default_factory=dict)
    lane_rate_gbps: float = 0.0
    labels: Optional[dict] = None

    def add_lane(self, src: int, dst: int) -> None:
        self.edges[(src, dst)] = self.edges.get((src, dst), 0) + 1

    def degree(self, gpu: int) -> int:
        return sum(n for (s, _d), n in self.edges.items() if s == gpu)

    def gpus(self) -> set:
        out = set()
        for s, d in self.edges:
            out.add(s)
            out.add(d)
        return out

    def neighbors_out(self, gpu: int) -> list:
        return sorted(d for (s, d) in self.edges if s == gpu)

    def labeled_edges(self) -> tuple:
        """Sorted tuple of (src_label, dst_label, lanes); falls back to ids."""
        lab = self.labels or {}
        items = [
            (lab.get(s, s), lab.get(d, d), n) for (s, d), n in self.edges.items()
        ]
        return tuple(sorted(items, key=repr))

    def with_labels(self, labels: Mapping) -> "LogicalTopology":
        return LogicalTopology(self.dimension, dict(self.edges), self.lane_rate_gbps, dict(labels))

    def __eq__(self, other):
        if not isinstance(other, LogicalTopology):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.labeled_edges() == other.labeled_edges()
        )


def derive_logical_topology(
    fabric: FabricGraph,
    config: SwitchConfiguration,
    dimension: str,
    depth_budget: int = DEFAULT_DEPTH_BUDGET,
) -> LogicalTopology:
    """Trace every tx lane and keep the live lanes that ride `dimension` fibers."""
    if dimension not in fabric.dimensions:
        raise FabricError(f"dimension {dimension!r} not present in fabric")
    topo = LogicalTopology(dimension)
    rate = 0.0
    for gpu_id in sorted(fabric.gpus):
        g = fabric.gpus[gpu_id]
        for lane in range(g.lane_count):
            path, dims = trace_fiber_dimensions(fabric, config, gpu_id, lane, depth_budget)
            if path.sink is not None and dimension in dims:
                topo.add_lane(gpu_id, path.sink[1])
                rate = g.lane_rate_gbps
    topo.lane_rate_gbps = rate
    return topo


@dataclass
class DepthReport:
    max_depth: int
    budget: int
    per_dimension: dict
    offenders: list  # (gpu, lane, depth) beyond budget

    @property
    def ok(self) -> bool:
        return not self.offenders


def audit_depth(
    fabric: FabricGraph,
    configs: Iterable[SwitchConfiguration],
    depth_budget: int = DEFAULT_DEPTH_BUDGET,
) -> DepthReport:
    """Per-path maximum switch count over all configurations (report only)."""
    configs = list(configs)
    if not configs:
        raise FabricError("audit_depth needs at least one configuration")
    max_depth = 0
    per_dim: dict[str, int] = {}
    offenders = []
    for config in configs:
        for gpu_id in sorted(fabric.gpus):
            g = fabric.gpus[gpu_id]
            for lane in range(g.lane_count):
                path, dims = trace_fiber_dimensions(
                    fabric, config, gpu_id, lane, depth_budget=10 * depth_budget
                )
                d = path.depth
                max_depth = max(max_depth, d)
                for dim in dims:
                    per_dim[dim] = max(per_dim.get(dim, 0), d)
                if d > depth_budget:
                    offenders.append((gpu_id, lane, d))
    return DepthReport(max_depth, depth_budget, per_dim, offenders)
