"""acosim: compile, audit, and simulate training fabrics built from
arrays of low-radix optical circuit switches."""

from .fabric import (
    BAR,
    CROSS,
    FabricBuilder,
    FabricGraph,
    LightPath,
    LogicalTopology,
    SwitchConfiguration,
    SwitchKind,
    audit_depth,
    derive_logical_topology,
    trace_light_path,
)

__version__ = "0.1.0"

__all__ = [
    "BAR",
    "CROSS",
    "FabricBuilder",
    "FabricGraph",
    "LightPath",
    "LogicalTopology",
    "SwitchConfiguration",
    "SwitchKind",
    "audit_depth",
    "derive_logical_topology",
    "trace_light_path",
    "__version__",
]
