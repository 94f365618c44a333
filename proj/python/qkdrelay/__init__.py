"""Python bindings for the qkdrelay key-management simulator."""

from ._core import (
    CodecError,
    Error,
    ParseError,
    Topology,
    UnknownApp,
    ValidationError,
    canonicalize_trace,
    compute_relay_path,
    load_topology,
    otp_xor,
    recode,
    run_scenario,
    trace_compare,
    validate_topology,
)

__all__ = [
    "CodecError",
    "Error",
    "ParseError",
    "Topology",
    "UnknownApp",
    "ValidationError",
    "canonicalize_trace",
    "compute_relay_path",
    "load_topology",
    "otp_xor",
    "recode",
    "run_scenario",
    "trace_compare",
    "validate_topology",
]
