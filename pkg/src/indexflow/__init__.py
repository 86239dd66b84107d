"""Spectral flow, partial signatures and Maslov indices for matrix paths."""

from .core import (
    Frame,
    MatrixPolyPath,
    PiecewiseAnalyticPath,
    SampledPath,
    eig_herm,
    eval_jet,
    frame_gap,
    kernel,
    mollify,
)
from .sigflow import (
    DegeneracyScan,
    FlowPartition,
    LocalFlows,
    SignatureTable,
    find_degeneracies,
    gauge_check,
    local_flows,
    partial_signatures,
    root_spaces,
    spectral_flow_direct,
    spectral_flow_via_signatures,
)

__all__ = [
    "Frame",
    "MatrixPolyPath",
    "PiecewiseAnalyticPath",
    "SampledPath",
    "eig_herm",
    "eval_jet",
    "frame_gap",
    "kernel",
    "mollify",
    "DegeneracyScan",
    "FlowPartition",
    "LocalFlows",
    "SignatureTable",
    "find_degeneracies",
    "gauge_check",
    "local_flows",
    "partial_signatures",
    "root_spaces",
    "spectral_flow_direct",
    "spectral_flow_via_signatures",
]

__version__ = "0.1.0"
