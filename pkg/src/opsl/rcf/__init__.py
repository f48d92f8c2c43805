"""Encoding of strategy-quantified sentences into real arithmetic."""
from .encoder import (
    Encoder, Encoding, EncodingBudgetExceeded, EncodingError, UnsupportedNesting, VariableLedger, encode,
)
from .smtlib import SolverError, emit, run_solver

__all__ = [
    "Encoder", "Encoding", "EncodingBudgetExceeded", "EncodingError", "UnsupportedNesting",
    "VariableLedger", "encode", "emit", "run_solver", "SolverError",
]
