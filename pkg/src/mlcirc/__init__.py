"""Exact toolkit for syntactically multilinear circuits, partial derivative
matrix rank, and set-balancing families."""

from mlcirc.algebra import FieldCtx
from mlcirc.circuit import Circuit, CircuitBuilder
from mlcirc.kernels import BACKEND
from mlcirc.poly import MultilinearPoly, Partition, rank_yz

__version__ = "0.1.0"

__all__ = ["BACKEND", "Circuit", "CircuitBuilder", "FieldCtx", "MultilinearPoly", "Partition", "rank_yz"]
