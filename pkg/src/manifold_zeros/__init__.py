"""Derivative-free PRP and hybrid PRP-Newton solvers for zeros of tangent
vector fields on Stiefel, Grassmann and SPD manifolds."""

from .fields import LogDetField, OjaField, TraceRatioField, residual_norm
from .manifold import GrassmannHorizontal, Spd, Stiefel, manifold_dim
from .newton import HybridConfig, HybridReport, hybrid_solve
from .prp import PrpConfig, SolveReport, Status, prp_solve

__all__ = [
    "GrassmannHorizontal", "HybridConfig", "HybridReport", "LogDetField", "OjaField",
    "PrpConfig", "SolveReport", "Spd", "Status", "Stiefel", "TraceRatioField",
    "hybrid_solve", "manifold_dim", "prp_solve", "residual_norm",
]

__version__ = "0.1.0"
