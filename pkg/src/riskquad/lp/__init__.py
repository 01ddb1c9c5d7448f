"""Portfolio linear programs: model builders, a simplex solver and MPS I/O."""

from .model import (
    LpModel,
    LpRow,
    PortfolioProblem,
    build_analyst_lp,
    build_generic_regret_lp,
    build_manager_lp,
    es_of_portfolio,
    es_pieces,
    portfolio_weights,
)
from .mps import export_mps, parse_mps
from .simplex import LpSolution, solve

export_lp_file = export_mps

__all__ = [
    "LpModel",
    "LpRow",
    "LpSolution",
    "PortfolioProblem",
    "build_analyst_lp",
    "build_generic_regret_lp",
    "build_manager_lp",
    "es_of_portfolio",
    "es_pieces",
    "export_lp_file",
    "export_mps",
    "parse_mps",
    "portfolio_weights",
    "solve",
]
