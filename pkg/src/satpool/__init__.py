"""satpool: decentralized portfolio SAT solving with periodic clause sharing."""

from .formula import (
    Clause,
    ClauseState,
    Formula,
    MalformedClauseError,
    SatResult,
    SatStatus,
    evaluate_clause,
    normalize_clause,
)
from .interface import ClauseSink, CoreSolver
from .cdcl import CdclSolver
from .diversification import DiversificationMode
from .dimacs import DimacsDocument, DimacsError, emit_dimacs, parse_dimacs, verify_model
from .exchange import ClauseBloomFilter, ClauseExchange, ExportPool, hash_clause
from .orchestrator import (
    NodeStats,
    PortfolioConsistencyError,
    ProcessConfig,
    run_virtual_portfolio,
    start_node,
)
from .transport import InProcessTransport, TcpTransport, Transport, TransportError, create_inprocess_group
from .workers import ProcessCdclSolver

__all__ = [
    "Clause",
    "ClauseBloomFilter",
    "ClauseExchange",
    "ClauseSink",
    "ClauseState",
    "CdclSolver",
    "CoreSolver",
    "DimacsDocument",
    "DimacsError",
    "DiversificationMode",
    "ExportPool",
    "Formula",
    "InProcessTransport",
    "MalformedClauseError",
    "NodeStats",
    "PortfolioConsistencyError",
    "ProcessCdclSolver",
    "ProcessConfig",
    "SatResult",
    "SatStatus",
    "TcpTransport",
    "Transport",
    "TransportError",
    "create_inprocess_group",
    "emit_dimacs",
    "evaluate_clause",
    "hash_clause",
    "normalize_clause",
    "parse_dimacs",
    "run_virtual_portfolio",
    "start_node",
    "verify_model",
]
