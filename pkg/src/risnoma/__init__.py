"""Energy-minimizing resource allocation for RIS-assisted semantic NOMA uplinks.

Modules:
  scenario      config ingestion, geometry, reproducible channel draws
  sysmodel      channel/SINR/capacity/energy bookkeeping and feasibility checks
  conic         small conic-program IR with clarabel and scs backends
  order_opt     decoding-order subproblem (penalty SCA plus exchange heuristic)
  beam_sem_opt  joint phase/extraction/power subproblem (QT + SDR + SROCR)
  jtac          alternating optimizer and the three comparison schemes
  oracle        brute-force references used by the test suite
  expcli        sweep harness emitting CSV files and optional SVG plots
"""

from .jtac import SCHEMES, JtacSolution, run_baseline, run_jtac
from .scenario import (ChannelSet, NetworkScenario, dbm_to_watt,
                       generate_channels, load_scenario)
from .sysmodel import (Beamforming, DecodingOrder, EnergyBreakdown,
                       FeasibilityReport, SemanticConfig, check_feasibility,
                       total_energy)

__all__ = [
    "SCHEMES", "JtacSolution", "run_baseline", "run_jtac",
    "ChannelSet", "NetworkScenario", "dbm_to_watt", "generate_channels",
    "load_scenario",
    "Beamforming", "DecodingOrder", "EnergyBreakdown", "FeasibilityReport",
    "SemanticConfig", "check_feasibility", "total_energy",
]
