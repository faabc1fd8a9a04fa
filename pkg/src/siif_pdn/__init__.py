"""Power delivery modeling for Si-IF wafer-scale systems.

Typical flow::

    from siif_pdn import Scenario, run_scenario
    run = run_scenario(Scenario.builtin("LOIHI", "PT"))
    print(run.report.dc_drop_worst)
"""

__version__ = "0.1.0"

from .errors import (BuildError, CatalogError, ConfigError, DomainError, NumericalError,
                     ParseError, PdnError, PlacementError, TopologyError, ValidationError)
from .floorplan import Floorplan, TopologyConfig, fd_count, place_dielets, usable_fraction
from .metrics import FomReport, normalize_to_pt, rank_topologies
from .netlist import PdnNetlist, build_pdn, export_interchange, parse_interchange
from .parasitics import ExtractionParams
from .platform import (ApplicationSpec, DieletSpec, PlatformFeatures, TopologyKind,
                       builtin_application)
from .scenario import Scenario, ScenarioRun, run_scenario
from .solver import LoadModel, solve_dc, solve_transient

__all__ = [
    "ApplicationSpec", "BuildError", "CatalogError", "ConfigError", "DieletSpec", "DomainError",
    "ExtractionParams", "Floorplan", "FomReport", "LoadModel", "NumericalError", "ParseError",
    "PdnError", "PdnNetlist", "PlacementError", "PlatformFeatures", "Scenario", "ScenarioRun",
    "TopologyConfig", "TopologyError", "TopologyKind", "ValidationError", "build_pdn",
    "builtin_application", "export_interchange", "fd_count", "normalize_to_pt",
    "parse_interchange", "place_dielets", "rank_topologies", "run_scenario", "solve_dc",
    "solve_transient", "usable_fraction",
]
