"""Laser cooling and heating of the collective motion of two trapped Ba+ ions."""

from .errors import (
    ConfigError,
    DegenerateTrapError,
    FitError,
    IoncoolError,
    NoCoolingRegionError,
    NonUniqueSteadyStateError,
    NumericalError,
    SingularResolventError,
)
from .trap import (
    CrystalGeometry,
    ModeTable,
    TrapConfig,
    barriers,
    classify_motion,
    crystal_geometry,
    equilibrium_separation,
    mode_table,
)
from .atom import (
    InternalModel,
    LaserField,
    SteadyState,
    ZeemanStructure,
    barium_model,
    build_model,
    dark_resonance_positions,
    steady_state,
)
from .cooling import CoolingReport, ModeSelection, cooling_report, phonon_trajectory
from .optimize import OptimizationResult, ScanResult, SearchSpace, detuning_scan, random_search, robust_objective
from .scenario import Scenario, paper_scenario
from .spectra import FitResult, SpectrumScan, excitation_spectrum, fit_spectrum

__version__ = "0.1.0"
