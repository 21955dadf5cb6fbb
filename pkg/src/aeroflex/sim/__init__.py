from .config import (ParseError, SimConfig, ValidationError, load_config, load_config_file,
                     preset)
from .runner import (NonFiniteState, PlateProblem, SimulationError, TimeSeriesOutput,
                     TimingLedger, run_simulation, structural_time_march)

__all__ = ["ParseError", "SimConfig", "ValidationError", "load_config", "load_config_file",
           "preset", "NonFiniteState", "PlateProblem", "SimulationError", "TimeSeriesOutput",
           "TimingLedger", "run_simulation", "structural_time_march"]
