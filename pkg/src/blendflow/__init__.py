"""Steady-state economic optimization of hydrogen/natural-gas blend pipelines."""

from importlib import resources

from .constants import DEFAULT_GAS_CONSTANTS, GasConstants
from .network import (Compressor, GNode, GNodeKind, Junction, Network,
                      NetworkError, NetworkParseError, NetworkValidationError,
                      Pipe, load_network, network_from_dict, network_to_dict,
                      save_network)
from .nlp import AssembledProblem, AssemblyError, VariableLayout, assemble
from .physics import (blend_calorific, blend_gravity, blend_kappa,
                      carbon_offset, compressor_power, sound_speed_sq,
                      weymouth_residual)
from .scaling import ScalingConfig, default_scaling
from .simulate import (ControlAssignment, CrosscheckReport, NegativePressure,
                       NonConvergence, SimulationError, SimulationState,
                       crosscheck, simulate)
from .solver import (Solution, SolverOptions, SolverStatus,
                     extract_shadow_prices, initialize, solve)
from .sweep import (SweepResult, SweepSpec, detect_transitions, export_csv,
                    export_json, run_sweep)

__version__ = "0.1.0"


def bundled_network_path(name: str):
    """Filesystem path of a network file shipped with the package.

    Known names: ``single_pipe``, ``eight_node``.
    """
    ref = resources.files("blendflow").joinpath(f"data/{name}.yaml")
    if not ref.is_file():
        raise KeyError(f"no bundled network named {name!r}")
    return ref
