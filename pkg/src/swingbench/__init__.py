"""Single-machine transient simulator with conventional and neural stabilizers."""

__version__ = "0.1.0"

from .ann import Mlp, backward, forward, layer_specs, load_weights, mlp_init, save_weights, sgd_update
from .bridge import StabilizerServer, decode, encode, run_plant_with_bridge, serve_stabilizer
from .config import Config, load_config, parse_config
from .controller import AnnStabilizer, ControllerConfig, RecurrencePlant, train_controller
from .cpss import Cpss, CpssParams, NoStabilizer
from .errors import ConfigError, NumericalError, ProtocolError, SwingbenchError
from .events import Fault, LoadStep
from .excitation import ExcitationConfig, Multisine, generate_training_run
from .identifier import (IdentifierConfig, build_dataset, train_identifier,
                         validate_identifier)
from .plant import (GeneratorParams, NetworkParams, PlantInputs, PlantState,
                    dominant_mode, init_equilibrium, rk4_step)
from .scenarios import (Metrics, Scenario, builtin_scenarios, compare_report,
                        compute_metrics, get_scenario, run_scenario)
from .sim import PlantConfig, Simulation, TimeSeries
