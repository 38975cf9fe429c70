from .ccpn import compute_speeds, evolution_graph, macro_marking, macro_reachability_graph, simulate_ccpn
from .cli import Cli
from .config import Config
from .hybrid import simulate_hybrid
from .ha_sim import simulate_ha
from .net import HybridNet, NetClass, validate_structure
from .parser import load_model, parse_model, serialize_model
from .policy import FiringPolicy
from .translate import translate
from .vcpn import simulate_vcpn

__all__ = [
    'Cli', 'Config', 'FiringPolicy', 'HybridNet', 'NetClass',
    'compute_speeds', 'evolution_graph', 'load_model', 'macro_marking', 'macro_reachability_graph',
    'parse_model', 'serialize_model', 'simulate_ccpn', 'simulate_ha', 'simulate_hybrid',
    'simulate_vcpn', 'translate', 'validate_structure',
]
