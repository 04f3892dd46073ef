"""
mathonet-console
"""

__version__ = "0.1.0"

from mathoNet.config import RunConfig, TrainConfig, load_config
from mathoNet.network import MathONet
from mathoNet.trainer import DiscoveryReport, discover, select_model
from mathoNet.symbolic import extract_expression, simplify, to_string
from mathoNet.console import Console
from mathoNet.commands import build_console, main
import mathoNet.errors as errors
