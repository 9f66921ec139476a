"""Trainer for the RIS/user graph networks (portable weight format out)."""

from .fixtures import write_fixture_bundle
from .model import Arch, GraphNet, reference_forward
from .scenario import TrainScenario, load_scenario
from .train import TrainResult, train_ris_gnn, train_scheduling_gnn
from .weights import export_weights, import_weights

__version__ = "0.1.0"
