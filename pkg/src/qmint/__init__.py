"""Simulation of quantum banknotes, entanglement networks and the money supply they constrain."""

from .ledger import Ledger, Regime
from .mint import Banknote, MintAuthority
from .qnet import Network, Simulation, run
from .qstate import DensityMatrix, PureState
from .rng import SeededRng
from .scenario import Scenario, load
from .teleport import TeleportSession
from .verify import entangled_verify
from .wallet import MemoryModel, Wallet

__version__ = "0.1.0"

__all__ = [
    "Banknote",
    "DensityMatrix",
    "Ledger",
    "MemoryModel",
    "MintAuthority",
    "Network",
    "PureState",
    "Regime",
    "Scenario",
    "SeededRng",
    "Simulation",
    "TeleportSession",
    "Wallet",
    "entangled_verify",
    "load",
    "run",
]
