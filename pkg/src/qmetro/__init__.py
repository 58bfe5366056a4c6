"""Estimation limits of single-qubit channels under restricted quantum controls.

The package computes quantum Fisher information (QFI) of states and channels,
classifies qubit channels (unitary / dephasing-class / strictly contractive),
tests the HNKS and RGNKS conditions, evaluates refined channel-extension upper
bounds on sequential-strategy QFI, and simulates the protocols that attain (or
fail to attain) the Heisenberg and standard quantum limits: QEC with a
repetition code, unitary-control protocols, repeated measurement, and
SPAM-noisy readout.
"""

from . import bounds, channel_model, cli, fisher_info, protocols, qubit_core

__all__ = [
    "bounds",
    "channel_model",
    "cli",
    "fisher_info",
    "protocols",
    "qubit_core",
]

__version__ = "0.1.0"
