"""Semi-quantum restricted Boltzmann machines with exact small-system oracles."""

from .model import (
    BASES,
    CLASSICAL_POOL,
    QUANTUM_POOL,
    CapacityError,
    EffectiveField,
    HiddenOutcome,
    ModelParams,
    basis_weight,
    effective_field,
    hidden_conditional,
    load_checkpoint,
    save_checkpoint,
    visible_conditional_weights,
    visible_marginal,
)

__version__ = "0.1.0"
