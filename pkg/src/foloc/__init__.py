"""Forced-oscillation source localization with robust PCA."""

from .localize import (LocalizationReport, LocalizeConfig, add_noise, evaluate, locate)
from .measurements import (Channel, MeasurementMatrix, MeasurementType, NormalizedMeasurementMatrix,
                           assemble, normalize, read_csv, write_csv)
from .modalsim import (EigenStructure, ForcedInput, LtiSystem, ModalComponents, classify_modes,
                       eigendecompose, resonance_free, resonance_matrix, simulate_modal,
                       transfer_residues)
from .rpca import (RpcaConfig, RpcaResult, default_xi, rpca_exact_alm, singular_value_threshold,
                   soft_threshold)
from .topology import Topology, graph_distance, is_counter_intuitive, vicinity_set

__all__ = [
    "Channel", "EigenStructure", "ForcedInput", "LocalizationReport", "LocalizeConfig",
    "LtiSystem", "MeasurementMatrix", "MeasurementType", "ModalComponents",
    "NormalizedMeasurementMatrix", "RpcaConfig", "RpcaResult", "Topology", "add_noise",
    "assemble", "classify_modes", "default_xi", "eigendecompose", "evaluate", "graph_distance",
    "is_counter_intuitive", "locate", "normalize", "read_csv", "resonance_free",
    "resonance_matrix", "rpca_exact_alm", "simulate_modal", "singular_value_threshold",
    "soft_threshold", "transfer_residues", "vicinity_set", "write_csv",
]

__version__ = "0.1.0"
