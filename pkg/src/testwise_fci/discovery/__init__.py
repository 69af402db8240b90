from .rules import discriminating_path, orient
from .search import (
    ALGORITHMS,
    DEFAULT_RULES,
    SELECTION_RULES,
    Pag,
    SearchOptions,
    fci,
    fci_vstructures,
    orientation_rules,
    possible_dsep,
    possible_dsep_stage,
    rfci,
    rfci_vstructures,
    skeleton,
)

__all__ = [
    "ALGORITHMS", "DEFAULT_RULES", "SELECTION_RULES", "Pag", "SearchOptions",
    "discriminating_path", "fci", "fci_vstructures", "orient", "orientation_rules",
    "possible_dsep", "possible_dsep_stage", "rfci", "rfci_vstructures", "skeleton",
]
