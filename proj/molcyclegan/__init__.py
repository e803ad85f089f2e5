"""CycleGAN molecule optimization in a latent embedding space."""

from ._core import (
    ConfigError,
    CycleGanModel,
    DataError,
    NumericError,
    ParseError,
    canonical_smiles,
    convert_csv,
    count_aromatic_rings,
    fingerprint_bits,
    has_halogen_moiety,
    load_checkpoint,
    run_evaluate,
    run_train,
    tanimoto,
)

__all__ = [
    "ConfigError",
    "CycleGanModel",
    "DataError",
    "NumericError",
    "ParseError",
    "canonical_smiles",
    "convert_csv",
    "count_aromatic_rings",
    "fingerprint_bits",
    "has_halogen_moiety",
    "load_checkpoint",
    "run_evaluate",
    "run_train",
    "tanimoto",
]
