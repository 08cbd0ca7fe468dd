"""Power-optimal, drift-stabilised AMFM pulses for two-qubit Molmer-Sorensen gates."""

__version__ = "0.1.0"

from .chain import ChainConfig, ModeData, preset, solve_transverse_modes  # noqa: E402
from .spectral import (  # noqa: E402
    c_integral,
    constraint_matrix,
    infidelity_matrix,
    kernel_matrix,
)
from .synthesis import (  # noqa: E402
    PulseSolution,
    SynthesisRequest,
    ens_amfm,
    exact_amfm,
    fmatrix_amfm,
    repeat_pulse,
    synthesize,
)

__all__ = [
    "__version__",
    "ChainConfig",
    "ModeData",
    "preset",
    "solve_transverse_modes",
    "c_integral",
    "constraint_matrix",
    "kernel_matrix",
    "infidelity_matrix",
    "SynthesisRequest",
    "PulseSolution",
    "exact_amfm",
    "fmatrix_amfm",
    "ens_amfm",
    "synthesize",
    "repeat_pulse",
]
