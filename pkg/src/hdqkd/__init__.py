"""hdqkd: simulator of a three-dimensional OAM-mode quantum key distribution link.

The package covers the full chain of a desk-scale qutrit QKD experiment:
spatial-mode synthesis and crosstalk (``modes``), a pulsed single-photon
source with correlation diagnostics (``source``, ``lifetime``), the
prepare-measure-sift-estimate engine and key-rate arithmetic (``protocol``,
``keyrate``), a framed classical channel for two-process sessions
(``wire``), and an HTTP compute service plus CLI (``service``, ``cli``).
"""

__version__ = "0.1.0"

from .grids import ComplexField, Grid, PhaseMask, far_field, smf_coupling
from .keyrate import max_tolerated_error, secure_key_rate, shannon_entropy
from .modes import CrosstalkMatrix, crosstalk_matrix, decode_mask, synthesize_state
from .mub import MODE_LABELS, ModeLabel, mub_coefficients
from .protocol import ChannelModel, KeyRateReport, ProtocolConfig, run_protocol
from .source import SourceParams, apply_gate, g2_zero, hbt_coincidences, simulate_emission

__all__ = [
    "__version__",
    "Grid", "ComplexField", "PhaseMask", "far_field", "smf_coupling",
    "shannon_entropy", "secure_key_rate", "max_tolerated_error",
    "ModeLabel", "MODE_LABELS", "mub_coefficients",
    "synthesize_state", "decode_mask", "crosstalk_matrix", "CrosstalkMatrix",
    "SourceParams", "simulate_emission", "apply_gate", "hbt_coincidences", "g2_zero",
    "ProtocolConfig", "ChannelModel", "KeyRateReport", "run_protocol",
]
