"""Stability certificates for LTI plants under bias-free MLP feedback."""

__version__ = "0.1.0"

from .errors import LureVerifyError  # noqa: E402
from .linalg import (  # noqa: E402
    EigenSpectrum,
    PositivityCertificate,
    eigenvalues,
    is_hurwitz,
    is_metzler,
    metzler_hurwitz_certificate,
    spectral_norm,
)
from .lure import (  # noqa: E402
    LtiSystem,
    LureSystem,
    StabilityCertificate,
    Verdict,
    check_interconnection_positivity,
    check_lti_positivity,
    decay_envelope,
    verify_stability,
)
from .nn import (  # noqa: E402
    Activation,
    FeedforwardNet,
    SectorBound,
    check_sector_membership,
    forward,
    layer_sector_bound,
    network_sector_bound,
    register_activation,
)
from .model_io import load_lure_system, load_model  # noqa: E402
from .fixtures import fixture_path  # noqa: E402

__all__ = [
    "__version__", "LureVerifyError", "EigenSpectrum", "PositivityCertificate",
    "eigenvalues", "is_hurwitz", "is_metzler", "metzler_hurwitz_certificate",
    "spectral_norm", "LtiSystem", "LureSystem", "StabilityCertificate", "Verdict",
    "check_interconnection_positivity", "check_lti_positivity", "decay_envelope",
    "verify_stability", "Activation", "FeedforwardNet", "SectorBound",
    "check_sector_membership", "forward", "layer_sector_bound",
    "network_sector_bound", "register_activation", "load_lure_system",
    "load_model", "fixture_path",
]
