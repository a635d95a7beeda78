"""Ising meson spectroscopy from simulated real-time dynamics."""
from .model import E8_RATIOS, KinkPattern, ModelSpec, build_hamiltonian, central_site, e8_reference, kink_state
from .series import TimeSeries

__version__ = "0.1.0"

__all__ = [
    "E8_RATIOS", "KinkPattern", "ModelSpec", "TimeSeries", "build_hamiltonian", "central_site",
    "e8_reference", "kink_state", "__version__",
]
