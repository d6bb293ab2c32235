"""fracspec: a numerical laboratory for recovering an unknown potential in a
time-fractional diffusion equation from lateral boundary data.

Pipeline: synthesize the boundary response for a known potential, extract the
hidden eigenvalue/amplitude sequences from the sampled trace by regularized
Gauss-Newton, rebuild the potential with the Gel'fand-Levitan transform, and
quantify the conditioning of the whole inversion as the fractional order
varies.
"""

from ._core import BACKEND
from .mittag_leffler import (
    KernelParams,
    MLOrder,
    dkernel_dlambda,
    kernel_K_alpha,
    ml,
    ml_asymptotic,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "KernelParams",
    "MLOrder",
    "dkernel_dlambda",
    "kernel_K_alpha",
    "ml",
    "ml_asymptotic",
    "__version__",
]
