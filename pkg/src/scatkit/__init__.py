"""scatkit: order-2 windowed scattering transform for images.

Morlet filter banks built in the Fourier domain, a memory-bounded FFT
cascade with an exact adjoint, gradient-based image reconstruction, a
linear probe with sign-gradient attacks, and angular-frequency analysis
of trained weights.
"""

from .adjoint import (
    Tape,
    backward,
    forward_with_tape,
    modulus_vjp,
    periodize_vjp,
    recon_loss_grad,
    transform_with_tape,
)
from .classify import (
    AngularSpectrum,
    LinearModel,
    TrainConfig,
    angular_spectrum,
    fgsm_attack,
    predict,
    read_slm1,
    sparsify_angular,
    train_linear,
    write_slm1,
)
from .errors import InvalidInputError, MetricUndefinedError
from .fileio import read_image, write_image
from .filterbank import (
    FilterBank,
    MorletParams,
    build_filterbank,
    build_gaussian,
    build_morlet,
    littlewood_paley,
)
from .fourier import Arena, dft2, idft2, modulus, periodize, pointwise_mul
from .grid import (
    BoundaryMode,
    ColorSpace,
    ImageGrid,
    PadPlan,
    pad,
    pad_plan,
    rgb_to_yuv,
    unpad_coeffs,
    yuv_to_rgb,
)
from .recon import AdamState, ReconConfig, adam_step, err_metrics, reconstruct
from .scattering import (
    PathIndex,
    ScatteringCoeffs,
    ScatteringConfig,
    forward,
    forward_batch,
    forward_oracle,
    memory_report,
    path_table,
    read_sct1,
    transform_image,
    write_sct1,
)

__version__ = "0.1.0"
