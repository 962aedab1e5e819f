"""Phase retrieval from subsampled diffused Fourier amplitudes with priors."""

from .operator import (
    Diffuser,
    SamplingMask,
    MeasurementOperator,
    MeasurementSet,
    make_diffuser,
    make_mask,
    apply_unitary,
    adjoint_unitary,
    measure,
)
from .prox import scalar_prox, masked_prox, data_prox
from .regularizers import (
    SmoothedTV,
    PluginRegularizer,
    ComplexSplitRegularizer,
    LipschitzBound,
    tv_value,
    tv_grad,
    validate_plugin,
)
from .solvers import (
    APGDConfig,
    PnPConfig,
    RunTrace,
    GaussianDenoiser,
    apgd_restart,
    continuation,
    pnp,
    noise_schedule,
    plain_gd,
    complex_gaussian,
)
from .bench import (
    encode_image,
    decode_image,
    psnr,
    cosine_similarity,
    SweepSpec,
    ReconstructionReport,
    run_instance,
    run_sweep,
    replay_report,
)

__version__ = "0.1.0"
