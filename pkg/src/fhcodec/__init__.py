"""Fronthaul compression toolkit for massive-MIMO uplink receivers.

Simulates the compression path of a split receiver: beamspace
transformation, common-exponent block floating-point coding with Lloyd-Max
mantissa quantization, MMSE detection, closed-form prediction of the
compression-induced detection error, and surrogate training of per-beam
mantissa bitwidths.
"""

from .beamspace import (
    BeamspaceBasis,
    BeamspaceTransformer,
    build_basis,
    dft_basis,
    effective_channel,
    svd_beams,
    to_beamspace,
)
from .channel import (
    ChannelRealization,
    clustered_channel,
    load_channel,
    randsvd_channel,
    save_channel,
    steering_vector,
)
from .codec import (
    BlockFloatingPointCodec,
    CompressedFrame,
    QuantizerCodebook,
    block_exponent,
    compression_ratio,
    decode,
    encode,
    gaussian_codebook_mse,
    grid_relative_error,
    lloyd_max_codebook,
)
from .exceptions import (
    ChannelFileError,
    ConfigError,
    FhcodecError,
    FrameParseError,
    NotPositiveDefiniteError,
    NumericalError,
)
from .harness import (
    ChannelSpec,
    PreparedScenario,
    RunReport,
    ScenarioConfig,
    compression_table,
    make_channel,
    nominal_quantizer_error,
    run_scenario,
    sweep_condition_numbers,
    write_report,
)
from .linalg import (
    cholesky_solve,
    cond_frobenius,
    matmul,
    mmse_weights,
    pseudoinverse,
    svd,
)
from .optimizer import (
    LossWeights,
    MantissaBitwidthTrainer,
    RbfSurrogate,
    TrainingScenario,
    exhaustive_minimize,
    monotone_projection,
    profile_loss,
    surrogate_minimize,
    train_profile,
)
from .predictor import (
    ErrorPrediction,
    common_exponent_growth_factor,
    gaussian_product_mc,
    measure_detection_error,
    predict_detection_error,
    predict_detection_error_common_exp,
)
from .signal import (
    evm_percent,
    qam_demodulate,
    qam_modulate,
    random_symbol_grid,
    transmit,
)

__version__ = "0.1.0"
