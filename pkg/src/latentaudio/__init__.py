"""Raw-audio VAE toolkit: latent interpolation synthesis and SOM corpus maps."""

from .audio import (
    AudioBuffer,
    WindowSet,
    load_wav,
    peak_normalize,
    resample,
    save_wav,
    truncate_pair,
    window,
)
from .exceptions import (
    BadStepError,
    ConfigMismatchError,
    CorruptFileError,
    CurveLengthMismatchError,
    EmptyDatasetError,
    EmptyInputError,
    EmptySpecError,
    FormatVersionMismatchError,
    LatentAudioError,
    MalformedWavError,
    NonFiniteLossError,
    RateMismatchError,
    ShapeMismatchError,
    TooShortError,
    UnsupportedEncodingError,
)
from .features import FeatureConfig, Thumbnail, extract_thumbnail
from .interpolate import (
    InterpolationCurve,
    LatentPath,
    SynthesisMode,
    decode_path,
    encode_audio,
    export_latents,
    extended_interpolate,
    generate_curve,
    meso_interpolate,
    stepwise_interpolate,
)
from .som import (
    Cluster,
    DurationBandWarning,
    SomMap,
    assign_clusters,
    best_matching_unit,
    concatenate_cluster,
    default_grid_side,
    load_som,
    quantization_error,
    save_som,
    train_som,
)
from .vae import (
    AdamState,
    Checkpoint,
    GradientCheckReport,
    LatentStats,
    VaeHyperParams,
    VaeModel,
    adam_step,
    backward,
    decoder_forward,
    elbo_loss,
    encoder_forward,
    gradient_check,
    init_model,
    kl_divergence,
    load_checkpoint,
    model_from_checkpoint,
    reparameterize,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AudioBuffer",
    "BadStepError",
    "Checkpoint",
    "Cluster",
    "ConfigMismatchError",
    "CorruptFileError",
    "CurveLengthMismatchError",
    "DurationBandWarning",
    "EmptyDatasetError",
    "EmptyInputError",
    "EmptySpecError",
    "FeatureConfig",
    "FormatVersionMismatchError",
    "GradientCheckReport",
    "InterpolationCurve",
    "LatentAudioError",
    "LatentPath",
    "LatentStats",
    "MalformedWavError",
    "NonFiniteLossError",
    "RateMismatchError",
    "ShapeMismatchError",
    "SomMap",
    "SynthesisMode",
    "Thumbnail",
    "TooShortError",
    "UnsupportedEncodingError",
    "VaeHyperParams",
    "VaeModel",
    "WindowSet",
    "adam_step",
    "assign_clusters",
    "backward",
    "best_matching_unit",
    "concatenate_cluster",
    "decode_path",
    "decoder_forward",
    "default_grid_side",
    "elbo_loss",
    "encode_audio",
    "encoder_forward",
    "export_latents",
    "extended_interpolate",
    "extract_thumbnail",
    "generate_curve",
    "gradient_check",
    "init_model",
    "kl_divergence",
    "load_checkpoint",
    "load_som",
    "load_wav",
    "meso_interpolate",
    "model_from_checkpoint",
    "peak_normalize",
    "quantization_error",
    "reparameterize",
    "resample",
    "save_checkpoint",
    "save_som",
    "save_wav",
    "stepwise_interpolate",
    "train",
    "train_som",
    "truncate_pair",
    "window",
]
