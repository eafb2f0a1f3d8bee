"""Small numpy neural-network engine with FHT layers."""
from .arch import PAPER_PARAM_COUNT, ConfigurationError, build_base_arch, build_conv_arch, build_fht_arch
from .complexity import complexity_report
from .gradcheck import gradient_check
from .io import ModelFormatError, load_model, save_model
from .layers import (
    Activation,
    Conv,
    Dense,
    Fht,
    Pad,
    ShapeError,
    Softmax,
    Stack,
    layer_backward,
    layer_forward,
    rf_activation,
    rf_derivative,
)
from .network import Network, NetworkSpec, SpatialMap
from .train import DivergenceError, TrainConfig, TrainResult, train
