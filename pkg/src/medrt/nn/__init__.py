from medrt.nn.tensor import QuantScheme, Tensor
from medrt.nn.network import (ExitHead, ForwardTrace, LayerSpec, NetworkSpec,
                              SkipLink, attention_gate, backward, forward,
                              forward_partial, infer_shapes, run_exit_head)
from medrt.nn.kernels import conv2d_ref
from medrt.nn.params import Params, QuantizedParams, init_params
from medrt.nn.params_io import load_params, save_params
from medrt.nn.models import (IMAGE_SIZE, TINY_EXIT_ATTACH, TINY_LAST_CONV_BLOCK,
                             TINY_LOGIT_LAYER, build, mini_unet, tiny_class_net)

__all__ = [
    "Tensor", "QuantScheme", "LayerSpec", "SkipLink", "ExitHead", "NetworkSpec",
    "ForwardTrace", "forward", "forward_partial", "backward", "attention_gate",
    "run_exit_head", "infer_shapes", "conv2d_ref", "Params", "QuantizedParams",
    "init_params", "load_params", "save_params", "build", "tiny_class_net",
    "mini_unet", "IMAGE_SIZE", "TINY_LOGIT_LAYER", "TINY_LAST_CONV_BLOCK",
    "TINY_EXIT_ATTACH",
]
