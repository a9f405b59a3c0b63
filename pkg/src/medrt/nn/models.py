"""Fixed model zoo.

TinyClassNet: three conv blocks + GAP classifier head, with an early-exit
head after block 2. MiniUNet: two-level encoder/decoder with optional
attention-gated skips and a sigmoid mask head.
"""

from __future__ import annotations

from medrt.nn.network import ExitHead, LayerSpec, NetworkSpec, SkipLink
from medrt.nn.params import Params, init_params

IMAGE_SIZE = 64


def _conv(cin, cout, k=3, pad=1):
    return LayerSpec(kind="conv2d", in_ch=cin, out_ch=cout, kernel=k, stride=1, pad=pad)


def tiny_class_net(image_size: int = IMAGE_SIZE) -> NetworkSpec:
    layers = (
        _conv(1, 8),                                        # 0
        LayerSpec(kind="relu"),                             # 1
        LayerSpec(kind="maxpool2"),                         # 2
        _conv(8, 16),                                       # 3
        LayerSpec(kind="relu"),                             # 4
        LayerSpec(kind="maxpool2"),                         # 5
        _conv(16, 32),                                      # 6
        LayerSpec(kind="relu"),                             # 7
        LayerSpec(kind="global_avg_pool"),                  # 8
        LayerSpec(kind="dense", in_ch=32, out_ch=2),        # 9
        LayerSpec(kind="softmax"),                          # 10
    )
    exit_head = ExitHead(attach_after=5, layers=(
        LayerSpec(kind="global_avg_pool"),
        LayerSpec(kind="dense", in_ch=16, out_ch=2),
        LayerSpec(kind="softmax"),
    ))
    return NetworkSpec(name="tiny_class_net", input_shape=(1, image_size, image_size),
                       layers=layers, exits=(exit_head,))


# Layer indices other modules rely on.
TINY_LOGIT_LAYER = 9       # dense output (pre-softmax)
TINY_LAST_CONV_BLOCK = 7   # relu after the last conv; Grad-CAM default target
TINY_EXIT_ATTACH = 5


def mini_unet(image_size: int = IMAGE_SIZE, attention: bool = True) -> NetworkSpec:
    """Two-level U-Net; skip junctions are concat layers, gated if requested."""
    mode = "attention-gated" if attention else "concat"
    inter = 8 if attention else 0
    layers = (
        _conv(1, 8),                                        # 0
        LayerSpec(kind="relu"),                             # 1   e1: 8 @ 64
        LayerSpec(kind="maxpool2"),                         # 2
        _conv(8, 16),                                       # 3
        LayerSpec(kind="relu"),                             # 4   e2: 16 @ 32
        LayerSpec(kind="maxpool2"),                         # 5
        _conv(16, 32),                                      # 6
        LayerSpec(kind="relu"),                             # 7   bottleneck: 32 @ 16
        LayerSpec(kind="upsample2_nearest"),                # 8   32 @ 32
        LayerSpec(kind="concat", inter_ch=inter),           # 9   32+16 @ 32
        _conv(48, 16),                                      # 10
        LayerSpec(kind="relu"),                             # 11
        LayerSpec(kind="upsample2_nearest"),                # 12  16 @ 64
        LayerSpec(kind="concat", inter_ch=inter),           # 13  16+8 @ 64
        _conv(24, 8),                                       # 14
        LayerSpec(kind="relu"),                             # 15
        LayerSpec(kind="conv1x1", in_ch=8, out_ch=1),       # 16
        LayerSpec(kind="sigmoid"),                          # 17
    )
    skips = (SkipLink(src=4, dst=9, mode=mode), SkipLink(src=1, dst=13, mode=mode))
    return NetworkSpec(name="mini_unet", input_shape=(1, image_size, image_size),
                       layers=layers, skips=skips)


def build(name: str, seed: int = 0, **kwargs) -> Params:
    if name == "tiny_class_net":
        net = tiny_class_net(**kwargs)
    elif name == "mini_unet":
        net = mini_unet(**kwargs)
    else:
        raise ValueError(f"unknown model {name!r}")
    return init_params(net, model_id=name, seed=seed)
