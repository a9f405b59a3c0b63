from medrt.explain.saliency import (SaliencyMap, binary_entropy, confidence_gate,
                                    default_cam_target, grad_cam, occlusion_map,
                                    uncertainty_map)
from medrt.explain.colormap import COLORMAPS, apply_colormap
from medrt.explain.png import png_encode
from medrt.explain.overlay import (BoxLayer, MaskLayer, OverlaySpec, SaliencyLayer,
                                   render_overlay, render_overlay_png, side_by_side,
                                   to_gray_rgba)

__all__ = [
    "SaliencyMap", "grad_cam", "occlusion_map", "uncertainty_map", "confidence_gate",
    "binary_entropy", "default_cam_target", "COLORMAPS", "apply_colormap",
    "png_encode", "OverlaySpec", "MaskLayer", "SaliencyLayer", "BoxLayer",
    "render_overlay", "render_overlay_png", "side_by_side", "to_gray_rgba",
]
