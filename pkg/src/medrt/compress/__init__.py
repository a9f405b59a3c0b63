from medrt.nn.params import QuantizedParams
from medrt.nn.tensor import QuantScheme
from medrt.compress.quant import (calibrate, dequantize, percentile_bounds,
                                  quantize_model, quantize_tensor, weight_scheme)
from medrt.compress.prune import (PrunePlan, UnstructuredReport, prune_structured,
                                  prune_unstructured)
from medrt.compress.cost import (DEVICE_PROFILES, CostReport, DeviceProfile,
                                 LayerCost, estimate_cost)

__all__ = [
    "QuantScheme", "QuantizedParams", "calibrate", "quantize_tensor", "dequantize",
    "quantize_model", "weight_scheme", "percentile_bounds", "PrunePlan",
    "UnstructuredReport", "prune_structured", "prune_unstructured", "DeviceProfile",
    "DEVICE_PROFILES", "CostReport", "LayerCost", "estimate_cost",
]
