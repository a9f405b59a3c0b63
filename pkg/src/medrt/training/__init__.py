from medrt.training.phantoms import (LESION, NO_LESION, DatasetSpec, PhantomSample,
                                     boxes_from_mask, connected_components,
                                     generate_phantoms, manifest_entry, rle_decode,
                                     rle_encode, write_manifest)
from medrt.training.augment import (augment, contrast, elastic, flip_h, flip_v,
                                    rot90, rotate, scale)
from medrt.training.losses import (giou, loss_bce_dice, loss_ce, loss_focal,
                                   loss_giou)
from medrt.training.schedules import lr_at
from medrt.training.optim import Adam, SGDMomentum, make_optimizer
from medrt.training.trainer import TrainConfig, batch_arrays, evaluate, train
from medrt.training.crossval import FoldPlan, kfold_split, run_cv

__all__ = [
    "DatasetSpec", "PhantomSample", "LESION", "NO_LESION", "generate_phantoms",
    "boxes_from_mask", "connected_components", "rle_encode", "rle_decode",
    "manifest_entry", "write_manifest", "augment", "flip_h", "flip_v", "rot90",
    "rotate", "scale", "contrast", "elastic", "loss_ce", "loss_bce_dice",
    "loss_focal", "loss_giou", "giou", "lr_at", "SGDMomentum", "Adam",
    "make_optimizer", "TrainConfig", "train", "evaluate", "batch_arrays",
    "FoldPlan", "kfold_split", "run_cv",
]
