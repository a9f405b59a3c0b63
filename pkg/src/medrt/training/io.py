"""Dataset directory format: DICOM-lite studies plus a JSON manifest."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from medrt.errors import ConfigurationError
from medrt.dicom.codec import build_phantom_dicom, parse, write
from medrt.nn.tensor import Tensor
from medrt.training.phantoms import (DatasetSpec, PhantomSample, manifest_entry,
                                     rle_decode)


def export_dataset(samples: list[PhantomSample], out_dir, spec: DatasetSpec | None = None,
                   dicom: bool = True) -> Path:
    out = Path(out_dir)
    (out / "studies").mkdir(parents=True, exist_ok=True)
    rows = []
    for i, s in enumerate(samples):
        rows.append(manifest_entry(s))
        if dicom:
            obj = build_phantom_dicom(s.image.data, f"PHANTOM^{i:05d}",
                                      f"P{i:08d}", study_id=f"S{i:05d}")
            (out / "studies" / f"{s.sample_id}.dcm").write_bytes(write(obj))
    manifest = {"samples": rows}
    if spec is not None:
        manifest["spec"] = spec.to_json()
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=1)
    return out


def load_dataset_dir(path) -> list[PhantomSample]:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ConfigurationError(f"no manifest.json under {root}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    samples = []
    for row in manifest["samples"]:
        shape = tuple(row["shape"])
        mask = rle_decode(row["mask_rle"], shape)
        dcm = root / "studies" / f"{row['sample_id']}.dcm"
        if dcm.exists():
            obj = parse(dcm.read_bytes())
            arr = np.frombuffer(obj.pixel_bytes, dtype="<u2").reshape(
                obj.rows, obj.columns).astype(np.float32)
        else:
            raise ConfigurationError(f"study file missing for {row['sample_id']}")
        samples.append(PhantomSample(
            sample_id=row["sample_id"], image=Tensor(arr[None]),
            class_label=row["label"], mask=mask,
            boxes=[tuple(b) for b in row["boxes"]]))
    return samples
