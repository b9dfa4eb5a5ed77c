"""Per-scene gradient features and the SSTF1 interchange file.

The feature of a scene is g = h * E (element-wise), where E is the decoder
latent and h is the output-space loss gradient pulled back to the latent.
g lives in latent space, so it is comparable across scenes regardless of
horizon or mode count, and it is what the selector measures similarity on.

SSTF1 layout (binary, little-endian): magic ``SSTF1``, u32 dim, u64 count,
then per record a u16 id length, the UTF-8 scene id, u32 density, and dim
f32 values.  Vectors are quantized to f32 on disk (selection is
similarity-based and tolerant); in-memory math stays f64.  This file is the
contract shared with external feature exporters.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DataFormatError, HorizonMismatchError, NumericsError
from .predictor import ToyPredictorParams, grad_wrt_latent, grad_wrt_output, predict_scene
from .scene_data import Dataset

FEATURE_MAGIC = b"SSTF1"


@dataclass(frozen=True)
class FeatureRecord:
    scene_id: str
    density: int
    g: np.ndarray  # (dim,) float64

    def __post_init__(self):
        arr = np.asarray(self.g, dtype=np.float64)
        if arr.ndim != 1:
            raise ContractError(f"feature vector must be 1-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NumericsError(f"non-finite feature for scene {self.scene_id!r}")
        if self.density < 1:
            raise ContractError(f"scene {self.scene_id!r} has density {self.density}")
        arr.setflags(write=False)
        object.__setattr__(self, "g", arr)


@dataclass(frozen=True)
class FeatureSet:
    records: tuple[FeatureRecord, ...]
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for r in self.records:
            if r.scene_id in seen:
                raise ContractError(f"duplicate scene_id {r.scene_id!r} in feature set")
            seen.add(r.scene_id)
            if r.g.shape != (self.dim,):
                raise ContractError(
                    f"scene {r.scene_id!r} has dim {r.g.shape[0]}, feature set declares {self.dim}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def matrix(self) -> np.ndarray:
        """(n, dim) matrix in record order."""
        if not self.records:
            return np.zeros((0, self.dim))
        return np.stack([r.g for r in self.records])

    def densities(self) -> np.ndarray:
        return np.array([r.density for r in self.records], dtype=np.int64)

    def scene_ids(self) -> list[str]:
        return [r.scene_id for r in self.records]


def extract_features(params: ToyPredictorParams, dataset: Dataset) -> FeatureSet:
    """One gradient feature per scene, in dataset order.

    Each scene is independent: run the forward pass, take the loss gradient
    at the output, pull it back through the decoder to the latent, and
    multiply element-wise with the latent.
    """
    if dataset.t_obs != params.t_obs or dataset.t_pred != params.t_pred:
        raise HorizonMismatchError(
            f"dataset horizons ({dataset.t_obs}, {dataset.t_pred}) do not match "
            f"model ({params.t_obs}, {params.t_pred})"
        )
    records = []
    for scene in dataset.scenes:
        out = predict_scene(params, scene)
        d_traj, d_logits = grad_wrt_output(out, scene.focal.future)
        h = grad_wrt_latent(params, d_traj, d_logits)
        g = h * out.latent
        if not np.isfinite(g).all():
            raise NumericsError(f"non-finite gradient feature for scene {scene.scene_id!r}")
        records.append(FeatureRecord(scene.scene_id, scene.density, g))
    return FeatureSet(tuple(records), params.latent_dim)


def write_features(fs: FeatureSet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<IQ", fs.dim, len(fs.records)))
        for r in fs.records:
            id_bytes = r.scene_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise ContractError(f"scene_id too long: {r.scene_id[:40]!r}...")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<I", r.density))
            fh.write(r.g.astype("<f4").tobytes())


def read_features(path) -> FeatureSet:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:5] != FEATURE_MAGIC:
        raise DataFormatError(f"bad feature magic {raw[:5]!r}, expected {FEATURE_MAGIC!r}")
    if len(raw) < 5 + 12:
        raise DataFormatError("truncated feature header")
    dim, count = struct.unpack_from("<IQ", raw, 5)
    offset = 5 + 12
    records = []
    for i in range(count):
        if offset + 2 > len(raw):
            raise DataFormatError(f"truncated feature file at record {i}")
        (id_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        if offset + id_len + 4 + dim * 4 > len(raw):
            raise DataFormatError(f"truncated feature file at record {i}")
        scene_id = raw[offset : offset + id_len].decode("utf-8")
        offset += id_len
        (density,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        g = np.frombuffer(raw, dtype="<f4", count=dim, offset=offset).astype(np.float64)
        offset += dim * 4
        records.append(FeatureRecord(scene_id, density, g))
    if offset != len(raw):
        raise DataFormatError(f"{len(raw) - offset} trailing bytes in feature file")
    return FeatureSet(tuple(records), dim)
