from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

MAGIC = b"SSTF1"
_HEADER = struct.Struct("<IQ")  # dim, record count


class ExportError(Exception):
    """Raised on contract violations; the output path is left untouched."""


class FeatureSample(NamedTuple):
    """One sample from the caller's model.

    ``grad`` is the loss gradient at the model output already pulled back to
    the decoder latent, ``latent`` the decoder latent itself; both must have
    length ``latent_dim``.
    """

    scene_id: str
    density: int
    grad: Sequence[float]
    latent: Sequence[float]


@dataclass(frozen=True)
class ExportSpec:
    latent_dim: int
    samples: Iterable  # of FeatureSample or equivalent 4-tuples
    out_path: str

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ExportError(f"latent_dim must be >= 1, got {self.latent_dim}")


def _encode_record(index: int, sample, latent_dim: int, seen: set) -> bytes:
    try:
        scene_id, density, grad, latent = sample
    except (TypeError, ValueError):
        raise ExportError(
            f"record {index}: expected (scene_id, density, grad, latent)"
        ) from None
    if not scene_id:
        raise ExportError(f"record {index}: empty scene_id")
    if scene_id in seen:
        raise ExportError(f"record {index}: duplicate scene_id {scene_id!r}")
    seen.add(scene_id)
    if int(density) < 1:
        raise ExportError(f"scene {scene_id!r}: density must be positive, got {density}")
    grad = np.asarray(grad, dtype=np.float64)
    latent = np.asarray(latent, dtype=np.float64)
    for name, vec in (("gradient", grad), ("latent", latent)):
        if vec.shape != (latent_dim,):
            raise ExportError(
                f"scene {scene_id!r}: {name} has shape {vec.shape}, expected ({latent_dim},)"
            )
        if not np.isfinite(vec).all():
            raise ExportError(f"scene {scene_id!r}: non-finite {name}")
    g = (grad * latent).astype("<f4")
    id_bytes = scene_id.encode("utf-8")
    if len(id_bytes) > 0xFFFF:
        raise ExportError(f"scene id too long: {scene_id[:40]!r}...")
    return (
        struct.pack("<H", len(id_bytes)) + id_bytes + struct.pack("<I", int(density)) + g.tobytes()
    )


def export_features(spec: ExportSpec) -> int:
    """Stream samples into ``spec.out_path``; returns the record count.

    The file appears atomically: records go to a temp file in the target
    directory and the final rename happens only after every record has
    validated and the patched header is on disk.
    """
    out_dir = os.path.dirname(os.path.abspath(spec.out_path)) or "."
    fd, tmp_path = tempfile.mkstemp(prefix=".sstf-", dir=out_dir)
    count = 0
    seen: set[str] = set()
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(_HEADER.pack(spec.latent_dim, 0))
            for index, sample in enumerate(spec.samples):
                fh.write(_encode_record(index, sample, spec.latent_dim, seen))
                count += 1
            fh.seek(len(MAGIC))
            fh.write(_HEADER.pack(spec.latent_dim, count))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_path, spec.out_path)
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise
    return count
