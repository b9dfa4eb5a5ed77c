"""Bridge from any neural trajectory predictor to the SSTF1 feature file.

The selection tool consumes per-sample gradient features g = h * E, where h
is the loss gradient at the model output pulled back to the decoder latent
and E is the latent itself.  This adapter does not run models: the caller
iterates its own dataset, computes (h, E) per sample with whatever framework
it likes, and streams them here.  The adapter multiplies element-wise,
quantizes to f32, and writes the interchange file atomically (temp file plus
rename), so a crash or a bad record never leaves a partial file behind.

SSTF1 layout (binary, little-endian): magic ``SSTF1``, u32 dim, u64 count,
then per record a u16 id length, the UTF-8 scene id, u32 density, and dim
f32 values.
"""

from .export import ExportError, ExportSpec, FeatureSample, export_features

__all__ = ["ExportError", "ExportSpec", "FeatureSample", "export_features"]

__version__ = "0.1.0"
