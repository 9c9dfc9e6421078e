"""Built-in perceptual distance for file-backed images.

A deterministic, dependency-light stand-in for neural perceptual scorers:
a global luminance SSIM term and a per-channel histogram term, each mapped
into [0, 1] and reported on its own channel ("structural", "histogram").
The retriever only needs a monotone perceptual distance, not a calibrated
one. Differently sized inputs are both resized to the shared minimum
dimensions so the measure stays symmetric.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .errors import SchemaMismatch
from .ports import ScorerPort
from .topology import IMAGE_KIND_FILE, ImageRef
from .workspace import Workspace

_HIST_BINS = 32
_C1 = (0.01 * 255.0) ** 2
_C2 = (0.03 * 255.0) ** 2


def luminance_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Single-window SSIM over two equal-shape float luminance planes."""
    if a.shape != b.shape:
        raise SchemaMismatch(f"luminance shapes differ: {a.shape} vs {b.shape}")
    mu_a, mu_b = float(a.mean()), float(b.mean())
    var_a, var_b = float(a.var()), float(b.var())
    cov = float(((a - mu_a) * (b - mu_b)).mean())
    numerator = (2.0 * mu_a * mu_b + _C1) * (2.0 * cov + _C2)
    denominator = (mu_a**2 + mu_b**2 + _C1) * (var_a + var_b + _C2)
    return numerator / denominator


def histogram_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Mean per-channel L1 distance between normalized histograms, in [0, 1]."""
    if a.ndim != 3 or b.ndim != 3 or a.shape[2] != b.shape[2]:
        raise SchemaMismatch("histogram distance expects matching HxWxC arrays")
    channels = a.shape[2]
    total = 0.0
    for c in range(channels):
        hist_a, _ = np.histogram(a[:, :, c], bins=_HIST_BINS, range=(0, 256))
        hist_b, _ = np.histogram(b[:, :, c], bins=_HIST_BINS, range=(0, 256))
        pa = hist_a / max(1, hist_a.sum())
        pb = hist_b / max(1, hist_b.sum())
        total += float(np.abs(pa - pb).sum())
    return total / (2.0 * channels)


def _load_rgb(data: bytes) -> Image.Image:
    try:
        return Image.open(io.BytesIO(data)).convert("RGB")
    except Exception as exc:
        raise SchemaMismatch(f"cannot decode image bytes: {exc}") from exc


def pixel_distances(bytes_a: bytes, bytes_b: bytes) -> dict[str, float]:
    """The two fallback channels for two encoded images."""
    img_a, img_b = _load_rgb(bytes_a), _load_rgb(bytes_b)
    if img_a.size != img_b.size:
        shared = (min(img_a.width, img_b.width), min(img_a.height, img_b.height))
        img_a = img_a.resize(shared, Image.BILINEAR)
        img_b = img_b.resize(shared, Image.BILINEAR)
    rgb_a = np.asarray(img_a, dtype=np.float64)
    rgb_b = np.asarray(img_b, dtype=np.float64)
    lum_a = np.asarray(img_a.convert("L"), dtype=np.float64)
    lum_b = np.asarray(img_b.convert("L"), dtype=np.float64)
    structural = (1.0 - luminance_ssim(lum_a, lum_b)) / 2.0
    # Clamp float dust so downstream range checks stay strict.
    structural = min(1.0, max(0.0, structural))
    return {
        "structural": structural,
        "histogram": histogram_distance(rgb_a, rgb_b),
    }


class FallbackScorer(ScorerPort):
    """ScorerPort over workspace files; no network, no learned weights."""

    def __init__(self, workspace: Workspace):
        self.workspace = workspace

    def distances(self, a: ImageRef, b: ImageRef) -> dict[str, float]:
        if a.kind != IMAGE_KIND_FILE or b.kind != IMAGE_KIND_FILE:
            raise SchemaMismatch("fallback scorer works on pixel images only")
        return pixel_distances(self.workspace.load_bytes(a), self.workspace.load_bytes(b))
