"""Initial conditions from grayscale images.

The image is normalized to [0, 1], triangulated with
:func:`~rdoptctl.mesh.triangulate_grid`, and every mesh node takes the
normalized value of the pixel it was built from.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError
from .fem import FeField, l2_inner
from .mesh import GridImage, triangulate_grid


@dataclass(frozen=True)
class IngestConfig:
    """Mask threshold (on normalized intensity) and normalization rule.

    ``normalize`` is ``"max"`` (divide by the image maximum) or a positive
    number used as a fixed scale, with results clamped to 1.
    """

    threshold: float = 0.0
    normalize: object = "max"

    def __post_init__(self):
        if not (0 <= self.threshold < 1):
            raise InvalidArgumentError("threshold must lie in [0, 1)")
        if self.normalize != "max":
            try:
                scale = float(self.normalize)
            except (TypeError, ValueError):
                raise InvalidArgumentError(
                    f"normalize must be 'max' or a positive scale, got {self.normalize!r}") from None
            if not (scale > 0 and math.isfinite(scale)):
                raise InvalidArgumentError("fixed normalization scale must be positive")
            object.__setattr__(self, "normalize", scale)


def normalize_image(image, normalize="max"):
    v = image.intensities
    if normalize == "max":
        peak = v.max()
        if peak <= 0:
            raise DegenerateInputError("cannot max-normalize an all-zero image")
        out = v / peak
    else:
        out = np.minimum(v / float(normalize), 1.0)
    return GridImage(out, image.pixel_spacing)


def build_initial_condition(image, config=IngestConfig()):
    """Mesh the masked image and interpolate its normalized intensities.

    Returns
    -------
    mesh : Mesh
    u0 : FeField
        Nodal values equal to the normalized pixel intensities.
    """
    norm = normalize_image(image, config.normalize)
    mesh = triangulate_grid(norm, config.threshold)
    u0 = FeField(mesh, norm.intensities.ravel()[mesh.pixel_ids])
    return mesh, u0


def ingestion_summary(mesh, u0):
    c = u0.coeffs
    return {
        "n_nodes": mesh.n_nodes,
        "n_elements": mesh.n_elements,
        "area": mesh.measure,
        "u0_min": float(c.min()),
        "u0_max": float(c.max()),
        "u0_mean": float(c.mean()),
        "u0_integral": l2_inner(mesh, u0, np.ones(mesh.n_nodes)),
    }
