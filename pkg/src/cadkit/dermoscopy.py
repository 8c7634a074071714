"""Melanoma lesion descriptors: the A, B, C, D set plus entropy.

Asymmetry reflects the mask about each principal axis through the
centroid and scores the mismatch; border irregularity is the compactness
index P^2 / (4 pi A); color variation averages per-channel standard
deviation; diameter is the max Feret distance over boundary pixels.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRegionError
from .imaging import BinaryMask, GrayImage, RgbImage, Roi, boundary_perimeter, connected_components


@dataclass(frozen=True)
class PrincipalAxes:
    """Moment-equivalent ellipse pose: centroid, orientation, axis lengths.

    ``major_angle`` is measured from the column axis toward the row axis,
    in [0, pi). Lengths follow the 4*sqrt(eigenvalue) convention.
    """

    centroid: tuple
    major_angle: float
    major_len: float
    minor_len: float

    def __post_init__(self):
        if self.minor_len < 0 or self.major_len < self.minor_len:
            raise ValueError("axis lengths must satisfy major >= minor >= 0")


@dataclass(frozen=True)
class LesionFeatures:
    """Feature bundle fed to the melanoma classifier.

    ``border_irregularity`` can dip slightly below 1 for small rasters
    (pixel-center perimeter underestimates); it is 1 for an ideal disk.
    """

    asymmetry_major: float
    asymmetry_minor: float
    border_irregularity: float
    color_variation: float
    diameter: float
    entropy: float

    NAMES = (
        "asymmetry_major",
        "asymmetry_minor",
        "border_irregularity",
        "color_variation",
        "diameter",
        "entropy",
    )

    def __post_init__(self):
        if not 0.0 <= self.asymmetry_major <= 1.0:
            raise ValueError("asymmetry_major out of [0, 1]")
        if not 0.0 <= self.asymmetry_minor <= 1.0:
            raise ValueError("asymmetry_minor out of [0, 1]")
        if self.color_variation < 0 or self.entropy < 0 or self.diameter < 0:
            raise ValueError("color variation, entropy, diameter must be >= 0")

    def values(self) -> tuple:
        return tuple(getattr(self, name) for name in self.NAMES)


def _local_coords(mask: BinaryMask, minimum: int = 1) -> np.ndarray:
    rows, cols = np.nonzero(mask.bits)
    if rows.size < minimum:
        raise DegenerateRegionError(
            f"mask has {rows.size} true pixels, need at least {minimum}"
        )
    # Anchor at the bounding box so identical shapes at different positions
    # produce bit-identical results.
    return np.column_stack([rows - rows.min(), cols - cols.min()]).astype(np.int64)


def principal_axes(mask: BinaryMask) -> PrincipalAxes:
    """Centroid, orientation, and axis lengths from second central moments."""
    pts = _local_coords(mask, minimum=2)
    rows, cols = np.nonzero(mask.bits)
    r = pts[:, 0].astype(np.float64)
    c = pts[:, 1].astype(np.float64)
    mr, mc = r.mean(), c.mean()
    mu_rr = ((r - mr) ** 2).mean() + 1.0 / 12.0
    mu_cc = ((c - mc) ** 2).mean() + 1.0 / 12.0
    mu_rc = ((r - mr) * (c - mc)).mean()
    spread = math.hypot(2.0 * mu_rc, mu_cc - mu_rr)
    lam1 = 0.5 * (mu_rr + mu_cc + spread)
    lam2 = 0.5 * (mu_rr + mu_cc - spread)
    angle = 0.5 * math.atan2(2.0 * mu_rc, mu_cc - mu_rr)
    if angle < 0:
        angle += math.pi
    if angle >= math.pi:
        angle -= math.pi
    centroid = (float(rows.mean()), float(cols.mean()))
    return PrincipalAxes(centroid, angle,
                         4.0 * math.sqrt(max(lam1, 0.0)),
                         4.0 * math.sqrt(max(lam2, 0.0)))


def _reflect_mismatch(pts: np.ndarray, angle: float) -> float:
    """Symmetric-difference fraction after reflecting across one axis."""
    r = pts[:, 0].astype(np.float64)
    c = pts[:, 1].astype(np.float64)
    mr, mc = r.mean(), c.mean()
    dr, dc = r - mr, c - mc
    ur, uc = math.sin(angle), math.cos(angle)
    proj = dr * ur + dc * uc
    rr = np.rint(mr + 2.0 * proj * ur - dr).astype(np.int64)
    rc = np.rint(mc + 2.0 * proj * uc - dc).astype(np.int64)
    # Pack (row, col) pairs into single ints for exact set arithmetic.
    shift = max(int(np.abs(rr).max(initial=0)), int(np.abs(rc).max(initial=0)),
                int(pts.max(initial=0))) + 2
    span = 2 * shift + 1
    orig = (pts[:, 0] + shift) * span + (pts[:, 1] + shift)
    refl = (rr + shift) * span + (rc + shift)
    mismatch = np.setxor1d(orig, refl).size
    return min(1.0, mismatch / (2.0 * len(pts)))


def asymmetry(mask: BinaryMask) -> tuple:
    """(major-axis, minor-axis) reflection mismatch scores in [0, 1]."""
    pts = _local_coords(mask, minimum=2)
    axes = principal_axes(mask)
    a_major = _reflect_mismatch(pts, axes.major_angle)
    a_minor = _reflect_mismatch(pts, axes.major_angle + 0.5 * math.pi)
    return a_major, a_minor


def border_irregularity(roi: Roi) -> float:
    """Compactness P^2 / (4 pi A) from the traced contour length."""
    perimeter = boundary_perimeter(roi.boundary)
    return perimeter * perimeter / (4.0 * math.pi * roi.pixel_count)


def color_variation(img: RgbImage, mask: BinaryMask) -> float:
    """Mean over channels of the in-mask intensity standard deviation."""
    if mask.true_count == 0:
        raise DegenerateRegionError("color variation needs a non-empty mask")
    if (img.height, img.width) != (mask.height, mask.width):
        raise ValueError("image and mask dimensions differ")
    stds = [float(plane[mask.bits].std()) for plane in img.planes]
    return float(np.mean(stds))


def lesion_entropy(img: GrayImage, mask: BinaryMask, bins: int = 64) -> float:
    """Shannon entropy (bits) of the in-mask intensity histogram."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if mask.true_count == 0:
        raise DegenerateRegionError("entropy needs a non-empty mask")
    if (img.height, img.width) != (mask.height, mask.width):
        raise ValueError("image and mask dimensions differ")
    hist, _ = np.histogram(img.pixels[mask.bits], bins=bins, range=(0.0, 1.0))
    q = hist[hist > 0] / hist.sum()
    return float(-(q * np.log2(q)).sum())


def lesion_diameter(roi: Roi, mm_per_pixel: float = None) -> float:
    """Max pairwise Euclidean distance between boundary pixels (Feret)."""
    pts = np.unique(roi.boundary, axis=0).astype(np.float64)
    if len(pts) == 1:
        best = 0.0
    else:
        diff = pts[:, None, :] - pts[None, :, :]
        best = float(np.sqrt((diff * diff).sum(axis=2)).max())
    if mm_per_pixel is not None:
        best *= mm_per_pixel
    return best


def extract_lesion_features(img: RgbImage, mask: BinaryMask, bins: int = 64,
                            mm_per_pixel: float = None) -> LesionFeatures:
    """Assemble the full descriptor for one lesion.

    Boundary-based features use the largest 4-connected component;
    asymmetry, color, and entropy use the mask as given. Grayscale for
    entropy is the channel mean.
    """
    rois = connected_components(mask, 1)
    if not rois:
        raise DegenerateRegionError("lesion mask is empty")
    roi = rois[0]
    a_major, a_minor = asymmetry(mask)
    return LesionFeatures(
        asymmetry_major=a_major,
        asymmetry_minor=a_minor,
        border_irregularity=border_irregularity(roi),
        color_variation=color_variation(img, mask),
        diameter=lesion_diameter(roi, mm_per_pixel),
        entropy=lesion_entropy(img.to_gray(), mask, bins),
    )
