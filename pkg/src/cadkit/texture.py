"""Co-occurrence texture statistics and region shape features.

Nine features per region: area, convex area, equivalent diameter,
solidity, energy, contrast, eccentricity, homogeneity, correlation.
Convex area is exact (integer hull arithmetic over pixel centers);
second moments carry the 1/12 pixel-extent term so degenerate lines
keep eccentricity strictly below 1.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import EmptyGlcmError
from .imaging import GrayImage, Roi


@dataclass(frozen=True)
class GlcmOffset:
    """Displacement between the two pixels of a co-occurrence pair."""

    d_row: int
    d_col: int

    def __post_init__(self):
        if self.d_row == 0 and self.d_col == 0:
            raise ValueError("co-occurrence offset must be nonzero")


@dataclass(frozen=True)
class Glcm:
    """Normalized co-occurrence matrix with marginal statistics."""

    levels: int
    counts: np.ndarray
    p: np.ndarray
    mu_r: float
    mu_c: float
    sigma_r: float
    sigma_c: float

    @classmethod
    def from_counts(cls, counts: np.ndarray) -> "Glcm":
        counts = np.asarray(counts, dtype=np.int64)
        total = int(counts.sum())
        if total == 0:
            raise EmptyGlcmError("no co-occurrence pairs to normalize")
        levels = counts.shape[0]
        p = counts / float(total)
        idx = np.arange(levels, dtype=np.float64)
        pr = p.sum(axis=1)
        pc = p.sum(axis=0)
        mu_r = float((idx * pr).sum())
        mu_c = float((idx * pc).sum())
        sigma_r = math.sqrt(max(0.0, float(((idx - mu_r) ** 2 * pr).sum())))
        sigma_c = math.sqrt(max(0.0, float(((idx - mu_c) ** 2 * pc).sum())))
        frozen_counts = counts.copy()
        frozen_counts.setflags(write=False)
        frozen_p = p.copy()
        frozen_p.setflags(write=False)
        return cls(levels, frozen_counts, frozen_p, mu_r, mu_c, sigma_r, sigma_c)


class GlcmFeatures(NamedTuple):
    energy: float
    contrast: float
    homogeneity: float
    correlation: float


class RegionFeatures(NamedTuple):
    area: int
    convex_area: int
    equivalent_diameter: float
    solidity: float
    eccentricity: float


@dataclass(frozen=True)
class LungFeatureVector:
    """The nine per-region features, in presentation order."""

    area: float
    convex_area: float
    equivalent_diameter: float
    solidity: float
    energy: float
    contrast: float
    eccentricity: float
    homogeneity: float
    correlation: float

    NAMES = (
        "area",
        "convex_area",
        "equivalent_diameter",
        "solidity",
        "energy",
        "contrast",
        "eccentricity",
        "homogeneity",
        "correlation",
    )

    def __post_init__(self):
        tol = 1e-9
        if not 0.0 < self.solidity <= 1.0 + tol:
            raise ValueError(f"solidity out of (0, 1]: {self.solidity}")
        if self.area > self.convex_area + tol:
            raise ValueError("area exceeds convex area")
        if not -tol <= self.energy <= 1.0 + tol:
            raise ValueError(f"energy out of [0, 1]: {self.energy}")
        if not -tol <= self.homogeneity <= 1.0 + tol:
            raise ValueError(f"homogeneity out of [0, 1]: {self.homogeneity}")
        if not -1.0 - tol <= self.correlation <= 1.0 + tol:
            raise ValueError(f"correlation out of [-1, 1]: {self.correlation}")
        if not -tol <= self.eccentricity < 1.0:
            raise ValueError(f"eccentricity out of [0, 1): {self.eccentricity}")
        if self.contrast < -tol:
            raise ValueError(f"negative contrast: {self.contrast}")

    def values(self) -> tuple:
        return tuple(getattr(self, name) for name in self.NAMES)


def quantize(values: np.ndarray, levels: int) -> np.ndarray:
    """Uniform [0, 1] binning to integer levels 0..levels-1."""
    return np.minimum((values * levels).astype(np.int64), levels - 1)


def compute_glcm(img: GrayImage, roi: Roi, offset: GlcmOffset = GlcmOffset(0, 1),
                 levels: int = 8, symmetric: bool = True) -> Glcm:
    """Co-occurrence counts over ordered in-ROI pixel pairs at one offset.

    With ``symmetric`` (the default) each pair is also counted reversed.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    r0, c0 = roi.offset
    mh, mw = roi.mask.height, roi.mask.width
    if r0 < 0 or c0 < 0 or r0 + mh > img.height or c0 + mw > img.width:
        raise ValueError("ROI does not lie within the image")
    window = img.pixels[r0:r0 + mh, c0:c0 + mw]
    bins = quantize(window, levels)
    bins = np.where(roi.mask.bits, bins, -1)
    counts = kernels.glcm_counts(np.ascontiguousarray(bins), offset.d_row,
                                 offset.d_col, levels)
    if symmetric:
        counts = counts + counts.T
    return Glcm.from_counts(counts)


def glcm_features(g: Glcm) -> GlcmFeatures:
    """Energy, contrast, homogeneity, correlation of a normalized GLCM.

    Correlation is defined as 0 when either marginal variance vanishes.
    """
    p = g.p
    idx = np.arange(g.levels, dtype=np.float64)
    i = idx[:, None]
    j = idx[None, :]
    energy = float((p * p).sum())
    contrast = float(((i - j) ** 2 * p).sum())
    homogeneity = float((p / (1.0 + np.abs(i - j))).sum())
    denom = g.sigma_r * g.sigma_c
    if denom == 0.0:
        correlation = 0.0
    else:
        correlation = float((((i - g.mu_r) * (j - g.mu_c) * p).sum()) / denom)
    return GlcmFeatures(energy, contrast, homogeneity, correlation)


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain over integer points; ccw, no interior vertices."""
    pts = np.unique(points, axis=0)
    if len(pts) <= 2:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def cross(o, a, b):
        return int((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))

    lower = []
    for pt in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], pt) <= 0:
            lower.pop()
        lower.append(tuple(pt))
    upper = []
    for pt in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], pt) <= 0:
            upper.pop()
        upper.append(tuple(pt))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:  # all points collinear
        return np.array([tuple(pts[0]), tuple(pts[-1])], dtype=np.int64)
    return np.array(hull, dtype=np.int64)


def convex_area(roi: Roi) -> int:
    """Lattice points whose centers fall inside or on the hull polygon."""
    rows, cols = np.nonzero(roi.mask.bits)
    points = np.column_stack([rows, cols]).astype(np.int64)
    hull = _convex_hull(points)
    if len(hull) == 1:
        return 1
    if len(hull) == 2:
        d = hull[1] - hull[0]
        return int(math.gcd(int(abs(d[0])), int(abs(d[1])))) + 1
    h, w = roi.mask.height, roi.mask.width
    rr, cc = np.mgrid[0:h, 0:w]
    rr = rr.ravel().astype(np.int64)
    cc = cc.ravel().astype(np.int64)
    inside = np.ones(rr.shape, dtype=bool)
    n = len(hull)
    for k in range(n):
        v1 = hull[k]
        v2 = hull[(k + 1) % n]
        s = (v2[0] - v1[0]) * (cc - v1[1]) - (v2[1] - v1[1]) * (rr - v1[0])
        inside &= s >= 0
    return int(inside.sum())


def _moment_eigenvalues(points: np.ndarray) -> tuple:
    """Eigenvalues of the second-central-moment matrix, pixel-extent corrected."""
    r = points[:, 0].astype(np.float64)
    c = points[:, 1].astype(np.float64)
    mr, mc = r.mean(), c.mean()
    mu20 = ((r - mr) ** 2).mean() + 1.0 / 12.0
    mu02 = ((c - mc) ** 2).mean() + 1.0 / 12.0
    mu11 = ((r - mr) * (c - mc)).mean()
    spread = math.hypot(2.0 * mu11, mu20 - mu02)
    lam1 = 0.5 * (mu20 + mu02 + spread)
    lam2 = 0.5 * (mu20 + mu02 - spread)
    return lam1, lam2, mu20, mu02, mu11


def region_features(roi: Roi) -> RegionFeatures:
    """Area, convex area, equivalent diameter, solidity, eccentricity."""
    area = roi.pixel_count
    ca = convex_area(roi)
    ed = math.sqrt(4.0 * area / math.pi)
    solidity = area / ca
    rows, cols = np.nonzero(roi.mask.bits)
    lam1, lam2, *_ = _moment_eigenvalues(np.column_stack([rows, cols]))
    if lam1 <= 0.0:
        ecc = 0.0
    else:
        ecc = math.sqrt(max(0.0, 1.0 - lam2 / lam1))
    return RegionFeatures(area, ca, ed, solidity, ecc)


def extract_lung_features(img: GrayImage, roi: Roi,
                          offset: GlcmOffset = GlcmOffset(0, 1),
                          levels: int = 8) -> LungFeatureVector:
    """All nine features for one region of one image."""
    reg = region_features(roi)
    tex = glcm_features(compute_glcm(img, roi, offset, levels))
    return LungFeatureVector(
        area=float(reg.area),
        convex_area=float(reg.convex_area),
        equivalent_diameter=reg.equivalent_diameter,
        solidity=reg.solidity,
        energy=tex.energy,
        contrast=tex.contrast,
        eccentricity=reg.eccentricity,
        homogeneity=tex.homogeneity,
        correlation=tex.correlation,
    )
