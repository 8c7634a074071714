"""Image containers and the CT preprocessing/segmentation chain.

Covers total-variation denoising, iterative mean-midpoint thresholding,
binarization (dark pixels are body), morphological closing, and
4-connected component extraction with traced boundaries. All values are
immutable after construction; every operation is a pure function.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateRegionError, EmptyInputError

# Moore neighborhood, clockwise from north: used for boundary tracing.
_MOORE = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
_DELTA_TO_DIR = {d: i for i, d in enumerate(_MOORE)}


def _freeze(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GrayImage:
    """Single-channel raster with intensities in [0, 1], row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected 2-D intensity array, got {arr.ndim}-D")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        object.__setattr__(self, "pixels", _freeze(arr))

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


@dataclass(frozen=True)
class RgbImage:
    """Three-channel raster stored as (3, height, width) planes in [0, 1]."""

    planes: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.planes, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] != 3:
            raise ValueError("expected (3, height, width) channel planes")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        object.__setattr__(self, "planes", _freeze(arr))

    @property
    def height(self):
        return self.planes.shape[1]

    @property
    def width(self):
        return self.planes.shape[2]

    def to_gray(self) -> GrayImage:
        """Channel-mean grayscale view."""
        return GrayImage(self.planes.mean(axis=0))


@dataclass(frozen=True)
class BinaryMask:
    """Boolean raster; True marks body pixels."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError(f"expected 2-D bit array, got {arr.ndim}-D")
        object.__setattr__(self, "bits", _freeze(arr.astype(bool)))

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def width(self):
        return self.bits.shape[1]

    @property
    def true_count(self):
        return int(self.bits.sum())

    def complement(self) -> "BinaryMask":
        return BinaryMask(~self.bits)


@dataclass(frozen=True)
class StructuringElement:
    """Square or disk neighborhood for morphology; radius in pixels."""

    radius: int
    shape: str = "disk"

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("structuring element radius must be >= 1")
        if self.shape not in ("square", "disk"):
            raise ValueError(f"unknown structuring element shape {self.shape!r}")

    def offsets(self) -> np.ndarray:
        r = self.radius
        rows, cols = np.mgrid[-r:r + 1, -r:r + 1]
        if self.shape == "disk":
            keep = rows * rows + cols * cols <= r * r
        else:
            keep = np.ones_like(rows, dtype=bool)
        return np.column_stack([rows[keep], cols[keep]]).astype(np.int64)


@dataclass(frozen=True)
class Roi:
    """A single 4-connected region cropped to its bounding box.

    ``offset`` locates the box in the source image; ``boundary`` is the
    Moore-traced contour in local (cropped) coordinates, ordered, and may
    revisit pixels on one-pixel-wide arms.
    """

    mask: BinaryMask
    offset: tuple = (0, 0)
    pixel_count: int = field(init=False)
    boundary: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.mask.true_count
        if n == 0:
            raise DegenerateRegionError("ROI mask has no true pixels")
        _, count = kernels.label_components(self.mask.bits)
        if count != 1:
            raise DegenerateRegionError(
                f"ROI mask must be a single 4-connected component, found {count}"
            )
        object.__setattr__(self, "offset", (int(self.offset[0]), int(self.offset[1])))
        object.__setattr__(self, "pixel_count", n)
        object.__setattr__(self, "boundary", _freeze(_trace_boundary(self.mask.bits)))

    @classmethod
    def from_mask(cls, mask: BinaryMask) -> "Roi":
        """Crop a single-component mask to its bounding box and wrap it."""
        rows, cols = np.nonzero(mask.bits)
        if rows.size == 0:
            raise DegenerateRegionError("mask has no true pixels")
        r0, r1 = int(rows.min()), int(rows.max()) + 1
        c0, c1 = int(cols.min()), int(cols.max()) + 1
        return cls(BinaryMask(mask.bits[r0:r1, c0:c1]), (r0, c0))

    def global_coords(self) -> np.ndarray:
        """(n, 2) array of true-pixel coordinates in the source image frame."""
        rows, cols = np.nonzero(self.mask.bits)
        return np.column_stack([rows + self.offset[0], cols + self.offset[1]])

    def touches_border(self, height: int, width: int) -> bool:
        """True when the region meets the edge of a height x width frame."""
        r0, c0 = self.offset
        return (
            r0 == 0
            or c0 == 0
            or r0 + self.mask.height == height
            or c0 + self.mask.width == width
        )


def _trace_boundary(bits) -> np.ndarray:
    """Moore-neighbor contour trace with Jacob's stopping criterion."""
    h, w = bits.shape
    start_flat = int(np.argmax(bits.ravel()))
    r0, c0 = start_flat // w, start_flat % w

    def fg(r, c):
        return 0 <= r < h and 0 <= c < w and bits[r, c]

    if not any(fg(r0 + dr, c0 + dc) for dr, dc in _MOORE):
        return np.array([[r0, c0]], dtype=np.int64)

    boundary = []
    cur = (r0, c0)
    prev_dir = 6  # backtrack points west; start is first raster-order pixel
    first_pair = None
    while True:
        found_dir = -1
        for s in range(1, 9):
            d = (prev_dir + s) % 8
            if fg(cur[0] + _MOORE[d][0], cur[1] + _MOORE[d][1]):
                found_dir = d
                break
        pair = (cur, found_dir)
        if first_pair is None:
            first_pair = pair
        elif pair == first_pair:
            break
        boundary.append(cur)
        nxt = (cur[0] + _MOORE[found_dir][0], cur[1] + _MOORE[found_dir][1])
        back = (
            cur[0] + _MOORE[(found_dir - 1) % 8][0],
            cur[1] + _MOORE[(found_dir - 1) % 8][1],
        )
        prev_dir = _DELTA_TO_DIR[(back[0] - nxt[0], back[1] - nxt[1])]
        cur = nxt
    return np.array(boundary, dtype=np.int64)


def boundary_perimeter(boundary: np.ndarray) -> float:
    """Contour length of an ordered closed boundary walk.

    Unit steps count 1, diagonal steps sqrt(2); the closing segment back
    to the first pixel is included. A single-pixel boundary has length 0.
    """
    if len(boundary) < 2:
        return 0.0
    closed = np.vstack([boundary, boundary[:1]])
    steps = np.abs(np.diff(closed, axis=0))
    return float(np.where(steps.max(axis=1) > 0, np.hypot(steps[:, 0], steps[:, 1]), 0.0).sum())


# ---------------------------------------------------------------------------
# Total-variation denoising
# ---------------------------------------------------------------------------

def _forward_grad(u):
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    return gx, gy


def _divergence(px, py):
    div = np.zeros_like(px)
    div[:, 0] += px[:, 0]
    div[:, 1:-1] += px[:, 1:-1] - px[:, :-2]
    div[:, -1] += -px[:, -2]
    div[0, :] += py[0, :]
    div[1:-1, :] += py[1:-1, :] - py[:-2, :]
    div[-1, :] += -py[-2, :]
    return div


def total_variation(img: GrayImage) -> float:
    """Isotropic TV with forward differences and reflective boundaries."""
    gx, gy = _forward_grad(img.pixels)
    return float(np.hypot(gx, gy).sum())


def rof_energy(candidate: GrayImage, observed: GrayImage, weight: float) -> float:
    """Fidelity plus weighted total variation of a candidate restoration."""
    diff = candidate.pixels - observed.pixels
    return 0.5 * float((diff * diff).sum()) + weight * total_variation(candidate)


def tv_denoise(img: GrayImage, weight: float, iterations: int) -> GrayImage:
    """Denoise by fixed-step dual descent on the ROF energy.

    Iterates the dual-variable fixed point and returns the iterate with
    the lowest energy seen (the input itself is a candidate), which makes
    the output's total variation never exceed the input's.
    """
    if img.pixels.size == 0:
        raise EmptyInputError("cannot denoise a zero-sized image")
    if weight <= 0:
        raise ValueError("weight must be positive")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if iterations == 0:
        return img

    f = img.pixels
    tau = 0.248
    px = np.zeros_like(f)
    py = np.zeros_like(f)
    best = f
    best_energy = weight * total_variation(img)  # fidelity of the input is 0
    for _ in range(iterations):
        u = f - weight * _divergence(px, py)
        gx, gy = _forward_grad(u)
        norm = 1.0 + (tau / weight) * np.hypot(gx, gy)
        px = (px - (tau / weight) * gx) / norm
        py = (py - (tau / weight) * gy) / norm
        candidate = np.clip(f - weight * _divergence(px, py), 0.0, 1.0)
        diff = candidate - f
        gx2, gy2 = _forward_grad(candidate)
        energy = 0.5 * float((diff * diff).sum()) + weight * float(np.hypot(gx2, gy2).sum())
        if energy < best_energy:
            best_energy = energy
            best = candidate
    if best is f:
        return img
    return GrayImage(best)


# ---------------------------------------------------------------------------
# Thresholding and morphology
# ---------------------------------------------------------------------------

def optimal_threshold(img: GrayImage, t0: float, epsilon: float = 1e-4,
                      max_iters: int = 100) -> float:
    """Fixed-point threshold: midpoint of the two class means it induces.

    Returns the current threshold immediately if either class empties
    (degenerate split).
    """
    if not 0.0 <= t0 <= 1.0:
        raise ValueError("t0 must lie in [0, 1]")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if img.pixels.size == 0:
        raise EmptyInputError("cannot threshold a zero-sized image")
    vals = img.pixels.ravel()
    t = float(t0)
    for _ in range(max_iters):
        below = vals < t
        n_below = int(below.sum())
        if n_below == 0 or n_below == vals.size:
            return t
        t_next = 0.5 * (float(vals[below].mean()) + float(vals[~below].mean()))
        if abs(t_next - t) < epsilon:
            return t_next
        t = t_next
    return t


def binarize(img: GrayImage, t: float) -> BinaryMask:
    """Body mask: True exactly where intensity is strictly below ``t``."""
    return BinaryMask(img.pixels < t)


def morphological_close(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Dilation then erosion; out-of-frame pixels are treated as False.

    Internally padded by the element radius so the result is extensive
    and idempotent on the original frame.
    """
    offsets = se.offsets()
    r = se.radius
    padded = np.zeros((mask.height + 2 * r, mask.width + 2 * r), dtype=bool)
    padded[r:r + mask.height, r:r + mask.width] = mask.bits
    closed = kernels.erode(kernels.dilate(padded, offsets), offsets)
    return BinaryMask(closed[r:r + mask.height, r:r + mask.width])


def connected_components(mask: BinaryMask, min_pixels: int = 1) -> list:
    """4-connected regions with at least ``min_pixels`` pixels.

    Sorted by pixel count descending; equal-sized regions keep their
    raster discovery order.
    """
    if min_pixels < 1:
        raise ValueError("min_pixels must be >= 1")
    labels, count = kernels.label_components(mask.bits)
    if count == 0:
        return []
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    rois = []
    for lab in range(1, count + 1):
        if sizes[lab] < min_pixels:
            continue
        rows, cols = np.nonzero(labels == lab)
        r0, r1 = int(rows.min()), int(rows.max()) + 1
        c0, c1 = int(cols.min()), int(cols.max()) + 1
        rois.append(Roi(BinaryMask(labels[r0:r1, c0:c1] == lab), (r0, c0)))
    rois.sort(key=lambda roi: -roi.pixel_count)
    return rois
