"""Split-and-combine image fusion.

The final frame is merged from three per-instance layers with two masks:
an unoccluded-hand mask and a hand-object foreground mask. Both masks are
computed analytically from the target rasterization; the z-buffer already
decided hand-object mutual occlusion, so ``instance == Hand`` marks pixels
where the hand is the front surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllForeground, NoVisibleHand, SizeMismatch
from .geometry import Instance
from .raster import RasterBuffers


@dataclass
class LayerSet:
    """Background / object / hand layers plus the two fusion masks."""

    background: np.ndarray
    object: np.ndarray
    hand: np.ndarray
    mask_hand: np.ndarray
    mask_foreground: np.ndarray

    def __post_init__(self):
        shape = self.background.shape[:2]
        for name in ("object", "hand"):
            if getattr(self, name).shape[:2] != shape:
                raise SizeMismatch(f"{name} layer is {getattr(self, name).shape[:2]}, expected {shape}")
        for name in ("mask_hand", "mask_foreground"):
            if getattr(self, name).shape != shape:
                raise SizeMismatch(f"{name} is {getattr(self, name).shape}, expected {shape}")
        self.mask_hand = self.mask_hand.astype(bool)
        self.mask_foreground = self.mask_foreground.astype(bool)
        if (self.mask_hand & ~self.mask_foreground).any():
            raise ValueError("mask_hand must be a subset of mask_foreground")


def analytic_masks(t_raster: RasterBuffers) -> tuple[np.ndarray, np.ndarray]:
    """(hand mask, foreground mask) from the target rasterization."""
    m_f = t_raster.face >= 0
    m_h = t_raster.instance == Instance.HAND
    return m_h, m_f


def fuse(layers: LayerSet) -> np.ndarray:
    """Merge the three layers:

        I = (I_h * M_h + I_o * (1 - M_h)) * M_f + I_b * (1 - M_f)

    evaluated per pixel per channel with the boolean masks as {0, 1}. With
    binary masks this is pure selection, so the result is bit-exact.
    """
    m_h = layers.mask_hand[:, :, None]
    m_f = layers.mask_foreground[:, :, None]
    fg = np.where(m_h, layers.hand, layers.object)
    return np.where(m_f, fg, layers.background)


def inpaint_background(image: np.ndarray, foreground_mask: np.ndarray) -> np.ndarray:
    """Fill the masked foreground by iterative onion peeling.

    Every iteration fills all hole pixels that touch a known pixel with the
    mean of their known 8-neighbors; the ring fills simultaneously from the
    previous iteration's state, so the result is independent of scan order.
    Hole-free inputs come back bit-identical.
    """
    if image.shape[:2] != foreground_mask.shape:
        raise SizeMismatch(
            f"mask is {foreground_mask.shape}, image is {image.shape[:2]}"
        )
    known = ~foreground_mask.astype(bool)
    if not known.any():
        raise AllForeground("no background pixel to grow from")
    out = image.copy()
    if known.all():
        return out
    h, w = known.shape
    vals = image.astype(np.float64)
    if vals.ndim == 2:
        vals = vals[:, :, None]
    shifts = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    while not known.all():
        acc = np.zeros_like(vals)
        cnt = np.zeros((h, w), dtype=np.float64)
        for dy, dx in shifts:
            src_y = slice(max(0, -dy), min(h, h - dy))
            src_x = slice(max(0, -dx), min(w, w - dx))
            dst_y = slice(max(0, dy), min(h, h + dy))
            dst_x = slice(max(0, dx), min(w, w + dx))
            m = known[src_y, src_x]
            acc[dst_y, dst_x] += np.where(m[:, :, None], vals[src_y, src_x], 0.0)
            cnt[dst_y, dst_x] += m
        ring = (~known) & (cnt > 0)
        vals[ring] = acc[ring] / cnt[ring][:, None]
        known |= ring
    filled = np.rint(vals).astype(image.dtype)
    if image.ndim == 2:
        filled = filled[:, :, 0]
    hole = foreground_mask.astype(bool)
    out[hole] = filled[hole]
    return out


def fill_hand_holes(
    coarse_hand: np.ndarray, t_raster: RasterBuffers, valid: np.ndarray
) -> np.ndarray:
    """Fill hand pixels that carry no source-visible texture.

    Holes take the mean color of valid pixels on the same face; faces with
    no valid pixel fall back to the global mean over all valid hand pixels.
    """
    hand_px = t_raster.instance == Instance.HAND
    holes = hand_px & ~valid
    out = coarse_hand.copy()
    if not holes.any():
        return out
    ok = hand_px & valid
    if not ok.any():
        raise NoVisibleHand("no hand pixel carries source-visible texture")

    colors = coarse_hand[ok].astype(np.float64)
    global_mean = colors.mean(axis=0)

    nf = int(t_raster.face.max()) + 1
    sums = np.zeros((nf, coarse_hand.shape[2]), dtype=np.float64)
    counts = np.zeros(nf, dtype=np.int64)
    ok_faces = t_raster.face[ok].astype(np.int64)
    np.add.at(sums, ok_faces, colors)
    np.add.at(counts, ok_faces, 1)

    hole_faces = t_raster.face[holes].astype(np.int64)
    fill = np.where(
        (counts[hole_faces] > 0)[:, None],
        sums[hole_faces] / np.maximum(counts[hole_faces], 1)[:, None],
        global_mean[None, :],
    )
    fill = np.rint(fill).astype(coarse_hand.dtype)
    if coarse_hand.shape[2] == 4:
        fill[:, 3] = 255
    out[holes] = fill
    return out
