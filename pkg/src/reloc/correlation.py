"""Feature-map matching layers.

An extensive layer scores every feature pair of two s x s maps (s^4 dot
products). A guided layer only searches a d x d window around the match
found by a previous, coarser layer (s^2 * d^2 dot products), where
d = u * (1 + 2*b) for upscale factor u and border b. Channel layout for
both layers is w = x2 * span + y2 with span = s (extensive) or d (guided).

Also provides depth-based pixel-match counting and the triplet-style
auxiliary loss that pushes true-match correlations above non-matches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Intrinsics
from .errors import NonIntegerWindow, ShapeMismatch
from .geometry import Pose, compose, invert

EXTENSIVE = "extensive"
GUIDED = "guided"


class DotProductCounter:
    """Instrumentation: counts feature dot products performed by the layers."""

    def __init__(self):
        self.count = 0

    def add(self, n: int):
        self.count += int(n)

    def reset(self):
        self.count = 0


dot_counter = DotProductCounter()


def window_size(border: float, upscale: int) -> int:
    """Guided search span d = u * (1 + 2*b); must come out integral."""
    if upscale < 1:
        raise NonIntegerWindow(f"upscale must be >= 1, got {upscale}")
    d_f = upscale * (1.0 + 2.0 * border)
    d = int(round(d_f))
    if d < 1 or abs(d_f - d) > 1e-9:
        raise NonIntegerWindow(f"window size u*(1+2b) = {d_f} is not a positive integer")
    bu = border * upscale
    if abs(bu - round(bu)) > 1e-9:
        raise NonIntegerWindow(f"window anchor offset b*u = {bu} is not integral")
    return d


@dataclass(frozen=True)
class FeatureMap:
    """Square spatial grid of feature vectors, shape (side, side, channels)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim != 3 or d.shape[0] != d.shape[1]:
            raise ShapeMismatch(f"feature map must be (s, s, c), got {d.shape}")
        if d.shape[0] < 1 or d.shape[2] < 1:
            raise ShapeMismatch("feature map needs side >= 1 and channels >= 1")
        if not np.all(np.isfinite(d)):
            raise ValueError("feature map entries must be finite")
        d = d.copy()
        d.flags.writeable = False
        object.__setattr__(self, "data", d)

    @property
    def side(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class CorrelationMap:
    """Correlation scores, shape (side, side, match_channels)."""

    data: np.ndarray
    kind: str = EXTENSIVE
    border: float = 0.0
    upscale: int = 1

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim != 3 or d.shape[0] != d.shape[1]:
            raise ShapeMismatch(f"correlation map must be (s, s, w), got {d.shape}")
        if self.kind == EXTENSIVE:
            if d.shape[2] != d.shape[0] ** 2:
                raise ShapeMismatch(
                    f"extensive map needs side^2 channels, got {d.shape}"
                )
        elif self.kind == GUIDED:
            span = window_size(self.border, self.upscale)
            if d.shape[2] != span * span:
                raise ShapeMismatch(
                    f"guided map needs d^2 = {span * span} channels, got {d.shape[2]}"
                )
        else:
            raise ValueError(f"unknown correlation kind {self.kind!r}")
        d = d.copy()
        d.flags.writeable = False
        object.__setattr__(self, "data", d)

    @property
    def side(self) -> int:
        return self.data.shape[0]

    @property
    def match_channels(self) -> int:
        return self.data.shape[2]

    @property
    def span(self) -> int:
        """Coordinate span encoded in a channel index (s or d)."""
        if self.kind == EXTENSIVE:
            return self.side
        return window_size(self.border, self.upscale)


@dataclass(frozen=True)
class MatchMap:
    """Per-cell argmax match coordinates in the previous layer's grid."""

    my: np.ndarray
    mx: np.ndarray

    def __post_init__(self):
        my = np.asarray(self.my, dtype=int)
        mx = np.asarray(self.mx, dtype=int)
        if my.shape != mx.shape or my.ndim != 2 or my.shape[0] != my.shape[1]:
            raise ShapeMismatch("match map grids must be equal square 2-D arrays")
        my = my.copy()
        mx = mx.copy()
        my.flags.writeable = False
        mx.flags.writeable = False
        object.__setattr__(self, "my", my)
        object.__setattr__(self, "mx", mx)

    @property
    def side(self) -> int:
        return self.my.shape[0]


@dataclass(frozen=True)
class PixelMatchCounts:
    """n(y, x, w): pixels of cell (y, x) whose true match falls in channel w."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 3 or c.shape[0] != c.shape[1]:
            raise ShapeMismatch(f"counts must be (s, s, w), got {c.shape}")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @property
    def side(self) -> int:
        return self.counts.shape[0]

    @property
    def match_channels(self) -> int:
        return self.counts.shape[2]


@dataclass(frozen=True)
class CorrelationLayout:
    """Shape descriptor of one correlation layer, for pixel-match counting."""

    side: int
    kind: str = EXTENSIVE
    guide: MatchMap | None = None
    border: float = 0.0
    upscale: int = 1

    def __post_init__(self):
        if self.kind == GUIDED:
            if self.guide is None:
                raise ValueError("guided layout needs a guide match map")
            window_size(self.border, self.upscale)
            if self.guide.side * self.upscale != self.side:
                raise ShapeMismatch("guide side * upscale must equal layer side")
        elif self.kind != EXTENSIVE:
            raise ValueError(f"unknown correlation kind {self.kind!r}")

    @property
    def match_channels(self) -> int:
        if self.kind == EXTENSIVE:
            return self.side**2
        return window_size(self.border, self.upscale) ** 2


def extensive_correlation(f1: FeatureMap, f2: FeatureMap) -> CorrelationMap:
    """All-pairs correlation: C(y1, x1, x2*s + y2) = <F1(y1,x1), F2(y2,x2)>."""
    if f1.side != f2.side or f1.channels != f2.channels:
        raise ShapeMismatch(
            f"feature maps disagree: {f1.data.shape} vs {f2.data.shape}"
        )
    s = f1.side
    out = np.empty((s, s, s * s))
    # Row-wise to bound peak memory on large maps; reduction order per
    # entry matches a per-pair np.sum, so results are exactly reproducible.
    for y1 in range(s):
        row = (f1.data[y1][:, None, None, :] * f2.data[None, :, :, :]).sum(axis=-1)
        out[y1] = row.transpose(0, 2, 1).reshape(s, s * s)
    dot_counter.add(s**4)
    return CorrelationMap(out, kind=EXTENSIVE)


def match_map(c: CorrelationMap) -> MatchMap:
    """Argmax match per cell; ties resolve to the smallest channel index."""
    if c.kind != EXTENSIVE:
        raise ValueError("guidance is derived from an extensive (coarse) layer")
    w_max = np.argmax(c.data, axis=-1)
    s = c.side
    return MatchMap(my=w_max % s, mx=w_max // s)


def soft_match_map(c: CorrelationMap, temperature: float) -> tuple[np.ndarray, np.ndarray]:
    """Differentiable match: softmax-weighted expected match coordinates.

    Converges to match_map as temperature -> 0 when the maximum is unique.
    Returns real-valued (my, mx) grids.
    """
    if c.kind != EXTENSIVE:
        raise ValueError("guidance is derived from an extensive (coarse) layer")
    if temperature <= 0.0:
        raise ValueError("temperature must be > 0")
    s = c.side
    logits = c.data / temperature
    logits = logits - logits.max(axis=-1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=-1, keepdims=True)
    w_idx = np.arange(s * s)
    my = weights @ (w_idx % s).astype(float)
    mx = weights @ (w_idx // s).astype(float)
    return my, mx


def guided_correlation(
    f1: FeatureMap,
    f2: FeatureMap,
    guide: MatchMap,
    border: float,
    upscale: int,
) -> CorrelationMap:
    """Windowed correlation around the coarse layer's match.

    For fine cell (y1, x1) the search window in F2 starts at
    ((My - b) * u, (Mx - b) * u) where (My, Mx) is the guide entry of the
    coarse cell (y1 // u, x1 // u). Window positions outside F2 contribute
    a dot product of 0 (zero padding). Channel layout w = x2 * d + y2.
    """
    if f1.side != f2.side or f1.channels != f2.channels:
        raise ShapeMismatch(
            f"feature maps disagree: {f1.data.shape} vs {f2.data.shape}"
        )
    s = f1.side
    if guide.side * upscale != s:
        raise ShapeMismatch(
            f"guide side {guide.side} * upscale {upscale} != map side {s}"
        )
    d = window_size(border, upscale)
    bu = int(round(border * upscale))

    fine = np.arange(s)
    my = guide.my[fine[:, None] // upscale, fine[None, :] // upscale]
    mx = guide.mx[fine[:, None] // upscale, fine[None, :] // upscale]
    base_y = my * upscale - bu  # (s, s)
    base_x = mx * upscale - bu

    offs = np.arange(d)
    rows = base_y[:, :, None, None] + offs[None, None, :, None]  # (s, s, d, d)
    cols = base_x[:, :, None, None] + offs[None, None, None, :]
    inside = (rows >= 0) & (rows < s) & (cols >= 0) & (cols < s)
    gathered = f2.data[np.clip(rows, 0, s - 1), np.clip(cols, 0, s - 1), :]
    gathered = gathered * inside[..., None]
    corr = (f1.data[:, :, None, None, :] * gathered).sum(axis=-1)  # (s, s, dy, dx)
    out = corr.transpose(0, 1, 3, 2).reshape(s, s, d * d)
    dot_counter.add(s * s * d * d)
    return CorrelationMap(out, kind=GUIDED, border=border, upscale=upscale)


def pixel_match_counts(
    depth1: np.ndarray,
    pose1: Pose,
    pose2: Pose,
    intrinsics: Intrinsics,
    layout: CorrelationLayout,
    depth2: np.ndarray | None = None,
    occlusion_rel_tol: float = 0.05,
) -> PixelMatchCounts:
    """Count, per feature cell and match channel, the true pixel matches.

    Every valid pixel of image 1 is back-projected with its depth, moved
    into camera 2 and re-projected. A pixel contributes one count at
    (cell of pixel 1, channel of the cell its projection lands in) when the
    projection is in front of camera 2, inside the image, and (if depth2 is
    given) its depth agrees with image 2's rendered depth within
    `occlusion_rel_tol` relative tolerance. For guided layouts the channel
    is window-local; projections outside the guided window are dropped.
    """
    depth1 = np.asarray(depth1, dtype=float)
    if depth1.ndim != 2 or depth1.shape[0] != depth1.shape[1]:
        raise ShapeMismatch(f"depth grid must be square, got {depth1.shape}")
    res = depth1.shape[0]
    if res % layout.side != 0:
        raise ShapeMismatch(
            f"depth resolution {res} is not a multiple of layer side {layout.side}"
        )
    if depth2 is not None:
        depth2 = np.asarray(depth2, dtype=float)
        if depth2.shape != depth1.shape:
            raise ShapeMismatch("depth grids must share resolution")

    cell = res // layout.side
    k = intrinsics.scaled(res)
    rel = compose(pose2, invert(pose1))

    rows1, cols1 = np.nonzero(depth1 > 0.0)
    counts = np.zeros((layout.side, layout.side, layout.match_channels), dtype=np.int64)
    if rows1.size == 0:
        return PixelMatchCounts(counts)

    pts_cam1 = k.backproject_pixels(rows1, cols1, depth1[rows1, cols1])
    pts_cam2 = rel.apply(pts_cam1)
    u, v, z = k.project(pts_cam2)
    ok = (z > 0.0) & k.contains(u, v)
    if depth2 is not None:
        cols2_all = np.clip(np.floor(u).astype(int), 0, res - 1)
        rows2_all = np.clip(np.floor(v).astype(int), 0, res - 1)
        seen = depth2[rows2_all, cols2_all]
        ok &= (seen > 0.0) & (np.abs(z - seen) <= occlusion_rel_tol * seen)

    rows1, cols1 = rows1[ok], cols1[ok]
    rows2 = np.floor(v[ok]).astype(int)
    cols2 = np.floor(u[ok]).astype(int)

    cy1, cx1 = rows1 // cell, cols1 // cell
    cy2, cx2 = rows2 // cell, cols2 // cell

    if layout.kind == EXTENSIVE:
        w = cx2 * layout.side + cy2
        keep = np.ones_like(w, dtype=bool)
    else:
        d = window_size(layout.border, layout.upscale)
        bu = int(round(layout.border * layout.upscale))
        my = layout.guide.my[cy1 // layout.upscale, cx1 // layout.upscale]
        mx = layout.guide.mx[cy1 // layout.upscale, cx1 // layout.upscale]
        ly = cy2 - (my * layout.upscale - bu)
        lx = cx2 - (mx * layout.upscale - bu)
        keep = (ly >= 0) & (ly < d) & (lx >= 0) & (lx < d)
        w = np.where(keep, lx * d + ly, 0)

    np.add.at(counts, (cy1[keep], cx1[keep], w[keep]), 1)
    return PixelMatchCounts(counts)


def auxiliary_loss(c: CorrelationMap, n: PixelMatchCounts) -> float:
    """Triplet hinge loss anchored at true matches.

    For every combination (y, x, w) with n > 0 the loss is the mean over
    negatives q (n(y, x, q) == 0) of max(0, C(y,x,q) - C(y,x,w) + 1);
    combinations without negatives contribute 0. Returns the mean over all
    such positive-anchored combinations, or 0 when there are none.
    """
    if c.data.shape != n.counts.shape:
        raise ShapeMismatch(
            f"correlation {c.data.shape} and counts {n.counts.shape} disagree"
        )
    per_combination = []
    for y in range(c.side):
        for x in range(c.side):
            scores = c.data[y, x]
            pos = n.counts[y, x] > 0
            if not pos.any():
                continue
            negs = scores[~pos]
            for w_score in scores[pos]:
                if negs.size == 0:
                    per_combination.append(0.0)
                else:
                    hinge = np.maximum(0.0, negs - w_score + 1.0)
                    per_combination.append(float(hinge.mean()))
    if not per_combination:
        return 0.0
    return float(np.mean(per_combination))


def auxiliary_loss_total(layers: list[tuple[CorrelationMap, PixelMatchCounts]]) -> float:
    """Mean auxiliary loss across correlation layers."""
    if not layers:
        return 0.0
    return float(np.mean([auxiliary_loss(c, n) for c, n in layers]))
