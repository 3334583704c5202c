"""Independent brute-force reference implementations.

Everything here is written from the operation definitions alone (nested
loops, homogeneous matrices, exhaustive scans) and deliberately shares no
code path with the library implementations it checks.
"""

import math

import numpy as np


def pose_matrix(rotation_matrix: np.ndarray, translation: np.ndarray) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = rotation_matrix
    m[:3, 3] = translation
    return m


def compose_matrices(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b


def extensive_correlation_oracle(f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    s = f1.shape[0]
    out = np.zeros((s, s, s * s))
    for y1 in range(s):
        for x1 in range(s):
            for y2 in range(s):
                for x2 in range(s):
                    out[y1, x1, x2 * s + y2] = np.sum(f1[y1, x1] * f2[y2, x2])
    return out


def guided_correlation_oracle(
    f1: np.ndarray,
    f2: np.ndarray,
    guide_my: np.ndarray,
    guide_mx: np.ndarray,
    border: float,
    upscale: int,
) -> np.ndarray:
    s = f1.shape[0]
    d = int(round(upscale * (1 + 2 * border)))
    bu = int(round(border * upscale))
    out = np.zeros((s, s, d * d))
    for y1 in range(s):
        for x1 in range(s):
            my = guide_my[y1 // upscale, x1 // upscale]
            mx = guide_mx[y1 // upscale, x1 // upscale]
            for y2 in range(d):
                for x2 in range(d):
                    ry = my * upscale - bu + y2
                    rx = mx * upscale - bu + x2
                    if 0 <= ry < s and 0 <= rx < s:
                        val = np.sum(f1[y1, x1] * f2[ry, rx])
                    else:
                        val = 0.0
                    out[y1, x1, x2 * d + y2] = val
    return out


def match_map_oracle(corr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = corr.shape[0]
    my = np.zeros((s, s), dtype=int)
    mx = np.zeros((s, s), dtype=int)
    for y in range(s):
        for x in range(s):
            best_w, best_v = 0, corr[y, x, 0]
            for w in range(1, corr.shape[2]):
                if corr[y, x, w] > best_v:
                    best_w, best_v = w, corr[y, x, w]
            my[y, x] = best_w % s
            mx[y, x] = best_w // s
    return my, mx


def soft_match_oracle(corr: np.ndarray, temperature: float) -> tuple[np.ndarray, np.ndarray]:
    s = corr.shape[0]
    my = np.zeros((s, s))
    mx = np.zeros((s, s))
    for y in range(s):
        for x in range(s):
            logits = corr[y, x] / temperature
            weights = np.exp(logits - logits.max())
            weights = weights / weights.sum()
            for w, p in enumerate(weights):
                my[y, x] += p * (w % s)
                mx[y, x] += p * (w // s)
    return my, mx


def auxiliary_loss_oracle(corr: np.ndarray, counts: np.ndarray) -> float:
    s, _, n_w = corr.shape
    combo_losses = []
    for y in range(s):
        for x in range(s):
            for w in range(n_w):
                if counts[y, x, w] <= 0:
                    continue
                hinges = []
                for q in range(n_w):
                    if counts[y, x, q] == 0:
                        hinges.append(max(0.0, corr[y, x, q] - corr[y, x, w] + 1.0))
                combo_losses.append(sum(hinges) / len(hinges) if hinges else 0.0)
    return sum(combo_losses) / len(combo_losses) if combo_losses else 0.0


def pixel_match_counts_oracle(
    depth1: np.ndarray,
    pose1,
    pose2,
    intrinsics,
    side: int,
    depth2: np.ndarray | None = None,
    guide=None,
    border: float = 0.0,
    upscale: int = 1,
    occlusion_rel_tol: float = 0.05,
) -> np.ndarray:
    res = depth1.shape[0]
    cell = res // side
    k = intrinsics.scaled(res)
    r1 = pose1.rotation.to_matrix()
    t1 = pose1.translation
    r2 = pose2.rotation.to_matrix()
    t2 = pose2.translation
    if guide is None:
        n_w = side * side
    else:
        d = int(round(upscale * (1 + 2 * border)))
        bu = int(round(border * upscale))
        n_w = d * d
    counts = np.zeros((side, side, n_w), dtype=np.int64)
    for py in range(res):
        for px in range(res):
            z1 = depth1[py, px]
            if z1 <= 0.0:
                continue
            xc1 = np.array(
                [
                    (px + 0.5 - k.cx) / k.fx * z1,
                    (py + 0.5 - k.cy) / k.fy * z1,
                    z1,
                ]
            )
            world = r1.T @ (xc1 - t1)
            xc2 = r2 @ world + t2
            if xc2[2] <= 0.0:
                continue
            u = k.fx * xc2[0] / xc2[2] + k.cx
            v = k.fy * xc2[1] / xc2[2] + k.cy
            if not (0.0 <= u < res and 0.0 <= v < res):
                continue
            px2, py2 = int(math.floor(u)), int(math.floor(v))
            if depth2 is not None:
                seen = depth2[py2, px2]
                if seen <= 0.0 or abs(xc2[2] - seen) > occlusion_rel_tol * seen:
                    continue
            cy1, cx1 = py // cell, px // cell
            cy2, cx2 = py2 // cell, px2 // cell
            if guide is None:
                w = cx2 * side + cy2
            else:
                my = guide.my[cy1 // upscale, cx1 // upscale]
                mx = guide.mx[cy1 // upscale, cx1 // upscale]
                ly = cy2 - (my * upscale - bu)
                lx = cx2 - (mx * upscale - bu)
                if not (0 <= ly < d and 0 <= lx < d):
                    continue
                w = lx * d + ly
            counts[cy1, cx1, w] += 1
    return counts


def overlap_oracle(pts_i: np.ndarray, pts_j: np.ndarray, p_max: float) -> float:
    def directed(a, b):
        hits = 0
        for p in a:
            best = min(float(np.linalg.norm(p - q)) for q in b)
            if best <= p_max:
                hits += 1
        return hits / len(a)

    return 0.5 * (directed(pts_i, pts_j) + directed(pts_j, pts_i))


def greedy_retrieval_oracle(entries, query_desc, k, d_lo, d_hi):
    """entries: list of (image_id, center, descriptor)."""
    ranked = sorted(
        entries,
        key=lambda e: (float(np.linalg.norm(e[2] - query_desc)), e[0]),
    )
    picked = []
    for image_id, center, _ in ranked:
        if len(picked) >= k:
            break
        if all(d_lo <= float(np.linalg.norm(center - c)) <= d_hi for _, c in picked):
            picked.append((image_id, center))
    return [image_id for image_id, _ in picked]
