"""Area-weighted rasterization of polygonal cell data onto square-pixel grids.

Each pixel value is the coverage-weighted mean of the cells overlapping it,

    value(pixel) = sum_j A(c_j ∩ pixel) * psi_j / sum_j A(c_j ∩ pixel),

with the intersections computed exactly by clipping each convex cell against
the pixel rectangle (Sutherland-Hodgman) and measuring the result with the
shoelace formula. The clipping is vectorized over all (cell, pixel) pairs.
"""

from dataclasses import dataclass, field

import numpy as np


def ny_for(n_x, L_x, L_y):
    """Rows for square pixels; round-half-even reproduces 50→95, 100→190, 200→380, 400→761."""
    return int(round(n_x * L_y / L_x))


@dataclass
class GridField:
    """Image-like field; row 0 is the bottom (smallest y) row."""

    values: np.ndarray
    pixel_size: float
    name: str = ""
    units: str = ""
    geometry_channel: bool = False
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValueError("GridField values must be 2-D (n_y, n_x)")

    @property
    def shape(self):
        return self.values.shape


class UnstructuredMesh:
    """Convex polygonal cells with per-cell field values.

    ``polygons`` is either a list of (m_i, 2) vertex loops or a padded array
    (P, M, 2) together with ``counts``. ``bbox`` = (x0, y0, x1, y1) is the
    nominal domain box that images are laid over.
    """

    def __init__(self, polygons, values=None, bbox=None, counts=None):
        if counts is None:
            counts = np.array([len(p) for p in polygons], dtype=np.int64)
            m = int(counts.max()) if len(counts) else 3
            verts = np.zeros((len(polygons), m, 2))
            for i, p in enumerate(polygons):
                verts[i, :len(p)] = p
        else:
            verts = np.asarray(polygons, dtype=np.float64)
            counts = np.asarray(counts, dtype=np.int64)
        self.verts, self.counts = verts, counts
        if np.any(counts < 3):
            raise ValueError("degenerate polygon: fewer than 3 vertices")
        areas = polygon_areas(verts, counts)
        if np.any(areas <= 0) or not np.all(_is_convex(verts, counts)):
            bad = int(np.nonzero((areas <= 0) | ~_is_convex(verts, counts))[0][0])
            raise ValueError(f"degenerate or non-convex polygon at cell {bad}")
        self.areas = areas
        self.values = {k: np.asarray(v, dtype=np.float64) for k, v in (values or {}).items()}
        for k, v in self.values.items():
            if v.shape != (len(counts),):
                raise ValueError(f"field {k!r} has {v.shape} values for {len(counts)} cells")
        if bbox is None:
            pts = np.concatenate([verts[i, :c] for i, c in enumerate(counts)])
            bbox = (*pts.min(axis=0), *pts.max(axis=0))
        self.bbox = tuple(float(b) for b in bbox)

    @property
    def n_cells(self):
        return len(self.counts)

    @classmethod
    def from_structured(cls, x_edges, y_edges, values, bbox=None):
        """Rectangular cells of a tensor-product grid; ``values`` arrays are (ny, nx)."""
        X0, Y0 = np.meshgrid(x_edges[:-1], y_edges[:-1])
        X1, Y1 = np.meshgrid(x_edges[1:], y_edges[1:])
        verts = np.stack([
            np.stack([X0, Y0], -1), np.stack([X1, Y0], -1), np.stack([X1, Y1], -1), np.stack([X0, Y1], -1),
        ], axis=2).reshape(-1, 4, 2)
        vals = {k: np.asarray(v).reshape(-1) for k, v in values.items()}
        return cls(verts, vals, bbox, counts=np.full(len(verts), 4))


def polygon_areas(verts, counts):
    """Shoelace areas of padded polygons (absolute value)."""
    m = verts.shape[1]
    k = np.arange(m)
    nxt = (k[None, :] + 1) % counts[:, None]
    x, y = verts[..., 0], verts[..., 1]
    xn = np.take_along_axis(x, nxt, axis=1)
    yn = np.take_along_axis(y, nxt, axis=1)
    cross = np.where(k[None, :] < counts[:, None], x * yn - xn * y, 0.0)
    return 0.5 * np.abs(cross.sum(axis=1))


def _is_convex(verts, counts):
    m = verts.shape[1]
    k = np.arange(m)
    i1 = (k[None, :] + 1) % counts[:, None]
    i2 = (k[None, :] + 2) % counts[:, None]
    p0 = verts
    p1 = np.take_along_axis(verts, i1[..., None], axis=1)
    p2 = np.take_along_axis(verts, i2[..., None], axis=1)
    e1, e2 = p1 - p0, p2 - p1
    cross = e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]
    valid = k[None, :] < counts[:, None]
    scale = np.abs(e1).max(axis=(1, 2), initial=0.0)[:, None] ** 2
    tol = 1e-12 * np.maximum(scale, 1e-300)
    pos = np.any(valid & (cross > tol), axis=1)
    neg = np.any(valid & (cross < -tol), axis=1)
    return ~(pos & neg)


def _clip(verts, counts, axis, bound, keep_above):
    """Clip padded convex polygons against the half-plane coord >= bound (or <=)."""
    q, m = verts.shape[:2]
    out = np.zeros((q, m + 1, 2))
    cnt = np.zeros(q, dtype=np.int64)
    rows = np.arange(q)
    sign = 1.0 if keep_above else -1.0
    for k in range(m):
        active = k < counts
        if not active.any():
            break
        cur = verts[:, k]
        nxt = verts[rows, (k + 1) % np.maximum(counts, 1)]
        dc = sign * (cur[:, axis] - bound)
        dn = sign * (nxt[:, axis] - bound)
        inc, inn = dc >= 0, dn >= 0
        emit = active & inc
        out[rows[emit], cnt[emit]] = cur[emit]
        cnt += emit
        cross = active & (inc != inn)
        denom = np.where(cross, dc - dn, 1.0)
        t = np.where(cross, dc / denom, 0.0)
        inter = cur + t[:, None] * (nxt - cur)
        out[rows[cross], cnt[cross]] = inter[cross]
        cnt += cross
    return out, cnt


def clip_to_rects(verts, counts, x0, x1, y0, y1):
    """Intersection areas of each polygon with its paired axis-aligned rectangle."""
    for axis, bound, above in ((0, x0, True), (0, x1, False), (1, y0, True), (1, y1, False)):
        verts, counts = _clip(verts, counts, axis, bound, above)
    areas = polygon_areas(verts, np.maximum(counts, 1))
    return np.where(counts >= 3, areas, 0.0)


def _pixel_pairs(verts, counts, origin, px, n_x, n_y):
    """Enumerate (cell, pixel) pairs whose bounding boxes overlap."""
    big = np.where(np.arange(verts.shape[1])[None, :] < counts[:, None], 0.0, np.inf)
    lo = np.stack([(verts[..., a] + big).min(axis=1) for a in (0, 1)], axis=1)
    hi = np.stack([(verts[..., a] - big).max(axis=1) for a in (0, 1)], axis=1)
    ix0 = np.clip(np.floor((lo[:, 0] - origin[0]) / px).astype(np.int64), 0, n_x - 1)
    ix1 = np.clip(np.ceil((hi[:, 0] - origin[0]) / px).astype(np.int64) - 1, 0, n_x - 1)
    iy0 = np.clip(np.floor((lo[:, 1] - origin[1]) / px).astype(np.int64), 0, n_y - 1)
    iy1 = np.clip(np.ceil((hi[:, 1] - origin[1]) / px).astype(np.int64) - 1, 0, n_y - 1)
    outside = (hi[:, 0] <= origin[0]) | (lo[:, 0] >= origin[0] + n_x * px) | \
              (hi[:, 1] <= origin[1]) | (lo[:, 1] >= origin[1] + n_y * px)
    nx_c = np.where(outside, 0, ix1 - ix0 + 1)
    ny_c = np.where(outside, 0, iy1 - iy0 + 1)
    per = nx_c * ny_c
    cell = np.repeat(np.arange(len(counts)), per)
    local = np.arange(per.sum()) - np.repeat(np.cumsum(per) - per, per)
    w = np.repeat(np.maximum(nx_c, 1), per)
    ix = np.repeat(ix0, per) + local % w
    iy = np.repeat(iy0, per) + local // w
    return cell, iy, ix


def coverage(mesh, n_x, chunk=200_000):
    """Per-pixel overlap areas for every (cell, pixel) pair; returns (cell, pixel, area, n_y, px)."""
    x0, y0, x1, y1 = mesh.bbox
    if n_x < 2:
        raise ValueError("n_x must be >= 2")
    n_y = ny_for(n_x, x1 - x0, y1 - y0)
    px = (x1 - x0) / n_x
    cell, iy, ix = _pixel_pairs(mesh.verts, mesh.counts, (x0, y0), px, n_x, n_y)
    area = np.empty(len(cell))
    for s in range(0, len(cell), chunk):
        c = cell[s:s + chunk]
        gx0 = x0 + ix[s:s + chunk] * px
        gy0 = y0 + iy[s:s + chunk] * px
        area[s:s + chunk] = clip_to_rects(mesh.verts[c], mesh.counts[c], gx0, gx0 + px, gy0, gy0 + px)
    keep = area > 0
    return cell[keep], (iy * n_x + ix)[keep], area[keep], n_y, px


def rasterize_values(mesh, field_name, n_x, cov=None):
    """Float64 area-weighted pixel means of ``field_name``; returns (values, pixel size)."""
    if field_name not in mesh.values:
        raise KeyError(f"mesh has no field {field_name!r}")
    cell, pix, area, n_y, px = cov if cov is not None else coverage(mesh, n_x)
    num = np.bincount(pix, weights=area * mesh.values[field_name][cell], minlength=n_y * n_x)
    den = np.bincount(pix, weights=area, minlength=n_y * n_x)
    if np.any(den <= 0):
        j = int(np.nonzero(den <= 0)[0][0])
        raise ValueError(f"pixel (row {j // n_x}, col {j % n_x}) is not covered by any cell")
    return (num / den).reshape(n_y, n_x), px


def rasterize(mesh, field_name, n_x, units="", cov=None):
    """Area-weighted average of ``field_name`` on an n_y x n_x grid, stored as float32."""
    vals, px = rasterize_values(mesh, field_name, n_x, cov)
    return GridField(vals, px, field_name, units, False, mesh.bbox[:2])


# geometry images ---------------------------------------------------------------

def _chord_area_above(xa, xb, h, r):
    """Area of the disk (radius r, centered at 0) with x in [xa, xb] and y >= h, for h >= 0."""
    s = np.sqrt(np.maximum(r * r - h * h, 0.0))
    a = np.clip(xa, -s, s)
    b = np.clip(xb, -s, s)

    def prim(t):
        return 0.5 * (t * np.sqrt(np.maximum(r * r - t * t, 0.0)) + r * r * np.arcsin(np.clip(t / r, -1, 1)))

    return np.maximum(prim(b) - prim(a) - h * (b - a), 0.0)


def _disk_band(xa, xb, ya, yb, r):
    """Area of disk ∩ [xa, xb] x [ya, yb] for a disk at the origin; ya <= yb."""
    lo, hi = np.minimum(np.abs(ya), np.abs(yb)), np.maximum(np.abs(ya), np.abs(yb))
    same_side = (ya >= 0) | (yb <= 0)
    one_side = _chord_area_above(xa, xb, lo, r) - _chord_area_above(xa, xb, hi, r)
    straddle = (_chord_area_above(xa, xb, 0.0, r) - _chord_area_above(xa, xb, np.abs(ya), r)
                + _chord_area_above(xa, xb, 0.0, r) - _chord_area_above(xa, xb, np.abs(yb), r))
    return np.where(same_side, one_side, straddle)


def disk_rect_area(cx, cy, r, x0, x1, y0, y1):
    """Exact area of the intersection of a disk with axis-aligned rectangles (vectorized)."""
    return _disk_band(x0 - cx, x1 - cx, y0 - cy, y1 - cy, r)


def geometry_to_image(layout, n_x, bbox):
    """Solid-fraction image of a pin layout: 1 inside pins, 0 in fluid, exact fractions between."""
    x0, y0, x1, y1 = bbox
    n_y = ny_for(n_x, x1 - x0, y1 - y0)
    px = (x1 - x0) / n_x
    img = np.zeros((n_y, n_x))
    for (cx, cy), r in zip(layout.centers, layout.radii):
        i0 = max(int(np.floor((cx - r - x0) / px)), 0)
        i1 = min(int(np.ceil((cx + r - x0) / px)), n_x)
        j0 = max(int(np.floor((cy - r - y0) / px)), 0)
        j1 = min(int(np.ceil((cy + r - y0) / px)), n_y)
        if i1 <= i0 or j1 <= j0:
            continue
        gx = x0 + np.arange(i0, i1 + 1) * px
        gy = y0 + np.arange(j0, j1 + 1) * px
        X0, Y0 = np.meshgrid(gx[:-1], gy[:-1])
        img[j0:j1, i0:i1] += disk_rect_area(cx, cy, r, X0, X0 + px, Y0, Y0 + px) / (px * px)
    return GridField(np.clip(img, 0.0, 1.0), px, "geometry", "1", True, (x0, y0))
