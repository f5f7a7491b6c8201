"""Pin-fin layouts: Latin-hypercube sampling of centers and radii with non-overlap repair."""

import json
from dataclasses import dataclass, field

import numpy as np

from .domain import DomainSpec

PACKING_DENSITY = np.pi / (2 * np.sqrt(3))  # densest packing of equal disks


@dataclass
class PinLayout:
    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 2)
        self.radii = np.asarray(self.radii, dtype=np.float64).reshape(-1)
        if len(self.centers) != len(self.radii):
            raise ValueError("centers and radii differ in length")

    @property
    def n_pins(self):
        return len(self.radii)

    def surface_gaps(self):
        """Pairwise surface-to-surface distances (i < j)."""
        if self.n_pins < 2:
            return np.zeros(0)
        d = np.hypot(*(self.centers[:, None, :] - self.centers[None, :, :]).transpose(2, 0, 1))
        i, j = np.triu_indices(self.n_pins, 1)
        return d[i, j] - self.radii[i] - self.radii[j]

    def wall_gaps(self, domain):
        y = self.centers[:, 1]
        return np.concatenate([y - self.radii, domain.L_y - y - self.radii])

    def narrowest_gap(self, domain):
        g = np.concatenate([self.surface_gaps(), self.wall_gaps(domain)])
        return float(g.min()) if g.size else np.inf

    def mirrored(self, domain):
        """Reflection about the channel centreline y = L_y / 2."""
        c = self.centers.copy()
        c[:, 1] = domain.L_y - c[:, 1]
        return PinLayout(c, self.radii.copy())

    def to_dict(self):
        return {"centers": self.centers.tolist(), "radii": self.radii.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["centers"], d["radii"])

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class LayoutConstraints:
    n_pins: int = 34
    r_min: float = 0.005
    r_max: float = 0.015
    margin: float = 1e-4      # required clearance beyond touching
    min_gap: float = 0.006    # surface clearance kept open for the flow (pins and walls)
    domain: DomainSpec = field(default_factory=DomainSpec)

    @property
    def clearance(self):
        return max(self.margin, self.min_gap)

    def check_feasible(self):
        if not 0 < self.r_min <= self.r_max:
            raise ValueError("need 0 < r_min <= r_max")
        d, c = self.domain, self.clearance
        if 2 * self.r_min + 2 * c > d.L_y or 2 * self.r_min > d.L_x:
            raise ValueError("smallest pin does not fit in the channel")
        need = self.n_pins * np.pi * (self.r_min + c / 2) ** 2
        avail = PACKING_DENSITY * (d.L_x + c) * (d.L_y + c)
        if need > avail:
            raise ValueError(f"infeasible constraints: {self.n_pins} pins need {need:.4g} m^2, "
                             f"packing bound allows {avail:.4g} m^2")

    def satisfied(self, layout):
        d = self.domain
        r, (x, y) = layout.radii, layout.centers.T
        return bool(
            np.all((r >= self.r_min - 1e-12) & (r <= self.r_max + 1e-12))
            and np.all(x - r >= -1e-12) and np.all(x + r <= d.L_x + 1e-12)
            and np.all(layout.wall_gaps(d) >= self.clearance - 1e-12)
            and np.all(layout.surface_gaps() > self.clearance)
        )


def latin_hypercube(n, dim, rng):
    """n points in [0,1)^dim, one per stratum in every coordinate."""
    u = (rng.random((n, dim)) + np.arange(n)[:, None]) / n
    for j in range(dim):
        u[:, j] = u[rng.permutation(n), j]
    return u


def _bounds(r, cons):
    d, c = cons.domain, cons.clearance
    return (r, d.L_x - r, r + c, d.L_y - r - c)


def _from_unit(u, cons):
    n = cons.n_pins
    r = cons.r_min + u[2 * n:] * (cons.r_max - cons.r_min)
    x0, x1, y0, y1 = _bounds(r, cons)
    x = x0 + u[:n] * (x1 - x0)
    y = y0 + u[n:2 * n] * (y1 - y0)
    return np.stack([x, y], 1), r


def repair(centers, radii, cons, max_iter=500):
    """Push overlapping pins apart pairwise; returns (centers, ok)."""
    c = centers.copy()
    x0, x1, y0, y1 = _bounds(radii, cons)
    need = radii[:, None] + radii[None, :] + cons.clearance
    target = need + 0.1 * cons.clearance  # overshoot so separation terminates
    np.fill_diagonal(need, 0.0)
    np.fill_diagonal(target, 0.0)
    for _ in range(max_iter):
        diff = c[:, None, :] - c[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(dist, np.inf)
        if not (dist <= need).any():
            return c, True
        overlap = np.maximum(target - dist, 0.0)
        np.fill_diagonal(overlap, 0.0)
        dist = np.where(np.isfinite(dist) & (dist > 1e-12), dist, 1e-12)
        push = (overlap / dist)[..., None] * diff * 0.5
        c = c + push.sum(1)
        c[:, 0] = np.clip(c[:, 0], x0, x1)
        c[:, 1] = np.clip(c[:, 1], y0, y1)
    return c, False


def sample_layouts(n, seed=0, constraints=None, max_attempts=50):
    """``n`` valid layouts from a Latin hypercube over (x, y, r) of every pin.

    Raw samples that overlap are repaired by iterative separation; samples that
    cannot be repaired are replaced by fresh random draws.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    cons = constraints or LayoutConstraints()
    cons.check_feasible()
    rng = np.random.default_rng(seed)
    units = latin_hypercube(n, 3 * cons.n_pins, rng) if n else np.zeros((0, 3 * cons.n_pins))
    out = []
    for u in units:
        for _ in range(max_attempts):
            centers, radii = _from_unit(u, cons)
            centers, ok = repair(centers, radii, cons)
            layout = PinLayout(centers, radii)
            if ok and cons.satisfied(layout):
                out.append(layout)
                break
            u = rng.random(3 * cons.n_pins)
        else:
            raise RuntimeError(f"could not place {cons.n_pins} pins after {max_attempts} attempts")
    return out
