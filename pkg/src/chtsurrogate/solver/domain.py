"""Cold-plate channel geometry, operating point and material properties."""

from dataclasses import asdict, dataclass

import numpy as np

LPM = 1e-3 / 60.0  # m^3/s per litre per minute


@dataclass(frozen=True)
class DomainSpec:
    L_x: float = 0.25
    L_y: float = 0.25 * 761 / 400
    H: float = 0.005
    inlet_flow: float = 3.0       # L/min
    T_inlet: float = 293.15       # K
    rho: float = 998.2            # water at 20 C
    mu: float = 1.002e-3
    C_p: float = 4182.0
    k: float = 0.598
    k_solid: float = 200.0        # aluminium pins and lid
    lid_thickness: float = 0.001  # heated lid conducting in parallel with the channel layer (m)
    extension: float = 0.02       # straight inlet/outlet runs (m) outside the plate
    depth_friction: bool = True   # wall shear of the top and bottom plates, 12 mu / H^2

    def __post_init__(self):
        for name in ("L_x", "L_y", "H", "rho", "mu", "C_p", "k", "k_solid", "T_inlet"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)}")
        if self.inlet_flow < 0 or self.extension < 0 or self.lid_thickness < 0:
            raise ValueError("inlet_flow and extension must be non-negative")

    @property
    def Q(self):
        """Volumetric flow rate (m^3/s)."""
        return self.inlet_flow * LPM

    @property
    def U_in(self):
        """Mean inlet velocity over the channel cross-section."""
        return self.Q / (self.H * self.L_y)

    @property
    def mdot(self):
        return self.rho * self.Q

    @property
    def hydraulic_diameter(self):
        return 4 * self.H * self.L_y / (2 * (self.H + self.L_y))

    @property
    def reynolds(self):
        return self.rho * self.U_in * self.hydraulic_diameter / self.mu

    @property
    def friction(self):
        """Depth-averaged wall friction coefficient (Pa s / m^2) of plane Poiseuille flow across H."""
        return 12.0 * self.mu / self.H ** 2 if self.depth_friction else 0.0

    @property
    def bbox(self):
        return (0.0, 0.0, self.L_x, self.L_y)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class SolverGrid:
    """Uniform square-cell grid over the plate plus the inlet/outlet extensions."""

    h: float
    nx: int       # plate columns
    ny: int
    n_ext: int    # extension columns on each side

    @classmethod
    def for_domain(cls, domain, grid_n):
        if grid_n < 4:
            raise ValueError("grid_n must be >= 4")
        h = domain.L_x / grid_n
        ny = int(np.ceil(domain.L_y / h - 1e-9))
        return cls(h, grid_n, ny, int(np.ceil(domain.extension / h - 1e-9)))

    @property
    def nx_total(self):
        return self.nx + 2 * self.n_ext

    @property
    def shape(self):
        return (self.ny, self.nx_total)

    def x_edges(self):
        return (np.arange(self.nx_total + 1) - self.n_ext) * self.h

    def y_edges(self):
        return np.arange(self.ny + 1) * self.h

    def centers(self):
        xe, ye = self.x_edges(), self.y_edges()
        return np.meshgrid(0.5 * (xe[1:] + xe[:-1]), 0.5 * (ye[1:] + ye[:-1]))

    @property
    def plate(self):
        """Column slice of the plate region."""
        return slice(self.n_ext, self.n_ext + self.nx)
