"""Heat-flux boundary profiles: normalized sums of Gaussian bumps over the plate."""

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .domain import DomainSpec

TOTAL_POWER = 750.0  # W, middle of the 600-900 W heating range


def _gauss_cdf_diff(a, b, mu, s):
    """Integral of exp(-(t-mu)^2 / (2 s^2)) over [a, b]."""
    c = s * np.sqrt(np.pi / 2)
    return c * (erf((b - mu) / (np.sqrt(2) * s)) - erf((a - mu) / (np.sqrt(2) * s)))


@dataclass
class FluxField:
    """q0(x, y) = scale_factor * sum_k w_k exp(-|x - c_k|^2 / (2 s_k^2)), in W/m^2."""

    centers: np.ndarray
    sigmas: np.ndarray
    weights: np.ndarray       # already normalized so the base profile integrates to total_power
    scale_factor: float = 1.0
    domain: DomainSpec = DomainSpec()
    values: np.ndarray = None  # cell averages at the requested resolution

    def __call__(self, x, y):
        x, y = np.asarray(x, float)[..., None], np.asarray(y, float)[..., None]
        r2 = (x - self.centers[:, 0]) ** 2 + (y - self.centers[:, 1]) ** 2
        return self.scale_factor * np.sum(self.weights * np.exp(-r2 / (2 * self.sigmas ** 2)), -1)

    def _unit_integrals(self, x_edges, y_edges):
        d = self.domain
        xe = np.clip(np.asarray(x_edges, float), 0.0, d.L_x)
        ye = np.clip(np.asarray(y_edges, float), 0.0, d.L_y)
        ix = _gauss_cdf_diff(xe[:-1, None], xe[1:, None], self.centers[:, 0], self.sigmas)
        iy = _gauss_cdf_diff(ye[:-1, None], ye[1:, None], self.centers[:, 1], self.sigmas)
        return np.einsum("k,jk,ik->ji", self.weights, iy, ix)

    def cell_integrals(self, x_edges, y_edges):
        """Exact integral of q0 over each rectangle, restricted to the plate; shape (ny, nx)."""
        return self.scale_factor * self._unit_integrals(x_edges, y_edges)

    def cell_averages(self, x_edges, y_edges):
        area = np.outer(np.diff(y_edges), np.diff(x_edges))
        return self.scale_factor * (self._unit_integrals(x_edges, y_edges) / area)

    def total_power(self):
        d = self.domain
        return float(self.cell_integrals([0.0, d.L_x], [0.0, d.L_y])[0, 0])

    def scaled(self, factor):
        return gen_flux_from(self, self.scale_factor * factor)

    def to_dict(self):
        return {"centers": self.centers.tolist(), "sigmas": self.sigmas.tolist(),
                "weights": self.weights.tolist(), "scale_factor": self.scale_factor}


def gen_flux_from(flux, scale_factor, resolution=None):
    out = FluxField(flux.centers, flux.sigmas, flux.weights, float(scale_factor), flux.domain)
    res = resolution if resolution is not None else (None if flux.values is None else flux.values.shape)
    return _with_values(out, res)


def _with_values(flux, resolution):
    if resolution is not None:
        ny, nx = resolution
        d = flux.domain
        flux.values = flux.cell_averages(np.linspace(0, d.L_x, nx + 1), np.linspace(0, d.L_y, ny + 1))
    return flux


def gen_flux(seed, scale_factor=1.0, resolution=(95, 50), domain=None, total_power=TOTAL_POWER,
             n_bumps=(3, 6), sigma_range=(0.03, 0.08)):
    """Random smooth non-negative flux; the unscaled profile integrates to ``total_power``.

    ``resolution`` is (n_y, n_x) of the plate grid on which ``values`` holds cell averages.
    """
    if not scale_factor > 0:
        raise ValueError("scale_factor must be positive")
    domain = domain or DomainSpec()
    rng = np.random.default_rng(seed)
    k = int(rng.integers(n_bumps[0], n_bumps[1] + 1))
    centers = rng.random((k, 2)) * [domain.L_x, domain.L_y]
    sigmas = rng.uniform(*sigma_range, size=k)
    w = rng.uniform(0.5, 1.0, size=k)
    base = FluxField(centers, sigmas, w, 1.0, domain)
    base.weights = w * (total_power / base.total_power())
    return gen_flux_from(base, scale_factor, resolution)


def accumulated_heat(flux, T_outlet_series, T_inlet, mdot, C_p, t_final):
    """Heat stored in the plate over [0, t_final]: input minus enthalpy carried out.

    ``flux`` is a FluxField or a total power in W. ``T_outlet_series`` is either
    samples on a uniform grid over [0, t_final] or a pair (times, temperatures).
    """
    if t_final < 0:
        raise ValueError("negative time span")
    power = flux.total_power() if isinstance(flux, FluxField) else float(flux)
    if isinstance(T_outlet_series, tuple):
        t, T = (np.asarray(a, float) for a in T_outlet_series)
    else:
        T = np.atleast_1d(np.asarray(T_outlet_series, float))
        t = np.linspace(0.0, t_final, len(T)) if len(T) > 1 else np.array([0.0, t_final])
        T = T if len(T) > 1 else np.repeat(T, 2)
    if np.any(np.diff(t) < 0):
        raise ValueError("times must be non-decreasing")
    out = mdot * C_p * (T - T_inlet)
    return power * t_final - float(np.sum(0.5 * (out[1:] + out[:-1]) * np.diff(t)))
