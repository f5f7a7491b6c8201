"""Steady conjugate advection-diffusion of heat through the channel layer.

Finite volumes in theta = T - T_inlet on the flow grid. Fluid cells advect
(first-order upwind) and conduct; pin cells only conduct. Interface faces use
the harmonic mean conductivity so the shared-face flux is continuous. A thin
metal lid conducts in parallel with the channel layer and is heated by q0; the inlet carries theta = 0 in, the outlet lets
enthalpy leave by advection only and all other walls are adiabatic.
"""

import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .flow import SolveResult


def _harmonic(a, b):
    return 2 * a * b / (a + b)


def heat_source(flux, grid):
    """Heat input per cell (W); zero over the inlet/outlet extensions."""
    return flux.cell_integrals(grid.x_edges(), grid.y_edges()) if flux is not None else np.zeros(grid.shape)


def temperature_operator(flow, domain):
    """Sparse matrix A with A theta = heat input (W per cell) and the outlet mass-flux weights."""
    grid, fluid = flow.grid, flow.fluid
    ny, nx = grid.shape
    H = domain.H
    kc = np.where(fluid, domain.k, domain.k_solid) * H  # face length h over distance h cancels
    k_lid = domain.k_solid * domain.lid_thickness
    cpH = domain.rho * domain.C_p * H * grid.h
    Fx = cpH * flow.u_faces  # (ny, nx+1) heat capacity rates through x-faces
    Fx[:, 1:-1] *= fluid[:, 1:] & fluid[:, :-1]
    Fx[:, 0] *= fluid[:, 0]
    Fx[:, -1] *= fluid[:, -1]
    Fy = cpH * flow.v_faces
    Fy[1:-1] *= fluid[1:] & fluid[:-1]
    Fy[0] = Fy[-1] = 0.0

    idx = np.arange(ny * nx).reshape(ny, nx)
    rows, cols, vals = [], [], []
    diag = np.zeros((ny, nx))

    def couple(a, b, cond, flux):
        # face between cells a (upstream side for flux > 0) and b
        fo, fi = np.maximum(flux, 0), np.maximum(-flux, 0)
        # cell a: + cond (ta - tb) + fo ta - fi tb
        rows.extend([a.ravel(), b.ravel()])
        cols.extend([b.ravel(), a.ravel()])
        vals.extend([(-cond - fi).ravel(), (-cond - fo).ravel()])
        np.add.at(diag, np.unravel_index(a.ravel(), diag.shape), (cond + fo).ravel())
        np.add.at(diag, np.unravel_index(b.ravel(), diag.shape), (cond + fi).ravel())

    couple(idx[:, :-1], idx[:, 1:], _harmonic(kc[:, :-1], kc[:, 1:]) + k_lid, Fx[:, 1:-1])
    couple(idx[:-1], idx[1:], _harmonic(kc[:-1], kc[1:]) + k_lid, Fy[1:-1])
    # inlet: inflow of theta = 0 adds only its outgoing part (for reverse flow)
    diag[:, 0] += np.maximum(-Fx[:, 0], 0)
    # outlet: zero-gradient, enthalpy leaves at the cell value whatever the sign
    diag[:, -1] += Fx[:, -1]
    rows.append(idx.ravel()); cols.append(idx.ravel()); vals.append(diag.ravel())
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(ny * nx, ny * nx))
    return A, Fx[:, -1]


def solve_temperature(flow, flux, domain):
    """Temperature over fluid and pins for a converged flow and heat flux ``flux``."""
    if not flow.converged:
        raise ValueError("flow solution did not converge")
    t0 = time.time()
    A, w_out = temperature_operator(flow, domain)
    q = heat_source(flux, flow.grid)
    if not q.any():
        theta = np.zeros(flow.grid.shape)
        res = 0.0
    else:
        theta = spla.splu(A.tocsc(), permc_spec="COLAMD").solve(q.ravel())
        res = float(np.linalg.norm(A @ theta - q.ravel()) / np.linalg.norm(q))
        theta = theta.reshape(flow.grid.shape)
    converged = bool(np.isfinite(theta).all() and res < 1e-8)
    info = dict(flow.info)
    info.update(heat_in=float(q.sum()), heat_out=float(np.dot(w_out, theta[:, -1])), thermal_time=time.time() - t0)
    return SolveResult(flow.grid, flow.fluid, p=flow.p, u_faces=flow.u_faces, v_faces=flow.v_faces,
                       T=domain.T_inlet + theta, converged=flow.converged and converged,
                       residuals=list(flow.residuals) + [res], wall_time=flow.wall_time + time.time() - t0,
                       info=info)


def outlet_bulk_temperature(result, domain):
    """Mixing-cup temperature of the outlet stream."""
    w = result.u_faces[:, -1] * result.fluid[:, -1]
    return float(np.dot(w, result.T[:, -1]) / w.sum())
