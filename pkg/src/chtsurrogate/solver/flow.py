"""Steady 2-D incompressible laminar flow on a staggered (MAC) grid with blanked solid cells.

Picard iteration on the upwind-linearized momentum equations, each step solved
as a pressure Schur complement by GMRES with a SIMPLE-type preconditioner,
accelerated by Anderson mixing. The first step is the Stokes solution.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import SolverGrid

UNK, DIR, GHOST, OPEN = 0, 1, 2, 3  # unknown, Dirichlet, no-slip ghost, zero-gradient
PERMC = "MMD_ATA"


@dataclass
class SolveResult:
    grid: SolverGrid
    fluid: np.ndarray                  # (ny, nx_total) cell mask
    p: np.ndarray = None               # cell-centred, Pa (0 in solid)
    u_faces: np.ndarray = None         # (ny, nx_total + 1) x-face velocities
    v_faces: np.ndarray = None         # (ny + 1, nx_total) y-face velocities
    T: np.ndarray = None               # cell-centred, K
    converged: bool = False
    residuals: list = field(default_factory=list)
    wall_time: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def u(self):
        return 0.5 * (self.u_faces[:, 1:] + self.u_faces[:, :-1]) * self.fluid

    @property
    def v(self):
        return 0.5 * (self.v_faces[1:] + self.v_faces[:-1]) * self.fluid

    @property
    def speed(self):
        return np.hypot(self.u, self.v)

    def plate(self, name):
        """Cell values of a field over the plate region only."""
        return getattr(self, name)[:, self.grid.plate]


def fluid_mask(layout, grid):
    X, Y = grid.centers()
    fluid = np.ones(grid.shape, bool)
    for (cx, cy), r in zip(layout.centers, layout.radii):
        fluid &= np.hypot(X - cx, Y - cy) > r
    return fluid


def _neighbors_u(uk, uid, uin):
    ny, nxp = uk.shape
    nx = nxp - 1
    J, I = np.nonzero(uk)
    out = {}
    for name, di in (("E", 1), ("W", -1)):
        ii = I + di
        kind = np.full(J.size, DIR)
        idx = np.full(J.size, -1)
        val = np.zeros(J.size)
        beyond = ii > nx
        kind[beyond] = OPEN
        ii_c = np.clip(ii, 0, nx)
        unk = ~beyond & uk[J, ii_c]
        kind[unk] = UNK
        idx[unk] = uid[J[unk], ii_c[unk]]
        d = ~beyond & ~unk
        val[d] = uin[J[d], ii_c[d]]
        out[name] = (kind, idx, val)
    for name, dj in (("N", 1), ("S", -1)):
        jj = J + dj
        kind = np.full(J.size, GHOST)
        idx = np.full(J.size, -1)
        jj_c = np.clip(jj, 0, ny - 1)
        unk = (jj >= 0) & (jj < ny) & uk[jj_c, I]
        kind[unk] = UNK
        idx[unk] = uid[jj_c[unk], I[unk]]
        out[name] = (kind, idx, np.zeros(J.size))
    return J, I, out


def _neighbors_v(vk, vid):
    nyp, nx = vk.shape
    ny = nyp - 1
    J, I = np.nonzero(vk)
    out = {}
    for name, dj in (("N", 1), ("S", -1)):
        jj = J + dj
        kind = np.full(J.size, DIR)
        idx = np.full(J.size, -1)
        jj_c = np.clip(jj, 0, ny)
        unk = vk[jj_c, I] & (jj >= 0) & (jj <= ny)
        kind[unk] = UNK
        idx[unk] = vid[jj_c[unk], I[unk]]
        out[name] = (kind, idx, np.zeros(J.size))
    for name, di in (("E", 1), ("W", -1)):
        ii = I + di
        kind = np.full(J.size, GHOST)
        idx = np.full(J.size, -1)
        kind[ii >= nx] = OPEN
        ii_c = np.clip(ii, 0, nx - 1)
        unk = (ii >= 0) & (ii < nx) & vk[J, ii_c]
        kind[unk] = UNK
        idx[unk] = vid[J[unk], ii_c[unk]]
        out[name] = (kind, idx, np.zeros(J.size))
    return J, I, out


def _assemble(n, neigh, coef, diag0):
    rows, cols, vals = [np.arange(n)], [np.arange(n)], []
    diag = diag0.copy()
    rhs = np.zeros(n)
    for name, (kind, idx, val) in neigh.items():
        c = coef[name]
        unk = kind == UNK
        diag += np.where(unk | (kind == DIR), c, 0) + np.where(kind == GHOST, 2 * c, 0)
        rhs += np.where(kind == DIR, c * val, 0)
        rows.append(np.nonzero(unk)[0])
        cols.append(idx[unk])
        vals.append(-c[unk])
    A = sp.csr_matrix((np.concatenate([diag] + vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return A, rhs


class _Operators:
    """Index maps, gradient and divergence matrices for one fluid mask."""

    def __init__(self, fluid, h, U_in):
        ny, nx = fluid.shape
        self.shape = fluid.shape
        uk = np.zeros((ny, nx + 1), bool)
        uk[:, 1:nx] = fluid[:, :-1] & fluid[:, 1:]
        uk[:, nx] = fluid[:, nx - 1]
        vk = np.zeros((ny + 1, nx), bool)
        vk[1:ny] = fluid[:-1] & fluid[1:]
        uid = -np.ones(uk.shape, int)
        uid[uk] = np.arange(uk.sum())
        vid = -np.ones(vk.shape, int)
        vid[vk] = np.arange(vk.sum())
        pid = -np.ones(fluid.shape, int)
        pid[fluid] = np.arange(fluid.sum())
        uin = np.zeros(uk.shape)
        uin[:, 0] = np.where(fluid[:, 0], U_in, 0.0)
        self.uk, self.vk, self.uid, self.vid, self.pid, self.uin = uk, vk, uid, vid, pid, uin
        self.nu, self.nv, self.np = int(uk.sum()), int(vk.sum()), int(fluid.sum())
        self.Ju, self.Iu, self.nbu = _neighbors_u(uk, uid, uin)
        self.Jv, self.Iv, self.nbv = _neighbors_v(vk, vid)

        # pressure gradients; the outlet face sits h/2 from the last centre with p = 0 outside
        Ju, Iu, Jv, Iv = self.Ju, self.Iu, self.Jv, self.Iv
        r = np.arange(self.nu)
        out = Iu == nx
        self.Gu = sp.csr_matrix(
            (np.r_[np.full((~out).sum(), 1 / h), -np.where(out, 2 / h, 1 / h)],
             (np.r_[r[~out], r], np.r_[pid[Ju[~out], Iu[~out]], pid[Ju, Iu - 1]])),
            shape=(self.nu, self.np))
        r = np.arange(self.nv)
        self.Gv = sp.csr_matrix(
            (np.r_[np.full(self.nv, 1 / h), np.full(self.nv, -1 / h)],
             (np.r_[r, r], np.r_[pid[Jv, Iv], pid[Jv - 1, Iv]])), shape=(self.nv, self.np))

        Jc, Ic = np.nonzero(fluid)
        pc = pid[Jc, Ic]
        self.gc = np.zeros(self.np)
        rows, cols, vals = [], [], []
        for jj, ii, s in ((Jc, Ic + 1, 1.0), (Jc, Ic, -1.0)):
            m = uk[jj, ii]
            rows.append(pc[m]); cols.append(uid[jj[m], ii[m]]); vals.append(np.full(m.sum(), s / h))
            self.gc -= s * uin[jj, ii] / h * (~m)
        self.Du = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(self.np, self.nu))
        rows, cols, vals = [], [], []
        for jj, ii, s in ((Jc + 1, Ic, 1.0), (Jc, Ic, -1.0)):
            m = vk[jj, ii]
            rows.append(pc[m]); cols.append(vid[jj[m], ii[m]]); vals.append(np.full(m.sum(), s / h))
        self.Dv = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(self.np, self.nv))

    def full(self, u, v):
        uf = self.uin.copy()
        uf[self.uk] = u
        vf = np.zeros(self.vk.shape)
        vf[self.vk] = v
        return uf, vf

    def momentum(self, u, v, rho, mu, fr, h):
        """Upwind-linearized momentum matrices about the current velocities."""
        nx = self.shape[1]
        uf, vf = self.full(u, v)
        Ju, Iu, Jv, Iv = self.Ju, self.Iu, self.Jv, self.Iv
        ax_u = uf[Ju, Iu]
        il, ir = np.clip(Iu - 1, 0, nx - 1), np.clip(Iu, 0, nx - 1)
        ay_u = 0.25 * (vf[Ju, il] + vf[Ju, ir] + vf[Ju + 1, il] + vf[Ju + 1, ir])
        ay_v = vf[Jv, Iv]
        ax_v = 0.25 * (uf[Jv - 1, Iv] + uf[Jv - 1, Iv + 1] + uf[Jv, Iv] + uf[Jv, Iv + 1])
        k, c = mu / h ** 2, rho / h

        def coefs(ax, ay):
            return {"E": k + c * np.maximum(-ax, 0), "W": k + c * np.maximum(ax, 0),
                    "N": k + c * np.maximum(-ay, 0), "S": k + c * np.maximum(ay, 0)}

        Au, fu = _assemble(self.nu, self.nbu, coefs(ax_u, ay_u), np.full(self.nu, fr))
        Av, fv = _assemble(self.nv, self.nbv, coefs(ax_v, ay_v), np.full(self.nv, fr))
        return Au, fu, Av, fv


def check_resolution(layout, domain, grid, min_cells=3):
    gap = layout.narrowest_gap(domain)
    if gap < min_cells * grid.h:
        raise ValueError(f"gap under-resolved: narrowest gap {gap:.4g} m spans "
                         f"{gap / grid.h:.2f} cells (< {min_cells}); increase grid_n")


def solve_flow(layout, domain, grid_n=128, tol=1e-6, max_iter=80, anderson=6):
    """Steady velocity and pressure around the pins for the domain's inlet flow."""
    t0 = time.time()
    grid = SolverGrid.for_domain(domain, grid_n)
    check_resolution(layout, domain, grid)
    fluid = fluid_mask(layout, grid)
    h, rho, mu, fr = grid.h, domain.rho, domain.mu, domain.friction
    ops = _Operators(fluid, h, domain.U_in * domain.L_y / (grid.ny * h))
    u, v, p = np.zeros(ops.nu), np.zeros(ops.nv), np.zeros(ops.np)
    cont_scale = (fr + mu / h ** 2) * h
    Lp_lu = None
    hist, X, Fk = [], [], []
    converged = False
    for it in range(max_iter):
        Au, fu, Av, fv = ops.momentum(u, v, rho, mu, fr, h)
        R = np.r_[Au @ u + ops.Gu @ p - fu, Av @ v + ops.Gv @ p - fv,
                  (ops.Du @ u + ops.Dv @ v - ops.gc) * cont_scale]
        scale = (np.linalg.norm(np.r_[Au @ u, Av @ v]) + np.linalg.norm(np.r_[ops.Gu @ p, ops.Gv @ p])
                 + np.linalg.norm(np.r_[fu, fv]))
        res = float(np.linalg.norm(R) / scale) if scale > 0 else 0.0
        hist.append(res)
        if res < tol:
            converged = True
            break
        if it == 0:  # Stokes start
            Au, fu, Av, fv = ops.momentum(u, v, 0.0, mu, fr, h)
        Au_lu = spla.splu(Au.tocsc(), permc_spec=PERMC)
        Av_lu = spla.splu(Av.tocsc(), permc_spec=PERMC)
        S = spla.LinearOperator((ops.np, ops.np), matvec=lambda x: (
            ops.Du @ Au_lu.solve(ops.Gu @ x) + ops.Dv @ Av_lu.solve(ops.Gv @ x)))
        Ss = (ops.Du @ sp.diags(1 / Au.diagonal()) @ ops.Gu + ops.Dv @ sp.diags(1 / Av.diagonal()) @ ops.Gv)
        Ss_lu = spla.splu(Ss.tocsc(), permc_spec=PERMC)
        M = spla.LinearOperator((ops.np, ops.np), matvec=Ss_lu.solve)
        rhs = ops.Du @ Au_lu.solve(fu) + ops.Dv @ Av_lu.solve(fv) - ops.gc
        pn, _ = spla.gmres(S, rhs, x0=p, M=M, rtol=min(1e-2, 0.2 * res), atol=0.0,
                           restart=50, maxiter=200)
        un = Au_lu.solve(fu - ops.Gu @ pn)
        vn = Av_lu.solve(fv - ops.Gv @ pn)
        x, gx = np.r_[u, v, p], np.r_[un, vn, pn]
        X.append(gx)
        Fk.append(gx - x)
        X, Fk = X[-anderson:], Fk[-anderson:]
        if len(Fk) > 1 and it > 0:
            dF = np.diff(np.array(Fk), axis=0).T
            dG = np.diff(np.array(X), axis=0).T
            gam = np.linalg.lstsq(dF, Fk[-1], rcond=None)[0]
            xn = gx - dG @ gam
        else:
            xn = gx
        u, v, p = xn[:ops.nu], xn[ops.nu:ops.nu + ops.nv], xn[ops.nu + ops.nv:]
    uf, vf = ops.full(u, v)
    pc = np.zeros(fluid.shape)
    pc[fluid] = p
    return SolveResult(grid, fluid, p=pc, u_faces=uf, v_faces=vf, converged=converged, residuals=hist,
                       wall_time=time.time() - t0,
                       info={"iterations": len(hist), "reynolds": domain.reynolds, "h": h})


def transverse_fluxes(result, domain):
    """Volumetric flow rate (m^3/s) through every column of x-faces."""
    return result.u_faces.sum(0) * result.grid.h * domain.H
