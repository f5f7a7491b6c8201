"""Batch generation of solved samples: one directory per pin layout.

Each sample directory holds ``layout.json``, ``grid.json``, ``flux.json``,
plate-region cell fields (``p``, ``u``, ``v``, ``vel``, ``T``, ``fluid``) and the
full-grid face velocities needed to re-solve temperature, all as raw
little-endian float32, plus ``status.json``.
"""

import json
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .domain import DomainSpec, SolverGrid
from .flow import SolveResult, solve_flow
from .flux import FluxField, gen_flux, gen_flux_from
from .layouts import LayoutConstraints, PinLayout, sample_layouts
from .thermal import outlet_bulk_temperature, solve_temperature

FIELDS = ("p", "u", "v", "vel", "T", "fluid")
UNITS = {"p": "Pa", "u": "m/s", "v": "m/s", "vel": "m/s", "T": "K", "fluid": "1"}


def _write(path, arr):
    np.asarray(arr, dtype="<f4").tofile(path)


def _read(path, shape):
    return np.fromfile(path, dtype="<f4").reshape(shape)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1))


def _flux_from(d, domain):
    return FluxField(np.array(d["centers"]), np.array(d["sigmas"]), np.array(d["weights"]),
                     d["scale_factor"], domain)


def write_result(sdir, result, domain):
    g = result.grid
    _write_json(sdir / "grid.json", {"h": g.h, "nx": g.nx, "ny": g.ny, "n_ext": g.n_ext,
                                     "domain": domain.to_dict()})
    plate = {"p": result.plate("p"), "u": result.plate("u"), "v": result.plate("v"),
             "vel": result.plate("speed"), "T": result.plate("T"), "fluid": result.plate("fluid")}
    for name, arr in plate.items():
        _write(sdir / f"{name}.f32", arr)
    _write(sdir / "u_faces.f32", result.u_faces)
    _write(sdir / "v_faces.f32", result.v_faces)
    _write(sdir / "fluid_full.f32", result.fluid)


def solve_sample(layout, domain, flux, grid_n, sdir):
    """Solve one sample, write it to ``sdir`` and return its status record."""
    sdir = Path(sdir)
    sdir.mkdir(parents=True, exist_ok=True)
    layout.save(sdir / "layout.json")
    _write_json(sdir / "flux.json", flux.to_dict())
    t0 = time.time()
    status = {"converged": False, "grid_n": grid_n}
    try:
        flow = solve_flow(layout, domain, grid_n)
        status.update(flow_iterations=len(flow.residuals), flow_residuals=flow.residuals,
                      reynolds=domain.reynolds)
        if flow.converged:
            res = solve_temperature(flow, flux, domain)
            write_result(sdir, res, domain)
            status.update(converged=res.converged, heat_in=res.info["heat_in"], heat_out=res.info["heat_out"],
                          T_outlet_bulk=outlet_bulk_temperature(res, domain))
        else:
            status["error"] = "flow did not converge"
    except ValueError as e:  # under-resolved gaps and similar per-sample failures
        status["error"] = str(e)
    status["wall_time"] = time.time() - t0
    _write_json(sdir / "status.json", status)
    return status


def _job(args):
    *task, resume = args
    done = Path(task[-1]) / "status.json"
    if resume and done.exists():
        return json.loads(done.read_text())
    return solve_sample(*task)


def datagen(out, n, seed=0, grid_n=128, flux_scale=1.0, jobs=1, domain=None, constraints=None, resume=False):
    """Sample ``n`` layouts and fluxes from ``seed``, solve each and write ``out/<id>/``.

    With ``resume``, samples that already have a status record are kept as they are;
    the run must use the same arguments as the one being resumed.
    """
    domain = domain or DomainSpec()
    constraints = constraints or LayoutConstraints(domain=domain)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    layouts = sample_layouts(n, seed, constraints)
    flux_seeds = np.random.SeedSequence(seed).generate_state(max(n, 1))[:n]
    ids = [f"s{i:05d}" for i in range(n)]
    tasks = [(lay, domain, gen_flux(int(fs), flux_scale, None, domain), grid_n, out / sid, resume)
             for sid, lay, fs in zip(ids, layouts, flux_seeds)]
    record = {"n": n, "seed": seed, "grid_n": grid_n, "flux_scale": flux_scale,
              "domain": domain.to_dict(), "ids": ids, "flux_seeds": [int(s) for s in flux_seeds]}
    if resume and (out / "datagen.json").exists():
        if json.loads((out / "datagen.json").read_text()) != record:
            raise ValueError(f"cannot resume {out}: it was generated with different settings")
    _write_json(out / "datagen.json", record)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            statuses = list(ex.map(_job, tasks))
    else:
        statuses = [_job(t) for t in tasks]
    return dict(zip(ids, statuses))


def sample_ids(directory):
    directory = Path(directory)
    return sorted(p.name for p in directory.iterdir() if (p / "status.json").exists())


def load_sample(sdir):
    """Dict with layout, domain, grid, flux, status and the plate fields of a solved sample."""
    sdir = Path(sdir)
    status = json.loads((sdir / "status.json").read_text())
    out = {"status": status, "layout": PinLayout.load(sdir / "layout.json")}
    if not status.get("converged"):
        return out
    g = json.loads((sdir / "grid.json").read_text())
    domain = DomainSpec.from_dict(g["domain"])
    grid = SolverGrid(g["h"], g["nx"], g["ny"], g["n_ext"])
    out.update(domain=domain, grid=grid,
               flux=_flux_from(json.loads((sdir / "flux.json").read_text()), domain),
               fields={f: _read(sdir / f"{f}.f32", (grid.ny, grid.nx)) for f in FIELDS})
    return out


def load_flow(sdir):
    """Rebuild the converged flow (face velocities, mask, pressure) of a sample."""
    s = load_sample(sdir)
    if not s["status"].get("converged"):
        raise ValueError(f"sample {Path(sdir).name} is not converged")
    grid = s["grid"]
    ny, nxt = grid.shape
    fluid = _read(Path(sdir) / "fluid_full.f32", (ny, nxt)) > 0.5
    flow = SolveResult(grid, fluid, p=np.zeros(grid.shape),
                       u_faces=_read(Path(sdir) / "u_faces.f32", (ny, nxt + 1)).astype(np.float64),
                       v_faces=_read(Path(sdir) / "v_faces.f32", (ny + 1, nxt)).astype(np.float64),
                       converged=True, residuals=s["status"].get("flow_residuals", []))
    flow.p[:, grid.plate] = s["fields"]["p"]
    return flow, s


def resolve_flux(src, dst, factor):
    """Copy a datagen directory with every temperature re-solved for flux scaled by ``factor``."""
    src, dst = Path(src), Path(dst)
    if dst.exists():
        shutil.rmtree(dst)
    shutil.copytree(src, dst)
    cfg = json.loads((src / "datagen.json").read_text())
    cfg["flux_scale"] = cfg.get("flux_scale", 1.0) * factor
    _write_json(dst / "datagen.json", cfg)
    for sid in sample_ids(src):
        sdir = dst / sid
        status = json.loads((sdir / "status.json").read_text())
        if not status.get("converged"):
            continue
        flow, s = load_flow(sdir)
        flux = gen_flux_from(s["flux"], s["flux"].scale_factor * factor)
        res = solve_temperature(flow, flux, s["domain"])
        _write(sdir / "T.f32", res.plate("T"))
        _write_json(sdir / "flux.json", flux.to_dict())
        status.update(converged=res.converged, heat_in=res.info["heat_in"], heat_out=res.info["heat_out"],
                      T_outlet_bulk=outlet_bulk_temperature(res, s["domain"]))
        _write_json(sdir / "status.json", status)
    return dst
