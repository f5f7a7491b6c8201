"""Command-line entry point: ``chtsurrogate <command> ...``.

Exit codes: 0 success, 2 partial success (some samples or sweep cells failed), 1 fatal error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

log = logging.getLogger("chtsurrogate")

OK, FATAL, PARTIAL = 0, 1, 2


def _model_spec(path, role):
    from .nn.model import ModelSpec
    from .harness.sweeps import ModelTemplate

    d = json.loads(Path(path).read_text())
    d = d.get("spec", d)
    if "L_dense" in d:
        spec = ModelSpec.from_dict(d)
    else:
        spec = ModelTemplate(**d).spec()
    want = 2 if role == "temperature" else 1
    if spec.input_channels != want:
        spec = ModelSpec.from_dict({**spec.to_dict(), "input_channels": want})
    return spec


def _load_run(run_dir):
    from .autodiff.checkpoint import load_checkpoint
    from .nn.model import model_from_config

    run_dir = Path(run_dir)
    return load_checkpoint(model_from_config(run_dir / "model.json"), run_dir / "checkpoint")


def cmd_datagen(a):
    from .solver.datagen import datagen
    from .solver.domain import DomainSpec
    from .solver.layouts import LayoutConstraints

    domain = DomainSpec.from_dict(json.loads(Path(a.domain).read_text())) if a.domain else DomainSpec()
    extra = json.loads(Path(a.constraints).read_text()) if a.constraints else {}
    constraints = LayoutConstraints(domain=domain, **extra)
    st = datagen(a.out, a.n, a.seed, a.grid_n, a.flux_scale, a.jobs, domain, constraints, a.resume)
    bad = [k for k, v in st.items() if not v["converged"]]
    log.info("%d/%d samples converged", len(st) - len(bad), len(st))
    return PARTIAL if bad else OK


def cmd_rasterize(a):
    from .datapipe.assemble import assemble_dataset

    m = assemble_dataset(a.inp, a.out, a.nx, [f for f in a.fields.split(",") if f], seed=a.seed,
                        fractions=tuple(a.fractions))
    log.info("dataset %s: %d samples at %dx%d", a.out, len(m.splits), *m.resolution)
    return PARTIAL if m.provenance.get("excluded") else OK


def cmd_train(a):
    from .nn.model import FieldModel
    from .train.data import FieldData
    from .train.loop import TrainConfig, train

    data = FieldData(a.dataset, a.role)
    spec = _model_spec(a.model, a.role)
    model = FieldModel(spec, data.resolution, a.role, a.seed, solid_value=data.solid_value)
    cfg = TrainConfig(lr=a.lr, weight_decay=a.wd, batch_size=a.batch, epochs=a.epochs, seed=a.seed,
                      teacher_forcing=a.teacher_forcing)
    vm = _load_run(a.velocity) if a.velocity else None
    _, rec = train(model, data, cfg, out=a.out, velocity_model=vm, log=log.info)
    log.info("R2 %.4f  RMSE %.4g  SCC %.4f (%s split)", rec.r2, rec.rmse, rec.scc, rec.eval_split)
    return OK


def cmd_eval(a):
    from .train.data import FieldData
    from .train.loop import evaluate_model

    model = _load_run(a.run)
    data = FieldData(a.dataset, model.role)
    vm = _load_run(a.velocity) if a.velocity else None
    metrics, _, _ = evaluate_model(model, data, a.split, vm, teacher_forcing=vm is None)
    text = json.dumps(metrics, indent=1)
    if a.out:
        Path(a.out).write_text(text)
    print(json.dumps({k: metrics[k] for k in ("r2", "rmse", "scc")}))
    return OK


def cmd_predict(a):
    from .train.data import FieldData
    from .train.metrics import error_map

    model = _load_run(a.run)
    data = FieldData(a.dataset, model.role)
    vm = _load_run(a.velocity) if a.velocity else None
    x = data.inputs(a.split, vm)
    pred = data.to_physical(model.predict(x), x[:, :1])
    target = data.targets(a.split, scaled=False)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for sid, p, t in zip(data.ids(a.split), pred, target):
        d = out / sid
        d.mkdir(exist_ok=True)
        np.asarray(p[0], "<f4").tofile(d / f"{data.field}_pred.f32")
        np.asarray(error_map(p[0], t[0]).values, "<f4").tofile(d / f"{data.field}_error.f32")
    log.info("wrote %d predictions to %s", len(pred), out)
    return OK


def cmd_sweep(a):
    from .harness.sweeps import SweepSpec, run_sweep

    overrides = {"axis": a.axis, "values": a.values}
    cfg = SweepSpec.load(a.config, **overrides) if a.config else SweepSpec(a.axis, a.values)
    rows = run_sweep(cfg, a.out, a.jobs)
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        log.warning("cell %s=%s failed: %s", r["axis"], r["value"], r["error"])
    return PARTIAL if failed else OK


def cmd_report(a):
    from .harness.report import loss_curve_plot, report, run_triptych

    written = report(a.inp, a.out) if a.inp else []
    if a.run:
        Path(a.out).mkdir(parents=True, exist_ok=True)
        loss_curve_plot(a.run, Path(a.out) / "loss_curve.svg")
        if a.dataset:
            run_triptych(a.run, a.dataset, Path(a.out) / "triptych.svg", velocity_dir=a.velocity)
    elif not written:
        raise ValueError("nothing to report")
    return OK


def cmd_search(a):
    from .harness.hyperband import DEFAULT_SPACE, deepedh_evaluator, hyperband_search
    from .train.data import FieldData

    data = FieldData(a.dataset, a.role)
    vm = _load_run(a.velocity) if a.velocity else None
    Path(a.out).mkdir(parents=True, exist_ok=True)
    res = hyperband_search(DEFAULT_SPACE, a.budgets, a.eta, deepedh_evaluator(data, a.n_blocks, vm, a.seed),
                           a.seed, Path(a.out) / "trials.jsonl")
    (Path(a.out) / "best.json").write_text(json.dumps({"config": res["config"], "loss": res["loss"]}, indent=1))
    print(json.dumps(res["config"]))
    return OK


def build_parser():
    p = argparse.ArgumentParser(prog="chtsurrogate", description="DeepEDH surrogate toolkit for pin-fin cold plates")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("datagen", help="sample layouts and solve flow and temperature")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--grid-n", type=int, default=128)
    s.add_argument("--flux-scale", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--domain", help="JSON file of plate geometry and fluid properties")
    s.add_argument("--constraints", help="JSON file of pin-layout constraints")
    s.add_argument("--resume", action="store_true", help="keep samples already solved in --out")
    s.set_defaults(func=cmd_datagen)

    s = sub.add_parser("rasterize", help="build an image dataset from datagen output")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--nx", type=int, required=True)
    s.add_argument("--fields", default="p,vel,T")
    s.add_argument("--fractions", nargs=3, type=float, default=[0.8, 0.1, 0.1], metavar=("TRAIN", "VAL", "TEST"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rasterize)

    s = sub.add_parser("train", help="train one field model")
    s.add_argument("--dataset", required=True)
    s.add_argument("--model", required=True, help="JSON model spec or template")
    s.add_argument("--role", choices=("pressure", "velocity", "temperature"), required=True)
    s.add_argument("--epochs", type=int, default=100)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--wd", type=float, default=1e-4)
    s.add_argument("--batch", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--velocity", help="trained velocity run directory (two-stage temperature)")
    s.add_argument("--teacher-forcing", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    for name, fn, helptext in (("eval", cmd_eval, "metrics of a trained run"),
                               ("predict", cmd_predict, "write predicted fields and error maps")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--run", required=True)
        s.add_argument("--dataset", required=True)
        s.add_argument("--split", default="test", choices=("train", "val", "test"))
        s.add_argument("--velocity")
        s.add_argument("--out", required=name == "predict")
        s.set_defaults(func=fn)

    s = sub.add_parser("sweep", help="characterization sweep")
    s.add_argument("--axis", choices=("code_dimension", "dataset_size", "resolution", "flux"), required=True)
    s.add_argument("--values", nargs="+", type=float, required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", help="CSV and SVG output for sweeps and runs")
    s.add_argument("--in", dest="inp", nargs="*", default=[])
    s.add_argument("--run")
    s.add_argument("--dataset")
    s.add_argument("--velocity")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("search", help="Hyperband hyperparameter search")
    s.add_argument("--dataset", required=True)
    s.add_argument("--role", choices=("pressure", "velocity", "temperature"), default="pressure")
    s.add_argument("--budgets", nargs="+", type=int, default=[5, 15, 45])
    s.add_argument("--eta", type=int, default=3)
    s.add_argument("--n-blocks", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--velocity")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_search)
    return p


def main(argv=None):
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if a.verbose else logging.INFO, format="%(message)s")
    try:
        return a.func(a)
    except Exception as e:
        log.error("error: %s: %s", type(e).__name__, e)
        if a.verbose:
            raise
        return FATAL


if __name__ == "__main__":
    sys.exit(main())
