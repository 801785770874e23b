"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
failure. Every subcommand is deterministic given the config file and
--seed, and the seed is echoed into every report it writes.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as config_mod
from .autodiff import NumericError
from .datagen import GenerationExhaustedError, generate_dataset
from .elastic import elastic_metrics, surface_table
from .fe import MechanismError, StiffnessRecord, SymmetryViolationError, homogenize_stiffness
from .graph import DegenerateStructureError, radius_for_density, reflect_to_cell, repair
from .inverse import Objective, OptimizationFailedError, optimize, seed_selection, verify
from .latent import TraversalSpec, sample_prior, slerp_path, traverse
from .storage import (
    DataFormatError,
    DatasetMeta,
    attach_curve_labels,
    export_beam_csv,
    export_obj,
    graph_from_doc,
    read_checkpoint,
    read_dataset,
    read_label_csv,
    read_optimization_report,
    write_checkpoint,
    write_dataset,
    write_optimization_report,
    write_surface_csv,
)
from .vae import (
    PropertyVector,
    TrainingDivergedError,
    config_digest,
    decode,
    encode,
    evaluate,
    predict_properties,
    train,
)

log = logging.getLogger("trusslat")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(ValueError):
    pass


def _load_config(args) -> config_mod.RunConfig:
    cfg = config_mod.load(args.config) if args.config else config_mod.RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    else:
        cfg = cfg.with_seed(cfg.seed)
    return cfg


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sized_cell(graph, rho):
    return radius_for_density(reflect_to_cell(graph), rho)


def _json_safe(value):
    """Replace non-finite floats with None so reports stay strict JSON."""
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


# -- subcommands ---------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    records = generate_dataset(cfg.datagen)
    meta = DatasetMeta(
        property_kind="none",
        rho=cfg.rho,
        material=cfg.material,
        datagen_digest=config_digest(cfg.datagen),
        seed=cfg.seed,
    )
    write_dataset(args.output, records, meta)
    log.info("wrote %d unique structures to %s", len(records), args.output)
    return EXIT_OK


def _homogenize_one(task):
    graph_doc, rho, e_s, nu_s = task
    from .fe import MaterialParams

    graph = graph_from_doc(graph_doc)
    cell = _sized_cell(graph, rho)
    return homogenize_stiffness(cell, MaterialParams(e_s, nu_s)).components


def cmd_homogenize(args) -> int:
    records, meta = read_dataset(args.input)
    if args.curve_labels:
        labels = read_label_csv(args.curve_labels)
        matched = attach_curve_labels(records, labels)
        missing = len(records) - matched
        if missing:
            log.warning("%d records lack curve labels; dropping them", missing)
            records = [r for r in records if r.properties is not None]
        meta = DatasetMeta(
            property_kind="curve13", rho=meta.rho, material=meta.material,
            datagen_digest=meta.datagen_digest, seed=meta.seed,
        )
    else:
        from .storage import graph_to_doc

        mat = meta.material
        if args.threads > 1:
            tasks = [(graph_to_doc(r.graph), meta.rho, mat.e_s, mat.nu_s) for r in records]
            with ProcessPoolExecutor(max_workers=args.threads) as pool:
                for rec, comp in zip(records, pool.map(_homogenize_one, tasks, chunksize=16)):
                    rec.properties = comp
        else:
            for i, rec in enumerate(records):
                rec.properties = homogenize_stiffness(_sized_cell(rec.graph, meta.rho), mat).components
                if (i + 1) % 500 == 0:
                    log.info("homogenized %d/%d", i + 1, len(records))
        meta = DatasetMeta(
            property_kind="stiffness9", rho=meta.rho, material=meta.material,
            datagen_digest=meta.datagen_digest, seed=meta.seed,
        )
    write_dataset(args.output, records, meta)
    log.info("wrote %d labeled records to %s", len(records), args.output)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    records, meta = read_dataset(args.input)
    if meta.property_kind == "none":
        raise DataFormatError("dataset is unlabeled; run homogenize first")
    model, history = train(
        records, cfg.train, layout=cfg.latent, arch=cfg.architecture,
        property_kind=meta.property_kind,
    )
    write_checkpoint(args.output, model)
    history_path = args.history or str(Path(args.output).with_suffix(".history.csv"))
    with open(history_path, "w") as fh:
        fh.write("epoch,beta,total,recon_a,recon_x,prop,kld,val_total\n")
        for h in history:
            fh.write(
                f"{h.epoch},{h.beta!r},{h.total!r},{h.recon_a!r},{h.recon_x!r},"
                f"{h.prop!r},{h.kld!r},{h.val_total!r}\n"
            )
    if args.figures:
        from . import plots

        plots.save_training_history(history, str(Path(history_path).with_suffix(".png")))
    log.info("checkpoint written to %s", args.output)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    records, meta = read_dataset(args.input)
    model = read_checkpoint(args.model, expect_property_kind=meta.property_kind)
    cfg = _load_config(args)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(90,)))
    from .vae import dataset_split

    _, _, idx_test = dataset_split(len(records), cfg.train)
    if len(idx_test) == 0:
        idx_test = np.arange(len(records))
    metrics = evaluate(model, [records[i] for i in idx_test], n_prior=args.n_prior, rng=rng)
    doc = {
        "seed": cfg.seed,
        "n_test": len(idx_test),
        "topology_accuracy": metrics.topology_accuracy,
        "r2_offsets": metrics.r2_offsets,
        "r2_properties": metrics.r2_properties,
        "validity_score": metrics.validity_score,
        "r2_offsets_components": metrics.r2_offsets_components.tolist(),
        "r2_properties_components": metrics.r2_properties_components.tolist(),
    }
    text = json.dumps(_json_safe(doc), indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text)
    print(text)
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = _load_config(args)
    model = read_checkpoint(args.model)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(91,)))
    samples, validity = sample_prior(model, args.n, rng)
    out = _outdir(args.output)
    rows = []
    for i, s in enumerate(samples):
        mu, _ = encode(s.result.graph, model)
        props = predict_properties(mu, model)
        rows.append((i, s.valid, s.z, props))
        if s.valid and args.export_geometry:
            export_obj(_sized_cell(s.repaired, cfg.rho), out / f"sample_{i:04d}.obj")
    with open(out / "samples.csv", "w") as fh:
        d = model.layout.d
        n_props = len(rows[0][3]) if rows else 0
        fh.write(
            "index,valid,"
            + ",".join(f"z{k}" for k in range(d))
            + ","
            + ",".join(f"p{k}" for k in range(n_props))
            + "\n"
        )
        for i, valid, z, props in rows:
            fh.write(
                f"{i},{int(valid)},"
                + ",".join(repr(float(v)) for v in z)
                + ","
                + ",".join(repr(float(v)) for v in props)
                + "\n"
            )
    report = {"seed": cfg.seed, "n": args.n, "validity_score": validity}
    (out / "summary.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    if args.figures and rows:
        from . import plots

        plots.save_sample_histogram(
            [r[3][0] for r in rows if r[1]], "predicted property p0 (valid samples)",
            out / "samples.png",
        )
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_traverse(args) -> int:
    cfg = _load_config(args)
    model = read_checkpoint(args.model)
    base = np.zeros(model.layout.d)
    if args.base:
        base = np.array([float(v) for v in args.base.split(",")])
        if base.shape != (model.layout.d,):
            raise _UsageError(f"--base needs {model.layout.d} comma-separated values")
    spec = TraversalSpec(base, args.axis, args.lo, args.hi, args.steps)
    points, kind = traverse(spec, model)
    out = _outdir(args.output)
    n_props = len(points[0].properties)
    with open(out / "traversal.csv", "w") as fh:
        fh.write("step,axis_value,valid," + ",".join(f"p{k}" for k in range(n_props)) + "\n")
        for i, pt in enumerate(points):
            fh.write(
                f"{i},{pt.value!r},{int(pt.repaired is not None)},"
                + ",".join(repr(float(v)) for v in pt.properties)
                + "\n"
            )
    for i, pt in enumerate(points):
        if pt.repaired is not None and args.export_geometry:
            export_obj(_sized_cell(pt.repaired, cfg.rho), out / f"step_{i:03d}.obj")
    report = {
        "seed": cfg.seed, "axis": args.axis, "axis_kind": kind,
        "valid_fraction": sum(p.repaired is not None for p in points) / len(points),
    }
    (out / "summary.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    if args.figures:
        from . import plots

        plots.save_path_profile(
            np.array([pt.properties for pt in points]),
            [f"p{k}" for k in range(n_props)],
            out / "traversal.png",
            f"step along latent axis {args.axis} ({kind})",
        )
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_interpolate(args) -> int:
    cfg = _load_config(args)
    records, meta = read_dataset(args.input)
    model = read_checkpoint(args.model, expect_property_kind=None)
    if args.start is None or args.end is None:
        raise _UsageError("--start and --end record indices are required")
    for idx in (args.start, args.end):
        if not 0 <= idx < len(records):
            raise _UsageError(f"record index {idx} outside dataset of {len(records)}")
    mu1, _ = encode(records[args.start].graph, model)
    mu2, _ = encode(records[args.end].graph, model)
    path_z = slerp_path(mu1, mu2, args.steps)
    results = decode(path_z, model)
    out = _outdir(args.output)
    rows = []
    for i, res in enumerate(results):
        fixed = repair(res.graph)
        mu, _ = encode(res.graph, model)
        props = predict_properties(mu, model)
        fe = None
        if fixed is not None and args.fe and meta.property_kind == "stiffness9":
            try:
                fe = homogenize_stiffness(_sized_cell(fixed, cfg.rho), meta.material).components
            except (MechanismError, DegenerateStructureError, SymmetryViolationError):
                fe = None
        rows.append((i, fixed, props, fe))
        if fixed is not None and args.export_geometry:
            export_obj(_sized_cell(fixed, cfg.rho), out / f"interp_{i:03d}.obj")
    n_props = len(rows[0][2])
    with open(out / "interpolation.csv", "w") as fh:
        header = "step,alpha,valid," + ",".join(f"p{k}" for k in range(n_props))
        if args.fe:
            header += "," + ",".join(f"fe{k}" for k in range(n_props))
        fh.write(header + "\n")
        alphas = np.linspace(0.0, 1.0, args.steps)
        for (i, fixed, props, fe), alpha in zip(rows, alphas):
            line = (
                f"{i},{alpha!r},{int(fixed is not None)},"
                + ",".join(repr(float(v)) for v in props)
            )
            if args.fe:
                line += "," + (
                    ",".join(repr(float(v)) for v in fe) if fe is not None
                    else ",".join("nan" for _ in range(n_props))
                )
            fh.write(line + "\n")
    report = {
        "seed": cfg.seed, "start": args.start, "end": args.end,
        "valid_fraction": sum(r[1] is not None for r in rows) / len(rows),
    }
    (out / "summary.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    if args.figures:
        from . import plots

        plots.save_path_profile(
            np.array([r[2] for r in rows]), [f"p{k}" for k in range(n_props)],
            out / "interpolation.png", "interpolation step",
        )
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def _parse_objective(args, meta) -> Objective:
    kind = args.objective
    if kind in ("match_curve", "match_stiffness"):
        if not args.target:
            raise _UsageError(f"--target is required for {kind}")
        values = np.array([float(v) for v in args.target.split(",")])
        prop_kind = "curve13" if kind == "match_curve" else "stiffness9"
        return Objective(kind, PropertyVector(prop_kind, values))
    return Objective(kind)


def cmd_optimize(args) -> int:
    cfg = _load_config(args)
    records, meta = read_dataset(args.input)
    if meta.property_kind == "none":
        raise DataFormatError("dataset is unlabeled; run homogenize first")
    model = read_checkpoint(args.model, expect_property_kind=meta.property_kind)
    objective = _parse_objective(args, meta)
    seeds = seed_selection(records, objective, model, k=cfg.optimize.n_seeds)
    run = optimize(objective, seeds, model, cfg.optimize, meta.material, meta.rho)
    out = _outdir(args.output)
    write_optimization_report(
        out / "report.json", run, cfg.seed, meta.rho, config_digest(cfg.optimize)
    )
    if run.best is not None:
        cell = _sized_cell(run.best.graph, meta.rho)
        export_obj(cell, out / "best.obj")
        export_beam_csv(cell, out / "best.csv")
    if args.figures:
        from . import plots

        plots.save_optimization_trajectories(run, out / "trajectories.png")
    best_doc = {
        "seed": cfg.seed,
        "objective": objective.kind,
        "fe_verified": run.fe_verified,
        "best_fe_objective": None if run.best is None else run.best.fe_objective,
        "best_predicted_objective": None if run.best is None else run.best.predicted_objective,
        "best_source": None if run.best is None else run.best.source,
    }
    print(json.dumps(best_doc, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    doc = read_optimization_report(args.report)
    target = doc["objective"]["target"]
    objective = Objective(
        doc["objective"]["kind"],
        None
        if target is None
        else PropertyVector(
            "curve13" if doc["objective"]["kind"] == "match_curve" else "stiffness9",
            np.array(target),
        ),
    )
    from .fe import MaterialParams
    from .inverse import Candidate

    candidates = [
        Candidate(
            c["seed_index"], c["source"], graph_from_doc(c["graph"]),
            predicted_objective=c["predicted_objective"],
        )
        for c in doc["candidates"]
    ]
    ranked, verified = verify(candidates, objective, MaterialParams(), doc["rho"])
    rows = []
    for c in ranked:
        rows.append(
            {
                "seed_index": c.seed_index,
                "source": c.source,
                "predicted_objective": c.predicted_objective,
                "fe_objective": c.fe_objective,
                "fe_failure": c.fe_failure,
            }
        )
    out_doc = {"seed": cfg.seed, "fe_verified": verified, "ranking": rows}
    text = json.dumps(out_doc, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text)
    print(text)
    return EXIT_OK


def cmd_export(args) -> int:
    cfg = _load_config(args)
    records, meta = read_dataset(args.input)
    if not 0 <= args.index < len(records):
        raise _UsageError(f"record index {args.index} outside dataset of {len(records)}")
    rec = records[args.index]
    cell = _sized_cell(rec.graph, meta.rho)
    if args.format == "obj_wireframe":
        export_obj(cell, args.output)
    elif args.format == "beam_csv":
        export_beam_csv(cell, args.output)
    elif args.format == "surface_csv":
        if meta.property_kind == "stiffness9" and rec.properties is not None:
            record = StiffnessRecord(rec.properties)
        else:
            record = homogenize_stiffness(cell, meta.material)
        write_surface_csv(surface_table(record, args.n_theta, args.n_phi), args.output)
        if args.figures:
            from . import plots

            plots.save_elastic_surface(record, str(Path(args.output).with_suffix(".png")))
    else:
        raise _UsageError(f"unknown export format {args.format}")
    log.info("exported record %d to %s", args.index, args.output)
    return EXIT_OK


def cmd_config(args) -> int:
    if args.action == "dump":
        cfg = config_mod.load(args.config) if args.config else None
        sys.stdout.write(config_mod.dump(cfg))
        return EXIT_OK
    raise _UsageError(f"unknown config action {args.action!r}")


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trusslat",
        description="Graph-parameterized truss metamaterials: generation, "
        "homogenization, latent modeling, inverse design.",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1, help="parallel workers")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("-c", "--config", default=None, help="YAML run configuration")

    p = sub.add_parser("generate", help="generate a graphs-only dataset")
    common(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("homogenize", help="fill dataset properties by beam FE (or ingest curve labels)")
    common(p)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--curve-labels", default=None, help="CSV of graph_hash,sigma_1..sigma_13")
    p.set_defaults(func=cmd_homogenize)

    p = sub.add_parser("train", help="train the VAE + property predictor")
    common(p)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True, help="checkpoint path")
    p.add_argument("--history", default=None, help="training history CSV path")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_train, figures=True)

    p = sub.add_parser("evaluate", help="reconstruction/prediction metrics on the test split")
    common(p)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--n-prior", type=int, default=1000)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sample", help="decode prior samples and report the validity score")
    common(p)
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-n", type=int, default=100)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--export-geometry", action="store_true")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_sample, figures=True)

    p = sub.add_parser("traverse", help="vary one latent axis and decode the path")
    common(p)
    p.add_argument("-m", "--model", required=True)
    p.add_argument("--axis", type=int, required=True)
    p.add_argument("--lo", type=float, default=-2.0)
    p.add_argument("--hi", type=float, default=2.0)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--base", default=None, help="comma-separated base latent vector")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--export-geometry", action="store_true")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_traverse, figures=True)

    p = sub.add_parser("interpolate", help="spherical interpolation between two dataset records")
    common(p)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-m", "--model", required=True)
    p.add_argument("--start", type=int, required=True)
    p.add_argument("--end", type=int, required=True)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--fe", action="store_true", help="FE-verify each step")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--export-geometry", action="store_true")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_interpolate, figures=True)

    p = sub.add_parser("optimize", help="gradient-based inverse design in the latent space")
    common(p)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-m", "--model", required=True)
    p.add_argument(
        "--objective", required=True,
        choices=["max_e22", "min_nu21", "max_kvgv", "match_curve", "match_stiffness"],
    )
    p.add_argument("--target", default=None, help="comma-separated target values for match_*")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_optimize, figures=True)

    p = sub.add_parser("verify", help="re-rank an optimization report by fresh FE solves")
    common(p)
    p.add_argument("-r", "--report", required=True)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="export one record's geometry or elastic surface")
    common(p)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument(
        "--format", default="obj_wireframe",
        choices=["obj_wireframe", "beam_csv", "surface_csv"],
    )
    p.add_argument("--n-theta", type=int, default=33)
    p.add_argument("--n-phi", type=int, default=64)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_export, figures=True)

    p = sub.add_parser("config", help="configuration helpers")
    common(p)
    p.add_argument("action", choices=["dump"])
    p.set_defaults(func=cmd_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses code 2 for usage errors; the interface reserves 1
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    try:
        return args.func(args)
    except _UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (DataFormatError, config_mod.ConfigError, GenerationExhaustedError,
            FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except (MechanismError, SymmetryViolationError, NumericError, DegenerateStructureError,
            TrainingDivergedError, OptimizationFailedError, np.linalg.LinAlgError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
