"""Command-line surface: one binary, reproducible subcommands.

    synth               generate a synthetic dataset from a scenario
    analyze-curriculum  structural metrics report for a curriculum
    archetypes          extract features, fit and apply archetype labels
    dml                 cross-fitted treatment-effect estimate from a spec
    simulate            run the cohort simulator on a scenario
    experiment          full factorial policy experiment
    report              verify and summarize an output bundle
    pipeline            synth -> analyze -> archetypes -> dml -> simulate -> report

Exit codes: 0 success, 2 configuration/schema error, 3 observation-window
leakage, 4 validation or fit failure, 5 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .archetypes import (
    ArchetypeConfig,
    classify,
    extract_features,
    fit_archetypes,
    model_to_json_obj,
)
from .curriculum import (
    Curriculum,
    backbone_courses,
    bottleneck_scores,
    curriculum_from_json_obj,
    curriculum_to_json_obj,
    load_curriculum,
    longest_chain,
    min_completion_terms,
)
from .dml import DmlSpec, LearnerParams, crossfit_dml, group_cate, naive_regression
from .errors import (
    ConfigError,
    LeakageViolation,
    TrajlabError,
    ValidationFailure,
)
from .policy import (
    AXES,
    ExperimentDesign,
    PolicyIntervention,
    decompose_effects,
    detect_amplifiers,
    flag_adverse_outcomes,
    run_experiment,
)
from .reports import (
    text_table,
    verify_bundle,
    write_json_artifact,
    write_manifest,
)
from .sim import (
    BehaviorRules,
    PopulationSpec,
    SimulationConfig,
    simulate,
)
from .temporal import (
    Dataset,
    FeatureRegistry,
    ObservationWindow,
    ShockSeries,
    add_feature,
    ingest_dataset,
    serialize_dataset,
    view_as_of,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_LEAKAGE = 3
EXIT_VALIDATION = 4
EXIT_INTERNAL = 5

SCENARIO_KEYS = {"schema_version", "curriculum", "population", "shocks", "rules",
                 "policy", "horizon", "seed", "pipeline"}


def load_scenario(path: str | Path) -> tuple[dict, SimulationConfig]:
    """Parse and validate a scenario file; relative paths resolve against it."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    unknown = set(obj) - SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    if obj.get("schema_version") != "1":
        raise ConfigError(f"unsupported schema_version {obj.get('schema_version')!r}")
    base = path.parent

    cur_spec = obj.get("curriculum")
    if isinstance(cur_spec, str):
        cur_path = base / cur_spec
        if not cur_path.exists():
            raise ConfigError(f"curriculum file not found: {cur_path}")
        curriculum = load_curriculum(cur_path)
    elif isinstance(cur_spec, dict):
        curriculum = curriculum_from_json_obj(cur_spec)
    else:
        raise ConfigError("scenario needs a curriculum (path or inline object)")

    rules_spec = obj.get("rules", {})
    if isinstance(rules_spec, str):
        rules_path = base / rules_spec
        if not rules_path.exists():
            raise ConfigError(f"rules file not found: {rules_path}")
        with open(rules_path, encoding="utf-8") as fh:
            rules_spec = json.load(fh)
    rules = BehaviorRules.from_json_obj(rules_spec)

    shocks_spec = obj.get("shocks", [])
    if isinstance(shocks_spec, str):
        shocks_path = base / shocks_spec
        if not shocks_path.exists():
            raise ConfigError(f"shocks file not found: {shocks_path}")
        inflation, strike = {}, {}
        with open(shocks_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                term = int(row["term"])
                inflation[term] = float(row["inflation_rate"])
                strike[term] = float(row["strike_fraction"])
    else:
        inflation = {int(e["term"]): float(e["inflation_rate"]) for e in shocks_spec}
        strike = {int(e["term"]): float(e["strike_fraction"]) for e in shocks_spec}
    shocks = ShockSeries(inflation=inflation, strike=strike)

    try:
        population = PopulationSpec(**obj.get("population", {}))
    except TypeError as exc:
        raise ConfigError(f"bad population spec: {exc}")
    policy = tuple(PolicyIntervention.from_json_obj(p) for p in obj.get("policy", []))
    config = SimulationConfig(curriculum=curriculum, population=population,
                              shocks=shocks, rules=rules, policy=policy,
                              horizon=int(obj.get("horizon", 20)),
                              seed=int(obj.get("seed", 0)))
    return obj, config


def _write_dataset_files(result, out_dir: Path) -> Dataset:
    dataset = result.to_dataset()
    serialize_dataset(dataset, out_dir)
    return dataset


def cmd_synth(args) -> int:
    scenario_obj, config = load_scenario(args.scenario)
    if args.seed is not None:
        import dataclasses

        config = dataclasses.replace(config, seed=args.seed)
    out = Path(args.out)
    result = simulate(config)
    _write_dataset_files(result, out)
    write_manifest(out, "synth", {"seed": config.seed}, config.to_json_obj())
    print(f"synth: wrote {result.n} student records to {out}")
    return EXIT_OK


def _curriculum_metrics(curriculum: Curriculum) -> dict:
    length, chain_path = longest_chain(curriculum)
    scores = bottleneck_scores(curriculum)
    top = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
    return {
        "courses": len(curriculum.courses),
        "edges": len(curriculum.edges),
        "longest_chain": {"length": length, "path": chain_path},
        "backbone": sorted(backbone_courses(curriculum)),
        "top_bottlenecks": [{"course": c, "score": s} for c, s in top],
        "min_completion_terms": {str(cap): min_completion_terms(curriculum, cap)
                                 for cap in range(2, 7)},
    }


def cmd_analyze_curriculum(args) -> int:
    curriculum = load_curriculum(args.curriculum)
    metrics = _curriculum_metrics(curriculum)
    out = Path(args.out)
    write_json_artifact(out / "curriculum_metrics.json", metrics)
    table = text_table(
        ["metric", "value"],
        [["courses", metrics["courses"]],
         ["edges", metrics["edges"]],
         ["longest chain", " -> ".join(metrics["longest_chain"]["path"])],
         ["chain length", metrics["longest_chain"]["length"]],
         ["backbone", ", ".join(metrics["backbone"]) or "(none)"]]
        + [[f"min terms (cap {cap})", metrics["min_completion_terms"][str(cap)]]
           for cap in range(2, 7)]
        + [[f"bottleneck {e['course']}", f"{e['score']:.3f}"]
           for e in metrics["top_bottlenecks"][:5]])
    (out / "curriculum_metrics.txt").write_text(table, encoding="utf-8")
    write_manifest(out, "analyze-curriculum", {}, curriculum_to_json_obj(curriculum))
    print(table, end="")
    return EXIT_OK


def _load_dataset(data_dir: Path, curriculum: Curriculum,
                  regularity_window: int, regularity_required: int) -> Dataset:
    data_dir = Path(data_dir)
    registry_path = data_dir / "registry.json"
    if not registry_path.exists():
        raise ConfigError(f"no registry.json in {data_dir}")
    with open(registry_path, encoding="utf-8") as fh:
        registry = FeatureRegistry.from_json_obj(json.load(fh))
    for name in ("students.csv", "trajectories.csv", "shocks.csv"):
        if not (data_dir / name).exists():
            raise ConfigError(f"no {name} in {data_dir}")
    return ingest_dataset(curriculum, data_dir / "students.csv",
                          data_dir / "trajectories.csv", data_dir / "shocks.csv",
                          registry, regularity_window=regularity_window,
                          regularity_required=regularity_required)


def _run_archetypes(dataset: Dataset, curriculum: Curriculum, as_of: str, k: int,
                    seed: int, nominal_terms: int, out: Path) -> dict[str, str]:
    window = ObservationWindow.parse(as_of)
    config = ArchetypeConfig(nominal_terms=nominal_terms)
    features = [extract_features(rec, curriculum, window, config)
                for rec in dataset.records]
    model = fit_archetypes(features, k=k, seed=seed, config=config)
    labels = {f.student_id: classify(model, f) for f in features}
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "archetype_labels.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "archetype"])
        for sid in sorted(labels):
            writer.writerow([sid, labels[sid]])
    write_json_artifact(out / "archetype_model.json", model_to_json_obj(model))
    return labels


def cmd_archetypes(args) -> int:
    curriculum = load_curriculum(args.curriculum)
    dataset = _load_dataset(Path(args.data), curriculum, args.regularity_window,
                            args.regularity_required)
    out = Path(args.out)
    labels = _run_archetypes(dataset, curriculum, args.as_of, args.k, args.seed,
                             args.nominal_terms, out)
    write_manifest(out, "archetypes", {"seed": args.seed},
                   {"as_of": args.as_of, "k": args.k, "seed": args.seed})
    counts: dict[str, int] = {}
    for lab in labels.values():
        counts[lab] = counts.get(lab, 0) + 1
    print(text_table(["archetype", "students"],
                     [[lab, counts[lab]] for lab in sorted(counts)]), end="")
    return EXIT_OK


DML_SPEC_KEYS = {"outcome", "treatment", "treatment_source", "controls",
                 "decision_point", "folds", "ridge_lambda", "seed", "group_by",
                 "min_group_size", "expansions"}


def _dml_spec_from_obj(obj: dict) -> DmlSpec:
    unknown = set(obj) - DML_SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown dml spec keys: {sorted(unknown)}")
    learner = LearnerParams(ridge_lambda=float(obj.get("ridge_lambda", 1e-3)),
                            expansions=tuple(obj.get("expansions", [])))
    return DmlSpec(outcome=obj["outcome"], treatment=obj["treatment"],
                   controls=tuple(obj.get("controls", [])),
                   decision_point=ObservationWindow.parse(obj["decision_point"]),
                   folds=int(obj.get("folds", 5)), learner=learner,
                   seed=int(obj.get("seed", 0)))


def _derive_binary_treatment(dataset: Dataset, source: str, name: str) -> Dataset:
    """Register `name` as 1[source > median] at the source's window."""
    desc = dataset.features.get(source)
    matrix = view_as_of(dataset, desc.window)
    values = matrix.column(source)
    present = [v for v in values if v is not None]
    if not present:
        raise ConfigError(f"treatment source {source!r} has no observed values")
    median = float(np.median(np.array(present, dtype=float)))
    derived = {sid: (None if v is None else (1.0 if float(v) > median else 0.0))
               for sid, v in zip(matrix.ids, values)}
    derived = {sid: v for sid, v in derived.items() if v is not None}
    return add_feature(dataset, name, desc.window, "numeric", derived)


def _run_dml(dataset: Dataset, spec_obj: dict, out: Path) -> dict:
    if "treatment_source" in spec_obj:
        dataset = _derive_binary_treatment(dataset, spec_obj["treatment_source"],
                                           spec_obj["treatment"])
        spec_obj = {k: v for k, v in spec_obj.items() if k != "treatment_source"}
    group_by = spec_obj.pop("group_by", None)
    min_group_size = int(spec_obj.pop("min_group_size", 50))
    spec = _dml_spec_from_obj(spec_obj)
    estimate = crossfit_dml(dataset, spec)
    naive = naive_regression(dataset, spec)
    payload = {
        "spec": {**spec_obj, "decision_point": str(spec.decision_point)},
        "estimate": {"theta": estimate.theta, "std_error": estimate.std_error,
                     "ci95": list(estimate.ci95), "n_used": estimate.n_used,
                     "fold_thetas": list(estimate.fold_thetas)},
        "naive_comparator": {"theta": naive.theta, "std_error": naive.std_error,
                             "ci95": list(naive.ci95), "n_used": naive.n_used},
    }
    if group_by == "archetype":
        labels_path = out / "archetype_labels.csv"
        if not labels_path.exists():
            raise ConfigError("group_by=archetype needs archetype_labels.csv "
                              "(run the archetypes stage first)")
        groups = {}
        with open(labels_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                groups[row["id"]] = row["archetype"]
        effects = group_cate(dataset, spec, groups, min_group_size, group_by="archetype")
        payload["group_effects"] = {
            group: {"theta": est.theta, "std_error": est.std_error,
                    "ci95": list(est.ci95), "n_used": est.n_used}
            for group, est in sorted(effects.effects.items())
        }
        payload["omitted_groups"] = [list(o) for o in effects.omitted]
    write_json_artifact(out / "dml.json", payload)
    return payload


def cmd_dml(args) -> int:
    curriculum = load_curriculum(args.curriculum)
    dataset = _load_dataset(Path(args.data), curriculum, args.regularity_window,
                            args.regularity_required)
    with open(args.spec, encoding="utf-8") as fh:
        spec_obj = json.load(fh)
    out = Path(args.out)
    payload = _run_dml(dataset, dict(spec_obj), out)
    write_manifest(out, "dml", {"seed": spec_obj.get("seed", 0)}, spec_obj)
    est = payload["estimate"]
    print(f"theta = {est['theta']:+.4f}  se = {est['std_error']:.4f}  "
          f"ci95 = [{est['ci95'][0]:+.4f}, {est['ci95'][1]:+.4f}]  n = {est['n_used']}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario_obj, config = load_scenario(args.scenario)
    if args.seed is not None:
        import dataclasses

        config = dataclasses.replace(config, seed=args.seed)
    out = Path(args.out)
    result = simulate(config)
    write_json_artifact(out / "result.json", result.to_json_obj())
    _write_dataset_files(result, out)
    write_manifest(out, "simulate", {"seed": config.seed}, config.to_json_obj())
    print(f"simulate: n={result.n} dropout={result.dropout_rate:.3f} "
          f"graduation={result.graduation_rate:.3f}")
    return EXIT_OK


DESIGN_KEYS = {"schema_version", "base_scenario", "replications", "seed_base",
               "factors", "amplifier_threshold", "adverse_eps_dropout",
               "adverse_delta_ttd"}


def load_design(path: str | Path) -> tuple[dict, ExperimentDesign, dict]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    unknown = set(obj) - DESIGN_KEYS
    if unknown:
        raise ConfigError(f"unknown design keys: {sorted(unknown)}")
    _, base = load_scenario(path.parent / obj["base_scenario"])
    factors = {}
    for axis, spec in obj.get("factors", {}).items():
        if axis not in AXES:
            raise ConfigError(f"unknown axis {axis!r}")
        factors[axis] = PolicyIntervention.from_json_obj(spec)
    design = ExperimentDesign(base=base, factors=factors,
                              replications=int(obj.get("replications", 5)),
                              seed_base=int(obj.get("seed_base", 0)))
    thresholds = {
        "amplifier_threshold": float(obj.get("amplifier_threshold", 0.005)),
        "adverse_eps_dropout": float(obj.get("adverse_eps_dropout", 0.02)),
        "adverse_delta_ttd": float(obj.get("adverse_delta_ttd", 0.25)),
    }
    return obj, design, thresholds


def _experiment_payload(design: ExperimentDesign, thresholds: dict) -> tuple[dict, list]:
    cells = run_experiment(design)
    base_cell_id = design.cells()[0][0]
    effects = {}
    for outcome in ("dropout_rate", "graduation_rate", "mean_time_to_degree"):
        report = decompose_effects(cells, outcome)
        effects[outcome] = report.to_json_obj()
        if outcome == "dropout_rate":
            amplifiers = [
                {"pair": list(pair), **verdict}
                for pair, verdict in detect_amplifiers(
                    report, thresholds["amplifier_threshold"])
            ]
    adverse = flag_adverse_outcomes(cells, base_cell_id,
                                    thresholds["adverse_eps_dropout"],
                                    thresholds["adverse_delta_ttd"])
    payload = {
        "seed_formula": "seed_base + cell_index * replications + rep_index",
        "seed_base": design.seed_base,
        "replications": design.replications,
        "base_cell": base_cell_id,
        "thresholds": thresholds,
        "cells": [
            {"cell_id": c.cell_id, "levels": c.levels, "means": c.means,
             "sds": c.sds} for c in cells
        ],
        "effects": effects,
        "amplifiers": amplifiers,
        "adverse_cells": adverse,
    }
    return payload, cells


def cmd_experiment(args) -> int:
    design_obj, design, thresholds = load_design(args.design)
    if args.reps is not None:
        import dataclasses

        design = dataclasses.replace(design, replications=args.reps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload, cells = _experiment_payload(design, thresholds)
    with open(out / "cells.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_id", "rep", "seed", "dropout_rate", "graduation_rate",
                         "mean_time_to_degree", "graduate_count"])
        for idx, cell in enumerate(cells):
            for rep, outcome in enumerate(cell.outcomes):
                writer.writerow([cell.cell_id, rep, design.seed_for(idx, rep),
                                 repr(outcome["dropout_rate"]),
                                 repr(outcome["graduation_rate"]),
                                 repr(outcome["mean_time_to_degree"]),
                                 repr(outcome["graduate_count"])])
    write_json_artifact(out / "effects.json", payload)
    rows = [[c.cell_id, f"{c.means['dropout_rate']:.3f}",
             f"{c.means['graduation_rate']:.3f}",
             f"{c.means['mean_time_to_degree']:.3f}"] for c in cells]
    summary = text_table(["cell", "dropout", "graduation", "mean_ttd"], rows)
    summary += "\namplifier pairs: " + (
        ", ".join("*".join(a["pair"]) for a in payload["amplifiers"]) or "(none)")
    summary += "\nadverse cells:   " + (", ".join(payload["adverse_cells"]) or "(none)")
    summary += "\n"
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    write_manifest(out, "experiment", {"seed_base": design.seed_base}, design_obj)
    print(summary, end="")
    return EXIT_OK


def cmd_report(args) -> int:
    in_dir = Path(args.in_dir)
    manifest = verify_bundle(in_dir)
    lines = [f"bundle: {in_dir}",
             f"command: {manifest['command']}",
             f"tool_version: {manifest['tool_version']}",
             f"config_fingerprint: {manifest['config_fingerprint']}",
             f"artifacts: {len(manifest['artifacts'])} verified"]
    result_path = in_dir / "result.json"
    if result_path.exists():
        with open(result_path, encoding="utf-8") as fh:
            result = json.load(fh)
        lines.append(f"dropout_rate: {result['dropout_rate']}")
        lines.append(f"graduation_rate: {result['graduation_rate']}")
        hist = result.get("time_to_degree_histogram", {})
        if hist:
            lines.append("time_to_degree_histogram: "
                         + ", ".join(f"{k}:{v}" for k, v in sorted(
                             hist.items(), key=lambda kv: int(kv[0]))))
    body = "\n".join(lines) + "\n"
    if args.format == "json":
        payload = {"manifest": manifest}
        if result_path.exists():
            payload["result"] = result
        out_path = in_dir / "summary.json"
        write_json_artifact(out_path, payload)
    elif args.format == "csv":
        out_path = in_dir / "summary.csv"
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["key", "value"])
            for line in lines:
                key, _, value = line.partition(": ")
                writer.writerow([key, value])
    else:
        out_path = in_dir / "summary.md"
        out_path.write_text(body, encoding="utf-8")
    print(body, end="")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    out = Path(args.out)
    stage = "load"
    try:
        scenario_obj, config = load_scenario(args.scenario)
        pipeline_cfg = scenario_obj.get("pipeline", {})

        stage = "synth"
        result = simulate(config)
        dataset = _write_dataset_files(result, out)
        print(f"stage synth: ok ({result.n} records)")

        stage = "analyze"
        # analysis sees the post-policy world the records came from
        curriculum = config.curriculum
        if config.policy:
            from .policy import apply_policy

            curriculum, _ = apply_policy(curriculum, config.rules,
                                         list(config.policy))
        metrics = _curriculum_metrics(curriculum)
        write_json_artifact(out / "curriculum_metrics.json", metrics)
        print(f"stage analyze: ok (chain {metrics['longest_chain']['length']})")

        stage = "archetypes"
        arch_cfg = pipeline_cfg.get("archetypes", {})
        labels = _run_archetypes(dataset, curriculum,
                                 arch_cfg.get("as_of", "N3:8"),
                                 int(arch_cfg.get("k", 5)),
                                 int(arch_cfg.get("seed", 0)),
                                 int(arch_cfg.get("nominal_terms", 10)), out)
        print(f"stage archetypes: ok ({len(set(labels.values()))} labels)")

        stage = "dml"
        dml_cfg = dict(pipeline_cfg.get("dml", {}))
        if not dml_cfg:
            raise ConfigError("scenario has no pipeline.dml block")
        payload = _run_dml(dataset, dml_cfg, out)
        print(f"stage dml: ok (theta {payload['estimate']['theta']:+.4f})")

        stage = "simulate"
        write_json_artifact(out / "result.json", result.to_json_obj())
        print(f"stage simulate: ok (dropout {result.dropout_rate:.3f})")

        stage = "report"
        write_manifest(out, "pipeline", {"seed": config.seed}, scenario_obj)
        manifest = verify_bundle(out)
        summary = "\n".join([
            "pipeline bundle",
            f"config_fingerprint: {manifest['config_fingerprint']}",
            f"records: {result.n}",
            f"dropout_rate: {result.dropout_rate}",
            f"graduation_rate: {result.graduation_rate}",
            f"dml_theta: {payload['estimate']['theta']}",
        ]) + "\n"
        (out / "summary.md").write_text(summary, encoding="utf-8")
        write_manifest(out, "pipeline", {"seed": config.seed}, scenario_obj)
        print("stage report: ok")
        return EXIT_OK
    except TrajlabError as exc:
        print(f"stage {stage}: failed: {exc}", file=sys.stderr)
        raise


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajlab",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze-curriculum", help="structural metrics report")
    p.add_argument("--curriculum", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze_curriculum)

    p = sub.add_parser("archetypes", help="fit and apply archetype labels")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--curriculum", required=True)
    p.add_argument("--as-of", dest="as_of", required=True, help="e.g. N3:8")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nominal-terms", dest="nominal_terms", type=int, default=10)
    p.add_argument("--regularity-window", dest="regularity_window", type=int, default=2)
    p.add_argument("--regularity-required", dest="regularity_required", type=int,
                   default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_archetypes)

    p = sub.add_parser("dml", help="cross-fitted treatment-effect estimate")
    p.add_argument("--data", required=True)
    p.add_argument("--curriculum", required=True)
    p.add_argument("--spec", required=True, help="dml spec JSON")
    p.add_argument("--regularity-window", dest="regularity_window", type=int, default=2)
    p.add_argument("--regularity-required", dest="regularity_required", type=int,
                   default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dml)

    p = sub.add_parser("simulate", help="run the cohort simulator")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="factorial policy experiment")
    p.add_argument("--design", required=True)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="verify and summarize a bundle")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--format", choices=("json", "csv", "md-text"), default="md-text")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="full end-to-end run")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except LeakageViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LEAKAGE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TrajlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
