"""Command-line pipelines: generate, fit, predict, evaluate, grid, transfer,
elapse, localize, export-heatmap.

Flags mirror the run configuration; a JSON config file given with --config
overrides flag values. Every command is byte-reproducible given the same
config and seed and never mutates its inputs.
"""

import argparse
import json
import os
import sys
from dataclasses import fields

from actionmaps import experiments, fileio
from actionmaps.evaluation import SUMMARY_METRICS, EvalParams, GridSpec, score_action_map
from actionmaps.fileio import format_summary_value
from actionmaps.sideinfo import KernelConfig
from actionmaps.solver import SolverParams, normalize_action_map, predict
from actionmaps.synthetic import PRESETS, WorldSpec, generate_dataset
from actionmaps.textfmt import fmt9


class CliError(ValueError):
    pass


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok)
    except ValueError:
        raise CliError(f"expected a comma-separated number list, got {text!r}") from None


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(tok for tok in text.split(",") if tok)


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _load_data(path):
    if not os.path.exists(path):
        raise CliError(f"dataset manifest does not exist: {path}")
    return fileio.load_dataset(path)


def _kernel_from_args(args) -> KernelConfig:
    return KernelConfig(
        alpha=args.alpha,
        sigma_s=args.sigma_s,
        gamma_p=args.gamma,
        gamma_o=args.gamma,
        variant=args.variant,
        tau=args.tau,
    )


def _solver_from_args(args) -> SolverParams:
    return SolverParams(
        rank=args.rank,
        lam=args.lam,
        mu=args.mu,
        max_iters=args.max_iters,
        rel_tol=args.rel_tol,
        seed=args.seed,
    )


def _add_kernel_args(p: argparse.ArgumentParser):
    p.add_argument("--variant", default="SOP", choices=("S", "SO", "SP", "SOP"))
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--sigma-s", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=1.0, help="chi-squared bandwidth")
    p.add_argument("--tau", type=float, default=1e-4, help="Gram sparsification threshold")


def _add_solver_args(p: argparse.ArgumentParser):
    p.add_argument("--rank", type=int, default=6)
    p.add_argument("--lam", type=float, default=1e-3)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--rel-tol", type=float, default=1e-6)


def _add_eval_args(p: argparse.ArgumentParser):
    p.add_argument("--fov-deg", type=float, default=60.0)
    p.add_argument("--range-cells", type=float, default=6.0)
    p.add_argument("--thresholds", type=int, default=100)


def _eval_from_args(args) -> EvalParams:
    return EvalParams(
        fov_deg=args.fov_deg, range_cells=args.range_cells, n_thresholds=args.thresholds
    )


def _grid_from_args(args) -> GridSpec:
    return GridSpec(
        alphas=_float_list(args.alphas),
        lambdas=_float_list(args.lambdas),
        gammas=_float_list(args.gammas),
    )


def _add_grid_args(p: argparse.ArgumentParser):
    p.add_argument("--alphas", default="0,0.1,0.3,0.5,0.7,0.9,1")
    p.add_argument("--lambdas", default="0.001,0.01")
    p.add_argument("--gammas", default="100,1000")
    p.add_argument("--sigma-s", type=float, default=2.0)
    p.add_argument("--tau", type=float, default=1e-4)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.spec_json:
        if not os.path.exists(args.spec_json):
            raise CliError(f"spec file does not exist: {args.spec_json}")
        with open(args.spec_json, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f.name for f in fields(WorldSpec)}
        unknown = set(raw) - known
        if unknown:
            raise CliError(f"unknown world-spec fields: {sorted(unknown)}")
        for key in ("room_width", "room_height", "room_type_weights"):
            if key in raw:
                raw[key] = tuple(raw[key])
        spec = WorldSpec(**raw)
    else:
        if args.preset not in PRESETS:
            raise CliError(f"unknown preset {args.preset!r}; have {sorted(PRESETS)}")
        spec = PRESETS[args.preset]
    dataset = generate_dataset(
        spec,
        args.seed,
        n_scenes=args.scenes,
        scene_prefix=args.scene_prefix,
        identical_layouts=args.identical_layouts,
    )
    manifest = fileio.write_dataset(dataset, args.out, name=args.name)
    print(manifest)
    return 0


def cmd_fit(args) -> int:
    dataset = _load_data(args.data)
    kernel = _kernel_from_args(args)
    solver = _solver_from_args(args)
    _, result = experiments.fit_action_map(dataset, kernel, solver)
    _ensure_parent(args.out_factors)
    fileio.write_factors(result.factors, args.out_factors)
    if args.out_trace:
        _ensure_parent(args.out_trace)
        fileio.write_trace(result.trace, args.out_trace)
    print(f"{args.out_factors} iterations={len(result.trace) - 1} "
          f"objective={fmt9(result.trace[-1])}")
    return 0


def cmd_predict(args) -> int:
    dataset = _load_data(args.data)
    factors = fileio.read_factors(args.factors)
    index = dataset.index()
    if factors.U.shape[0] != index.total_rows:
        raise CliError(
            f"factors cover {factors.U.shape[0]} rows, dataset has {index.total_rows}"
        )
    am = normalize_action_map(predict(factors))
    _ensure_parent(args.out)
    fileio.write_action_map(am, index, args.out)
    print(args.out)
    return 0


def cmd_evaluate(args) -> int:
    dataset = _load_data(args.data)
    index = dataset.index()
    am = fileio.read_action_map(args.am, index)
    am = normalize_action_map(am)
    scene_ids = _str_list(args.scenes) if args.scenes else None
    scores = score_action_map(
        dataset.scenes, index, am, _eval_from_args(args), scene_ids
    )
    names = index.vocabulary.names
    lines = [f"{'activity':<18}{'Max F1':>12}{'Mean F1':>12}{'GT count':>12}"]
    for a, name in enumerate(names):
        lines.append(
            f"{name:<18}{fmt9(scores.per_activity_max[a]):>12}"
            f"{fmt9(scores.per_activity_mean[a]):>12}{int(scores.gt_counts[a]):>12}"
        )
    lines.append("")
    summary = scores.summary()
    for metric, header in zip(SUMMARY_METRICS, ("W. Max F1", "W. Mean F1", "Max F1", "Mean F1")):
        lines.append(f"{header:<18}{fmt9(summary[metric]):>12}")
    _ensure_parent(args.out_txt)
    with open(args.out_txt, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    rows = ["metric\tvalue"]
    rows.extend(f"{m}\t{fmt9(summary[m])}" for m in SUMMARY_METRICS)
    for a, name in enumerate(names):
        rows.append(f"max_f1[{name}]\t{fmt9(scores.per_activity_max[a])}")
        rows.append(f"mean_f1[{name}]\t{fmt9(scores.per_activity_mean[a])}")
    _ensure_parent(args.out_tsv)
    with open(args.out_tsv, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
    print(args.out_txt)
    return 0


def cmd_grid(args) -> int:
    dataset = _load_data(args.data)
    report = experiments.run_parameter_grid(
        dataset,
        _grid_from_args(args),
        variants=_str_list(args.variants),
        base_seed=args.seed,
        solver=SolverParams(
            rank=args.rank, mu=args.mu, max_iters=args.max_iters, rel_tol=args.rel_tol
        ),
        kernel=KernelConfig(sigma_s=args.sigma_s, tau=args.tau),
        eval_params=_eval_from_args(args),
    )
    _ensure_parent(args.out_tsv)
    _ensure_parent(args.out_txt)
    fileio.write_report(report, args.out_tsv, args.out_txt)
    print(args.out_txt)
    return 0


def cmd_transfer(args) -> int:
    dataset = _load_data(args.data)
    source = _str_list(args.source)
    target = _str_list(args.target)
    for sid in (*source, *target):
        dataset.scene(sid)  # validates
    report = experiments.run_transfer(
        dataset,
        source,
        target,
        grid_spec=_grid_from_args(args),
        variants=_str_list(args.variants),
        solver=SolverParams(
            rank=args.rank, mu=args.mu, max_iters=args.max_iters, rel_tol=args.rel_tol
        ),
        kernel=KernelConfig(sigma_s=args.sigma_s, tau=args.tau),
        eval_params=_eval_from_args(args),
        base_seed=args.seed,
    )
    rows: list[tuple[str, dict[str, str]]] = []
    for method in ("Det.", "NMF"):
        summary = report.baselines[method].summary()
        rows.append((method, {m: fmt9(summary[m]) for m in SUMMARY_METRICS}))
    summaries = report.grid.summaries()
    for variant in _str_list(args.variants):
        if variant in summaries:
            rows.append(
                (
                    variant,
                    {
                        m: format_summary_value(m, summaries[variant][m])
                        for m in SUMMARY_METRICS
                    },
                )
            )
    _ensure_parent(args.out_txt)
    fileio.write_method_table(rows, args.out_txt)
    _ensure_parent(args.out_tsv)
    fileio.write_report(report.grid, args.out_tsv, args.out_txt + ".variants")
    print(args.out_txt)
    return 0


def cmd_elapse(args) -> int:
    dataset = _load_data(args.data)
    fractions = _float_list(args.fractions)
    results = experiments.run_elapse(
        dataset,
        fractions,
        kernel=_kernel_from_args(args),
        solver=_solver_from_args(args),
        eval_params=_eval_from_args(args),
        subset_seed=args.seed,
    )
    lines = ["fraction\tw_max_f1\tw_mean_f1\tmax_f1\tmean_f1"]
    for fraction, scores in results:
        summary = scores.summary()
        lines.append(
            "\t".join([fmt9(fraction)] + [fmt9(summary[m]) for m in SUMMARY_METRICS])
        )
    _ensure_parent(args.out)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(args.out)
    return 0


def cmd_localize(args) -> int:
    dataset = _load_data(args.data)
    index = dataset.index()
    am = normalize_action_map(fileio.read_action_map(args.am, index))
    curve = experiments.run_localization(dataset, args.scene, am, args.k_max)
    _ensure_parent(args.out)
    fileio.write_curve(curve, index.vocabulary.names, args.out)
    print(args.out)
    return 0


def cmd_export_heatmap(args) -> int:
    dataset = _load_data(args.data)
    index = dataset.index()
    am = fileio.read_action_map(args.am, index)
    if am.min() < 0 or am.max() > 1:
        am = normalize_action_map(am)
    os.makedirs(args.out_dir, exist_ok=True)
    names = index.vocabulary.names
    written = []
    for scene in dataset.scenes:
        rows = index.rows_of(scene.scene_id)
        am_scene = am[rows]
        table = [
            "i\tj\t" + "\t".join(names),
        ]
        for row in range(scene.n_cells):
            i, j = scene.cell_of(row)
            table.append(
                f"{i}\t{j}\t" + "\t".join(fmt9(v) for v in am_scene[row])
            )
        table_path = os.path.join(args.out_dir, f"{scene.scene_id}_am.tsv")
        with open(table_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(table) + "\n")
        written.append(table_path)
        for a, name in enumerate(names):
            grid = am_scene[:, a].reshape(scene.width, scene.height)
            pgm_path = os.path.join(args.out_dir, f"{scene.scene_id}_{name}.pgm")
            fileio.write_pgm(grid, pgm_path)
            written.append(pgm_path)
    print("\n".join(written))
    return 0


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actionmaps",
        description="Complete sparse location-by-activity maps and run the "
        "evaluation pipelines.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="", help="JSON config overriding flags")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--preset", default="mini")
    p.add_argument("--spec-json", default="", help="world-spec JSON (overrides preset)")
    p.add_argument("--scenes", type=int, default=1)
    p.add_argument("--scene-prefix", default="scene")
    p.add_argument("--identical-layouts", action="store_true")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="dataset")
    p.set_defaults(func=cmd_generate)

    p = add_parser("fit", help="fit factors on a dataset")
    p.add_argument("--data", required=True)
    _add_kernel_args(p)
    _add_solver_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-factors", required=True)
    p.add_argument("--out-trace", default="")
    p.set_defaults(func=cmd_fit)

    p = add_parser("predict", help="write the normalized action map of saved factors")
    p.add_argument("--data", required=True)
    p.add_argument("--factors", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = add_parser("evaluate", help="score an action map against a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--am", required=True)
    p.add_argument("--scenes", default="", help="comma-separated scene filter")
    _add_eval_args(p)
    p.add_argument("--out-txt", required=True)
    p.add_argument("--out-tsv", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = add_parser("grid", help="run the parameter grid")
    p.add_argument("--data", required=True)
    p.add_argument("--variants", default="S,SO,SP,SOP")
    _add_grid_args(p)
    _add_solver_args(p)
    _add_eval_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-tsv", required=True)
    p.add_argument("--out-txt", required=True)
    p.set_defaults(func=cmd_grid)

    p = add_parser("transfer", help="novel-scene comparison with baselines")
    p.add_argument("--data", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--variants", default="SO,SP,SOP")
    _add_grid_args(p)
    _add_solver_args(p)
    _add_eval_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-txt", required=True)
    p.add_argument("--out-tsv", required=True)
    p.set_defaults(func=cmd_transfer)

    p = add_parser("elapse", help="sweep demonstration fractions")
    p.add_argument("--data", required=True)
    p.add_argument("--fractions", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    _add_kernel_args(p)
    _add_solver_args(p)
    _add_eval_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_elapse)

    p = add_parser("localize", help="K-best discrepancy curve from an action map")
    p.add_argument("--data", required=True)
    p.add_argument("--am", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--k-max", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_localize)

    p = add_parser("export-heatmap", help="per-activity greymaps and tables")
    p.add_argument("--data", required=True)
    p.add_argument("--am", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_export_heatmap)

    return parser


def _apply_config(args: argparse.Namespace):
    """Config file values override flags."""
    path = getattr(args, "config", "")
    if not path:
        return
    if not os.path.exists(path):
        raise CliError(f"config file does not exist: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: invalid JSON config: {exc}") from None
    if not isinstance(cfg, dict):
        raise CliError(f"{path}: config must be a JSON object")
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise CliError(f"{path}: unknown config key {key!r}")
        setattr(args, dest, value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
