"""Line-oriented, whitespace-delimited file formats.

Every document starts with a schema-version line and ends with `end`. All
numeric output uses 9 significant digits; generated data is quantized to that
precision at creation, so write/read round-trips are exact and every file is
byte-deterministic given a seed.
"""

import os
from typing import Sequence

import numpy as np

from actionmaps.baselines import CategoryActivityMap
from actionmaps.evaluation import SUMMARY_HEADERS, SUMMARY_METRICS, EvalReport
from actionmaps.localization import DiscrepancyCurve
from actionmaps.scene import ActivityVocabulary, Demonstration, GridPose, SceneGrid
from actionmaps.solver import FactorPair
from actionmaps.synthetic import GeneratedDataset
from actionmaps.textfmt import fmt9

SCENE_SCHEMA = "amscene 1"
DATASET_SCHEMA = "amdataset 1"
CATMAP_SCHEMA = "amcatmap 1"
FACTORS_SCHEMA = "amfactors 1"
ACTIONMAP_SCHEMA = "amactionmap 1"


class SchemaError(ValueError):
    """Malformed or version-mismatched document, with file/line context."""

    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


class _Reader:
    def __init__(self, path):
        self.path = path
        try:
            with open(path, "r", encoding="utf-8") as fh:
                self.lines = fh.read().splitlines()
        except OSError as exc:
            raise SchemaError(path, 0, f"cannot read file: {exc}") from exc
        self.pos = 0

    def error(self, msg: str) -> SchemaError:
        return SchemaError(self.path, self.pos, msg)

    def next(self) -> list[str]:
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            self.pos += 1
            tokens = line.split()
            if tokens:
                return tokens
        raise SchemaError(self.path, self.pos, "unexpected end of file")

    def expect(self, tag: str) -> list[str]:
        tokens = self.next()
        if tokens[0] != tag:
            raise self.error(f"expected section {tag!r}, found {tokens[0]!r}")
        return tokens[1:]

    def check_schema(self, schema: str):
        tokens = self.next()
        if " ".join(tokens) != schema:
            raise self.error(
                f"schema-version mismatch: expected {schema!r}, found {' '.join(tokens)!r}"
            )

    def int_(self, tok: str) -> int:
        try:
            return int(tok)
        except ValueError:
            raise self.error(f"expected an integer, found {tok!r}") from None

    def float_(self, tok: str) -> float:
        try:
            return float(tok)
        except ValueError:
            raise self.error(f"expected a number, found {tok!r}") from None


def _check_token(name: str):
    if not name or any(c.isspace() for c in name):
        raise ValueError(f"names in documents cannot be empty or contain spaces: {name!r}")


def _write_text(path, lines: list[str]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# scene documents
# ---------------------------------------------------------------------------


def write_scene(
    scene: SceneGrid,
    p_scores: np.ndarray,
    o_scores: np.ndarray,
    class_names: Sequence[str],
    category_names: Sequence[str],
    path,
):
    n_classes = len(class_names)
    n_categories = len(category_names)
    if p_scores.shape != (scene.n_cells, n_classes):
        raise ValueError(f"scene-class scores must be {(scene.n_cells, n_classes)}")
    if o_scores.shape != (scene.n_cells, n_categories):
        raise ValueError(f"object scores must be {(scene.n_cells, n_categories)}")
    for name in (scene.scene_id, *scene.vocabulary.names, *class_names, *category_names):
        _check_token(name)
    lines = [
        SCENE_SCHEMA,
        f"scene {scene.scene_id}",
        f"dims {scene.width} {scene.height} {fmt9(scene.cell_size_m)}",
        f"activities {scene.n_activities} " + " ".join(scene.vocabulary.names),
        f"classes {n_classes} " + " ".join(class_names),
        f"categories {n_categories} " + " ".join(category_names),
    ]
    explored = [(i, j) for i, j in scene.cells() if scene.explored[i, j]]
    lines.append(f"explored {len(explored)}")
    lines.extend(f"{i} {j}" for i, j in explored)
    labelled = scene.labelled_cells()
    lines.append(f"gt {len(labelled)}")
    for (i, j), acts in labelled:
        lines.append(f"{i} {j} {len(acts)} " + " ".join(str(a) for a in acts))
    demos = scene.demonstrations
    lines.append(f"demos {len(demos)}")
    for d in demos:
        lines.append(f"{d.cell[0]} {d.cell[1]} {d.activity} {fmt9(d.value)}")
    lines.append(f"poses {len(scene.poses)}")
    for pose in scene.poses:
        lines.append(
            f"{fmt9(pose.position[0])} {fmt9(pose.position[1])} "
            f"{fmt9(pose.heading[0])} {fmt9(pose.heading[1])}"
        )
    lines.append(f"features {scene.n_cells}")
    for row, (i, j) in enumerate(scene.cells()):
        vals = [fmt9(v) for v in p_scores[row]] + [fmt9(v) for v in o_scores[row]]
        lines.append(f"{i} {j} " + " ".join(vals))
    lines.append("end")
    _write_text(path, lines)


def read_scene(path):
    """Returns (scene, P, O, class_names, category_names)."""
    r = _Reader(path)
    r.check_schema(SCENE_SCHEMA)
    (scene_id,) = r.expect("scene")
    dims = r.expect("dims")
    if len(dims) != 3:
        raise r.error("dims needs width, height, cell size")
    width, height = r.int_(dims[0]), r.int_(dims[1])
    cell_size = r.float_(dims[2])
    act_toks = r.expect("activities")
    n_act = r.int_(act_toks[0])
    if len(act_toks) != n_act + 1:
        raise r.error(f"expected {n_act} activity names, found {len(act_toks) - 1}")
    vocab = ActivityVocabulary(tuple(act_toks[1:]))
    cls_toks = r.expect("classes")
    n_classes = r.int_(cls_toks[0])
    if len(cls_toks) != n_classes + 1:
        raise r.error(f"expected {n_classes} class names, found {len(cls_toks) - 1}")
    class_names = tuple(cls_toks[1:])
    cat_toks = r.expect("categories")
    n_categories = r.int_(cat_toks[0])
    if len(cat_toks) != n_categories + 1:
        raise r.error(f"expected {n_categories} category names, found {len(cat_toks) - 1}")
    category_names = tuple(cat_toks[1:])

    scene = SceneGrid(scene_id, width, height, cell_size, vocab)
    (n_explored,) = r.expect("explored")
    for _ in range(r.int_(n_explored)):
        toks = r.next()
        if len(toks) != 2:
            raise r.error("explored entries need two cell coordinates")
        scene.mark_explored((r.int_(toks[0]), r.int_(toks[1])))
    (n_gt,) = r.expect("gt")
    for _ in range(r.int_(n_gt)):
        toks = r.next()
        if len(toks) < 3:
            raise r.error("gt entries need cell, count, and activity indices")
        i, j, k = r.int_(toks[0]), r.int_(toks[1]), r.int_(toks[2])
        if len(toks) != 3 + k:
            raise r.error(f"gt entry announces {k} labels but has {len(toks) - 3}")
        for tok in toks[3:]:
            scene.add_label((i, j), r.int_(tok))
    (n_demos,) = r.expect("demos")
    for _ in range(r.int_(n_demos)):
        toks = r.next()
        if len(toks) != 4:
            raise r.error("demo entries need cell, activity, value")
        scene.add_demonstration(
            Demonstration(
                scene_id,
                (r.int_(toks[0]), r.int_(toks[1])),
                r.int_(toks[2]),
                r.float_(toks[3]),
            )
        )
    (n_poses,) = r.expect("poses")
    for _ in range(r.int_(n_poses)):
        toks = r.next()
        if len(toks) != 4:
            raise r.error("pose entries need position and heading")
        scene.add_pose(
            GridPose(
                position=(r.float_(toks[0]), r.float_(toks[1])),
                heading=(r.float_(toks[2]), r.float_(toks[3])),
            )
        )
    (n_feat,) = r.expect("features")
    if r.int_(n_feat) != scene.n_cells:
        raise r.error(f"feature section must cover all {scene.n_cells} cells")
    p_scores = np.zeros((scene.n_cells, n_classes))
    o_scores = np.zeros((scene.n_cells, n_categories))
    seen = np.zeros(scene.n_cells, dtype=bool)
    for _ in range(scene.n_cells):
        toks = r.next()
        if len(toks) != 2 + n_classes + n_categories:
            raise r.error(
                f"feature rows need cell_x, cell_y, {n_classes} class scores, "
                f"{n_categories} object scores"
            )
        row = scene.row_of((r.int_(toks[0]), r.int_(toks[1])))
        if seen[row]:
            raise r.error(f"duplicate feature row for cell {toks[0]},{toks[1]}")
        seen[row] = True
        vals = [r.float_(t) for t in toks[2:]]
        p_scores[row] = vals[:n_classes]
        o_scores[row] = vals[n_classes:]
    r.expect("end")
    return scene, p_scores, o_scores, class_names, category_names


# ---------------------------------------------------------------------------
# category-activity map and dataset manifests
# ---------------------------------------------------------------------------


def write_catmap(
    catmap: CategoryActivityMap,
    category_names: Sequence[str],
    activity_names: Sequence[str],
    path,
):
    for name in (*category_names, *activity_names):
        _check_token(name)
    lines = [
        CATMAP_SCHEMA,
        f"categories {len(category_names)} " + " ".join(category_names),
        f"activities {len(activity_names)} " + " ".join(activity_names),
        f"map {len(catmap.mapping)}",
    ]
    for cat in sorted(catmap.mapping):
        acts = sorted(catmap.mapping[cat])
        lines.append(
            f"{category_names[cat]} " + " ".join(activity_names[a] for a in acts)
        )
    lines.append("end")
    _write_text(path, lines)


def read_catmap(path):
    r = _Reader(path)
    r.check_schema(CATMAP_SCHEMA)
    cat_toks = r.expect("categories")
    n_categories = r.int_(cat_toks[0])
    category_names = tuple(cat_toks[1:])
    if len(category_names) != n_categories:
        raise r.error("category count does not match names")
    act_toks = r.expect("activities")
    n_act = r.int_(act_toks[0])
    activity_names = tuple(act_toks[1:])
    if len(activity_names) != n_act:
        raise r.error("activity count does not match names")
    (n_map,) = r.expect("map")
    pairs: dict[str, list[str]] = {}
    for _ in range(r.int_(n_map)):
        toks = r.next()
        if toks[0] not in category_names:
            raise r.error(f"unknown category {toks[0]!r}")
        for a in toks[1:]:
            if a not in activity_names:
                raise r.error(f"unknown activity {a!r}")
        pairs[toks[0]] = list(toks[1:])
    r.expect("end")
    catmap = CategoryActivityMap.from_names(pairs, category_names, activity_names)
    return catmap, category_names, activity_names


def write_dataset(dataset: GeneratedDataset, outdir, name: str = "dataset") -> str:
    """Write all scene documents, the category map, and the manifest."""
    os.makedirs(outdir, exist_ok=True)
    scene_files = []
    for scene in dataset.scenes:
        fname = f"{scene.scene_id}.scene"
        p, o = dataset.features[scene.scene_id]
        write_scene(
            scene, p, o, dataset.class_names, dataset.category_names,
            os.path.join(outdir, fname),
        )
        scene_files.append(fname)
    catmap_file = "catmap.txt"
    write_catmap(
        dataset.catmap,
        dataset.category_names,
        dataset.vocabulary.names,
        os.path.join(outdir, catmap_file),
    )
    manifest = os.path.join(outdir, f"{name}.txt")
    lines = [DATASET_SCHEMA, f"scenes {len(scene_files)}"]
    lines.extend(scene_files)
    lines.append(f"catmap {catmap_file}")
    lines.append("end")
    _write_text(manifest, lines)
    return manifest


def load_dataset(manifest_path) -> GeneratedDataset:
    r = _Reader(manifest_path)
    r.check_schema(DATASET_SCHEMA)
    (n_scenes,) = r.expect("scenes")
    base = os.path.dirname(os.path.abspath(manifest_path))
    scene_files = [r.next()[0] for _ in range(r.int_(n_scenes))]
    (catmap_file,) = r.expect("catmap")
    r.expect("end")

    scenes = []
    features = {}
    class_names = category_names = None
    for fname in scene_files:
        scene, p, o, cls, cats = read_scene(os.path.join(base, fname))
        if class_names is None:
            class_names, category_names = cls, cats
        elif cls != class_names or cats != category_names:
            raise SchemaError(
                manifest_path, 0,
                f"scene {scene.scene_id!r} uses different class/category names",
            )
        scenes.append(scene)
        features[scene.scene_id] = (p, o)
    catmap, cats, acts = read_catmap(os.path.join(base, catmap_file))
    if cats != category_names:
        raise SchemaError(manifest_path, 0, "category map names do not match scenes")
    if acts != scenes[0].vocabulary.names:
        raise SchemaError(manifest_path, 0, "category map activities do not match scenes")
    return GeneratedDataset(
        scenes=scenes,
        features=features,
        catmap=catmap,
        class_names=class_names,
        category_names=category_names,
    )


# ---------------------------------------------------------------------------
# factors, traces, action maps
# ---------------------------------------------------------------------------


def write_factors(factors: FactorPair, path):
    m, d = factors.U.shape
    a = factors.V.shape[0]
    lines = [FACTORS_SCHEMA, f"shape {m} {a} {d}", "U"]
    lines.extend(" ".join(fmt9(v) for v in row) for row in factors.U)
    lines.append("V")
    lines.extend(" ".join(fmt9(v) for v in row) for row in factors.V)
    lines.append("end")
    _write_text(path, lines)


def read_factors(path) -> FactorPair:
    r = _Reader(path)
    r.check_schema(FACTORS_SCHEMA)
    shape = r.expect("shape")
    if len(shape) != 3:
        raise r.error("shape needs M, A, D")
    m, a, d = (r.int_(t) for t in shape)
    r.expect("U")
    u = np.array([[r.float_(t) for t in r.next()] for _ in range(m)])
    v_head = r.next()
    if v_head != ["V"]:
        raise r.error("expected section 'V'")
    v = np.array([[r.float_(t) for t in r.next()] for _ in range(a)])
    r.expect("end")
    if u.shape != (m, d) or v.shape != (a, d):
        raise r.error("factor rows do not match the declared shape")
    return FactorPair(U=u, V=v)


def write_trace(trace: np.ndarray, path):
    lines = ["iteration\tobjective"]
    lines.extend(f"{k}\t{fmt9(j)}" for k, j in enumerate(trace))
    _write_text(path, lines)


def write_action_map(am: np.ndarray, index, path):
    """Normalized action map with scene/cell row labels."""
    names = index.vocabulary.names
    lines = [
        ACTIONMAP_SCHEMA,
        f"activities {len(names)} " + " ".join(names),
        f"rows {index.total_rows}",
    ]
    for scene in index.scenes:
        off = index.offsets[scene.scene_id]
        for row in range(scene.n_cells):
            i, j = scene.cell_of(row)
            vals = " ".join(fmt9(v) for v in am[off + row])
            lines.append(f"{scene.scene_id} {i} {j} {vals}")
    lines.append("end")
    _write_text(path, lines)


def read_action_map(path, index) -> np.ndarray:
    r = _Reader(path)
    r.check_schema(ACTIONMAP_SCHEMA)
    act_toks = r.expect("activities")
    n_act = r.int_(act_toks[0])
    if tuple(act_toks[1:]) != index.vocabulary.names:
        raise r.error("action map activities do not match the dataset")
    (n_rows,) = r.expect("rows")
    if r.int_(n_rows) != index.total_rows:
        raise r.error(
            f"action map has {n_rows} rows, dataset expects {index.total_rows}"
        )
    am = np.zeros((index.total_rows, n_act))
    seen = np.zeros(index.total_rows, dtype=bool)
    for _ in range(index.total_rows):
        toks = r.next()
        if len(toks) != 3 + n_act:
            raise r.error("action map rows need scene, cell, and per-activity values")
        row = index.row(toks[0], (r.int_(toks[1]), r.int_(toks[2])))
        if seen[row]:
            raise r.error(f"duplicate action map row for {toks[0]} {toks[1]},{toks[2]}")
        seen[row] = True
        am[row] = [r.float_(t) for t in toks[3:]]
    r.expect("end")
    return am


# ---------------------------------------------------------------------------
# reports, curves, heatmaps
# ---------------------------------------------------------------------------


def format_summary_value(metric: str, stats: tuple[float, float, float]) -> str:
    mx, mean, std = stats
    if metric.endswith("max_f1"):
        return fmt9(mx)
    return f"{fmt9(mean)} +- {fmt9(std)}"


def write_report(report: EvalReport, tsv_path, txt_path):
    rows = ["variant\talpha\tlambda\tgamma\tseed\tw_max_f1\tw_mean_f1\tmax_f1\tmean_f1\terror"]
    for row in report.rows:
        if row.scores is None:
            vals = ["nan"] * 4
        else:
            s = row.scores.summary()
            vals = [fmt9(s[m]) for m in SUMMARY_METRICS]
        rows.append(
            "\t".join(
                [
                    row.variant,
                    fmt9(row.alpha),
                    fmt9(row.lam),
                    fmt9(row.gamma),
                    str(row.seed),
                    *vals,
                    row.error.replace("\t", " ").replace("\n", " "),
                ]
            )
        )
    _write_text(tsv_path, rows)

    lines = ["Cross-run summary (max for Max metrics, mean +- stdev for Mean metrics)", ""]
    header = f"{'variant':<10}" + "".join(f"{h:>34}" for h in SUMMARY_HEADERS)
    lines.append(header)
    for variant, stats in report.summaries().items():
        cells = [format_summary_value(m, stats[m]) for m in SUMMARY_METRICS]
        lines.append(f"{variant:<10}" + "".join(f"{c:>34}" for c in cells))
    _write_text(txt_path, lines)


def write_method_table(rows: list[tuple[str, dict[str, str]]], path):
    """Method-by-metric table (the novel-scene comparison shape)."""
    lines = [f"{'method':<10}" + "".join(f"{h:>34}" for h in SUMMARY_HEADERS)]
    for method, cells in rows:
        lines.append(
            f"{method:<10}" + "".join(f"{cells[m]:>34}" for m in SUMMARY_METRICS)
        )
    _write_text(path, lines)


def write_curve(curve: DiscrepancyCurve, activity_names: Sequence[str], path):
    lines = ["k\tactivity\tmean_discrepancy"]
    for act, values in curve.per_activity.items():
        for k, v in zip(curve.k_values, values):
            lines.append(f"{k}\t{activity_names[act]}\t{fmt9(v)}")
    for k, v in zip(curve.k_values, curve.aggregate):
        lines.append(f"{k}\tall\t{fmt9(v)}")
    _write_text(path, lines)


def write_pgm(values: np.ndarray, path):
    """ASCII portable greymap; grey = round(255 * value), values in [0, 1]."""
    if values.min() < 0 or values.max() > 1:
        raise ValueError("heatmap values must lie in [0, 1]")
    width, height = values.shape
    grey = np.floor(values * 255.0 + 0.5).astype(int)
    lines = ["P2", f"{width} {height}", "255"]
    for j in range(height):
        lines.append(" ".join(str(grey[i, j]) for i in range(width)))
    _write_text(path, lines)
