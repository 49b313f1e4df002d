"""On-disk formats: trajectory datasets, prediction files and CSV reports.

Datasets and predictions are JSON Lines, one object per trajectory, with
quaternions ordered w-first and all quantities in meters/radians; degrees
and centimeters appear only in reports.  Serialization uses the shortest
round-trip float representation, so identical values produce identical
bytes and seeded runs are byte-reproducible.
"""

import csv
import json

import numpy as np

from .datagen import LabeledTrajectory
from .geom3d import PluckerLine, Pose, Rotation
from .models import ArticulationModel, ModelCategory
from .screws import ScrewDisplacement

CATEGORY_ORDER = [ModelCategory.RIGID, ModelCategory.REVOLUTE,
                  ModelCategory.PRISMATIC, ModelCategory.HELICAL]

REPORT_COLUMNS = ["category", "n", "ori_deg_mean", "ori_deg_std", "pos_cm_mean",
                  "pos_cm_std", "cfg_mean", "cfg_std", "cfg_unit", "acc"]

# Configuration errors are reported in the unit of the category's moving
# channel; prismatic joints slide, the rest are angle-dominated.
CONFIG_UNITS = {ModelCategory.RIGID: "deg", ModelCategory.REVOLUTE: "deg",
                ModelCategory.PRISMATIC: "cm", ModelCategory.HELICAL: "deg"}


class SchemaError(ValueError):
    """A record does not satisfy the trajectory file schema."""


def _floats(x):
    return [float(v) for v in np.asarray(x, dtype=float)]


def _pose_obj(pose):
    return {"q": _floats(pose.rotation.q), "t": _floats(pose.translation)}


def _pose_from_obj(obj, where):
    try:
        q = obj["q"]
        t = obj["t"]
    except (KeyError, TypeError):
        raise SchemaError(f"{where}: pose needs 'q' and 't'")
    if len(q) != 4 or len(t) != 3:
        raise SchemaError(f"{where}: pose has wrong arity")
    norm = float(np.linalg.norm(q))
    if abs(norm - 1.0) > 1e-6:
        raise SchemaError(f"{where}: quaternion norm {norm} is not 1")
    return Pose(Rotation(q), t)


def _line_from_obj(l, m, where):
    try:
        return PluckerLine(l, m)
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}")


def trajectory_to_obj(traj_id, traj):
    gt = traj.gt_model
    return {
        "id": traj_id,
        "seed": int(traj.seed),
        "category": gt.category.value,
        "n_frames": traj.n_frames,
        "base_pose": _pose_obj(traj.base_pose),
        "poses": [_pose_obj(p) for p in traj.poses],
        "labels": [{"l": _floats(s.axis.direction), "m": _floats(s.axis.moment),
                    "theta": float(s.theta), "d": float(s.d)} for s in traj.labels],
        "gt": {"l": _floats(gt.axis.direction), "m": _floats(gt.axis.moment),
               "configs": [[float(t), float(d)] for t, d in gt.configs]},
    }


def trajectory_from_obj(obj):
    """Parse and validate one dataset record; raises SchemaError."""
    try:
        traj_id = obj["id"]
        seed = int(obj["seed"])
        category = ModelCategory(obj["category"])
        n_frames = int(obj["n_frames"])
        base = obj["base_pose"]
        poses = obj["poses"]
        labels = obj["labels"]
        gt = obj["gt"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed record: {exc}")
    where = f"record {traj_id!r}"
    if len(poses) != n_frames or n_frames < 2:
        raise SchemaError(f"{where}: expected {n_frames} >= 2 poses, got {len(poses)}")
    if len(labels) != n_frames - 1:
        raise SchemaError(f"{where}: expected {n_frames - 1} labels, got {len(labels)}")
    if len(gt.get("configs", [])) != n_frames - 1:
        raise SchemaError(f"{where}: ground truth needs {n_frames - 1} configs")

    base_pose = _pose_from_obj(base, where)
    pose_list = [_pose_from_obj(p, where) for p in poses]
    label_list = [ScrewDisplacement(_line_from_obj(s["l"], s["m"], where),
                                    s["theta"], s["d"]) for s in labels]
    gt_model = ArticulationModel(category, _line_from_obj(gt["l"], gt["m"], where),
                                 [(c[0], c[1]) for c in gt["configs"]])
    traj = LabeledTrajectory(pose_list, base_pose, label_list, gt_model, seed)
    return traj_id, traj


def _dump_line(obj):
    return json.dumps(obj, separators=(",", ":")) + "\n"


def write_trajectories(path, records):
    """Write (id, trajectory) pairs as JSON Lines."""
    with open(path, "w", newline="\n") as fh:
        for traj_id, traj in records:
            fh.write(_dump_line(trajectory_to_obj(traj_id, traj)))


def read_trajectories(path, strict=True):
    """Read a dataset.  With ``strict`` any bad record raises; otherwise
    returns (records, errors) where errors maps record index to message."""
    records = []
    errors = {}
    with open(path) as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                records.append(trajectory_from_obj(json.loads(line)))
            except (json.JSONDecodeError, SchemaError) as exc:
                if strict:
                    raise SchemaError(f"line {i + 1}: {exc}")
                errors[i] = str(exc)
    if strict:
        return records
    return records, errors


def prediction_to_obj(traj_id, model, method, diagnostics=None):
    return {
        "id": traj_id,
        "method": method,
        "category": model.category.value,
        "l": _floats(model.axis.direction),
        "m": _floats(model.axis.moment),
        "configs": [[float(t), float(d)] for t, d in model.configs],
        "diagnostics": diagnostics or {},
    }


def prediction_from_obj(obj):
    try:
        traj_id = obj["id"]
        category = ModelCategory(obj["category"])
        model = ArticulationModel(category, _line_from_obj(obj["l"], obj["m"],
                                                           f"prediction {traj_id!r}"),
                                  [(c[0], c[1]) for c in obj["configs"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed prediction: {exc}")
    return traj_id, model, obj.get("method", ""), obj.get("diagnostics", {})


def write_predictions(path, rows):
    with open(path, "w", newline="\n") as fh:
        for row in rows:
            fh.write(_dump_line(row))


def read_predictions(path):
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                out.append(prediction_from_obj(json.loads(line)))
    return out


def summarize_reports(rows):
    """Aggregate (gt_category, ErrorReport) pairs into report rows.

    Per category: mean and population std of the orientation error (deg),
    position error (cm) and per-trajectory mean configuration error in the
    category's unit, plus category accuracy.
    """
    by_cat = {}
    for category, report in rows:
        by_cat.setdefault(category, []).append(report)

    table = []
    for category in CATEGORY_ORDER:
        reports = by_cat.get(category)
        if not reports:
            continue
        unit = CONFIG_UNITS[category]
        ori = np.array([r.orientation_deg for r in reports])
        pos = np.array([r.position_cm for r in reports])
        if unit == "cm":
            cfg = np.array([float(np.mean(r.config_trans_cm)) for r in reports])
        else:
            cfg = np.array([float(np.mean(r.config_rot_deg)) for r in reports])
        acc = float(np.mean([r.category_match for r in reports]))
        table.append({
            "category": category.value,
            "n": len(reports),
            "ori_deg_mean": float(np.mean(ori)), "ori_deg_std": float(np.std(ori)),
            "pos_cm_mean": float(np.mean(pos)), "pos_cm_std": float(np.std(pos)),
            "cfg_mean": float(np.mean(cfg)), "cfg_std": float(np.std(cfg)),
            "cfg_unit": unit, "acc": acc,
        })
    return table


def _format_cell(value):
    if isinstance(value, float):
        return format(value, ".6f")
    return str(value)


def write_report_csv(path, table, extra_columns=()):
    """Write report rows with fixed columns, '.' decimals and LF endings."""
    columns = list(extra_columns) + REPORT_COLUMNS
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in table:
            writer.writerow([_format_cell(row[c]) for c in columns])


def format_report_table(table, extra_columns=()):
    """Human-readable fixed-width rendering of report rows."""
    columns = list(extra_columns) + REPORT_COLUMNS
    cells = [columns] + [[_format_cell(row[c]) for c in columns] for row in table]
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
