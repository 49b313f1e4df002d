"""Command-line front end.

Subcommands: ``generate`` writes a labeled synthetic dataset, ``estimate``
fits articulation models to it, ``classify`` reports categories only,
``evaluate`` scores predictions against ground truth as CSV plus a printed
table, and ``benchmark`` chains the whole pipeline with optional noise
sweeps.  Every stochastic command takes an explicit ``--seed`` and is
byte-reproducible.  Exit codes: 0 success, 1 partial per-record failures,
2 fatal configuration or I/O errors.
"""

import argparse
import json
import sys
import time
import warnings
from collections import Counter
from dataclasses import replace

import numpy as np

from . import datagen, estimator, trajio
from .estimator import AxisSpreadWarning, LossWeights, RefineOptions
from .models import CategoryThresholds, ModelCategory

ALL_CATEGORIES = [ModelCategory.RIGID, ModelCategory.REVOLUTE,
                  ModelCategory.PRISMATIC, ModelCategory.HELICAL]

_NOISE_KEYS = ("frame_skip", "rot_sigma_deg", "trans_sigma", "config_sigma")


class CliError(Exception):
    """Fatal usage or I/O problem; maps to exit code 2."""


def _parse_pair(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected 'lo,hi'")
    return tuple(parts)


def _parse_floats(text):
    return [float(p) for p in text.split(",")]


def _parse_noise(pairs):
    values = {}
    for item in pairs or []:
        key, _, raw = item.partition("=")
        if key not in _NOISE_KEYS or not raw:
            raise CliError(f"bad --noise entry {item!r}; keys: {', '.join(_NOISE_KEYS)}")
        values[key] = float(raw)
    return datagen.NoiseSpec(
        frame_skip_prob=values.get("frame_skip", 0.0),
        rot_sigma=np.deg2rad(values.get("rot_sigma_deg", 0.0)),
        trans_sigma=values.get("trans_sigma", 0.0),
        config_sigma=values.get("config_sigma", 0.0),
    )


def _thresholds(args):
    return CategoryThresholds(eps_theta=args.eps_theta, eps_d=args.eps_d,
                              helical_pitch_tol=args.pitch_tol)


def _weights(args):
    vals = _parse_floats(args.weights)
    if len(vals) != 6:
        raise CliError("--weights expects six values: l1,l2,l3,l4,a1,a2")
    return LossWeights(*vals)


def _add_threshold_args(p):
    defaults = CategoryThresholds()
    p.add_argument("--eps-theta", type=float, default=defaults.eps_theta,
                   help="rotation-detection threshold, rad")
    p.add_argument("--eps-d", type=float, default=defaults.eps_d,
                   help="slide-detection threshold, m")
    p.add_argument("--pitch-tol", type=float, default=defaults.helical_pitch_tol,
                   help="relative pitch-coupling tolerance")


def _add_generation_args(p):
    p.add_argument("--category", default="all",
                   choices=[c.value for c in ALL_CATEGORIES] + ["all"])
    p.add_argument("--n-traj", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-frames", type=int, default=16)
    p.add_argument("--theta-range", type=_parse_pair, default=(0.0, np.pi / 2))
    p.add_argument("--d-range", type=_parse_pair, default=(0.0, 0.4))
    p.add_argument("--pitch-range", type=_parse_pair, default=(0.005, 0.05))
    p.add_argument("--axis-box", type=float, default=0.5,
                   help="half-width of the axis position box, m")
    p.add_argument("--pose-box", type=float, default=1.0)
    p.add_argument("--orientation", default="uniform", choices=["uniform", "axis_aligned"])
    p.add_argument("--noise", action="append", metavar="KEY=VALUE",
                   help="noise settings, e.g. frame_skip=0.1 rot_sigma_deg=0.5 "
                        "trans_sigma=0.002 config_sigma=0")
    p.add_argument("--jobs", type=int, default=1)


def _object_spec(args, category):
    half = args.axis_box
    return datagen.ObjectSpec(
        category=category, n_frames=args.n_frames,
        axis_position_low=(-half,) * 3, axis_position_high=(half,) * 3,
        orientation_mode=args.orientation, theta_range=args.theta_range,
        d_range=args.d_range, pitch_range=args.pitch_range, pose_box=args.pose_box)


def _category_cycle(args):
    if args.category == "all":
        return [ALL_CATEGORIES[i % 4] for i in range(args.n_traj)]
    return [ModelCategory(args.category)] * args.n_traj


def _generate_records(args, noise):
    categories = _category_cycle(args)
    specs = {c: _object_spec(args, c) for c in set(categories)}
    if args.jobs > 1:
        work = [(specs[c], args.seed, i, noise) for i, c in enumerate(categories)]
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            trajs = list(pool.map(datagen._make_trajectory_star, work,
                                  chunksize=max(1, len(work) // (4 * args.jobs))))
    else:
        trajs = [datagen.make_trajectory(specs[c], args.seed, i, noise)
                 for i, c in enumerate(categories)]
    return [(f"{c.value}-{i:05d}", t) for i, (c, t) in enumerate(zip(categories, trajs))]


def cmd_generate(args):
    noise = _parse_noise(args.noise)
    records = _generate_records(args, noise)
    trajio.write_trajectories(args.out, records)
    counts = Counter(t.gt_model.category.value for _, t in records)
    summary = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    print(f"wrote {len(records)} trajectories to {args.out} (seed={args.seed}; {summary})")
    return 0


def _fit_record(traj, method, thresholds, weights, opts):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AxisSpreadWarning)
        model = estimator.estimate_closed_form(traj.poses, traj.base_pose, thresholds)
    targets = estimator.canonicalize_steps(
        estimator.extract_step_screws(traj.poses, traj.base_pose), thresholds.eps_theta)
    closed_loss = estimator.sequence_loss(estimator.model_to_params(model), targets, weights)
    diagnostics = {"closed_form_loss": float(closed_loss)}
    if method == "refine":
        model = estimator.refine(model, traj.poses, traj.base_pose, weights, opts, thresholds)
        refined_loss = estimator.sequence_loss(estimator.model_to_params(model),
                                               targets, weights)
        diagnostics["refined_loss"] = float(refined_loss)
    return model, diagnostics


def cmd_estimate(args):
    thresholds = _thresholds(args)
    weights = _weights(args)
    opts = RefineOptions(max_iter=args.max_iter)
    try:
        records, errors = trajio.read_trajectories(args.input, strict=False)
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc}")
    if not records and not errors:
        print("no trajectories", file=sys.stderr)
        return 2

    rows = []
    for index, message in sorted(errors.items()):
        rows.append({"id": f"line-{index + 1}", "error": message})
    for traj_id, traj in records:
        model, diagnostics = _fit_record(traj, args.method, thresholds, weights, opts)
        rows.append(trajio.prediction_to_obj(traj_id, model, args.method, diagnostics))
    trajio.write_predictions(args.out, rows)

    n_err = len(errors)
    print(f"estimated {len(records)} trajectories ({n_err} failed records) -> {args.out}")
    if records and not errors:
        return 0
    return 2 if not records else 1


def cmd_classify(args):
    thresholds = _thresholds(args)
    try:
        records = trajio.read_trajectories(args.input)
    except (OSError, trajio.SchemaError) as exc:
        raise CliError(str(exc))
    if not records:
        print("no trajectories", file=sys.stderr)
        return 2
    rows = []
    counts = Counter()
    for traj_id, traj in records:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AxisSpreadWarning)
            model = estimator.estimate_closed_form(traj.poses, traj.base_pose, thresholds)
        rows.append({"id": traj_id, "category": model.category.value})
        counts[model.category.value] += 1
    if args.out:
        trajio.write_predictions(args.out, rows)
    print(", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return 0


def _evaluate_rows(gt_records, predictions, folded):
    gt_by_id = dict(gt_records)
    pred_by_id = {p[0]: p[1] for p in predictions}
    missing = sorted(set(gt_by_id) - set(pred_by_id))
    extra = sorted(set(pred_by_id) - set(gt_by_id))
    if missing or extra:
        raise CliError(f"prediction/ground-truth id mismatch; missing={missing[:5]} "
                       f"extra={extra[:5]} (showing up to 5)")
    rows = []
    for traj_id, traj in gt_records:
        report = estimator.evaluate(pred_by_id[traj_id], traj.gt_model)
        if folded:
            report = replace(report, orientation_deg=report.orientation_folded_deg)
        rows.append((traj.gt_model.category, report))
    return rows


def cmd_evaluate(args):
    try:
        gt_records = trajio.read_trajectories(args.gt)
        predictions = trajio.read_predictions(args.pred)
    except (OSError, trajio.SchemaError) as exc:
        raise CliError(str(exc))
    rows = _evaluate_rows(gt_records, predictions, args.folded)
    table = trajio.summarize_reports(rows)
    trajio.write_report_csv(args.out, table)
    print(trajio.format_report_table(table))
    print(f"report written to {args.out}")
    return 0


def cmd_benchmark(args):
    import os
    noise = _parse_noise(args.noise)
    weights = _weights(args)
    thresholds = _thresholds(args)
    opts = RefineOptions(max_iter=args.max_iter)
    os.makedirs(args.out_dir, exist_ok=True)

    if args.sweep_trans:
        levels = []
        base_t = noise.trans_sigma
        for v in _parse_floats(args.sweep_trans):
            scale = (v / base_t) if base_t > 0 else (1.0 if v > 0 else 0.0)
            levels.append(replace(noise, trans_sigma=v, rot_sigma=noise.rot_sigma * scale,
                                  config_sigma=noise.config_sigma * scale))
    else:
        levels = [noise]

    all_rows = []
    timings = []
    for li, level in enumerate(levels):
        t0 = time.perf_counter()
        records = _generate_records(args, level)
        data_path = os.path.join(args.out_dir, f"data_level{li}.jsonl")
        trajio.write_trajectories(data_path, records)
        t1 = time.perf_counter()

        pred_rows = []
        pairs = []
        for traj_id, traj in records:
            model, diagnostics = _fit_record(traj, args.method, thresholds, weights, opts)
            pred_rows.append(trajio.prediction_to_obj(traj_id, model, args.method, diagnostics))
            pairs.append((traj_id, model))
        trajio.write_predictions(os.path.join(args.out_dir, f"pred_level{li}.jsonl"), pred_rows)
        t2 = time.perf_counter()

        rows = _evaluate_rows(records, [(i, m, None, None) for i, m in pairs], args.folded)
        table = trajio.summarize_reports(rows)
        for row in table:
            row["noise_trans_m"] = level.trans_sigma
            all_rows.append(row)
        t3 = time.perf_counter()
        timings.append((li, t1 - t0, t2 - t1, t3 - t2))

    report_path = os.path.join(args.out_dir, "report.csv")
    trajio.write_report_csv(report_path, all_rows, extra_columns=["noise_trans_m"])
    meta = {"seed": args.seed, "n_traj": args.n_traj, "category": args.category,
            "method": args.method,
            "noise_levels": [lev.trans_sigma for lev in levels]}
    with open(os.path.join(args.out_dir, "meta.json"), "w", newline="\n") as fh:
        fh.write(json.dumps(meta, separators=(",", ":")) + "\n")

    _warn_non_monotone(all_rows)
    print(trajio.format_report_table(all_rows, extra_columns=["noise_trans_m"]))
    for li, gen_s, est_s, eva_s in timings:
        print(f"level {li}: generate {gen_s:.2f}s, estimate {est_s:.2f}s, evaluate {eva_s:.2f}s")
    print(f"report written to {report_path} (seed={args.seed})")
    return 0


def _warn_non_monotone(rows):
    by_cat = {}
    for row in rows:
        by_cat.setdefault(row["category"], []).append(row)
    for category, group in by_cat.items():
        group = sorted(group, key=lambda r: r["noise_trans_m"])
        for metric in ("ori_deg_mean", "pos_cm_mean"):
            values = [r[metric] for r in group]
            if any(b < a - 1e-12 for a, b in zip(values, values[1:])):
                print(f"warning: non-monotone {metric} across noise levels "
                      f"for {category}", file=sys.stderr)


def _apply_config_file(parser, argv):
    """Pull --config FILE out of argv and use its content as defaults."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    try:
        path = argv[idx + 1]
    except IndexError:
        raise CliError("--config needs a file argument")
    try:
        with open(path) as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot load config {path}: {exc}")
    if not isinstance(values, dict):
        raise CliError("config file must hold a JSON object of option defaults")
    parser.set_defaults(**{k.replace("-", "_"): v for k, v in values.items()})
    return argv[:idx] + argv[idx + 2:]


def build_parser():
    parser = argparse.ArgumentParser(prog="screwfit",
                                     description="screw-axis articulation model toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic labeled dataset")
    _add_generation_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("estimate", help="fit articulation models to a dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", default="closed_form", choices=["closed_form", "refine"])
    p.add_argument("--weights", default="1,2,1,1,1,1")
    p.add_argument("--max-iter", type=int, default=200)
    _add_threshold_args(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("classify", help="report model categories only")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    _add_threshold_args(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--folded", action="store_true",
                   help="fold anti-parallel axis errors onto [0, 90] deg")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="generate, corrupt, estimate and evaluate")
    _add_generation_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--method", default="refine", choices=["closed_form", "refine"])
    p.add_argument("--weights", default="1,2,1,1,1,1")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--sweep-trans", help="comma list of translation sigmas (m); "
                                         "other sigmas scale proportionally")
    p.add_argument("--folded", action="store_true")
    _add_threshold_args(p)
    p.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
