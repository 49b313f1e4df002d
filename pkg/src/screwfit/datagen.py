"""Synthetic articulated-object trajectories with screw-displacement labels.

An instance is a joint axis sampled in the base-object frame plus a monotone
sequence of joint configurations.  A trajectory realizes the instance as
world-frame poses of the moving part and labels each frame k > 1 with the
screw displacement taking the first pose to pose k, re-expressed in the
base-object frame (the configuration scalars are frame-invariant, only the
axis is transported).  Corruption models irregular observation timing by
dropping interior frames and sensor error by jittering the poses.

Everything is driven by explicit integer seeds; identical (spec, seed)
inputs produce identical outputs, and distinct trajectories use independent
streams derived from (master seed, index), so batch generation can be
parallelized freely.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geom3d import Pose, PluckerLine, Rotation, pose_motion_matrix, transform_line, unit
from .models import ArticulationModel, ModelCategory
from .screws import ScrewDisplacement, apply_screw, screw_from_relative_pose, transform_screw

_AXIS_ALIGNED = [(1.0, 0.0, 0.0), (-1.0, 0.0, 0.0), (0.0, 1.0, 0.0),
                 (0.0, -1.0, 0.0), (0.0, 0.0, 1.0), (0.0, 0.0, -1.0)]


@dataclass(frozen=True)
class ObjectSpec:
    """Sampling bounds for one articulated-object category.

    The joint axis position is drawn uniformly from a box in the base-object
    frame and its orientation either uniformly from the sphere or from the
    six signed coordinate axes.  Configurations are sorted uniform draws
    (a monotone opening motion); helical instances couple slide to rotation
    through a per-instance pitch drawn from ``pitch_range``.  Base and
    initial moving-part poses are drawn from ``pose_box`` with uniform
    random orientation.
    """

    category: ModelCategory
    n_frames: int = 16
    axis_position_low: tuple = (-0.5, -0.5, -0.5)
    axis_position_high: tuple = (0.5, 0.5, 0.5)
    orientation_mode: str = "uniform"  # or "axis_aligned"
    theta_range: tuple = (0.0, math.pi / 2)
    d_range: tuple = (0.0, 0.4)
    pitch_range: tuple = (0.02, 0.1)
    pose_box: float = 1.0

    def __post_init__(self):
        if not isinstance(self.category, ModelCategory):
            object.__setattr__(self, "category", ModelCategory(self.category))
        if self.n_frames < 2:
            raise ValueError("need at least two frames")
        if self.orientation_mode not in ("uniform", "axis_aligned"):
            raise ValueError(f"unknown orientation mode {self.orientation_mode!r}")
        lo = np.asarray(self.axis_position_low, dtype=float)
        hi = np.asarray(self.axis_position_high, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi < lo):
            raise ValueError("axis position box is degenerate")
        cat = self.category
        if cat in (ModelCategory.REVOLUTE, ModelCategory.HELICAL):
            if not self.theta_range[1] > self.theta_range[0] >= 0.0:
                raise ValueError("theta range is degenerate")
        if cat is ModelCategory.PRISMATIC:
            if not self.d_range[1] > self.d_range[0] >= 0.0:
                raise ValueError("d range is degenerate")
        if cat is ModelCategory.HELICAL:
            if not self.pitch_range[1] >= self.pitch_range[0] > 0.0:
                raise ValueError("pitch range is degenerate")
        if self.pose_box <= 0:
            raise ValueError("pose box must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    """Corruption parameters.

    ``frame_skip_prob`` drops each interior frame independently; the first
    and last frames always survive.  Pose jitter perturbs every observed
    pose the way a pose sensor errs: the orientation wobbles about the
    pose's own origin by an angle of N(0, rot_sigma) about a uniformly
    random axis, and the position shifts by a length of N(0, trans_sigma)
    along a uniformly random direction.  ``config_sigma`` rattles the joint
    itself: each non-reference pose is additionally displaced along the true
    axis by N(0, sigma) in both theta and d.
    """

    frame_skip_prob: float = 0.0
    rot_sigma: float = 0.0
    trans_sigma: float = 0.0
    config_sigma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.frame_skip_prob <= 1.0:
            raise ValueError("frame_skip_prob must be in [0, 1]")
        if self.rot_sigma < 0 or self.trans_sigma < 0 or self.config_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")

    def is_zero(self):
        return (self.frame_skip_prob == 0.0 and self.rot_sigma == 0.0
                and self.trans_sigma == 0.0 and self.config_sigma == 0.0)


class SampledInstance(NamedTuple):
    gt_model: ArticulationModel
    base_pose: Pose


@dataclass(frozen=True)
class LabeledTrajectory:
    """A pose sequence with its ground-truth model and per-frame labels.

    ``labels[k]`` is the screw displacement between ``poses[0]`` and
    ``poses[k + 1]`` expressed in the base-object frame; the ground-truth
    model's configs match the labels' scalars.
    """

    poses: tuple
    base_pose: Pose
    labels: tuple
    gt_model: ArticulationModel
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) != len(self.poses) - 1:
            raise ValueError("need exactly one label per non-reference frame")
        if len(self.gt_model.configs) != len(self.labels):
            raise ValueError("ground-truth configs must match the labels")

    @property
    def n_frames(self):
        return len(self.poses)


def _sample_direction(spec, rng):
    if spec.orientation_mode == "axis_aligned":
        return np.array(_AXIS_ALIGNED[rng.integers(len(_AXIS_ALIGNED))])
    return unit(rng.normal(size=3))


def _sample_configs(spec, rng):
    k = spec.n_frames - 1
    cat = spec.category
    if cat is ModelCategory.RIGID:
        return [(0.0, 0.0)] * k
    if cat is ModelCategory.REVOLUTE:
        thetas = np.sort(rng.uniform(*spec.theta_range, size=k))
        return [(float(t), 0.0) for t in thetas]
    if cat is ModelCategory.PRISMATIC:
        ds = np.sort(rng.uniform(*spec.d_range, size=k))
        return [(0.0, float(d)) for d in ds]
    pitch = float(rng.uniform(*spec.pitch_range))
    thetas = np.sort(rng.uniform(*spec.theta_range, size=k))
    return [(float(t), pitch * float(t)) for t in thetas]


def _random_pose(rng, box):
    return Pose(Rotation.random(rng), rng.uniform(-box, box, size=3))


def sample_instance(spec, seed):
    """Draw one ground-truth instance: shared axis, configs, base pose.

    Deterministic for a fixed (spec, seed).  The rigid axis is the
    conventional +z origin line and a prismatic axis uses its canonical
    through-the-origin representative, since a pure slide carries no
    positional information.
    """
    rng = np.random.default_rng(seed)
    direction = _sample_direction(spec, rng)
    position = rng.uniform(np.asarray(spec.axis_position_low, dtype=float),
                           np.asarray(spec.axis_position_high, dtype=float))
    configs = _sample_configs(spec, rng)
    base_pose = _random_pose(rng, spec.pose_box)

    if spec.category is ModelCategory.RIGID:
        axis = PluckerLine((0.0, 0.0, 1.0), (0.0, 0.0, 0.0))
    elif spec.category is ModelCategory.PRISMATIC:
        axis = PluckerLine(direction, (0.0, 0.0, 0.0))
    else:
        axis = PluckerLine(direction, np.cross(position, direction))

    return SampledInstance(ArticulationModel(spec.category, axis, configs), base_pose)


def generate_trajectory(instance, spec, seed):
    """Realize an instance as world poses plus base-frame screw labels.

    The moving part starts at a random pose and each later frame applies the
    instance's screw about the world-frame axis.  Labels are recovered the
    observable way: decompose pose k against pose 1, then transport the axis
    into the base-object frame, leaving (theta, d) untouched.
    """
    rng = np.random.default_rng(seed)
    gt = instance.gt_model
    base = instance.base_pose

    first = _random_pose(rng, spec.pose_box)
    axis_world = _transform_axis(gt.axis, base)
    poses = [first]
    for theta, d in gt.configs:
        step = apply_screw(ScrewDisplacement(axis_world, theta, d))
        poses.append(step @ first)

    labels = _label_poses(poses, base)
    return LabeledTrajectory(poses, base, labels, gt, seed)


def _transform_axis(axis, pose):
    return transform_line(pose_motion_matrix(pose), axis)


def _label_poses(poses, base):
    first = poses[0]
    first_inv = first.inverse()
    D = pose_motion_matrix(base.inverse() @ first)
    return tuple(transform_screw(screw_from_relative_pose(first_inv @ p), D)
                 for p in poses[1:])


def _jitter_pose(pose, noise, rng):
    # Orientation and position are perturbed independently, the way a pose
    # sensor errs: the rotation wobbles about the pose's own origin.
    angle = rng.normal(0.0, noise.rot_sigma)
    rot_axis = unit(rng.normal(size=3))
    shift = rng.normal(0.0, noise.trans_sigma) * unit(rng.normal(size=3))
    return Pose(Rotation.from_axis_angle(rot_axis, angle) @ pose.rotation,
                pose.translation + shift)


def corrupt(trajectory, noise, seed):
    """Apply frame skipping and pose jitter; ground truth stays clean.

    Interior frames are dropped independently with ``frame_skip_prob``
    (labels are relative to the first frame, so surviving labels stay
    valid).  The retained ground-truth configs and labels are the noiseless
    ones, for evaluation against the corrupted poses.
    """
    if noise.is_zero():
        return trajectory
    rng = np.random.default_rng(seed)
    n = trajectory.n_frames

    keep = [0]
    if n > 2:
        drops = rng.random(n - 2) < noise.frame_skip_prob
        keep.extend(i + 1 for i in range(n - 2) if not drops[i])
    keep.append(n - 1)
    if len(keep) < 2:
        raise ValueError("frame skipping left fewer than two frames")

    poses = [trajectory.poses[i] for i in keep]
    labels = [trajectory.labels[i - 1] for i in keep[1:]]
    gt = trajectory.gt_model
    configs = [gt.configs[i - 1] for i in keep[1:]]
    base = trajectory.base_pose

    if noise.config_sigma > 0.0:
        axis_world = _transform_axis(gt.axis, base)
        rattled = [poses[0]]
        for p in poses[1:]:
            dtheta = rng.normal(0.0, noise.config_sigma)
            dd = rng.normal(0.0, noise.config_sigma)
            rattled.append(apply_screw(ScrewDisplacement(axis_world, dtheta, dd)) @ p)
        poses = rattled

    if noise.rot_sigma > 0.0 or noise.trans_sigma > 0.0:
        base = _jitter_pose(base, noise, rng)
        poses = [_jitter_pose(p, noise, rng) for p in poses]

    clean_gt = ArticulationModel(gt.category, gt.axis, configs)
    return LabeledTrajectory(poses, base, labels, clean_gt, trajectory.seed)


def derive_seeds(master_seed, index, count=3):
    """Independent child seeds for trajectory ``index`` of a batch."""
    ss = np.random.SeedSequence(entropy=(int(master_seed), int(index)))
    return [int(s) for s in ss.generate_state(count, np.uint64)]


def make_trajectory(spec, master_seed, index, noise=None):
    """Sample, realize and optionally corrupt trajectory ``index``."""
    s_inst, s_traj, s_noise = derive_seeds(master_seed, index)
    traj = generate_trajectory(sample_instance(spec, s_inst), spec, s_traj)
    if noise is not None and not noise.is_zero():
        traj = corrupt(traj, noise, s_noise)
    return traj


def make_dataset(spec, count, master_seed, noise=None, jobs=1):
    """Generate ``count`` independent trajectories from one spec.

    Results are ordered by index regardless of ``jobs``; each index derives
    its own seed stream, so parallel output equals sequential output.
    """
    if jobs <= 1:
        return [make_trajectory(spec, master_seed, i, noise) for i in range(count)]
    from concurrent.futures import ProcessPoolExecutor
    args = [(spec, master_seed, i, noise) for i in range(count)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_make_trajectory_star, args, chunksize=max(1, count // (4 * jobs))))


def _make_trajectory_star(args):
    return make_trajectory(*args)
