"""Articulation-model estimation from pose sequences.

Two stages: a closed-form pass that decomposes each observed pose into a
screw displacement, transports it to the base-object frame, aggregates a
shared axis and classifies the category; and an optional refinement pass
that polishes the shared axis and the per-step configurations by minimizing
a multi-objective loss against the per-step screws with a damped
Gauss-Newton loop.

The loss combines axis orientation mismatch, the spatial distance between
the axes, a penalty keeping the axis on its constraint manifold
(unit direction, orthogonal moment), and configuration errors measured
through the rotations and slides they induce.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .geom3d import (INTERSECT_TOL, PARALLEL_TOL, PluckerLine, axis_angle_between,
                     line_distance, pose_motion_matrix, skew)
from .models import (ArticulationModel, CategoryThresholds, ModelCategory,
                     _classify_configs, aggregate_axes, axis_spread, classify,
                     AXIS_SPREAD_MAX_RAD)
from .screws import (ScrewDisplacement, apply_screw, screw_from_relative_pose,
                     transform_screw)


@dataclass(frozen=True)
class LossWeights:
    """Weights of the loss components.

    ``lambda1`` scales axis orientation, ``lambda2`` axis distance,
    ``lambda3`` the constraint penalty and ``lambda4`` the configuration
    term, inside which ``alpha1`` scales the rotational and ``alpha2`` the
    translational error.
    """

    lambda1: float = 1.0
    lambda2: float = 2.0
    lambda3: float = 1.0
    lambda4: float = 1.0
    alpha1: float = 1.0
    alpha2: float = 1.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "alpha1", "alpha2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class LossBreakdown:
    l_s_ori: float
    l_s_dist: float
    l_s_cons: float
    l_theta: float
    l_d: float
    total: float


@dataclass(frozen=True)
class ErrorReport:
    """Axis and configuration errors in reporting units (degrees / cm).

    ``orientation_deg`` is the raw angle in [0, 180]; the folded variant
    maps anti-parallel axes onto [0, 90].  Per-step configuration errors
    carry the rotational part in degrees and the translational part in cm.
    """

    orientation_deg: float
    orientation_folded_deg: float
    position_cm: float
    config_rot_deg: np.ndarray
    config_trans_cm: np.ndarray
    category_match: bool


@dataclass(frozen=True)
class RefineOptions:
    max_iter: int = 200
    gtol: float = 1e-10
    ftol: float = 1e-14
    mu0: float = 1e-3
    mu_max: float = 1e12


class RefinementError(RuntimeError):
    """Optimization hit a non-finite loss; carries the last valid params."""

    def __init__(self, message, last_params):
        super().__init__(message)
        self.last_params = last_params


def _rodrigues(axis, angle):
    K = skew(axis)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def loss(pred, target, weights=None):
    """Loss between a predicted and a target articulation model.

    Orientation and distance compare the shared axes; the constraint term
    penalizes the predicted axis leaving its manifold; the configuration
    terms compare, per step, the induced rotation matrices (Frobenius norm
    of ``I - R_tar R_pred^T``) and the induced slide vectors
    ``d * direction``.  Raises ValueError on mismatched config counts.
    """
    w = weights or LossWeights()
    if len(pred.configs) != len(target.configs):
        raise ValueError("predicted and target models must have the same number of configs")
    lp, mp = pred.axis.direction, pred.axis.moment
    lt = target.axis.direction

    l_s_ori = axis_angle_between(lp, lt)
    l_s_dist = line_distance(pred.axis, target.axis)
    l_s_cons = abs(float(lp @ mp)) + abs(float(np.linalg.norm(lp)) - 1.0)

    l_theta = 0.0
    l_d = 0.0
    for (tp, dp), (tt, dt) in zip(pred.configs, target.configs):
        Rt = _rodrigues(lt, tt)
        Rp = _rodrigues(lp, tp)
        l_theta += float(np.linalg.norm(np.eye(3) - Rt @ Rp.T))
        l_d += float(np.linalg.norm(dt * lt - dp * lp))

    total = (w.lambda1 * l_s_ori + w.lambda2 * l_s_dist + w.lambda3 * l_s_cons
             + w.lambda4 * (w.alpha1 * l_theta + w.alpha2 * l_d))
    return LossBreakdown(l_s_ori, l_s_dist, l_s_cons, l_theta, l_d, total)


# ---------------------------------------------------------------------------
# Sequence objective for refinement: the same loss components evaluated
# against per-step target screws, as a function of the flat parameter vector
# x = (l[3], m[3], theta[K], d[K]).  Axis terms sum over non-degenerate
# targets only; a zero-motion step carries no axis information.
# ---------------------------------------------------------------------------

def extract_step_screws(poses, base):
    """Per-step screws of each pose relative to the first, in the base frame."""
    poses = list(poses)
    if len(poses) < 2:
        raise ValueError("need at least two poses")
    first = poses[0]
    first_inv = first.inverse()
    D = pose_motion_matrix(base.inverse() @ first)
    return [transform_screw(screw_from_relative_pose(first_inv @ p), D)
            for p in poses[1:]]


def canonicalize_steps(screws, eps_theta):
    """Snap a rotation-free sequence onto its canonical translation form.

    The decomposition of a near-pure translation with a whisper of rotation
    noise puts its axis arbitrarily far away along the noise direction.
    When the sequence shows no real rotation it is therefore re-expressed
    as pure slides (direction along each step's displacement, moment zero,
    slide equal to its length).  Two robustness details: a single step over
    ``eps_theta`` is tolerated as an outlier (all steps over it means real
    rotation, and then everything passes through untouched), and the
    common displacement offset that a noisy reference frame imprints on
    every step is removed, perpendicular to the principal slide direction,
    before the directions are read off.
    """
    screws = list(screws)
    mags = sorted(abs(s.theta) for s in screws)
    trigger = mags[-2] if len(mags) >= 2 else mags[-1]
    if trigger > eps_theta:
        return screws

    T = np.array([apply_screw(s).translation for s in screws])
    if len(T) >= 2:
        center = T.mean(axis=0)
        spread = T - center
        if float(np.max(np.linalg.norm(spread, axis=1))) > 1e-12:
            _, vecs = np.linalg.eigh(spread.T @ spread)
            v = vecs[:, -1]
            if float(T.sum(axis=0) @ v) < 0.0:
                v = -v
            offset = center - float(center @ v) * v
            T = T - offset

    out = []
    for t in T:
        tn = float(np.linalg.norm(t))
        if tn < 1e-12:
            out.append(ScrewDisplacement(
                PluckerLine((0.0, 0.0, 1.0), (0.0, 0.0, 0.0)), 0.0, 0.0))
        else:
            out.append(ScrewDisplacement(PluckerLine(t / tn, np.zeros(3)), 0.0, tn))
    return out


def model_to_params(model):
    """Flatten a model into the (l, m, thetas, ds) parameter vector."""
    return np.concatenate([model.axis.direction, model.axis.moment,
                           model.thetas, model.ds])


def params_to_model(params, thresholds=None):
    """Rebuild a model from a parameter vector.

    The direction is renormalized and the moment projected back onto the
    constraint manifold; the category is re-derived from the configs.
    """
    th = thresholds or CategoryThresholds()
    l, m, thetas, ds = _split_params(np.asarray(params, dtype=float))
    l = l / np.linalg.norm(l)
    m = m - (l @ m) * l
    category = _classify_configs(thetas, ds, th)
    return ArticulationModel(category, PluckerLine(l, m), list(zip(thetas, ds)))


def _split_params(x):
    k = (x.size - 6) // 2
    return x[0:3], x[3:6], x[6:6 + k], x[6 + k:]


def _prepare_targets(targets):
    prepared = []
    for s in targets:
        u = s.axis.direction
        mk = s.axis.moment
        prepared.append({
            "u": u,
            "m": mk,
            "R": _rodrigues(u, s.theta),
            "dvec": s.d * u,
            "degenerate": s.is_degenerate(),
        })
    return prepared


def sequence_loss(params, targets, weights=None):
    """Total loss of a parameter vector against per-step target screws."""
    return _sequence_eval(params, _prepare_targets(targets), weights or LossWeights(),
                          want_grad=False)[0]


def gradient_of_loss(params, targets, weights=None):
    """Analytic gradient of ``sequence_loss`` w.r.t. the parameter vector.

    At non-differentiable points (a component sitting exactly at its
    minimum) the zero subgradient is returned.
    """
    return _sequence_eval(params, _prepare_targets(targets), weights or LossWeights(),
                          want_grad=True)[1]


def _sequence_eval(params, prepared, w, want_grad, want_hess=False, projected=False):
    """Evaluate loss, gradient and (optionally) a Gauss-Newton curvature.

    With ``projected=False`` derivatives are taken w.r.t. the raw parameter
    vector (the contract of ``gradient_of_loss``).  With ``projected=True``
    the function differentiates the loss composed with the feasibility map
    (direction renormalized, moment re-orthogonalized), which is what the
    refinement loop actually evaluates after each step; without that chain
    the gradient is dominated by constraint-normal components that the
    post-step projection wipes out.

    The curvature is the reweighted-least-squares approximation: each
    component phi contributes ``(c / phi) * outer(grad phi, grad phi)``
    (plus the exact cross-free terms of the vector-valued slide residual),
    which makes the damped Newton step a Gauss-Newton step on the
    linearized residuals.
    """
    x = np.asarray(params, dtype=float)
    l, m, thetas, ds = _split_params(x)
    K = thetas.size
    dim = x.size

    n = np.linalg.norm(l)
    lhat = l / n
    tangent = np.eye(3) - np.outer(lhat, lhat)
    P = tangent / n  # d lhat / d l

    total = 0.0
    grad = np.zeros(dim) if want_grad or want_hess else None
    H = np.zeros((dim, dim)) if want_hess else None

    # Residuals below this size count as converged; capping the reweighting
    # there keeps the Gauss-Newton curvature of a vanishing component from
    # swamping the system.
    irls_floor = 1e-4

    def assemble(g_lhat=None, g_m=None, extras=()):
        """Chain per-block derivatives into a full-dimension gradient."""
        g = np.zeros(dim)
        if g_lhat is not None:
            g[0:3] = P @ g_lhat
        if g_m is not None:
            if projected:
                radial = float(lhat @ g_m)
                g[3:6] = g_m - radial * lhat
                g[0:3] -= radial * m
            else:
                g[3:6] = g_m
        for idx, val in extras:
            g[idx] = val
        return g

    def add_scalar_block(value, g_block, weight, add_curvature=True):
        nonlocal total
        total += weight * value
        if grad is not None and g_block is not None:
            grad[:] += weight * g_block
            if H is not None and add_curvature and value > 0.0:
                H[:] += np.outer(g_block, g_block) * (weight / max(value, irls_floor))

    # Constraint penalty on the raw axis parameters.  Composed with the
    # feasibility map it vanishes identically, so the projected mode keeps
    # its (numerically zero) value but carries no derivative.
    dot_lm = float(l @ m)
    norm_dev = n - 1.0
    cons = abs(dot_lm) + abs(norm_dev)
    if grad is not None and not projected:
        g = np.zeros(dim)
        g[0:3] = np.sign(dot_lm) * m + np.sign(norm_dev) * lhat
        g[3:6] = np.sign(dot_lm) * l
    else:
        g = None
    add_scalar_block(cons, g, w.lambda3)

    for k, tgt in enumerate(prepared):
        u = tgt["u"]
        theta_k = thetas[k]
        d_k = ds[k]

        if not tgt["degenerate"]:
            # Axis orientation: angle between directions.
            c = float(lhat @ u)
            cross = np.cross(lhat, u)
            s = float(np.linalg.norm(cross))
            ang = float(np.arctan2(s, c))
            if grad is not None and s > 1e-12:
                g = assemble(g_lhat=(c * lhat - u) / s)
            else:
                g = None
            add_scalar_block(ang, g, w.lambda1)

            # Axis distance (three-case line distance on the raw axis).
            dist, gl, gm = _line_distance_grads(lhat, m, u, tgt["m"], want_grad)
            if grad is not None and gl is not None:
                g = assemble(g_lhat=gl, g_m=gm)
            else:
                g = None
            add_scalar_block(dist, g, w.lambda2)

        # Rotational configuration error through the induced rotations.
        Rk = tgt["R"]
        Khat = skew(lhat)
        K2 = Khat @ Khat
        sin_t, cos_t = np.sin(theta_k), np.cos(theta_k)
        Rp = np.eye(3) + sin_t * Khat + (1.0 - cos_t) * K2
        E = np.eye(3) - Rk @ Rp.T
        th_err = float(np.linalg.norm(E))
        if grad is not None and th_err > 1e-9:
            dR_dt = cos_t * Khat + sin_t * K2
            v = np.zeros(3)
            for j in range(3):
                Ej = skew(np.eye(3)[j])
                dR_dlj = sin_t * Ej + (1.0 - cos_t) * (Ej @ Khat + Khat @ Ej)
                v[j] = float(np.sum(Rk * dR_dlj))
            g = assemble(g_lhat=-v / th_err,
                         extras=[(6 + k, -float(np.sum(Rk * dR_dt)) / th_err)])
        else:
            g = None
        add_scalar_block(th_err, g, w.lambda4 * w.alpha1)

        # Translational configuration error through the induced slides.
        v = tgt["dvec"] - d_k * lhat
        d_err = float(np.linalg.norm(v))
        if grad is not None and d_err > 1e-12:
            vhat = v / d_err
            g = assemble(g_lhat=-d_k * vhat, extras=[(6 + K + k, -float(lhat @ vhat))])
        else:
            g = None
        weight = w.lambda4 * w.alpha2
        add_scalar_block(d_err, g, weight, add_curvature=False)
        if H is not None and d_err > 1e-12:
            # Exact Gauss-Newton block of the vector residual; the l/d cross
            # term vanishes because P annihilates lhat.
            irls = weight / max(d_err, irls_floor)
            H[0:3, 0:3] += irls * (d_k * d_k) * (P @ P)
            H[6 + K + k, 6 + K + k] += irls

    return total, grad, H


def _line_distance_grads(lhat, m, u, mk, want_grad):
    """Three-case line distance of raw (lhat, m) to (u, mk), with gradients
    w.r.t. lhat (pre-normalization chain applied by the caller) and m."""
    cross = np.cross(lhat, u)
    nc = float(np.linalg.norm(cross))
    if nc < PARALLEL_TOL:
        if float(lhat @ u) < 0.0:
            u, mk = -u, -mk
        dm = m - mk
        q = np.cross(lhat, dm)
        dist = float(np.linalg.norm(q))
        if not want_grad or dist <= 1e-12:
            return dist, None, None
        qhat = q / dist
        return dist, np.cross(dm, qhat), np.cross(qhat, lhat)
    recip = float(lhat @ mk) + float(u @ m)
    if abs(recip) < INTERSECT_TOL:
        return 0.0, None, None
    dist = abs(recip) / nc
    if not want_grad:
        return dist, None, None
    sign = np.sign(recip)
    chat = cross / nc
    gl = sign * mk / nc - dist * np.cross(u, chat) / nc
    gm = sign * u / nc
    return dist, gl, gm


def _project(x):
    l, m, thetas, ds = _split_params(x)
    n = np.linalg.norm(l)
    if n <= 1e-12:
        return x
    l = l / n
    m = m - (l @ m) * l
    return np.concatenate([l, m, thetas, ds])


def _align_targets(targets, direction):
    """Flip target screws so their axes point along ``direction``.

    A screw and its sign-flipped twin encode the same displacement; aligning
    them keeps the orientation term from pulling toward the wrong cover.
    """
    aligned = []
    for s in targets:
        if not s.is_degenerate() and float(s.axis.direction @ direction) < 0.0:
            aligned.append(type(s)(s.axis.reversed(), -s.theta, -s.d))
        else:
            aligned.append(s)
    return aligned


def refine(init, poses, base, weights=None, options=None, thresholds=None):
    """Polish a model by minimizing the sequence loss over (l, m, thetas, ds).

    Levenberg-Marquardt-style loop: a Gauss-Newton curvature from the
    reweighted residuals, adaptive damping, and steps accepted only when the
    loss decreases, so the returned model never scores worse than ``init``
    against the per-step screws.  After every accepted step the direction is
    renormalized and the moment re-projected.
    """
    w = weights or LossWeights()
    opts = options or RefineOptions()
    th = thresholds or CategoryThresholds()
    steps = canonicalize_steps(extract_step_screws(poses, base), th.eps_theta)
    targets = _align_targets(steps, init.axis.direction)
    prepared = _prepare_targets(targets)

    x = _project(model_to_params(init))

    def full_eval(point):
        f, g, H = _sequence_eval(point, prepared, w, want_grad=True, want_hess=True,
                                 projected=True)
        # Pin the constraint-normal directions (radial l, moment along the
        # axis); the projection map is flat there, so the solve must not
        # wander along them.
        lhat = point[0:3] / np.linalg.norm(point[0:3])
        pin = 1.0 + np.trace(H) / H.shape[0]
        H[0:3, 0:3] += pin * np.outer(lhat, lhat)
        H[3:6, 3:6] += pin * np.outer(lhat, lhat)
        return f, g, H

    f, g, H = full_eval(x)
    if not np.isfinite(f):
        raise RefinementError("loss is non-finite at the initial point", x)

    mu = opts.mu0
    for _ in range(opts.max_iter):
        if np.linalg.norm(g) < opts.gtol:
            break
        damped = H + mu * (np.diag(np.diag(H)) + 1e-9 * np.eye(x.size))
        try:
            step = np.linalg.solve(damped, -g)
        except np.linalg.LinAlgError:
            mu *= 4.0
            if mu > opts.mu_max:
                break
            continue
        candidate = _project(x + step)
        f_new = _sequence_eval(candidate, prepared, w, want_grad=False)[0]
        if np.isfinite(f_new) and f_new < f:
            improvement = f - f_new
            x, f = candidate, f_new
            f, g, H = full_eval(x)
            mu = max(mu / 3.0, 1e-10)
            if improvement < opts.ftol:
                break
        else:
            mu *= 4.0
            if mu > opts.mu_max:
                break

    return params_to_model(x, th)


class AxisSpreadWarning(UserWarning):
    """Per-step axes disagree more than a single 1-DoF model allows."""


def estimate_closed_form(poses, base, thresholds=None):
    """Estimate the articulation model of a pose sequence without iteration.

    Decomposes each pose relative to the first into a screw, transports the
    screws to the base-object frame, aggregates the shared axis as a
    motion-weighted mean, and projects each step's rotation and slide onto
    that axis to obtain the configurations.  Inconsistent per-step axes are
    reported through an AxisSpreadWarning instead of an error, since noisy
    data routinely violates strict coaxiality.
    """
    th = thresholds or CategoryThresholds()
    poses = list(poses)
    if len(poses) < 2:
        raise ValueError("need at least two poses")
    raw = extract_step_screws(poses, base)
    steps = canonicalize_steps(raw, th.eps_theta)
    axis, _ = aggregate_axes(steps)

    # Configurations projected onto the aggregated axis: the twist angle
    # about it and the slide component along it.  Projection onto the
    # aggregate suppresses the per-step axis noise.
    configs = []
    for s in steps:
        c = float(s.axis.direction @ axis.direction)
        half = 0.5 * s.theta
        theta = 2.0 * float(np.arctan2(np.sin(half) * c, np.cos(half)))
        d = float(apply_screw(s).translation @ axis.direction)
        configs.append((theta, d))

    thetas = np.array([t for t, _ in configs])
    ds = np.array([d for _, d in configs])
    category = _classify_configs(thetas, ds, th)

    if category is ModelCategory.RIGID:
        # No meaningful axis; fall back to the convention and re-project.
        axis = PluckerLine((0.0, 0.0, 1.0), (0.0, 0.0, 0.0))
        configs = []
        for s in steps:
            c = float(s.axis.direction @ axis.direction)
            half = 0.5 * s.theta
            theta = 2.0 * float(np.arctan2(np.sin(half) * c, np.cos(half)))
            d = float(apply_screw(s).translation @ axis.direction)
            configs.append((theta, d))
    else:
        ang, dist = axis_spread(steps, axis)
        if ang > AXIS_SPREAD_MAX_RAD or dist > th.eps_d:
            warnings.warn(
                f"per-step axes spread {np.rad2deg(ang):.2f} deg / {dist * 100:.2f} cm "
                "beyond single-model tolerance", AxisSpreadWarning, stacklevel=2)

    return ArticulationModel(category, axis, configs)


def evaluate(pred, gt):
    """Compare a predicted model against ground truth in reporting units.

    Orientation error is the raw angle between directions in degrees (with
    the anti-parallel fold reported separately); position error is the line
    distance in cm.  For a prismatic ground truth the axis position is
    physically unobservable, so the comparison uses the canonical
    through-the-origin representative of the ground-truth axis; the position
    number is convention-dependent there.  Per-step configuration errors are
    |dtheta| in degrees and |dd| in cm.
    """
    if len(pred.configs) != len(gt.configs):
        raise ValueError("predicted and ground-truth models must have the same number of configs")
    ori = np.rad2deg(axis_angle_between(pred.axis.direction, gt.axis.direction))
    folded = min(ori, 180.0 - ori)

    gt_axis = gt.axis
    if gt.category is ModelCategory.PRISMATIC:
        gt_axis = PluckerLine(gt.axis.direction, np.zeros(3))
    pos_cm = line_distance(pred.axis, gt_axis) * 100.0

    rot_deg = np.rad2deg(np.abs(pred.thetas - gt.thetas))
    trans_cm = np.abs(pred.ds - gt.ds) * 100.0
    return ErrorReport(float(ori), float(folded), float(pos_cm), rot_deg, trans_cm,
                       pred.category is gt.category)
