"""Screw-theory toolkit for 1-DoF articulation models.

Represents rigid, revolute, prismatic and helical joints as screw
displacements about a shared axis; generates labeled synthetic pose
trajectories; and estimates the model (category, axis, configurations)
back from pose sequences, with an optional loss-minimizing refinement.
"""

from .geom3d import (PluckerLine, Pose, Rotation, axis_angle_between,
                     line_distance, line_from_point_direction,
                     line_motion_matrix, pose_motion_matrix, transform_line)
from .screws import (ScrewDisplacement, apply_screw, pitch, random_screw,
                     screw_from_relative_pose, transform_screw)
from .models import (ArticulationModel, CategoryThresholds, Configuration,
                     ModelCategory, ModelInconsistencyError, classify,
                     model_from_screws)
from .datagen import (LabeledTrajectory, NoiseSpec, ObjectSpec, corrupt,
                      generate_trajectory, make_dataset, make_trajectory,
                      sample_instance)
from .estimator import (AxisSpreadWarning, ErrorReport, LossBreakdown,
                        LossWeights, RefineOptions, RefinementError,
                        estimate_closed_form, evaluate, extract_step_screws,
                        gradient_of_loss, loss, model_to_params,
                        params_to_model, refine, sequence_loss)

__version__ = "0.1.0"

__all__ = [
    "PluckerLine", "Pose", "Rotation", "axis_angle_between", "line_distance",
    "line_from_point_direction", "line_motion_matrix", "pose_motion_matrix",
    "transform_line",
    "ScrewDisplacement", "apply_screw", "pitch", "random_screw",
    "screw_from_relative_pose", "transform_screw",
    "ArticulationModel", "CategoryThresholds", "Configuration", "ModelCategory",
    "ModelInconsistencyError", "classify", "model_from_screws",
    "LabeledTrajectory", "NoiseSpec", "ObjectSpec", "corrupt",
    "generate_trajectory", "make_dataset", "make_trajectory", "sample_instance",
    "AxisSpreadWarning", "ErrorReport", "LossBreakdown", "LossWeights",
    "RefineOptions", "RefinementError", "estimate_closed_form", "evaluate",
    "extract_step_screws", "gradient_of_loss", "loss", "model_to_params",
    "params_to_model", "refine", "sequence_loss",
    "__version__",
]
