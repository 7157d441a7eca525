"""Deformable 3D registration by direct displacement-field optimization.

The package optimizes a dense displacement field per image pair under a
windowed-NCC similarity plus gradient-smoothness objective, refines it
coarse-to-fine, optionally smooths it with an image-guided bilateral
filter, and ships the evaluation metrics (Dice, TRE, NDV, HD95) and a
small CLI used by the experiment scripts.
"""

from .volume import Volume3, LabelMap, LandmarkSet, downsample2
from .field import DispField, identity_field, compose, upsample2, jacobian_det, ndv
from .sampler import InterpMode, warp, warp_labels, transform_points
from .loss import LossReport, LossGrad, local_ncc, global_ncc, grad_l2, total_loss, loss_gradient
from .config import RegConfig
from .optim import AdamState, LossTrace, adam_step, register_level, register
from .bilateral import BFParams, bilateral_filter
from .metrics import (MetricReport, dice, hd95, tre, evaluate_pair,
                      write_report_json, write_summary_csv)
from .fileio import (load_nifti, save_nifti, load_field, save_field,
                     load_landmarks, save_landmarks)
from .phantom import (make_phantom, label_centroids, bump_field,
                      smooth_random_field)

__all__ = [
    "Volume3", "LabelMap", "LandmarkSet", "downsample2",
    "DispField", "identity_field", "compose", "upsample2", "jacobian_det", "ndv",
    "InterpMode", "warp", "warp_labels", "transform_points",
    "LossReport", "LossGrad", "local_ncc", "global_ncc", "grad_l2", "total_loss", "loss_gradient",
    "RegConfig",
    "AdamState", "LossTrace", "adam_step", "register_level", "register",
    "BFParams", "bilateral_filter",
    "MetricReport", "dice", "hd95", "tre", "evaluate_pair",
    "write_report_json", "write_summary_csv",
    "load_nifti", "save_nifti", "load_field", "save_field",
    "load_landmarks", "save_landmarks",
    "make_phantom", "label_centroids", "bump_field", "smooth_random_field",
]

__version__ = "0.1.0"
