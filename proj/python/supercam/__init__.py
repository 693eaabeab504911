"""Sparse superpixel capture, the restricted SNIC baseline and segmentation metrics."""

from ._supercam import (
    BudgetError,
    ConfigError,
    DegenerateInputError,
    FormatError,
    SensorConfig,
    boundary_map,
    boundary_precision_recall,
    compute_exposure_scale,
    depth_metrics,
    downsample,
    evaluate,
    gaussian_blur,
    miou_error,
    nearest_fill,
    parse_budget,
    partition_grid,
    recover_intensity,
    run_snic,
    run_supercam,
    sample_photon_cube,
    sigma_for_radius,
    snic_segment,
    synth_scene,
    tolerance_radius,
    under_segmentation_error,
)

__all__ = [name for name in dir() if not name.startswith("_")]
