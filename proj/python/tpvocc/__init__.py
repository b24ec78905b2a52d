# Copyright 2026 The tpvocc Authors
# SPDX-License-Identifier: Apache-2.0
"""Tri-perspective-view occupancy kernels and pipeline commands."""

from ._tpvocc import (  # noqa: F401
    FREE_CLASS,
    GROUND_CLASS,
    NUM_CLASSES,
    CameraModel,
    ConfigError,
    DataError,
    GridSpec,
    NumericalError,
    ShapeError,
    channel_to_height,
    conv2d,
    evaluate,
    fit,
    global_spatial_sampling,
    lti_interact,
    make_ring_rig,
    num_workers,
    pipeline,
    set_num_workers,
    synth,
    tpv_matmul,
)

__all__ = [name for name in dir() if not name.startswith("_")]
