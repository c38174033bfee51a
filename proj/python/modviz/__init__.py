"""Modulation classifiers with Grad-CAM and mask explanations.

Thin wrapper over the compiled ``_modviz`` extension. Dataset and checkpoint
files are the same ones the ``modviz`` command-line tool reads and writes.
"""

from . import _modviz
from ._modviz import (
    DivergenceError,
    Error,
    FormatError,
    InvalidArgument,
    IoError,
    MismatchError,
    NoTapPoint,
    ShapeError,
    amplitude_phase,
    cli,
    connect_segments,
    constellation_svg,
    evaluate,
    generate,
    gradcam,
    label_names,
    load_dataset,
    mask,
    normalize_unit,
    parameter_count,
    resize_bilinear,
    train,
)

SPLITS = ("train", "val", "test")

__all__ = [name for name in dir(_modviz) if not name.startswith("_")] + ["SPLITS"]
