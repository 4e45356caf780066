"""Synthetic brick walls, surface-map baking and cascade brick detection."""

from ._core import (
    Annotation,
    BrickscanError,
    CascadeModel,
    Detection,
    OrthoFrame,
    Rect,
    TriangleMesh,
    WallModel,
    bake_height,
    bake_maps,
    detect,
    evaluate,
    frame_from_mesh,
    generate_wall,
    group_rectangles,
    iou,
    load_cascade,
    match_template_ncc,
    read_obj,
    rect_sum,
    run_all,
    set_thread_count,
    thread_count,
)

__all__ = [
    "Annotation",
    "BrickscanError",
    "CascadeModel",
    "Detection",
    "OrthoFrame",
    "Rect",
    "TriangleMesh",
    "WallModel",
    "bake_height",
    "bake_maps",
    "detect",
    "evaluate",
    "frame_from_mesh",
    "generate_wall",
    "group_rectangles",
    "iou",
    "load_cascade",
    "match_template_ncc",
    "read_obj",
    "rect_sum",
    "run_all",
    "set_thread_count",
    "thread_count",
]
