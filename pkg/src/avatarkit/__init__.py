"""Single-image detailed body mesh recovery via hierarchical handle deformation.

The library recovers a deformed, shaded and textured mesh from one image
plus 2D annotations in three handle stages of increasing granularity
(joints, surface anchors, per-vertex shading displacement), then fills the
invisible part of the UV texture by symmetry and nearest-visible flow.
"""

from .camera import WeakPerspectiveCamera, fit_camera_to_bbox, project
from .deform import (
    DeformProblem,
    HandleConstraint,
    deform_objective,
    depth_constraint,
    differential_coords,
    pixel_constraint,
    point_constraint,
    solve_deform,
    uniform_laplacian,
)
from .errors import AvatarKitError
from .handles import (
    JOINT_NAMES,
    AnchorConfig,
    AnchorMotion,
    AnchorSet,
    JointHandleSet,
    JointMotion,
    apply_anchor_stage,
    apply_joint_stage,
    joint_positions,
    oracle_anchor_motion,
    oracle_joint_motion,
    select_anchors,
    silhouette_normal_distance,
)
from .mesh import (
    SymmetryMap,
    TriMesh,
    face_normals,
    load_mesh,
    mirror_correspondence,
    save_mesh,
    subdivide_1to4,
    vertex_normals,
)
from .metrics import (
    MetricsReport,
    chamfer_gt_to_pred,
    evaluate,
    joint_error,
    silhouette_iou,
    visible_vertex_filter,
)
from .pipeline import PipelineConfig, StageRecord, render_textured, run_pipeline
from .raster import (
    BinaryMask,
    DepthMap,
    depth_to_normals,
    rasterize,
    render_normal_map,
)
from .shading import (
    AlbedoMap,
    RefineConfig,
    RefineObjective,
    SHLighting,
    depth_to_vertex_displacement,
    estimate_albedo,
    estimate_lighting,
    magnify_details,
    refine_depth,
    sh_basis,
    shade,
)
from .synth import SynthCase, make_synthetic_case, remove_inner_surface, view_grid
from .templates import body_template, default_joint_handles, full_template
from .texture import (
    CompleteConfig,
    FlowField,
    UVMask,
    UVSymmetry,
    UVTexture,
    bilinear_sample,
    complete_texture,
    nearest_visible_flow,
    project_visible_texture,
    symmetric_composite,
    uv_symmetry_from_mesh,
)

__version__ = "0.1.0"
