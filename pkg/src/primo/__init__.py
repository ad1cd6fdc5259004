"""Progressive-refinement inspection kit: geometry, meshes, navigation,
study harness, and statistics, with a command-line front end."""

from primo.geometry import (
    Aabb,
    Plane1D,
    Ray,
    Similarity,
    Vec3,
    focus_to_stage,
    interpolate,
    locate_point,
    octant_aabb,
    path_to_aabb,
    pick_child_octant,
    ray_aabb,
)
from primo.object_model import (
    DefectRegion,
    LatticeSpec,
    LoadResult,
    MeshParseError,
    RodMarker,
    TriangleMesh,
    clip_mesh,
    crop_mesh,
    generate_lattice,
    load_mesh,
    place_defects,
    rods_for_target,
    save_obj,
)
from primo.navigation import (
    AimResult,
    Display,
    NavConfig,
    NavState,
    Style,
    aim,
    ascend,
    confirm,
    new_session,
    octant_colors,
    reveal_defect,
    set_clip_height,
    tick,
    visible_set,
)
from primo.study import (
    Condition,
    Event,
    Measure,
    Phase,
    ReplayError,
    TrialMetrics,
    build_schedule,
    build_trials,
    clip_gate,
    derive_seed,
    oracle_agent_log,
    parse_event_log,
    replay_events,
    run_trial,
    serialize_events,
)
from primo.analysis import (
    AnovaResult,
    SsqScores,
    WilcoxonResult,
    anova_2x2,
    cohens_d,
    descriptive,
    ssq_scores,
    wilcoxon_signed_rank,
)

__version__ = "0.1.0"
