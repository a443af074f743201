"""2D multi-robot simulation with line-of-sight connectivity maintenance.

Robots sense unknown polygonal worlds through simulated lidars, build
star-convex visible regions, and fuse pairwise visibility distances into a
weighted graph whose Fiedler value a potential-field controller keeps
positive while frontier exploration or operator goals drive navigation.
"""

from .connectivity import (
    ConnectivityCritical,
    ConnectivityGraph,
    TeamSnapshot,
    WeightParams,
    assemble_graph,
    connectivity_velocity,
    fuse_los,
    softmin_baseline,
    weight_alpha,
    weight_beta,
    weight_gamma,
    weight_gamma_star,
)
from .geometry import DegenerateInput, HullEdge, Polygon, Pose, cast_ray, convex_hull, segment_hits_obstacles, vec2
from .harness import (
    GoalQueue,
    RunMetrics,
    Scenario,
    ScenarioError,
    one_hop_isolation_check,
    run,
)
from .navigation import (
    Frontier,
    MapParams,
    NoPath,
    OccupancyGrid,
    TargetAssignment,
    assign_targets,
    detect_frontiers,
    elect_roles,
    navigation_velocity,
    plan_waypoint,
    update_map,
)
from .visibility import (
    CoincidentRobots,
    EmptyScan,
    LoSDistance,
    OriginPoint,
    ScanCloud,
    VisibleRegion,
    augment,
    build_visible_region,
    los_distance,
    soft_visibility_distance,
    spherical_flip,
)
from .world import CollisionDetected, RobotState, Role, SensorParams, World, ground_truth_los, simulate_lidar, step

__version__ = "0.1.0"
