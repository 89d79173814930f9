"""spherefit: filtered polynomial fitting of noisy scattered data on the
unit sphere, including a distributed divide-and-conquer variant."""

from .basis import (
    FilteredKernel,
    FilterSpec,
    filter_value,
    gegenbauer_values,
    harmonic_dimension,
    harmonic_synthesis,
    harmonic_table,
    kernel_l2_parseval,
    kernel_value,
    real_harmonics,
)
from .geometry import (
    MeshStats,
    geodesic_distance,
    mesh_stats,
    random_density_points,
    random_uniform_points,
    rotate_points,
    rotation_about_z,
    spiral_points,
)
from .quadrature import (
    QuadratureRule,
    bundled_design,
    bundled_design_strengths,
    equal_weight_rule,
    exactness_residual,
    load_design,
    passes_at,
    solve_weights,
    threshold_weights,
)

__version__ = "0.1.0"
