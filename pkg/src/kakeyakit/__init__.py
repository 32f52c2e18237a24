"""Kakeya-set experiments at desk scale: exact mesh counting, cut-and-move,
centre fields, lattice difference sets and zoom-out tangents."""
from ._validation import InvalidInputError
from .counting import (BoxDimensionEstimate, MeshSpec, OccupancySet, Packing, StabilityReport, box_counts,
                       disjoint_packing_count, estimate_box_dimensions, hausdorff_distance, mesh_count,
                       packing_stability, pixel_measure, rasterize)
from .cutmove import (Partition, count_sandwich_report, cut_and_move, cut_level, nested_union,
                      partition_by_midpoint, partition_on_mesh, theorem_lbd_experiment)
from .estimators import BoxCountingDimension
from .geometry import (Ball, Direction, Ray, Segment, SimilarityMap, apply_similarity, canonicalize_direction,
                       translate)
from .kakeya import (BaseField, CenterField, build_half_extended, build_kakeya, calibrate_fan_density,
                     direction_sample, fan64, fan_field, field_distance, measure_witness, quantize_field,
                     random_field, sample_gap, shifted_union_is_ball)
from .lattice import (LatticeSet, difference_set, extract_lattice_sets, salem_probe, theta_profile,
                      translated_union_count, trivial_bound)
from .tangent import convergence_profile, weak_tangent_covering_check, zoom_out

__version__ = "0.1.0"
