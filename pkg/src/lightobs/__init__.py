"""Boundary light-observation toolkit: broken null geodesics in
Lorentzian manifolds with timelike boundary, discretized observation
sets, and source reconstruction from their unlabelled family."""

from .errors import (ChartError, ConfigError, DegenerateBoundaryError,
                     DomainError, FitError, InsufficientDataError,
                     LightObsError, PreconditionError, StratumError,
                     TrackingError, TriangulationError)
from .manifold import (BumpPerturbation, ConvexityReport, CosinePerturbation,
                       CustomManifold, DiskFactor, ManifoldSpec,
                       MinkowskiCylinder, PerturbedCylinder, StadiumFactor,
                       StaticProduct, audit_null_convexity,
                       boundary_null_tangents, causal_character,
                       outward_normal, reflect, sample_null_directions,
                       second_fundamental_form)
from .raytrace import (BrokenGeodesic, ConjugacyReport, IntegratorOptions,
                       Limits, ReflectionEvent, Termination, aim_null_velocity,
                       broken_exponential, expb_differential,
                       integrate_segment, reflection_data, sequence_products,
                       tameness_monitor)
from .observe import (BoundaryRegion, ObservationPoint, ObservationSet,
                      RegularPatch, compute_observation_set, detect_regular,
                      distinctness_check, hausdorff_distance,
                      load_observation_set, outward_null_ray,
                      save_observation_set)
from .reconstruct import (Chart, ConformalFit, CurveInU, ObservationFamily,
                          ReconstructionReport, build_chart,
                          earliest_observation_time, fit_conformal_metric,
                          incidence_neighbors, recover_null_direction,
                          time_orientation_test, topology_probe,
                          triangulate_source)

__version__ = "0.1.0"
