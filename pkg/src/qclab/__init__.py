"""Numerical laboratory for sub-Riemannian metric geometry: CC distances,
ball-volume growth, discrete Q-modulus, and the quasiconformal
nonequivalence experiment for the Heisenberg and roto-translation groups."""

from .spaces import (ControlPath, SpaceModel, bracket_numeric, contact_form_eval,
                     frame_eval, get_space, group_inverse, group_mul,
                     horizontal_flow, left_translation_jacobian)
from .geodesics import (DirectBudget, DistanceResult, FlowGraph, build_flow_graph,
                        cc_distance, cc_distance_direct, cc_distance_graph,
                        graph_distance, graph_polyline, load_graph, save_graph)
from .volume import GrowthFit, ball_volume, doubling_ratios, growth_curve, growth_exponent
from .modulus import (CurveFamily, Density, LoewnerSample, ModulusResult,
                      admissibility_check, annulus_family, brute_force_modulus,
                      energy, loewner_estimate, loewner_profile, path_integral,
                      q_modulus, rho_shortest_path)
from .obstruction import (DerivedConstants, ExperimentConfig, ObstructionParams,
                          QuasiGeodesic, bounded_loewner_check, build_continua,
                          continuify, derive_constants, density_energy_bound,
                          estimate_qi_constants, floor_map, length_lower_bound_check,
                          obstruction_density, run_obstruction_experiment)
from .contacto import (contacto_inverse, contacto_map, local_bilip_estimate,
                       pullback_check, pushforward_horizontality_check, rt_to_heis)
from .planar import (dilatation_estimate, planar_map, shape_inclusion_fit,
                     stretched_strip_growth)

__version__ = "0.1.0"
