"""Geometric Chung-Lu random graphs fitted to a spatially embedded reference graph."""

from .estimation import (ChungLuCheck, DistanceLaw, EmpiricalCdf, FitError, FitResult,
                         LogisticCurve, ModelFit, check_chung_lu_condition, derivative_ratio,
                         empirical_F1, empirical_F2, estimate_intensities, fit_logistic,
                         fit_model, fit_quality, geometric_weights)
from .generator import (GeneratorConfig, TorusConfig, child_seed, connection_probability,
                        generate_ensemble, generate_graph, torus_generate)
from .graph import (SpatialGraph, degrees, edge_density, euclidean_distance, induced_subgraph,
                    trim_top_degree)
from .kernels import BACKEND

__version__ = "0.1.0"
