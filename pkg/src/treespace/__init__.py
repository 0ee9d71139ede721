"""Statistics in the space of phylogenetic trees.

Trees with a fixed leaf set live in a CAT(0) geodesic metric space glued
from Euclidean orthants, one per topology. This package computes geodesics
and distances there, weighted Frechet means, the locus surfaces those means
sweep out (which act as principal components of arbitrary order),
projections of data onto such surfaces, and stochastic fits of the
best-approximating surface, together with coalescent simulators and a
command-line interface.
"""

__version__ = "0.1.0"

from .trees import (LeafSet, PhyloTree, Split, TopologyId, TreeError,
                    compatible, validate_tree)
from .newick import parse_newick, read_newick_file, write_newick, write_newick_file
from .geodesic import (Geodesic, GeodesicSupport, compute_support, distance,
                       geodesic, interpolate, is_simple, point_on_geodesic,
                       support_signature)
from .frechet import (MeanResult, WeightedSample, cyclic_mean, data_scale,
                      frechet_objective, sturm_mean)
from .locus import (FitStatistics, ProjectionResult, ProjectorConfig,
                    SimplexPoint, SimplexTopologyMap, VertexSet,
                    exhaustive_project, geometric_project, project_all,
                    simplex_lattice, simplex_topology_map, sum_sq_projected,
                    surface_point)
from .pca import (FittedComponent, ProposalKernel, default_kernels,
                  fit_component, fit_principal_geodesic, propose)
from .simulate import (SurfaceDatasetSpec, coalescent_quadruple,
                       constrained_gene_tree, kingman_tree, make_surface_dataset,
                       nni, nni_alternatives, random_walk, random_walk_step, spr)
from .estimators import FrechetMean, LocusProjection, TreePCA, check_tree_sample

__all__ = [name for name in dir() if not name.startswith("_")]
