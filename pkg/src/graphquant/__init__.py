"""Prevalence estimation on graph nodes, with structural importance sampling."""

from .graph import Graph, Split, from_edges, load_graph, make_split, normalized_adjacency, save_graph
from .kernels import KernelSlice, VertexKernel, interpolated_ppr, ppr_kernel, sp_kernel
from .metrics import RankTable, ae, rae, rank_and_test
from .quantifiers import DensityFloorWarning, SolverConfig, UnidentifiableWarning, make_quantifier
from .samplers import SamplePlan, TestSample, draw_samples
from .sis import ClassWeights, SisWeights, class_weights, density_ratio, kde_density

__version__ = "0.1.0"
