"""Clustering graphs with multi-view vertex features by nonnegative factorization.

Pipeline: diffusion re-weighting of the adjacency, view-wise feature
propagation, a six-factor nonnegative factorization fitted by
multiplicative updates, and argmax cluster extraction.

>>> from gccfp import PlantedSpec, generate, Hyperparams, fit, extract_clusters, nmi
>>> graph, truth = generate(PlantedSpec(n_vertices=60, k_clusters=3, p_in=0.5, p_out=0.02, seed=1))
>>> factors, trace = fit(graph, Hyperparams(k_clusters=3, seed=1))
>>> nmi(extract_clusters(factors.v), truth) > 0.9
True
"""

__version__ = "0.1.0"

from .exceptions import (
    BoundsError,
    ConsistencyError,
    GCCFPError,
    NumericOverflowError,
    ParseError,
    ShapeError,
    SizeError,
    ValidationError,
)
from .graph import (
    DiffusionWeights,
    LoadOptions,
    MultiViewGraph,
    PropagatedFeatures,
    ViewFeatures,
    build_graph,
    degrees,
    diffusion_reweight,
    load_graph,
    propagate_features,
    stack_features,
)
from .factors import (
    Hyperparams,
    LatentFactors,
    ModelData,
    ObjectiveBreakdown,
    init_factors,
    load_factors,
    objective,
    prepare_data,
    relaxed_cw_objective,
    save_factors,
)
from .optimizer import (
    FitTrace,
    GuardPolicy,
    fit,
    fit_data,
    row_peakedness,
    update_c,
    update_p,
    update_u,
    update_v,
    update_w,
    update_x,
)
from .evaluation import (
    ClusterAssignment,
    EvalReport,
    evaluate,
    extract_clusters,
    matched_accuracy,
    nmi,
)
from .synthetic import PlantedSpec, generate, oracle_update, write_dataset
