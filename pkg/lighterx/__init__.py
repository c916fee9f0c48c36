from lighterx.data import InteractionMatrix, SplitSpec, load_interactions, split_per_user  # noqa: F401
from lighterx.graph import build_adjacency, normalize_adjacency, spmm  # noqa: F401
from lighterx.features import RandomMatrixSpec, FeatureMatrix, gen_feat, compute_h  # noqa: F401
from lighterx.propagation import propagate, jacobi_propagate, truncated_svd, perturbed_adjacency  # noqa: F401
from lighterx.model import TrainConfig, PrecomputeSpec, precompute_inputs, train  # noqa: F401
from lighterx.eval import full_rank, evaluate  # noqa: F401
from lighterx.helpers import DEBUG, THREADS, Context, DataError, NumericError  # noqa: F401
