"""gnnbench: a fair-comparison benchmarking toolkit for graph neural
networks on node classification — SBM dataset generators, seven GNN layer
architectures over a reverse-mode autodiff core, spectral and random-walk
feature augmentation, and a k-fold assessment harness with a batch CLI."""

__version__ = "0.1.0"

from .graph import (Graph, GraphBatch, add_self_loops, batch_graphs,
                    build_graph, induced_subgraph_sample, permute_graph,
                    to_undirected)
from .sparse import SparseMatrix
from .splits import Split, random_split, stratified_kfold
from .generate import (SbmConfig, build_sbm_dataset, cluster_config,
                       generate_cluster, generate_pattern, pattern_config)
from .data_io import Dataset, DatasetFormatError, SplitsSpec, load_dataset, \
    save_dataset
from .model import (Model, ModelConfig, build_model, fit_budget, load_model,
                    parameter_count)
from .train import TrainConfig, EpochLog, fit
from .metrics import accuracy, roc_auc_multitask, weighted_accuracy
from .augment import (LaplacianPE, Node2vecConfig, append_features,
                      laplacian_pe, node2vec_embed, node2vec_train,
                      node2vec_walks, normalized_laplacian)
from .estimators import (GNNNodeClassifier, LaplacianEigenmapEncoder,
                         Node2VecEncoder, NotFittedError, check_graph)
from .assess import (AssessConfig, Report, RunRecord, assess_holdout,
                     assess_kfold, run_assessment, run_suite, suite_csv)

__all__ = [name for name in dir() if not name.startswith("_")]
