"""Multi-modal graph recommender: homogeneous relation graphs, channel
attention fusion, bipartite propagation, and refined contrastive learning
on top of BPR training."""

from .attention import (AttentionBlockParams, ProjectionParams,
                        cross_attention_block, inverted_dropout, layer_norm,
                        project_modality, self_attention_block)
from .bipartite import BipartiteGraph, build_bipartite, propagate_bipartite
from .config import RunConfig, load_dataset_and_features, parse_config
from .contrast import (MetaNetParams, RefineLossWeights, fuse_unique,
                       infonce_loss, meta_shared, orthogonal_loss)
from .data import (MODALITIES, InteractionDataset, ModalFeatures,
                   apply_k_core, derive_user_features, load_feature_matrix,
                   load_interactions, load_modal_features,
                   save_feature_matrix, split_dataset)
from .errors import ConfigError, DataError, NumericError
from .graphs import (HomographConfig, SparseGraph, build_cooccurrence_graph,
                     build_homographs, build_semantic_graph, fuse_homograph,
                     fuse_semantic_graphs, load_graph, propagate_homograph,
                     save_graph)
from .metrics import (EvalReport, compute_metrics, evaluate_split,
                      rank_items, score_difference_matrix,
                      write_difference_matrix)
from .training import (Ablation, EarlyStopper, ForwardCache, GraphBundle,
                       HyperParams, ParameterStore, assemble_graph_bundle,
                       bpr_loss, build_graph_bundle, features_to_torch, fit,
                       forward, gradient_check, load_checkpoint, predict,
                       restore_params, sample_triplets, save_checkpoint,
                       total_loss, train_step)

__version__ = "0.1.0"
