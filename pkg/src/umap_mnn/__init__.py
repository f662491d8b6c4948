"""Connectivity-refined neighbour graphs for UMAP-style embeddings."""
from .io import FeatureMatrix, LabelVector, load_embedding, load_idx, load_sparse_matrix, save_embedding
from .knn import NeighborGraph, WeightedGraph, distance, exact_knn, mutual_knn
from .layout import Embedding
from .pipeline import MethodConfig, grid_search, run_variant, table_variants

__version__ = "0.1.0"
