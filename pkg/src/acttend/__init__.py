"""Clustering-tendency assessment: datasets -> LSH/KNN graphs -> GCN classifier, plus baselines."""

from .datagen import Dataset, GenConfig, gen_clustered, gen_corpus, gen_uniform
from .graphrep import EdgeStrategy, GraphConfig, GraphRep, LshConfig, build_graph
from .nn import ModelParams, TrainConfig, gcn_forward, load_checkpoint, predict, save_checkpoint, train

__version__ = "0.1.0"
