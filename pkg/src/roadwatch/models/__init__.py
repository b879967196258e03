"""Classifiers: nearest neighbour, regression tree, feedforward network."""

from .knn import NearestNeighborModel, knn_classify, knn_fit
from .net import NetHyper, NeuralNetModel, net_fit, net_forward, net_gradient, net_init
from .persist import ModelFormatError, load, loads, save, dumps
from .split import DEFAULT_NET_SPLIT, DEFAULT_SPLIT, SplitError, SplitSpec, split
from .threshold import decide, threshold
from .tree import RegressionTreeModel, Split, TreeParams, best_split, impurity, tree_fit, tree_score

__all__ = [
    "NearestNeighborModel", "knn_classify", "knn_fit",
    "NetHyper", "NeuralNetModel", "net_fit", "net_forward", "net_gradient", "net_init",
    "ModelFormatError", "load", "loads", "save", "dumps",
    "DEFAULT_NET_SPLIT", "DEFAULT_SPLIT", "SplitError", "SplitSpec", "split",
    "decide", "threshold",
    "RegressionTreeModel", "Split", "TreeParams", "best_split", "impurity", "tree_fit", "tree_score",
]
