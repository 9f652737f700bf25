"""Differentiable layers, architectures and training."""

from .graph import ArchConfig, LayerGraph, build, build_resnet, build_uresnet
from .ops import (Add, AngularMaxPool, Dense, DirConv, GcConv, GlobalAverage, Lift, Pool, Softmax,
                  Unpool, pool_matrix, unpool_matrix)
from .train import Adam, accuracy, cross_entropy, predict, train, write_log

__all__ = [
    "Adam", "Add", "AngularMaxPool", "ArchConfig", "Dense", "DirConv", "GcConv", "GlobalAverage",
    "LayerGraph", "Lift", "Pool", "Softmax", "Unpool", "accuracy", "build", "build_resnet",
    "build_uresnet", "cross_entropy", "pool_matrix", "predict", "train", "unpool_matrix", "write_log",
]
