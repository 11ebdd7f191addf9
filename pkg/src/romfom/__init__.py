"""Coupled reduced / sparse full-order models learned from snapshot data."""

from .couple import CoupledModel, DomainDecomposition, decompose, infer_coupled
from .data import SnapshotSet, TimeGrid, load_matrix, save_matrix, split_train_test
from .errors import *  # noqa: F401,F403
from .opinf import QuadModel, infer_opinf, infer_opinf_coupled
from .pod import compute_basis, gap_indicator, project
from .regression import RegConfig, l_curve_select, solve_gershgorin_ls
from .sfom import AdjacencyGraph, PoolingPolicy, infer_sfom
from .simulate import simulate_coupled, simulate_reduced, simulate_sparse

__all__ = [
    "CoupledModel", "DomainDecomposition", "decompose", "infer_coupled",
    "SnapshotSet", "TimeGrid", "load_matrix", "save_matrix", "split_train_test",
    "QuadModel", "infer_opinf", "infer_opinf_coupled",
    "compute_basis", "gap_indicator", "project",
    "RegConfig", "l_curve_select", "solve_gershgorin_ls",
    "AdjacencyGraph", "PoolingPolicy", "infer_sfom",
    "simulate_coupled", "simulate_reduced", "simulate_sparse",
]

__version__ = "0.1.0"
