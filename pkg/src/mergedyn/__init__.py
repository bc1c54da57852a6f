"""Markov dynamics of Merge on workspaces of labelled binary trees."""
from .errors import *  # noqa: F401,F403
from .forest import (
    LeafLabel,
    Partition,
    Tree,
    Workspace,
    canonical_encode,
    contract_quotient,
    counting,
    decode_tree,
    decode_workspace,
    default_head_function,
    delete_quotient,
    dynamic_partitions,
    enumerate_forests,
    enumerate_trees,
    leaf,
    merge_pair,
    project_dc,
    shannon_of_partition,
)
from .merge_graph import GraphConfig, MergeOpKind, build_merge_graph
from .partition_chain import build_partition_graph, lift_stationary, project, verify_p_symmetry
from .spectral import perron_frobenius, stationary, to_markov

__version__ = "0.1.0"
