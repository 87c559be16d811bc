"""Static analysis of XML write-access policies over structured DTDs."""

from .analysis import check_consistency, closure_T, lpce, mark_graph, replace_graph
from .policy import UAT, Policy, parse_policy, valid_set
from .repair import Tiebreak, repair
from .schema import DTD, parse_dtd
from .tree import XMLTree, canon, parse_tree

__all__ = [
    "DTD", "Policy", "Tiebreak", "UAT", "XMLTree", "canon", "check_consistency",
    "closure_T", "lpce", "mark_graph", "parse_dtd", "parse_policy", "parse_tree",
    "repair", "replace_graph", "valid_set",
]
