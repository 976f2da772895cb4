"""Whitehead graphs, reduction and cut pairs for Grushko trees of free products."""

from .classify import (
    PathCertificate,
    axis_key,
    certify_projection,
    check_certificate,
    decomposition_connected,
    extract_short_element,
    find_short_cut_pair,
    is_quadratic,
    is_simple,
)
from .errors import GrushkoError
from .tree import GrushkoTree, ZSplitting, comb_length, compute_bounds, standard_rose
from .whitehead import (
    LineCollection,
    annular_whitehead,
    classify_components_minus,
    derived_components,
    splice,
    subtree_whitehead,
    vertex_whitehead,
    whitehead_reduce,
)
from .words import FactorSpec, FreeProductPresentation, NormalWord, parse_word

__version__ = "0.1.0"
