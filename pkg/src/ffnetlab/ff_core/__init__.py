"""Finite-field algebra core: fields, matrices, polynomials, eigen-decomposition."""

from .eigen import EigenResult, eigen_decompose, roots_in
from .field import (
    FFElem,
    FieldCtx,
    ff_add,
    ff_inv,
    ff_mul,
    gamma,
    gamma_inv,
    make_field,
    parse_elem,
    phi,
    phi_inv,
    render_elem,
)
from .matrix import (
    FFMatrix,
    block,
    char_poly,
    lift,
    mat_det,
    mat_inv,
    mat_mul,
    mat_nullspace,
    mat_rank,
    mat_rref,
)
from .poly import (
    PolyGF,
    count_irreducible,
    factor_poly,
    is_irreducible,
    minimal_poly,
    poly_gcd,
    splitting_degree,
)

__all__ = [
    "EigenResult", "FFElem", "FFMatrix", "FieldCtx", "PolyGF", "block", "char_poly",
    "count_irreducible", "eigen_decompose", "factor_poly", "ff_add", "ff_inv", "ff_mul",
    "gamma", "gamma_inv", "is_irreducible", "lift", "make_field", "mat_det", "mat_inv",
    "mat_mul", "mat_nullspace", "mat_rank", "mat_rref", "minimal_poly", "parse_elem",
    "phi", "phi_inv", "poly_gcd", "render_elem", "roots_in", "splitting_degree",
]
