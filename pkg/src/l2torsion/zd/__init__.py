"""Invariants over the group ring of Z^d."""

from .invariants import (
    DENSITY_POLICY,
    LOGDET_POLICY,
    NS_WINDOW,
    NSFit,
    betti_zd,
    complex_betti,
    complex_density_curve,
    complex_ns_estimate,
    det_class_check,
    fk_log_det,
    generic_rank,
    heat_trace_zd,
    laplacian_density_curve,
    ns_estimate,
    ns_fit,
    spectral_density_curve,
    stieltjes_heat_trace,
    torsion_zd,
)
from .laurent import (
    LaurentMatrix,
    TwistedRep,
    ZdComplex,
    make_zd_complex,
    symbol,
    symbol_at_angles,
    torus_grid,
    twist_complex,
    twist_matrix,
    vn_trace,
)
from .quadrature import QuadraturePolicy
