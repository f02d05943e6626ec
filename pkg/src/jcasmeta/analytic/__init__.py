"""Moments and meta distributions of user, sensing and joint SIR coverage."""

from __future__ import annotations

from .communication import comm_association_pdfs, comm_moment, comm_moments, psi_los, psi_nlos
from .inversion import INVERSION_SPEC, InversionResult, MomentCache, gil_pelaez_ccdf, invert_ccdf
from .jcas import (
    FAMILIES,
    META_MOMENT_SPEC,
    family_moments,
    imaginary_moment_cache,
    jcas_coverage,
    jcas_meta_distribution,
    jcas_moment,
    marginal_meta_distribution,
    meta_distribution,
    mix_ccdfs,
)
from .los_only import los_only_sensing_moment, los_only_sensing_moments
from .params import (
    AnalyticError,
    ComplexMoment,
    InversionError,
    MetaCurve,
    NetworkParams,
    SeriesDivergenceError,
    SirThresholds,
)
from .sensing import (
    j_exclusion_integral,
    sensing_interferer_intensity,
    sensing_moment,
    sensing_moments,
    sensing_serving_pdf,
)

__all__ = [
    "AnalyticError",
    "ComplexMoment",
    "FAMILIES",
    "INVERSION_SPEC",
    "InversionError",
    "InversionResult",
    "META_MOMENT_SPEC",
    "MetaCurve",
    "MomentCache",
    "NetworkParams",
    "SeriesDivergenceError",
    "SirThresholds",
    "comm_association_pdfs",
    "comm_moment",
    "comm_moments",
    "family_moments",
    "gil_pelaez_ccdf",
    "imaginary_moment_cache",
    "invert_ccdf",
    "j_exclusion_integral",
    "jcas_coverage",
    "jcas_meta_distribution",
    "jcas_moment",
    "los_only_sensing_moment",
    "los_only_sensing_moments",
    "marginal_meta_distribution",
    "meta_distribution",
    "mix_ccdfs",
    "psi_los",
    "psi_nlos",
    "sensing_interferer_intensity",
    "sensing_moment",
    "sensing_moments",
    "sensing_serving_pdf",
]
