"""Effective key length of spread-spectrum watermarking.

Closed forms live in :mod:`keylength.theory`, the simulation estimators in
:mod:`keylength.estimators` and the embedding schemes in
:mod:`keylength.schemes`. ``python -m keylength`` runs the command line.
"""
from .core import (EstimateResult, EquivalenceQuery, InvalidParameterError, Message, Method,
                   Observation, SchemeParams, SecretKey, Side, bits_from_probability,
                   make_params)
from .estimators import (MonteCarloConfig, RareEventConfig, estimate_equivalence_angle,
                         keylength_from_angle, mc_effective_keylength,
                         rare_event_keylength_blackbox, rare_event_keylength_geometric)
from .schemes import ImprovedSpreadSpectrum, SpreadSpectrum, make_scheme, ser_mc
from .theory import (asymptotic_keylength, basic_keylength, cap_probability,
                     equivalence_angle, kma_keylength, KeyLengthQuery, ser_theory)

__version__ = "0.1.0"

__all__ = [
    "EstimateResult", "EquivalenceQuery", "ImprovedSpreadSpectrum", "InvalidParameterError",
    "KeyLengthQuery", "Message", "Method", "MonteCarloConfig", "Observation", "RareEventConfig",
    "SchemeParams", "SecretKey", "Side", "SpreadSpectrum", "asymptotic_keylength",
    "basic_keylength", "bits_from_probability", "cap_probability", "equivalence_angle",
    "estimate_equivalence_angle", "keylength_from_angle", "kma_keylength", "make_params",
    "make_scheme", "mc_effective_keylength", "rare_event_keylength_blackbox",
    "rare_event_keylength_geometric", "ser_mc", "ser_theory",
]
