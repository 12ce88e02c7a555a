"""Numerical laboratory for L2 estimates of the Cauchy-Riemann operator on annuli.

Submodules:

``geometry``
    domains, annuli, signed distance jets, CR frame, mollification
``forms``
    (p,q)-form algebra: dbar, weighted adjoint, Hodge star, wedge, integrals
``quadrature``
    volume, boundary and collar quadrature schemes
``convexity``
    Levi q-sums and sub-mean value sampling
``identities``
    pointwise and integral checks of the boundary energy identities
``constants``
    cutoff and the explicit closed-range constants
``solver``
    discrete dbar complexes, minimal-norm solves, spectra, cohomology ranks
``cli``
    configuration-driven report bundles
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import ConfigError, DbarLabError, NumericalFailure
from .geometry import AnnulusSpec, DomainSpec, cr_frame, jet, signed_distance

__all__ = [
    "AnnulusSpec",
    "ConfigError",
    "DbarLabError",
    "DomainSpec",
    "NumericalFailure",
    "__version__",
    "cr_frame",
    "jet",
    "signed_distance",
]
