"""locality-lab: locality constants, marginal transport bounds, localized
subspace reduction and localized score matching for block-sparse
distributions."""

__version__ = "0.1.0"
