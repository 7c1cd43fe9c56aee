"""Eigenvalue statistics of randomly perturbed non-self-adjoint operators hD + g(x)."""

__version__ = "0.1.0"
