"""A polymorphic adjoint-modal calculus with mode-indexed memory regions.

The package provides the core syntax, hereditary substitution, a
substructural bidirectional type checker, a two-level small-step evaluator,
mode-relative equivalence, a text frontend, and a command-line interface.
"""

__version__ = "0.1.0"
