"""Quantified answer set programming toolkit.

Subpackages and modules:

- `qasp.lp`: ground logic programs (parser, grounder, cardinality
  compilation, dependency analyses, stable-model search)
- `qasp.qlp`: quantified logic programs and their evaluation
- `qasp.lp2cnf`: stable-model-preserving reduction to CNF
- `qasp.qbf`: QBF solving and QDIMACS input/output
- `qasp.backends`: end-to-end satisfiability backends for quantified programs
- `qasp.planning`: planning descriptions and plan semantics
- `qasp.encoders`: planning-to-quantified-program encodings and decoding
- `qasp.aspq`: bridge to quantified programs over subprogram sequences
- `qasp.cli`: command line interface
"""

__version__ = "0.1.0"
