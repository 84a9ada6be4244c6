"""tdforge: tooling for a binary data-format description language.

Check format specs, execute them against byte sequences, generate
branch-covering positive/negative test packets with an SMT solver,
differentially compare two specs, and run a candidate-refinement loop.
"""

__version__ = "0.1.0"
