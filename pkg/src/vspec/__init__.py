"""vspec: a compiler from a functional network-specification language to
relational verifier queries, prover interface modules, and hash-linked
proof caches, with a built-in exact verifier for ReLU networks."""

from .errors import VspecError
from .pipeline import CompiledSpec, compile_spec, load_program

__all__ = ["CompiledSpec", "VspecError", "compile_spec", "load_program"]

__version__ = "0.1.0"
