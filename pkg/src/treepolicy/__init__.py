"""Policies over microservice call trees, enforced by stack-visible automata.

The pipeline: parse a policy document, compile each policy into a
deterministic complete visibly pushdown automaton, check serialized call
trees either centrally or through the extracted per-service distributed
monitor, and simulate mesh-style enforcement with header-carried state.
"""

__version__ = "0.1.0"
