"""Exception hierarchy shared across the toolkit."""


class TreePolicyError(Exception):
    """Base class for all toolkit errors."""


class MalformedTrace(TreePolicyError):
    """A serialized trace cannot be reconstructed into a nested word
    (e.g. a return whose endpoint differs from the innermost open call)."""


class NotRooted(TreePolicyError):
    """A tree operation was applied to a word that is not rooted well-matched."""


class IndexOutOfRange(TreePolicyError):
    """A slice index falls outside the word's index range."""


class PolicySyntaxError(TreePolicyError):
    """Concrete-syntax error in a policy or regex source text."""


class UnknownEndpoint(TreePolicyError):
    """An endpoint name does not resolve into the declared alphabet."""


class EpsilonMatchRegex(TreePolicyError):
    """A ``match`` regex accepts the empty string, which is forbidden."""


class StackUnderflow(TreePolicyError):
    """A return symbol arrived while the automaton stack held only the
    bottom marker.  Impossible on rooted well-matched input."""


class VpaParseError(TreePolicyError):
    """Malformed serialized automaton."""


class CompilerInternalError(TreePolicyError):
    """Two transition families produced conflicting values for one key.
    Indicates a compiler bug: the construction must stay deterministic."""


class ConfigError(TreePolicyError):
    """Simulator configuration problem (cyclic topology, missing filter
    coverage, unknown entrypoint)."""
