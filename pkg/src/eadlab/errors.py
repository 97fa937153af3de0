"""
Exception roots shared by every eadlab module.

Module-specific families (expression errors, simulation aborts, oracle
errors, export errors) derive from these.
"""


class EadlabError(Exception):
    """Base exception for all eadlab errors"""
    pass


class PreconditionError(EadlabError, ValueError):
    """Raised when an operation is called outside its documented domain"""
    pass
