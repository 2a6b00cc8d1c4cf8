"""
Exception hierarchy shared by all hyperscope modules
"""


class HyperscopeError(Exception):
    """Base class for every error the checker reports to the user"""


class ConfigError(HyperscopeError):
    pass


class ResourceError(HyperscopeError):
    """Raised when a construction would exceed the configured state cap"""

    def __init__(self, message: str, cap: int):
        super().__init__(f"{message} (cap {cap})")
        self.cap = cap


class NotPrenexError(HyperscopeError):
    """A quantifier sits below a temporal operator or an unsupported connective"""

    def __init__(self, message: str, node=None):
        super().__init__(message)
        self.node = node


class OverlapError(HyperscopeError):
    pass


class UnknownPropError(HyperscopeError):
    pass
