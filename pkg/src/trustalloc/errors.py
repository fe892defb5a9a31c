"""Exception types shared across the package."""


class TrustAllocError(Exception):
    """Base class for every error raised by this package."""


# ---------------------------------------------------------------------------
# scenario / automaton validation
# ---------------------------------------------------------------------------

class ParseError(TrustAllocError):
    """A structured document could not be validated."""


class UnknownState(ParseError):
    """A transition, initial or marked entry names an undeclared state."""


class UnknownSymbol(ParseError):
    """A transition names a symbol outside the declared alphabet."""


class DuplicateTransition(ParseError):
    """Two transitions leave the same state on the same symbol."""


class NoMarkedState(ParseError):
    """An automaton declares no marked (accepting) state."""


class PlacementError(ParseError):
    """A station or robot sits out of bounds or on an obstacle."""


class CoverageViolation(TrustAllocError):
    """Some required action symbol is performable by no robot."""


# ---------------------------------------------------------------------------
# language / allocation
# ---------------------------------------------------------------------------

class NoAcceptedWord(TrustAllocError):
    """No marked state is reachable, so the automaton accepts nothing."""


class SymbolNotEnabled(TrustAllocError):
    """Attempt to consume a symbol that is not a first symbol of the residual."""


class AcceptingUnreachable(TrustAllocError):
    """The allocation automaton has no path to an accepting state."""


class PinConflict(TrustAllocError):
    """A pinned assignment is not implementable in the given residuals."""


# ---------------------------------------------------------------------------
# world / planner
# ---------------------------------------------------------------------------

class BlockedMove(TrustAllocError):
    """A move targets an out-of-bounds cell or a ground-truth obstacle."""


class Unreachable(TrustAllocError):
    """No motion plan satisfies the specification on the current map."""


# ---------------------------------------------------------------------------
# trust filter
# ---------------------------------------------------------------------------

class DegenerateBelief(TrustAllocError):
    """A filter step annihilated all probability mass."""


# ---------------------------------------------------------------------------
# simulation sessions
# ---------------------------------------------------------------------------

class SessionFinished(TrustAllocError):
    pass


class DecisionPending(TrustAllocError):
    pass


class NoPendingRequest(TrustAllocError):
    pass


class Deadlock(TrustAllocError):
    """No robot made progress for a full sweep's worth of ticks."""


class UnknownSession(TrustAllocError):
    pass
