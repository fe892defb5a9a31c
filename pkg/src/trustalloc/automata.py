"""Finite subtask automata and their remaining-word (residual) languages.

A subtask is described by a deterministic finite automaton over action
symbols.  Progress on the subtask is tracked as the finite set of accepted
words still consistent with the actions performed so far; performing an
action maps that set to its suffix derivative.  The empty word stands for
a fully completed subtask.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

from .errors import (
    DuplicateTransition,
    NoAcceptedWord,
    NoMarkedState,
    ParseError,
    SymbolNotEnabled,
    UnknownState,
    UnknownSymbol,
)

Word = tuple[str, ...]

EPSILON: Word = ()


@dataclass(frozen=True)
class Automaton:
    """Deterministic finite automaton over action symbols."""

    states: frozenset[str]
    alphabet: frozenset[str]
    transitions: Mapping[tuple[str, str], str]
    initial: str
    marked: frozenset[str]

    def successor(self, state: str, symbol: str) -> str | None:
        return self.transitions.get((state, symbol))

    def outgoing(self, state: str) -> Iterator[tuple[str, str]]:
        """Yield (symbol, target) pairs leaving `state`, sorted by symbol."""
        for (src, sym), dst in sorted(self.transitions.items()):
            if src == state:
                yield sym, dst

    def accepts(self, word: Word) -> bool:
        state = self.initial
        for symbol in word:
            nxt = self.successor(state, symbol)
            if nxt is None:
                return False
            state = nxt
        return state in self.marked


def parse_automaton(spec: Mapping) -> Automaton:
    """Validate a structured automaton description.

    The description carries `states`, `alphabet`, `initial`, `marked` and
    `transitions` (a list of [from, symbol, to] triples).  Nondeterminism
    and references to undeclared states or symbols are rejected.
    """
    try:
        states = [str(s) for s in spec["states"]]
        alphabet = [str(a) for a in spec["alphabet"]]
        initial = str(spec["initial"])
        marked = [str(m) for m in spec["marked"]]
        raw_transitions = list(spec["transitions"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed automaton description: {exc}") from exc

    state_set = frozenset(states)
    symbol_set = frozenset(alphabet)
    if initial not in state_set:
        raise UnknownState(f"initial state {initial!r} is not declared")
    for m in marked:
        if m not in state_set:
            raise UnknownState(f"marked state {m!r} is not declared")
    if not marked:
        raise NoMarkedState("automaton declares no marked state")

    transitions: dict[tuple[str, str], str] = {}
    for entry in raw_transitions:
        if len(entry) != 3:
            raise ParseError(f"transition {entry!r} is not a [from, symbol, to] triple")
        src, sym, dst = (str(x) for x in entry)
        if src not in state_set:
            raise UnknownState(f"transition source {src!r} is not declared")
        if dst not in state_set:
            raise UnknownState(f"transition target {dst!r} is not declared")
        if sym not in symbol_set:
            raise UnknownSymbol(f"transition symbol {sym!r} is not in the alphabet")
        if (src, sym) in transitions:
            raise DuplicateTransition(f"state {src!r} already leaves on {sym!r}")
        transitions[(src, sym)] = dst

    return Automaton(
        states=state_set,
        alphabet=symbol_set,
        transitions=transitions,
        initial=initial,
        marked=frozenset(marked),
    )


def enumerate_acyclic_words(automaton: Automaton) -> frozenset[Word]:
    """All words accepted along runs that never revisit an automaton state.

    The restriction to acyclic runs keeps the result finite on cyclic
    automata while preserving every accepted word of an acyclic one.
    """
    adjacency: dict[str, list[tuple[str, str]]] = {s: [] for s in automaton.states}
    for (src, sym), dst in sorted(automaton.transitions.items()):
        adjacency[src].append((sym, dst))

    words: set[Word] = set()

    def walk(state: str, prefix: Word, seen: frozenset[str]) -> None:
        if state in automaton.marked:
            words.add(prefix)
        for sym, dst in adjacency[state]:
            if dst in seen:
                continue
            walk(dst, prefix + (sym,), seen | {dst})

    walk(automaton.initial, EPSILON, frozenset({automaton.initial}))
    if not words:
        raise NoAcceptedWord("no marked state is reachable")
    return frozenset(words)


@dataclass(frozen=True)
class ResidualLanguage:
    """Finite, nonempty set of remaining action words for one subtask."""

    words: frozenset[Word]

    def __post_init__(self) -> None:
        if not self.words:
            raise ValueError("a residual language must stay nonempty")

    @classmethod
    def of(cls, *words: str) -> "ResidualLanguage":
        """Convenience constructor from strings of one-character symbols."""
        return cls(frozenset(tuple(w) for w in words))

    @classmethod
    def from_automaton(cls, automaton: Automaton) -> "ResidualLanguage":
        return cls(enumerate_acyclic_words(automaton))

    def firsts(self) -> frozenset[str]:
        """First symbols of all non-empty remaining words."""
        return frozenset(w[0] for w in self.words if w)

    def derivative(self, symbol: str) -> "ResidualLanguage":
        """Consume `symbol`, keeping the tails of the matching words."""
        tails = frozenset(w[1:] for w in self.words if w and w[0] == symbol)
        if not tails:
            raise SymbolNotEnabled(f"{symbol!r} is not a first symbol of the residual")
        return ResidualLanguage(tails)

    def is_complete(self) -> bool:
        """True once some accepted word has been fully consumed."""
        return EPSILON in self.words

    def max_word_length(self) -> int:
        return max(len(w) for w in self.words)

    def symbols(self) -> frozenset[str]:
        return frozenset(s for w in self.words for s in w)

    def sorted_words(self) -> list[Word]:
        return sorted(self.words)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        body = ", ".join("".join(w) if w else "eps" for w in self.sorted_words())
        return f"{{{body}}}"
