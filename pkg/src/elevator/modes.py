"""Mode specifications: a preordered set of modes with structural-rule signatures.

A mode names a memory region.  Each mode carries the set of structural rules
(contraction, weakening) its variables admit, and the preorder ``m >= k``
says region k may refer to values living in region m.  The whole system is
parametrized by one validated :class:`ModeSpec`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

Mode = str


class StructRule(Enum):
    CONTRACTION = "C"
    WEAKENING = "W"


class Recursion(Enum):
    GENERAL = "general"
    NONE = "none"


class SpecError(Exception):
    """Raised when a raw mode specification fails validation."""


class UnknownMode(SpecError):
    def __init__(self, mode: Mode):
        super().__init__(f"unknown mode {mode!r}")
        self.mode = mode


class SignatureViolation(SpecError):
    def __init__(self, hi: Mode, lo: Mode):
        super().__init__(
            f"mode {hi!r} >= {lo!r} but the signature of {hi!r} does not "
            f"contain the signature of {lo!r}"
        )
        self.hi = hi
        self.lo = lo


def _closure(modes: frozenset[Mode], pairs: Iterable[tuple[Mode, Mode]]) -> frozenset[tuple[Mode, Mode]]:
    rel = {(m, m) for m in modes}
    rel.update(pairs)
    changed = True
    while changed:
        changed = False
        for a, b in list(rel):
            for c, d in list(rel):
                if b == c and (a, d) not in rel:
                    rel.add((a, d))
                    changed = True
    return frozenset(rel)


@dataclass(frozen=True)
class ModeSpec:
    """A validated preordered set of modes.

    ``order`` stores the full reflexive-transitive closure of the declared
    pairs; ``sig`` maps each mode to its allowed structural rules; and
    ``recursion`` records whether top-level definitions whose type lives at
    that mode may be recursive.  Instances are immutable and shareable.
    """

    modes: frozenset[Mode]
    order: frozenset[tuple[Mode, Mode]]
    sig: Mapping[Mode, frozenset[StructRule]]
    recursion: Mapping[Mode, Recursion] = field(default_factory=dict)

    def geq(self, m: Mode, k: Mode) -> bool:
        """True iff mode k may access values in mode m (m >= k)."""
        if m not in self.modes:
            raise UnknownMode(m)
        if k not in self.modes:
            raise UnknownMode(k)
        return (m, k) in self.order

    def gt(self, m: Mode, k: Mode) -> bool:
        """Strict order: m >= k but not k >= m."""
        return self.geq(m, k) and not self.geq(k, m)

    def allows(self, m: Mode, rule: StructRule) -> bool:
        if m not in self.modes:
            raise UnknownMode(m)
        return rule in self.sig[m]

    def allows_contraction(self, m: Mode) -> bool:
        return self.allows(m, StructRule.CONTRACTION)

    def allows_weakening(self, m: Mode) -> bool:
        return self.allows(m, StructRule.WEAKENING)

    def recursion_policy(self, m: Mode) -> Recursion:
        if m not in self.modes:
            raise UnknownMode(m)
        return self.recursion.get(m, _default_recursion(self.sig[m]))


def _default_recursion(rules: frozenset[StructRule]) -> Recursion:
    if StructRule.CONTRACTION in rules and StructRule.WEAKENING in rules:
        return Recursion.GENERAL
    return Recursion.NONE


def validate(
    modes: Iterable[Mode],
    order_pairs: Iterable[tuple[Mode, Mode]] = (),
    signatures: Mapping[Mode, Iterable[StructRule]] | None = None,
    recursion: Mapping[Mode, Recursion] | None = None,
) -> ModeSpec:
    """Validate a raw mode declaration and build the closed :class:`ModeSpec`.

    Checks that every referenced mode is declared and that the signature is
    monotone along the preorder: ``m >= k`` requires ``sig(m) >= sig(k)``.
    """
    mode_set = frozenset(modes)
    if not mode_set:
        raise SpecError("a mode specification needs at least one mode")
    pairs = tuple(order_pairs)
    for hi, lo in pairs:
        if hi not in mode_set:
            raise UnknownMode(hi)
        if lo not in mode_set:
            raise UnknownMode(lo)
    sig: dict[Mode, frozenset[StructRule]] = {m: frozenset() for m in mode_set}
    if signatures is not None:
        for m, rules in signatures.items():
            if m not in mode_set:
                raise UnknownMode(m)
            sig[m] = frozenset(rules)
    rec: dict[Mode, Recursion] = {}
    if recursion is not None:
        for m, policy in recursion.items():
            if m not in mode_set:
                raise UnknownMode(m)
            rec[m] = policy
    order = _closure(mode_set, pairs)
    for hi, lo in order:
        if not sig[hi] >= sig[lo]:
            raise SignatureViolation(hi, lo)
    return ModeSpec(modes=mode_set, order=order, sig=sig, recursion=rec)


_ALLOWED_KEYS = {"modes", "order", "signatures", "recursion"}
_RULE_BY_LETTER = {"C": StructRule.CONTRACTION, "W": StructRule.WEAKENING}


def from_dict(raw: Mapping) -> ModeSpec:
    """Build a spec from the JSON config object format.

    The object has keys ``modes`` (array of strings), ``order`` (array of
    ``[hi, lo]`` pairs meaning hi >= lo), ``signatures`` (mode name to array
    drawn from ``"C"``/``"W"``) and optional ``recursion`` (mode name to
    ``"general"``/``"none"``).  Unknown keys are rejected.
    """
    unknown = set(raw) - _ALLOWED_KEYS
    if unknown:
        raise SpecError(f"unknown mode-spec keys: {sorted(unknown)}")
    if "modes" not in raw:
        raise SpecError("mode-spec config needs a 'modes' array")
    modes = list(raw["modes"])
    pairs = []
    for pair in raw.get("order", []):
        if len(pair) != 2:
            raise SpecError(f"order entries must be [hi, lo] pairs, got {pair!r}")
        pairs.append((pair[0], pair[1]))
    signatures = {}
    for m, letters in raw.get("signatures", {}).items():
        rules = []
        for letter in letters:
            if letter not in _RULE_BY_LETTER:
                raise SpecError(f"unknown structural rule {letter!r} for mode {m!r}")
            rules.append(_RULE_BY_LETTER[letter])
        signatures[m] = rules
    recursion = {}
    for m, policy in raw.get("recursion", {}).items():
        try:
            recursion[m] = Recursion(policy)
        except ValueError:
            raise SpecError(f"unknown recursion policy {policy!r} for mode {m!r}") from None
    return validate(modes, pairs, signatures, recursion)


def load(path: str) -> ModeSpec:
    """Load and validate a mode-spec JSON file."""
    with open(path, encoding="utf-8") as fp:
        raw = json.load(fp)
    if not isinstance(raw, dict):
        raise SpecError("mode-spec file must contain a JSON object")
    return from_dict(raw)


FULL = frozenset({StructRule.CONTRACTION, StructRule.WEAKENING})


def two_mode_spec() -> ModeSpec:
    """The default code/program spec: C >= P, both with full signatures."""
    return validate(
        ["C", "P"],
        [("C", "P")],
        {"C": FULL, "P": FULL},
    )


def single_mode_spec() -> ModeSpec:
    """One intuitionistic mode; the calculus degenerates to System F."""
    return validate(["M"], [], {"M": FULL})


def linear_two_mode_spec() -> ModeSpec:
    """An intuitionistic mode I above a purely linear mode L."""
    return validate(["I", "L"], [("I", "L")], {"I": FULL, "L": frozenset()})


def three_mode_spec() -> ModeSpec:
    """C > P > GF; C and P allow everything, GF is fully linear."""
    return validate(
        ["C", "P", "GF"],
        [("C", "P"), ("P", "GF")],
        {"C": FULL, "P": FULL, "GF": frozenset()},
    )
