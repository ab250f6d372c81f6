"""Partial contact maps and tree consistency."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .trees import all_leaf_distances, leaf_distance

MIN_SEPARATION = 3
DEFAULT_DELTA = 4


class ContactMapError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    kind: str  # "range", "order", "separation", "overlap", "crossing"
    pairs: tuple
    message: str


@dataclass(frozen=True)
class ContactMap:
    """1-based position pairs ``(i, j)`` with ``i < j`` for a sequence of ``length``."""

    length: int
    pairs: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "pairs", frozenset(tuple(p) for p in self.pairs))

    @classmethod
    def empty(cls, length):
        return cls(length, frozenset())

    def sorted_pairs(self):
        return sorted(self.pairs)

    def __len__(self):
        return len(self.pairs)

    def __bool__(self):
        return True

    def __iter__(self):
        return iter(self.sorted_pairs())

    def positions(self):
        return {p for pair in self.pairs for p in pair}

    def is_valid(self):
        return not validate(self)

    def require_valid(self):
        problems = validate(self)
        if problems:
            raise ContactMapError("; ".join(v.message for v in problems))
        return self


def validate(cmap):
    """All reasons ``cmap`` is not a context-free compatible map; empty if fine."""
    out = []
    n = cmap.length
    pairs = cmap.sorted_pairs()
    for i, j in pairs:
        if not (1 <= i <= n and 1 <= j <= n):
            out.append(Violation("range", ((i, j),), f"pair ({i},{j}) outside 1..{n}"))
        if i >= j:
            out.append(Violation("order", ((i, j),), f"pair ({i},{j}) needs i < j"))
        elif j - i < MIN_SEPARATION:
            out.append(Violation(
                "separation", ((i, j),),
                f"pair ({i},{j}) separated by {j - i} < {MIN_SEPARATION}",
            ))
    for a in range(len(pairs)):
        i, j = pairs[a]
        for b in range(a + 1, len(pairs)):
            k, l = pairs[b]
            if {i, j} & {k, l}:
                out.append(Violation(
                    "overlap", ((i, j), (k, l)),
                    f"pairs ({i},{j}) and ({k},{l}) share a position",
                ))
            elif (i < k < j) != (i < l < j):
                out.append(Violation(
                    "crossing", ((i, j), (k, l)),
                    f"pairs ({i},{j}) and ({k},{l}) cross",
                ))
    return out


def is_consistent(tree, cmap, delta=DEFAULT_DELTA):
    """True iff every contact pair sits at leaf distance ``<= delta`` in ``tree``."""
    n = len(tree.leaves())
    if n != cmap.length:
        raise ContactMapError(f"tree yield length {n} != map length {cmap.length}")
    return all(leaf_distance(tree, i, j) <= delta for i, j in cmap.pairs)


def predict_contacts(tree, delta=DEFAULT_DELTA, min_separation=MIN_SEPARATION):
    """Leaf pairs with sequence separation ``>= min_separation`` and distance ``<= delta``."""
    return {
        pair for pair, d in all_leaf_distances(tree).items()
        if pair[1] - pair[0] >= min_separation and d <= delta
    }


# -- file format -----------------------------------------------------------

def dumps(cmap):
    lines = [f"length: {cmap.length}"]
    lines.extend(f"{i} {j}" for i, j in cmap.sorted_pairs())
    return "\n".join(lines) + "\n"


def loads(text, validate_map=True):
    length = None
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("length"):
            _, _, value = line.partition(":")
            try:
                length = int(value)
            except ValueError:
                raise ContactMapError(f"line {lineno}: bad length {value.strip()!r}") from None
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ContactMapError(f"line {lineno}: expected 'i j'")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ContactMapError(f"line {lineno}: non-integer position") from None
        pairs.append((min(i, j), max(i, j)))
    if length is None:
        raise ContactMapError("missing 'length: n' header")
    cmap = ContactMap(length, frozenset(pairs))
    if validate_map:
        cmap.require_valid()
    return cmap


def load(path, validate_map=True):
    return loads(Path(path).read_text(), validate_map=validate_map)


def save(cmap, path):
    Path(path).write_text(dumps(cmap))
