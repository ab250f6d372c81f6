"""Parse trees, skeletons and the bracketed text form."""
from __future__ import annotations

from dataclasses import dataclass

UNLABELED = "*"


@dataclass(frozen=True)
class Tree:
    """A node covering ``[start, end)`` of the yield (0-based).

    Leaves carry the terminal symbol as ``label`` and have no children.
    Unlabelled internal nodes (skeletons) use ``label=None``.
    """

    label: object
    children: tuple = ()
    start: int = 0
    end: int = 1

    @property
    def is_leaf(self):
        return not self.children

    def leaves(self):
        if self.is_leaf:
            return [self]
        out = []
        for child in self.children:
            out.extend(child.leaves())
        return out

    def yield_(self):
        return "".join(leaf.label for leaf in self.leaves())

    def __len__(self):
        return self.end - self.start

    def nodes(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def to_bracket(self):
        if self.is_leaf:
            return str(self.label)
        label = UNLABELED if self.label is None else str(self.label)
        inner = " ".join(child.to_bracket() for child in self.children)
        return f"({label} {inner})"

    def __str__(self):
        return self.to_bracket()


def ust_of(tree):
    """Skeleton of ``tree``: internal labels erased, leaves kept."""
    if tree.is_leaf:
        return tree
    return Tree(None, tuple(ust_of(c) for c in tree.children), tree.start, tree.end)


def leaf_depths_and_ancestors(tree):
    """For each leaf (in order) the list of nodes from the root down to it."""
    paths = []

    def walk(node, path):
        path = path + [node]
        if node.is_leaf:
            paths.append(path)
        else:
            for child in node.children:
                walk(child, path)

    walk(tree, [])
    return paths


def _distance(path_a, path_b):
    common = 0
    for a, b in zip(path_a, path_b):
        if a is not b:
            break
        common += 1
    return (len(path_a) - common) + (len(path_b) - common)


def leaf_distance(tree, i, j):
    """Edges on the path between the i-th and j-th leaves (1-based)."""
    paths = leaf_depths_and_ancestors(tree)
    n = len(paths)
    if not (1 <= i <= n and 1 <= j <= n) or i == j:
        raise ValueError(f"leaf positions ({i}, {j}) invalid for yield of length {n}")
    return _distance(paths[i - 1], paths[j - 1])


def all_leaf_distances(tree):
    """Dict ``(i, j) -> distance`` for every 1-based leaf pair with i < j."""
    paths = leaf_depths_and_ancestors(tree)
    n = len(paths)
    return {
        (i + 1, j + 1): _distance(paths[i], paths[j])
        for i in range(n)
        for j in range(i + 1, n)
    }


class TreeFormatError(ValueError):
    pass


def parse_bracket(text):
    """Read ``(label child ...)`` back into a ``Tree`` with spans filled in."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    if not tokens:
        raise TreeFormatError("empty tree")
    pos = 0
    leaf_count = 0

    def read():
        nonlocal pos, leaf_count
        if pos >= len(tokens):
            raise TreeFormatError("unexpected end of tree")
        tok = tokens[pos]
        if tok == ")":
            raise TreeFormatError("unexpected ')'")
        if tok != "(":
            pos += 1
            leaf_count += 1
            return Tree(tok, (), leaf_count - 1, leaf_count)
        pos += 1
        if pos >= len(tokens) or tokens[pos] in "()":
            raise TreeFormatError("node without label")
        label = None if tokens[pos] == UNLABELED else tokens[pos]
        pos += 1
        start = leaf_count
        children = []
        while pos < len(tokens) and tokens[pos] != ")":
            children.append(read())
        if pos >= len(tokens):
            raise TreeFormatError("unbalanced parentheses")
        pos += 1
        if not children:
            raise TreeFormatError("node without children")
        return Tree(label, tuple(children), start, leaf_count)

    tree = read()
    if pos != len(tokens):
        raise TreeFormatError("trailing tokens after tree")
    return tree
