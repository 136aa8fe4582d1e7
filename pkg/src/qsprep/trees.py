"""Binary qubit trees and the two tree sweeps used by every compiler.

A tree with ``L + 1`` layers stores ``nodes[l][j]`` for ``0 <= l <= L`` and
``0 <= j < 2**l``.  Both sweeps work on the promised subspace where interior
nodes start at |0> and the leaf layer is either empty or one-hot (PCNOT), or
where the root carries a classical bit and the leaves are empty (Fanout).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .circuit import CircuitBuilder, Fragment, cnot


@dataclass(frozen=True)
class Tree:
    nodes: tuple[tuple[int, ...], ...]

    @property
    def height(self) -> int:
        return len(self.nodes) - 1

    @property
    def root(self) -> int:
        return self.nodes[0][0]

    @property
    def leaves(self) -> tuple[int, ...]:
        return self.nodes[-1]

    def all_qubits(self) -> list[int]:
        return [q for layer in self.nodes for q in layer]


def alloc_tree(
    builder: CircuitBuilder,
    height: int,
    role: Callable[[int, int], str],
    shared: Callable[[int, int], int | None] | None = None,
    root_init: int = 0,
) -> Tree:
    """Allocate a tree, reusing any node for which ``shared(l, j)`` returns an id.

    Parent-child edges are added to the builder's coupling graph.
    """
    layers = []
    for l in range(height + 1):
        row = []
        for j in range(1 << l):
            q = shared(l, j) if shared is not None else None
            if q is None:
                q = builder.qubit(role(l, j), root_init if l == 0 else 0)
            row.append(q)
            if l:
                builder.connect(layers[l - 1][j // 2], q)
        layers.append(tuple(row))
    return Tree(tuple(layers))


def fanout(tree: Tree) -> Fragment:
    """Copy the root's basis value to every leaf and clear the interior.

    The downward sweep fills every node; the second sweep runs bottom-up so each
    interior layer is cleared by its still-populated parent.
    """
    frag: Fragment = []
    t = tree.nodes
    L = tree.height
    for l in range(L):
        frag.append([cnot(t[l][j], t[l + 1][2 * j]) for j in range(1 << l)])
        frag.append([cnot(t[l][j], t[l + 1][2 * j + 1]) for j in range(1 << l)])
    for l in range(L - 2, -1, -1):
        frag.append([cnot(t[l][j], t[l + 1][2 * j]) for j in range(1 << l)])
        frag.append([cnot(t[l][j], t[l + 1][2 * j + 1]) for j in range(1 << l)])
    return frag


def pcnot(tree: Tree) -> Fragment:
    """Flip the root iff one leaf is active, restoring the interior.

    The upward sweep marks the path from the active leaf to the root; the
    cleanup sweep runs top-down so every interior node is cleared by its
    still-marked child.
    """
    frag: Fragment = []
    t = tree.nodes
    L = tree.height
    for l in range(L, 0, -1):
        frag.append([cnot(t[l][j], t[l - 1][j // 2]) for j in range(0, 1 << l, 2)])
        frag.append([cnot(t[l][j], t[l - 1][j // 2]) for j in range(1, 1 << l, 2)])
    for l in range(2, L + 1):
        frag.append([cnot(t[l][j], t[l - 1][j // 2]) for j in range(0, 1 << l, 2)])
        frag.append([cnot(t[l][j], t[l - 1][j // 2]) for j in range(1, 1 << l, 2)])
    return frag


def sweep_depth(height: int) -> int:
    """Layer count of :func:`fanout` or :func:`pcnot` on a tree of this height."""
    return 0 if height == 0 else 4 * height - 2


def ceil_log2(x: int) -> int:
    return max(0, (x - 1).bit_length())
