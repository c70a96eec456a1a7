"""Pure-Python coalition-table kernels.

A coalition over ``n`` players is an ``n``-bit mask; a table is a
``bytearray`` of length ``2**n`` with ``table[s] == 1`` iff coalition ``s``
(together with the exogenous facts) satisfies the query.
"""


def upward_closure(masks, n):
    """Table of all supersets of at least one mask in ``masks``."""
    size = 1 << n
    table = bytearray(size)
    for m in masks:
        table[m] = 1
    for b in range(n):
        bit = 1 << b
        for s in range(size):
            if table[s] and not s & bit:
                table[s | bit] = 1
    return table


def minimal_masks(table, n):
    """Masks set in ``table`` none of whose one-smaller subsets are set."""
    out = []
    for s in range(1 << n):
        if table[s] and not any(s & (1 << b) and table[s ^ (1 << b)] for b in range(n)):
            out.append(s)
    return out


def count_by_size(table, n):
    counts = [0] * (n + 1)
    for s in range(1 << n):
        if table[s]:
            counts[s.bit_count()] += 1
    return counts


def pivotal_counts(table, n, player):
    """Per size k: coalitions of size k without ``player`` that it turns true."""
    bit = 1 << player
    counts = [0] * n
    for s in range(1 << n):
        if not s & bit and table[s | bit] and not table[s]:
            counts[s.bit_count()] += 1
    return counts


def pivotal_counts_all(table, n):
    counts = [[0] * n for _ in range(n)]
    for s in range(1 << n):
        if table[s]:
            continue
        k = s.bit_count()
        for p in range(n):
            bit = 1 << p
            if not s & bit and table[s | bit]:
                counts[p][k] += 1
    return counts
