"""Independent oracles used only by the tests.

Deliberately written with different algorithms and data layouts than the
library code they check: pure-Python bit fiddling for GF(2) algebra and a
dictionary-based sum-product decoder for the message-passing oracle.
"""

import numpy as np


def syndrome_oracle(bits, check_rows):
    """Parity of each check row computed with Python integers."""
    out = []
    for row in check_rows:
        parity = 0
        for col in row:
            parity ^= int(bits[col])
        out.append(parity)
    return out


def gf2_rank_oracle(rows, n_cols):
    """Rank over GF(2) via bitmask elimination."""
    masks = []
    for row in rows:
        mask = 0
        for col in row:
            mask |= 1 << int(col)
        masks.append(mask)
    rank = 0
    for col in range(n_cols):
        bit = 1 << col
        pivot = next((i for i in range(rank, len(masks)) if masks[i] & bit), None)
        if pivot is None:
            continue
        masks[rank], masks[pivot] = masks[pivot], masks[rank]
        for i in range(len(masks)):
            if i != rank and masks[i] & bit:
                masks[i] ^= masks[rank]
        rank += 1
    return rank


def sum_product_decode(check_rows, n, llrs, iterations):
    """Plain flooding sum-product decoder (tanh rule), no normalization.

    Returns (hard_bits, converged).
    """
    rows = [list(map(int, r)) for r in check_rows]
    var_checks = [[] for _ in range(n)]
    for i, row in enumerate(rows):
        for j in row:
            var_checks[j].append(i)
    c2v = {(i, j): 0.0 for i, row in enumerate(rows) for j in row}

    hard = (np.asarray(llrs) < 0).astype(np.uint8)
    for _ in range(iterations):
        v2c = {}
        for i, row in enumerate(rows):
            for j in row:
                total = llrs[j]
                for i2 in var_checks[j]:
                    if i2 != i:
                        total += c2v[(i2, j)]
                v2c[(i, j)] = total
        for i, row in enumerate(rows):
            tanhs = {j: np.tanh(np.clip(v2c[(i, j)], -25, 25) / 2.0) for j in row}
            for j in row:
                prod = 1.0
                for j2 in row:
                    if j2 != j:
                        prod *= tanhs[j2]
                c2v[(i, j)] = 2.0 * np.arctanh(np.clip(prod, -0.9999999, 0.9999999))
        posterior = np.array(llrs, dtype=float)
        for j in range(n):
            posterior[j] += sum(c2v[(i, j)] for i in var_checks[j])
        hard = (posterior < 0).astype(np.uint8)
        if not any(syndrome_oracle(hard, rows)):
            return hard, True
    return hard, False
