"""Pure-Python twins of the compiled kernels in ``_ckernels.pyx``.

Same signatures, same results; used when the extension is not built or
when ``MLCIRC_PURE_PYTHON=1``.
"""

from __future__ import annotations

import numpy as np


def _eliminate(rows: list[list[int]], p: int, full: bool) -> list[int]:
    nrows = len(rows)
    ncols = len(rows[0]) if nrows else 0
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        piv = next((i for i in range(r, nrows) if rows[i][c]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = pow(rows[r][c], -1, p)
        pr = rows[r]
        if inv != 1:
            pr = rows[r] = [(x * inv) % p for x in pr]
        for i in range(0 if full else r + 1, nrows):
            if i == r:
                continue
            f = rows[i][c]
            if f:
                ri = rows[i]
                rows[i] = [(x - f * y) % p for x, y in zip(ri, pr)]
        pivots.append(c)
        r += 1
    return pivots


def rank_modp(a, p: int) -> int:
    rows = [[int(x) % p for x in row] for row in np.asarray(a, dtype=object)]
    return len(_eliminate(rows, p, full=False))


def rref_modp(a, p: int):
    arr = np.asarray(a, dtype=object)
    rows = [[int(x) % p for x in row] for row in arr]
    pivots = _eliminate(rows, p, full=True)
    out = np.array(rows, dtype=np.int64 if p < (1 << 31) else object).reshape(arr.shape)
    return out, pivots


def first_unbalancing(masks, n: int, start: int, count: int, threshold2: int):
    sets = [(int(s), int(s).bit_count()) for s in masks]
    limit = 1 << n
    y = int(start)
    done = 0
    while done < count and y < limit:
        done += 1
        if all(abs(2 * (y & s).bit_count() - k) >= threshold2 for s, k in sets):
            return y, done
        low = y & -y
        ripple = y + low
        y = (((ripple ^ y) >> 2) // low) | ripple
    return -1, done


def coverage_table(cands, parts, limit2: int):
    cs = [int(c) for c in cands]
    ps = [int(q) for q in parts]
    out = np.zeros((len(cs), len(ps)), dtype=np.uint8)
    for i, c in enumerate(cs):
        k = c.bit_count()
        for j, q in enumerate(ps):
            if abs(2 * (c & q).bit_count() - k) <= limit2:
                out[i, j] = 1
    return out
