"""Pure-Python/numpy implementations of the hot kernels.

This module is the fallback used when the compiled ``_kernels`` extension
is unavailable (or disabled with ``WSSCUES_PURE_PYTHON=1``).  Both modules
expose the same three functions with identical semantics:

fh_merge
    Union-find pass of graph-based segmentation over pre-sorted edges.
lattice_build
    Embed feature vectors in the permutohedral lattice.
lattice_filter
    Splat, blur and slice a set of value vectors through a built lattice.
"""
import numpy as np

NAME = "python"


def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def fh_merge(a, b, w, n, k, min_size):
    """Merge components along edges sorted by ascending weight.

    Returns the root id of every vertex.  Components are joined when the
    edge weight does not exceed either side's internal difference plus
    ``k / size``; a second pass then absorbs components smaller than
    ``min_size`` through their cheapest connecting edge.
    """
    a = np.asarray(a, dtype=np.int64).tolist()
    b = np.asarray(b, dtype=np.int64).tolist()
    w = np.asarray(w, dtype=np.float64).tolist()
    k = float(k)
    parent = list(range(n))
    rank = [0] * n
    size = [1] * n
    thresh = [k] * n

    def join(x, y):
        if rank[x] < rank[y]:
            x, y = y, x
        parent[y] = x
        size[x] += size[y]
        if rank[x] == rank[y]:
            rank[x] += 1
        return x

    for ea, eb, ew in zip(a, b, w):
        ra = _find(parent, ea)
        rb = _find(parent, eb)
        if ra != rb and ew <= thresh[ra] and ew <= thresh[rb]:
            r = join(ra, rb)
            thresh[r] = ew + k / size[r]

    for ea, eb in zip(a, b):
        ra = _find(parent, ea)
        rb = _find(parent, eb)
        if ra != rb and (size[ra] < min_size or size[rb] < min_size):
            join(ra, rb)

    return np.array([_find(parent, i) for i in range(n)], dtype=np.int64)


def _canonical(d):
    dp1 = d + 1
    canon = np.empty((dp1, dp1), dtype=np.int64)
    for r in range(dp1):
        for j in range(dp1):
            canon[r, j] = r if j <= d - r else r - dp1
    return canon


def lattice_build(features):
    """Locate every feature vector in the lattice.

    ``features`` is (N, d), already divided by the kernel standard
    deviations.  Returns ``(offsets, bary, rank, blur)`` where ``offsets``
    (N, d+1) indexes the enclosing simplex vertices, ``bary`` holds the
    barycentric weights, ``rank`` is the coordinate ranking used to pick
    the simplex, and ``blur`` (d+1, 2, M) lists, for each lattice
    direction, the two neighbours of every vertex (``M`` when absent).
    """
    f = np.ascontiguousarray(features, dtype=np.float64)
    n, d = f.shape
    dp1 = d + 1
    inv_std = np.sqrt(2.0 / 3.0) * dp1
    down_factor = 1.0 / dp1

    el = np.empty((n, dp1))
    sm = np.zeros(n)
    for i in range(d, 0, -1):
        cf = f[:, i - 1] * (inv_std / np.sqrt((i + 1.0) * i))
        el[:, i] = sm - i * cf
        sm = sm + cf
    el[:, 0] = sm

    v = el * down_factor
    up = np.ceil(v) * dp1
    down = np.floor(v) * dp1
    rem0 = np.where(up - el < el - down, up, down)
    total = np.rint(rem0.sum(axis=1) * down_factor).astype(np.int64)

    diff = el - rem0
    rank = np.zeros((n, dp1), dtype=np.int64)
    for i in range(dp1):
        for j in range(i + 1, dp1):
            lt = diff[:, i] < diff[:, j]
            rank[:, i] += lt
            rank[:, j] += ~lt

    tot = total[:, None]
    pos = tot > 0
    neg = tot < 0
    wrap_hi = pos & (rank >= dp1 - tot)
    wrap_lo = neg & (rank < -tot)
    rem0 = rem0 - dp1 * wrap_hi + dp1 * wrap_lo
    rank = rank + tot - dp1 * wrap_hi + dp1 * wrap_lo

    bary = np.zeros((n, dp1 + 1))
    rows = np.arange(n)
    for i in range(dp1):
        delta = (el[:, i] - rem0[:, i]) * down_factor
        bary[rows, d - rank[:, i]] += delta
        bary[rows, dp1 - rank[:, i]] -= delta
    bary[:, 0] += 1.0 + bary[:, dp1]
    bary = np.ascontiguousarray(bary[:, :dp1])

    canon = _canonical(d)
    rem0_i = rem0.astype(np.int64)
    keys = np.empty((n, dp1, d), dtype=np.int64)
    for r in range(dp1):
        keys[:, r, :] = rem0_i[:, :d] + canon[r][rank[:, :d]]
    keys = keys.reshape(n * dp1, d)

    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    m = len(uniq)
    offsets = inverse.reshape(n, dp1).astype(np.int64)

    lo = uniq.min(axis=0) - dp1 - 1
    span = uniq.max(axis=0) - lo + dp1 + 2
    codes = _encode(uniq, lo, span)
    blur = np.full((dp1, 2, m), m, dtype=np.int64)
    for j in range(dp1):
        step = -np.ones(d, dtype=np.int64)
        if j < d:
            step[j] += dp1
        for side, sign in enumerate((-1, 1)):
            c = _encode(uniq + sign * step, lo, span)
            p = np.minimum(np.searchsorted(codes, c), m - 1)
            blur[j, side] = np.where(codes[p] == c, p, m)
    return offsets, bary, rank, blur


def _encode(keys, lo, span):
    k = keys - lo
    code = np.zeros(len(k), dtype=np.int64)
    for i in range(k.shape[1]):
        code = code * span[i] + k[:, i]
    return code


def lattice_filter(offsets, bary, blur, values):
    """Splat ``values`` (N, V) onto the lattice, blur, and slice back."""
    vals = np.ascontiguousarray(values, dtype=np.float64)
    n, nv = vals.shape
    m = blur.shape[2]
    dp1 = offsets.shape[1]
    lat = np.zeros((m + 1, nv))
    np.add.at(lat, offsets.ravel(), (bary[:, :, None] * vals[:, None, :]).reshape(-1, nv))
    for j in range(dp1):
        n1, n2 = blur[j]
        lat[:m] = 0.5 * lat[:m] + 0.25 * (lat[n1] + lat[n2])
    out = np.zeros((n, nv))
    for r in range(dp1):
        out += bary[:, r, None] * lat[offsets[:, r]]
    return out
