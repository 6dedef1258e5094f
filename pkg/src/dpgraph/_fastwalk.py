"""Compiled basis-exchange walk kernel.

Same output law as :class:`dpgraph.sampler.BasisExchangeWalk`, computed with
a lumped state.  Zero-weight ground elements are interchangeable: the
transition law is invariant under any relabeling of them that fixes the
start set, so the chain only needs (a) the exact set of support elements
currently inside the subset, (b) the count of surviving start-set
zero-weight members, and (c) the count of freshly drawn zero-weight members.
Steps touching only zero-weight elements are O(1) count updates; support
moves go through a segment tree over the support (linear domain while
``eps * max_weight <= 400``, log domain beyond, matching the reference
chain's log-domain semantics).  Concrete zero-weight labels are drawn
uniformly within their class after the last step, which preserves the exact
distribution of the final subset.

Import of numba is optional; callers check :data:`HAVE_NUMBA` and fall back
to the pure-Python chain.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


LINEAR_DOMAIN_MAX_LOG = 400.0

_EMPTY = np.int64(-1)
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_C5 = np.uint64(5)
_C7 = np.uint64(7)
_C9 = np.uint64(9)
_C11 = np.uint64(11)
_C17 = np.uint64(17)
_C19 = np.uint64(19)
_C45 = np.uint64(45)
_C57 = np.uint64(57)
_INV53 = 1.0 / 9007199254740992.0
_NEG_INF = -np.inf


@njit(inline="always")
def _rng_next(state):
    x = state[1] * _C5
    result = ((x << _C7) | (x >> _C57)) * _C9
    t = state[1] << _C17
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = (state[3] << _C45) | (state[3] >> _C19)
    return result


@njit(inline="always")
def _rand(state):
    return float(_rng_next(state) >> _C11) * _INV53


@njit(inline="always")
def _bfound(arr, x):
    lo = 0
    hi = len(arr)
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo < len(arr) and arr[lo] == x


@njit(inline="always")
def _logaddexp(a, b):
    if a == _NEG_INF:
        return b
    if b == _NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + np.log1p(np.exp(b - a))


@njit(inline="always")
def _tree_update(node, base, leaf, value, use_log):
    i = base + leaf
    node[i] = value
    i >>= 1
    while i >= 1:
        if use_log:
            node[i] = _logaddexp(node[2 * i], node[2 * i + 1])
        else:
            node[i] = node[2 * i] + node[2 * i + 1]
        i >>= 1


@njit(inline="always")
def _tree_descend(node, base, use_log, state):
    i = 1
    while i < base:
        a = node[2 * i]
        b = node[2 * i + 1]
        if use_log:
            if b == _NEG_INF:
                i = 2 * i
            elif a == _NEG_INF:
                i = 2 * i + 1
            else:
                p_left = 1.0 / (1.0 + np.exp(b - a))
                i = 2 * i if _rand(state) < p_left else 2 * i + 1
        else:
            total = a + b
            i = 2 * i if _rand(state) * total < a else 2 * i + 1
    return i - base


@njit(inline="always")
def _pick_zero_lump(node, use_log, zero_avail, state):
    """One coin: the aggregated zero-weight mass vs the support subtree."""
    if zero_avail <= 0:
        return False
    if use_log:
        support_log = node[1]
        if support_log == _NEG_INF:
            return True
        p_zero = 1.0 / (1.0 + np.exp(support_log - np.log(float(zero_avail))))
        return _rand(state) < p_zero
    total = node[1] + float(zero_avail)
    return _rand(state) * total < float(zero_avail)


@njit(inline="always")
def _set_insert_new(keys, mask, shift, x):
    i = (np.uint64(x) * _GOLD) >> shift
    while keys[i] != _EMPTY:
        i = (i + np.uint64(1)) & mask
    keys[i] = x


@njit(inline="always")
def _set_contains(keys, mask, shift, x):
    i = (np.uint64(x) * _GOLD) >> shift
    while True:
        k = keys[i]
        if k == x:
            return True
        if k == _EMPTY:
            return False
        i = (i + np.uint64(1)) & mask


@njit(cache=True)
def _walk_batch(
    num_items,
    k,
    steps,
    runs,
    support_idx,
    leaf_value,
    use_log,
    start_leaves,
    start_zeros,
    state,
    out,
):
    s = len(support_idx)
    z0 = len(start_zeros)
    base = 1
    while base < max(s, 1):
        base *= 2
    node = np.empty(2 * base)
    inset = np.empty(k if k > 0 else 1, np.int64)  # support leaves inside the subset
    shuffle = np.empty(max(z0, 1), np.int64)
    cap = 16
    shift_n = 60
    while cap < 2 * (k + 2):
        cap *= 2
        shift_n -= 1
    keys = np.full(cap, _EMPTY)
    mask = np.uint64(cap - 1)
    shift = np.uint64(shift_n)
    disabled = _NEG_INF if use_log else 0.0
    fresh_pool = num_items - s - z0  # zero-weight elements outside the start set

    for r in range(runs):
        for i in range(2 * base):
            node[i] = disabled
        for j in range(s):
            node[base + j] = leaf_value[j]
        ns = len(start_leaves)
        for j in range(ns):
            leaf = start_leaves[j]
            inset[j] = leaf
            node[base + leaf] = disabled
        for i in range(base - 1, 0, -1):
            if use_log:
                node[i] = _logaddexp(node[2 * i], node[2 * i + 1])
            else:
                node[i] = node[2 * i] + node[2 * i + 1]
        a = z0  # surviving start-set zero-weight members
        b = 0  # freshly drawn zero-weight members

        for _ in range(steps):
            r_pos = int(_rand(state) * k)
            if r_pos < ns:
                leaf = inset[r_pos]
                _tree_update(node, base, leaf, leaf_value[leaf], use_log)
                ns -= 1
                inset[r_pos] = inset[ns]
            elif r_pos < ns + a:
                a -= 1
            else:
                b -= 1

            zero_avail = (z0 - a) + (fresh_pool - b)
            if _pick_zero_lump(node, use_log, zero_avail, state):
                if _rand(state) * zero_avail < float(z0 - a):
                    a += 1
                else:
                    b += 1
            else:
                leaf = _tree_descend(node, base, use_log, state)
                _tree_update(node, base, leaf, disabled, use_log)
                inset[ns] = leaf
                ns += 1

        # materialize: support labels are exact; zero-weight labels are
        # uniform within their class by exchangeability
        pos = 0
        for j in range(ns):
            out[r, pos] = support_idx[inset[j]]
            pos += 1
        for j in range(z0):
            shuffle[j] = start_zeros[j]
        for j in range(a):
            pick = j + int(_rand(state) * (z0 - j))
            tmp = shuffle[j]
            shuffle[j] = shuffle[pick]
            shuffle[pick] = tmp
            out[r, pos] = shuffle[j]
            pos += 1
        for i in range(len(keys)):
            keys[i] = _EMPTY
        drawn = 0
        while drawn < b:
            cand = np.int64(-1)
            for _ in range(256):
                probe = np.int64(_rand(state) * num_items)
                if _bfound(support_idx, probe):
                    continue
                if _bfound(start_zeros, probe):
                    continue
                if _set_contains(keys, mask, shift, probe):
                    continue
                cand = probe
                break
            if cand < 0:
                # tiny universe fallback: take the rank-th remaining element
                rank = int(_rand(state) * (fresh_pool - drawn))
                for probe in range(num_items):
                    if _bfound(support_idx, np.int64(probe)):
                        continue
                    if _bfound(start_zeros, np.int64(probe)):
                        continue
                    if _set_contains(keys, mask, shift, np.int64(probe)):
                        continue
                    if rank == 0:
                        cand = np.int64(probe)
                        break
                    rank -= 1
            _set_insert_new(keys, mask, shift, cand)
            out[r, pos] = cand
            pos += 1
            drawn += 1


def supports(dist) -> bool:
    """The lumped kernel covers every instance; kept for dispatch symmetry."""
    return True


def run_batch(dist, start, steps, runs, rng_state: np.ndarray) -> np.ndarray:
    """Run ``runs`` independent walks of ``steps`` moves; rows are final subsets."""
    if not HAVE_NUMBA:  # pragma: no cover
        raise RuntimeError("numba is not available; use the python engine")
    k = dist.subset_size
    items = sorted(dist.weights.items())
    support_idx = np.fromiter((e for e, _ in items), np.int64, count=len(items))
    leaf_log = np.fromiter((dist.eps * w for _, w in items), np.float64, count=len(items))
    use_log = bool(leaf_log.size) and float(leaf_log.max()) > LINEAR_DOMAIN_MAX_LOG
    leaf_value = leaf_log if use_log else np.exp(leaf_log)
    start_arr = np.fromiter(sorted(start), np.int64, count=k)
    pos = np.searchsorted(support_idx, start_arr)
    pos_c = np.minimum(pos, max(len(support_idx) - 1, 0))
    in_support = (
        support_idx[pos_c] == start_arr if len(support_idx) else np.zeros(k, bool)
    )
    start_leaves = pos[in_support].astype(np.int64)
    start_zeros = start_arr[~in_support]
    out = np.empty((runs, k), np.int64)
    state = np.array(rng_state, dtype=np.uint64).copy()
    _walk_batch(
        dist.num_items,
        k,
        steps,
        runs,
        support_idx,
        leaf_value,
        use_log,
        start_leaves,
        start_zeros,
        state,
        out,
    )
    return out


def warmup() -> None:
    """Force kernel compilation on a toy instance (handy before timing)."""
    if not HAVE_NUMBA:  # pragma: no cover
        return
    from .sampler import SparseExpDistribution

    seed = np.arange(1, 5, dtype=np.uint64)
    dist = SparseExpDistribution(6, 3, 0.5, {0: 1.0, 2: 0.5})
    run_batch(dist, frozenset({0, 1, 4}), 16, 2, seed)
    dist_log = SparseExpDistribution(6, 3, 500.0, {0: 1.0, 2: 0.5})
    run_batch(dist_log, frozenset({0, 1, 4}), 16, 2, seed)
