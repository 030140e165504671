"""Hot loops of the solver: bound, depth-first search, greedy seed, enumeration.

All kernels operate on flat int64 arrays prepared by :mod:`fmsload.solver`.
With numba installed they are compiled with ``@njit``; setting the
environment variable ``FMSLOAD_DISABLE_NUMBA=1`` (read at import time) runs
the identical source under the interpreter instead, and enumeration switches
to a chunked NumPy implementation.

Array layout (operations are indexed by branch position ``k``; options of
operation ``k`` occupy ``off[k]:off[k + 1]`` in rank order):

    om, ol, ot, oc       option machine, tool (0-based), time, cost
    opart, prev, nxt     owning part; branch position of the part's previous
                         and next operation (-1 if none)
    mint, maxt, minc     per-operation minimum time, maximum time, minimum cost
    due, sc              per-part due date and setup cost
    life, mag            per-tool life, per-machine magazine slots
    lim                  [max machine load, cost budget, setup budget]
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("FMSLOAD_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLED
BACKEND = "numba" if USE_NUMBA else "python"

BIG = np.int64(1) << np.int64(60)


def _jit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


@_jit
def unbalance_int(loads):
    s = np.sort(loads)
    m = s.shape[0]
    total = 0
    for k in range(m):
        total += (2 * k - m + 1) * s[k]
    return total


@_jit
def waterfill_bound(loads, assigned_time, rem_min, rem_max, w1, w2):
    """Weighted-objective lower bound for all completions of a partial assignment.

    Unassigned work of total size X in [rem_min, rem_max] is treated as freely
    divisible; for fixed X the unbalance is minimised by pouring it onto the
    least-loaded machines.  The resulting cost is convex in X, so the best X
    is the unconstrained minimiser clamped to the interval.
    """
    m = loads.shape[0]
    s = np.sort(loads).astype(np.float64)
    # slope of the cost while j machines share the water level: w1 - w2*(m - j)
    jstar = m
    for j in range(1, m + 1):
        if w1 - w2 * (m - j) >= 0.0:
            jstar = j
            break
    x = 0.0
    for k in range(jstar):
        x += s[jstar - 1] - s[k]
    if x < rem_min:
        x = float(rem_min)
    if x > rem_max:
        x = float(rem_max)

    rest = x
    level = s[0]
    j = 1
    while True:
        if j < m:
            need = (s[j] - level) * j
            if need <= rest:
                rest -= need
                level = s[j]
                j += 1
                continue
        level += rest / j
        break
    ub = 0.0
    for k in range(m):
        v = level if k < j else s[k]
        ub += (2 * k - m + 1) * v
    return w1 * (assigned_time + x) + w2 * ub


@_jit
def _try_apply(k, o, om, ol, ot, oc, opart, prev, nxt, mint, minc, due, sc, life, mag, lim,
               loads, mag_cnt, tool_mach, tool_cnt, tool_time, part_time, part_rem, chosen_m, acc):
    """Apply option ``o`` to operation ``k`` if every partial check passes.

    ``acc`` = [assigned time, cost, setup cost, remaining min time,
    remaining max time, remaining min cost].
    """
    m = om[o]
    l = ol[o]
    t = ot[o]
    c = oc[o]
    p = opart[k]
    if tool_cnt[l] > 0 and tool_mach[l] != m:
        return False
    if tool_cnt[l] == 0 and mag_cnt[m] + 1 > mag[m]:
        return False
    if tool_time[l] + t > life[l]:
        return False
    if loads[m] + t > lim[0]:
        return False
    if part_time[p] + t + part_rem[p] - mint[k] > due[p]:
        return False
    if acc[1] + c + acc[5] - minc[k] > lim[1]:
        return False
    add = 0
    a = prev[k]
    if a >= 0 and chosen_m[a] >= 0 and chosen_m[a] != m:
        add += sc[p]
    b = nxt[k]
    if b >= 0 and chosen_m[b] >= 0 and chosen_m[b] != m:
        add += sc[p]
    if acc[2] + add > lim[2]:
        return False

    loads[m] += t
    if tool_cnt[l] == 0:
        tool_mach[l] = m
        mag_cnt[m] += 1
    tool_cnt[l] += 1
    tool_time[l] += t
    part_time[p] += t
    part_rem[p] -= mint[k]
    chosen_m[k] = m
    acc[0] += t
    acc[1] += c
    acc[2] += add
    return True


@_jit
def _undo(k, o, om, ol, ot, oc, opart, prev, nxt, mint, sc,
          loads, mag_cnt, tool_mach, tool_cnt, tool_time, part_time, part_rem, chosen_m, acc):
    m = om[o]
    l = ol[o]
    t = ot[o]
    p = opart[k]
    chosen_m[k] = -1
    add = 0
    a = prev[k]
    if a >= 0 and chosen_m[a] >= 0 and chosen_m[a] != m:
        add += sc[p]
    b = nxt[k]
    if b >= 0 and chosen_m[b] >= 0 and chosen_m[b] != m:
        add += sc[p]
    loads[m] -= t
    tool_cnt[l] -= 1
    if tool_cnt[l] == 0:
        tool_mach[l] = -1
        mag_cnt[m] -= 1
    tool_time[l] -= t
    part_time[p] -= t
    part_rem[p] += mint[k]
    acc[0] -= t
    acc[1] -= oc[o]
    acc[2] -= add


@_jit
def _init_state(n_machines, n_tools, off, opart, mint, maxt, minc, n_parts):
    K = off.shape[0] - 1
    loads = np.zeros(n_machines, np.int64)
    mag_cnt = np.zeros(n_machines, np.int64)
    tool_mach = np.full(n_tools, -1, np.int64)
    tool_cnt = np.zeros(n_tools, np.int64)
    tool_time = np.zeros(n_tools, np.int64)
    part_time = np.zeros(n_parts, np.int64)
    part_rem = np.zeros(n_parts, np.int64)
    chosen_m = np.full(K, -1, np.int64)
    acc = np.zeros(6, np.int64)
    for k in range(K):
        part_rem[opart[k]] += mint[k]
        acc[3] += mint[k]
        acc[4] += maxt[k]
        acc[5] += minc[k]
    return loads, mag_cnt, tool_mach, tool_cnt, tool_time, part_time, part_rem, chosen_m, acc


@_jit
def dfs(prefix, best_val, earlier, node_limit, w1, w2, n_machines, n_tools,
        off, om, ol, ot, oc, opart, prev, nxt, mint, maxt, minc, due, sc, life, mag, lim):
    """Depth-first branch and bound below a fixed prefix of option ranks.

    ``best_val`` is the incumbent objective.  ``earlier`` tells whether that
    incumbent precedes this subtree in lexicographic order; if it does, ties
    may be pruned, otherwise the first tie found replaces it.

    Returns ``(best_val, found, choice, nodes, pruned_bound, pruned_infeasible,
    limit_hit)`` where ``choice`` holds option ranks per branch position.
    """
    K = off.shape[0] - 1
    n_parts = due.shape[0]
    loads, mag_cnt, tool_mach, tool_cnt, tool_time, part_time, part_rem, chosen_m, acc = _init_state(
        n_machines, n_tools, off, opart, mint, maxt, minc, n_parts)
    best_choice = np.full(K, -1, np.int64)
    cur = np.zeros(K + 1, np.int64)
    found = False
    nodes = 0
    pruned_bound = 0
    pruned_feas = 0
    limit_hit = False

    d0 = prefix.shape[0]
    for d in range(d0):
        o = off[d] + prefix[d]
        if not _try_apply(d, o, om, ol, ot, oc, opart, prev, nxt, mint, minc, due, sc, life, mag, lim,
                          loads, mag_cnt, tool_mach, tool_cnt, tool_time, part_time, part_rem, chosen_m, acc):
            return best_val, found, best_choice, nodes, pruned_bound, pruned_feas + 1, limit_hit
        cur[d] = o
        acc[3] -= mint[d]
        acc[4] -= maxt[d]
        acc[5] -= minc[d]
    if d0 == K:
        val = w1 * acc[0] + w2 * unbalance_int(loads)
        if val < best_val or (not earlier and val == best_val):
            best_val = val
            found = True
            for d in range(K):
                best_choice[d] = cur[d] - off[d]
        return best_val, found, best_choice, nodes, pruned_bound, pruned_feas, limit_hit

    depth = d0
    cur[depth] = off[depth]
    while depth >= d0:
        if cur[depth] == off[depth + 1]:
            depth -= 1
            if depth >= d0:
                o = cur[depth]
                _undo(depth, o, om, ol, ot, oc, opart, prev, nxt, mint, sc,
                      loads, mag_cnt, tool_mach, tool_cnt, tool_time, part_time, part_rem, chosen_m, acc)
                acc[3] += mint[depth]
                acc[4] += maxt[depth]
                acc[5] += minc[depth]
                cur[depth] += 1
            continue
        if nodes >= node_limit:
            limit_hit = True
            break
        o = cur[depth]
        nodes += 1
        if not _try_apply(depth, o, om, ol, ot, oc, opart, prev, nxt, mint, minc, due, sc, life, mag, lim,
                          loads, mag_cnt, tool_mach, tool_cnt, tool_time, part_time, part_rem, chosen_m, acc):
            pruned_feas += 1
            cur[depth] += 1
            continue
        acc[3] -= mint[depth]
        acc[4] -= maxt[depth]
        acc[5] -= minc[depth]
        if depth == K - 1:
            val = w1 * acc[0] + w2 * unbalance_int(loads)
            if val < best_val or (not earlier and val == best_val):
                best_val = val
                found = True
                earlier = True
                for d in range(K):
                    best_choice[d] = cur[d] - off[d]
            prune = False
        else:
            bnd = waterfill_bound(loads, acc[0], acc[3], acc[4], w1, w2)
            tol = 1e-9 * max(1.0, abs(best_val))
            if earlier:
                prune = bnd - tol >= best_val
            else:
                prune = bnd - tol > best_val
            if prune:
                pruned_bound += 1
        if depth == K - 1 or prune:
            _undo(depth, o, om, ol, ot, oc, opart, prev, nxt, mint, sc,
                  loads, mag_cnt, tool_mach, tool_cnt, tool_time, part_time, part_rem, chosen_m, acc)
            acc[3] += mint[depth]
            acc[4] += maxt[depth]
            acc[5] += minc[depth]
            cur[depth] += 1
            continue
        depth += 1
        cur[depth] = off[depth]
    return best_val, found, best_choice, nodes, pruned_bound, pruned_feas, limit_hit


@_jit
def greedy(n_machines, n_tools, off, om, ol, ot, oc, opart, prev, nxt, mint, maxt, minc, due, sc,
           life, mag, lim):
    """Least-loaded-machine greedy in branch order; ``ok`` is False on a dead end."""
    K = off.shape[0] - 1
    n_parts = due.shape[0]
    loads, mag_cnt, tool_mach, tool_cnt, tool_time, part_time, part_rem, chosen_m, acc = _init_state(
        n_machines, n_tools, off, opart, mint, maxt, minc, n_parts)
    choice = np.full(K, -1, np.int64)
    for k in range(K):
        best = -1
        for o in range(off[k], off[k + 1]):
            if not _try_apply(k, o, om, ol, ot, oc, opart, prev, nxt, mint, minc, due, sc, life, mag, lim,
                              loads, mag_cnt, tool_mach, tool_cnt, tool_time, part_time, part_rem,
                              chosen_m, acc):
                continue
            _undo(k, o, om, ol, ot, oc, opart, prev, nxt, mint, sc,
                  loads, mag_cnt, tool_mach, tool_cnt, tool_time, part_time, part_rem, chosen_m, acc)
            if best < 0:
                best = o
            else:
                lo, lb = loads[om[o]], loads[om[best]]
                if lo < lb or (lo == lb and ot[o] < ot[best]):
                    best = o
        if best < 0:
            return False, choice
        _try_apply(k, best, om, ol, ot, oc, opart, prev, nxt, mint, minc, due, sc, life, mag, lim,
                   loads, mag_cnt, tool_mach, tool_cnt, tool_time, part_time, part_rem, chosen_m, acc)
        acc[3] -= mint[k]
        acc[4] -= maxt[k]
        acc[5] -= minc[k]
        choice[k] = best - off[k]
    return True, choice


# --------------------------------------------------------------------------
# exhaustive enumeration (independent of the search code above)

@_jit
def _enumerate_nb(w1, w2, n_machines, n_tools, off, om, ol, ot, oc, opart, part_ops, due, sc,
                  life, mag, lim):
    K = off.shape[0] - 1
    n_parts = due.shape[0]
    digit = np.zeros(K, np.int64)
    radix = np.empty(K, np.int64)
    for k in range(K):
        radix[k] = off[k + 1] - off[k]
    best_val = np.inf
    best = np.full(K, -1, np.int64)
    n_feasible = 0
    loads = np.zeros(n_machines, np.int64)
    ptime = np.zeros(n_parts, np.int64)
    ttime = np.zeros(n_tools, np.int64)
    tmach = np.zeros(n_tools, np.int64)
    mused = np.zeros((n_machines, n_tools), np.int64)
    while True:
        loads[:] = 0
        ptime[:] = 0
        ttime[:] = 0
        tmach[:] = -1
        mused[:, :] = 0
        cost = 0
        ok = True
        for k in range(K):
            o = off[k] + digit[k]
            m = om[o]
            l = ol[o]
            loads[m] += ot[o]
            ptime[opart[k]] += ot[o]
            ttime[l] += ot[o]
            cost += oc[o]
            mused[m, l] = 1
            if tmach[l] >= 0 and tmach[l] != m:
                ok = False
            tmach[l] = m
        if ok and cost > lim[1]:
            ok = False
        if ok:
            for m in range(n_machines):
                if loads[m] > lim[0] or mused[m].sum() > mag[m]:
                    ok = False
            for l in range(n_tools):
                if ttime[l] > life[l]:
                    ok = False
            setup = 0
            for p in range(n_parts):
                if ptime[p] > due[p]:
                    ok = False
                for j in range(part_ops.shape[1] - 1):
                    a = part_ops[p, j]
                    b = part_ops[p, j + 1]
                    if a < 0 or b < 0:
                        break
                    if om[off[a] + digit[a]] != om[off[b] + digit[b]]:
                        setup += sc[p]
            if setup > lim[2]:
                ok = False
        if ok:
            n_feasible += 1
            val = w1 * loads.sum() + w2 * unbalance_int(loads)
            if val < best_val:
                best_val = val
                best[:] = digit
        # odometer, last position fastest
        k = K - 1
        while k >= 0:
            digit[k] += 1
            if digit[k] < radix[k]:
                break
            digit[k] = 0
            k -= 1
        if k < 0:
            break
    return best_val, best, n_feasible


def _enumerate_np(w1, w2, n_machines, n_tools, off, om, ol, ot, oc, opart, part_ops, due, sc,
                  life, mag, lim, chunk=1 << 16):
    K = off.shape[0] - 1
    radix = np.diff(off)
    total = int(np.prod(radix, dtype=object))
    stride = np.ones(K, np.int64)
    for k in range(K - 2, -1, -1):
        stride[k] = stride[k + 1] * radix[k + 1]
    coef = 2 * np.arange(n_machines) - n_machines + 1
    best_val = np.inf
    best = np.full(K, -1, np.int64)
    n_feasible = 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        n = idx.shape[0]
        rows = np.arange(n)
        digits = (idx[:, None] // stride[None, :]) % radix[None, :]
        o = off[:-1][None, :] + digits
        m, l, t, c = om[o], ol[o], ot[o], oc[o]
        loads = np.zeros((n, n_machines), np.int64)
        ptime = np.zeros((n, due.shape[0]), np.int64)
        ttime = np.zeros((n, n_tools), np.int64)
        used = np.zeros((n, n_tools, n_machines), bool)
        for k in range(K):
            loads[rows, m[:, k]] += t[:, k]
            ptime[:, opart[k]] += t[:, k]
            ttime[rows, l[:, k]] += t[:, k]
            used[rows, l[:, k], m[:, k]] = True
        ok = c.sum(axis=1) <= lim[1]
        ok &= (loads <= lim[0]).all(axis=1)
        ok &= (ptime <= due[None, :]).all(axis=1)
        ok &= (ttime <= life[None, :]).all(axis=1)
        ok &= used.sum(axis=2).max(axis=1) <= 1
        ok &= (used.sum(axis=1) <= mag[None, :]).all(axis=1)
        setup = np.zeros(n, np.int64)
        for p in range(part_ops.shape[0]):
            for j in range(part_ops.shape[1] - 1):
                a, b = part_ops[p, j], part_ops[p, j + 1]
                if a < 0 or b < 0:
                    break
                setup += (m[:, a] != m[:, b]) * sc[p]
        ok &= setup <= lim[2]
        n_feasible += int(ok.sum())
        if not ok.any():
            continue
        val = w1 * loads.sum(axis=1) + w2 * (np.sort(loads, axis=1) @ coef)
        val = np.where(ok, val, np.inf)
        i = int(np.argmin(val))
        if val[i] < best_val:
            best_val = float(val[i])
            best = digits[i].copy()
    return best_val, best, n_feasible


enumerate_nb = _enumerate_nb if USE_NUMBA else None
enumerate_np = _enumerate_np
enumerate_best = _enumerate_nb if USE_NUMBA else _enumerate_np
