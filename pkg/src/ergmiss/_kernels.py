"""Inner loops of the graph samplers.

Every function here is written in the numba-compatible subset of Python and
is compiled with ``@njit`` unless ``ERGMISS_NUMBA=0``. Transcendental values
(decay powers, ``exp(alpha)``) are tabulated by the caller so both execution
paths perform identical floating point operations.

Term codes: 0 dyadic weight (edges and all covariate terms), 1 alternating
k-star, 2 geometrically weighted degree, 3 geometrically weighted
edgewise shared partners.
"""
import numpy as np

from ._jit import jit

DYADIC = 0
ALTKSTAR = 1
GWDEGREE = 2
GWESP = 3


@jit
def change_stats(adj, deg, sp, i, j, kinds, scale, weights, rpow, out):
    """Write z(g + ij) - z(g - ij) into ``out``; the current state of ij is ignored."""
    n = adj.shape[0]
    xij = adj[i, j]
    di = deg[i] - xij
    dj = deg[j] - xij
    for t in range(kinds.shape[0]):
        kind = kinds[t]
        if kind == DYADIC:
            out[t] = weights[t, i, j]
        elif kind == ALTKSTAR:
            out[t] = scale[t] * (2.0 - rpow[t, di] - rpow[t, dj])
        elif kind == GWDEGREE:
            out[t] = rpow[t, di] + rpow[t, dj]
        else:
            total = scale[t] * (1.0 - rpow[t, sp[i, j]])
            for k in range(n):
                if adj[i, k] == 1 and adj[j, k] == 1:
                    total += rpow[t, sp[i, k] - xij] + rpow[t, sp[j, k] - xij]
            out[t] = total


@jit
def toggle(adj, deg, sp, need_sp, i, j):
    n = adj.shape[0]
    if adj[i, j] == 0:
        if need_sp:
            for k in range(n):
                if adj[j, k] == 1:
                    sp[i, k] += 1
                    sp[k, i] += 1
                if adj[i, k] == 1:
                    sp[j, k] += 1
                    sp[k, j] += 1
        adj[i, j] = 1
        adj[j, i] = 1
        deg[i] += 1
        deg[j] += 1
    else:
        adj[i, j] = 0
        adj[j, i] = 0
        deg[i] -= 1
        deg[j] -= 1
        if need_sp:
            for k in range(n):
                if adj[j, k] == 1:
                    sp[i, k] -= 1
                    sp[k, i] -= 1
                if adj[i, k] == 1:
                    sp[j, k] -= 1
                    sp[k, j] -= 1


@jit
def all_change_stats(adj, deg, sp, kinds, scale, weights, rpow, di, dj, out):
    row = np.empty(kinds.shape[0])
    for d in range(di.shape[0]):
        change_stats(adj, deg, sp, di[d], dj[d], kinds, scale, weights, rpow, row)
        for t in range(kinds.shape[0]):
            out[d, t] = row[t]


@jit
def run_toggles(adj, deg, sp, need_sp, stats, theta, kinds, scale, weights, rpow,
                allowed, di, dj, u_pick, log_u, start, burn_in, thin,
                draws, codes, rec, code, track):
    """Lazy Metropolis toggle chain over the ``allowed`` dyads.

    Each step picks one of the ``allowed`` dyads or, with probability
    1 / (len(allowed) + 1), keeps the current graph.

    Processes ``u_pick.shape[0]`` steps. ``start`` is the global index of the
    first step; a draw is recorded after global step g when g > burn_in and
    (g - burn_in) is a multiple of ``thin``. Returns (accepted, rec, code).
    """
    p = theta.shape[0]
    delta = np.empty(p)
    n_allowed = allowed.shape[0]
    accepted = 0
    one = np.int64(1)
    for s in range(u_pick.shape[0]):
        # one extra "hold" slot keeps the chain aperiodic when every move
        # would be accepted (theta near 0), which otherwise locks the parity
        # of the edge count to the step index
        a = int(u_pick[s] * (n_allowed + 1))
        if a < n_allowed:
            d = allowed[a]
            i = di[d]
            j = dj[d]
            change_stats(adj, deg, sp, i, j, kinds, scale, weights, rpow, delta)
            sign = 1.0
            if adj[i, j] == 1:
                sign = -1.0
            lr = 0.0
            for q in range(p):
                lr += theta[q] * delta[q]
            lr *= sign
            if log_u[s] < lr:
                toggle(adj, deg, sp, need_sp, i, j)
                for q in range(p):
                    stats[q] += sign * delta[q]
                if track:
                    code ^= one << d
                accepted += 1
        g = start + s + 1
        if g > burn_in and (g - burn_in) % thin == 0 and rec < draws.shape[0]:
            for q in range(p):
                draws[rec, q] = stats[q]
            codes[rec] = code
            rec += 1
    return accepted, rec, code


@jit
def run_swaps(adj, deg, sp, need_sp, stats, theta, kinds, scale, weights, rpow,
              on_list, off_list, di, dj, u_on, u_off, log_u, start, burn_in, thin,
              draws, codes, rec, code, track):
    """Edge-count preserving chain: move one edge onto one non-edge per step."""
    p = theta.shape[0]
    delta = np.empty(p)
    tmp = np.empty(p)
    m = on_list.shape[0]
    k = off_list.shape[0]
    accepted = 0
    one = np.int64(1)
    for s in range(log_u.shape[0]):
        if m > 0 and k > 0:
            a = int(u_on[s] * m)
            if a >= m:
                a = m - 1
            b = int(u_off[s] * k)
            if b >= k:
                b = k - 1
            e = on_list[a]
            f = off_list[b]
            change_stats(adj, deg, sp, di[e], dj[e], kinds, scale, weights, rpow, tmp)
            for q in range(p):
                delta[q] = -tmp[q]
            toggle(adj, deg, sp, need_sp, di[e], dj[e])
            change_stats(adj, deg, sp, di[f], dj[f], kinds, scale, weights, rpow, tmp)
            lr = 0.0
            for q in range(p):
                delta[q] += tmp[q]
                lr += theta[q] * delta[q]
            if log_u[s] < lr:
                toggle(adj, deg, sp, need_sp, di[f], dj[f])
                on_list[a] = f
                off_list[b] = e
                for q in range(p):
                    stats[q] += delta[q]
                if track:
                    code ^= (one << e) | (one << f)
                accepted += 1
            else:
                toggle(adj, deg, sp, need_sp, di[e], dj[e])
        g = start + s + 1
        if g > burn_in and (g - burn_in) % thin == 0 and rec < draws.shape[0]:
            for q in range(p):
                draws[rec, q] = stats[q]
            codes[rec] = code
            rec += 1
    return accepted, rec, code
