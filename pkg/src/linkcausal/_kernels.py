"""Compiled inner loops: batch string comparison and the bipartite z sweep.

Everything here must produce results identical to the plain-Python reference
paths it accelerates; the test suite checks that equivalence directly.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _lev_distance(codes_a, la, codes_b, lb, prev, curr, abort_above):
    """Edit distance between two code sequences; early-exit once the
    (non-decreasing) row minimum proves the distance exceeds abort_above."""
    if la == 0:
        return lb
    if lb == 0:
        return la
    for q in range(lb + 1):
        prev[q] = q
    for p in range(1, la + 1):
        curr[0] = p
        row_min = p
        cp = codes_a[p - 1]
        for q in range(1, lb + 1):
            cost = 0 if cp == codes_b[q - 1] else 1
            val = prev[q - 1] + cost
            dele = prev[q] + 1
            if dele < val:
                val = dele
            ins = curr[q - 1] + 1
            if ins < val:
                val = ins
            curr[q] = val
            if val < row_min:
                row_min = val
        if row_min > abort_above:
            return row_min
        for q in range(lb + 1):
            prev[q] = curr[q]
    return prev[lb]


@njit(cache=True)
def lev_threshold_matrix(codes_a, lens_a, codes_b, lens_b, threshold, out):
    """out[p, q] = 1 iff normalized Levenshtein similarity >= threshold."""
    na = codes_a.shape[0]
    nb = codes_b.shape[0]
    width = codes_b.shape[1] + 1
    prev = np.empty(width, np.int64)
    curr = np.empty(width, np.int64)
    for p in range(na):
        la = lens_a[p]
        for q in range(nb):
            lb = lens_b[q]
            maxlen = la if la >= lb else lb
            if maxlen == 0:
                out[p, q] = 1  # both empty: similarity 1
                continue
            diff = la - lb if la >= lb else lb - la
            if 1.0 - diff / maxlen < threshold:
                out[p, q] = 0  # length gap alone already rules the pair out
                continue
            same = la == lb
            if same:
                for c in range(la):
                    if codes_a[p, c] != codes_b[q, c]:
                        same = False
                        break
            if same:
                out[p, q] = 1
                continue
            # any distance beyond this bound fails the threshold regardless
            abort_above = int((1.0 - threshold) * maxlen) + 1
            d = _lev_distance(codes_a[p], la, codes_b[q], lb, prev, curr, abort_above)
            out[p, q] = 1 if (1.0 - d / maxlen) >= threshold else 0


@njit(cache=True)
def z_sweep(z, taken, n_links, logw_t, alpha_pi, beta_pi, uniforms):
    """One Gibbs sweep over File B records in fixed scan order 0..n_B-1.

    z holds File A indices or n_a + j for no-link; taken marks File A records
    currently linked; logw_t[j, i] is the summed log likelihood ratio
    (comparison-field part plus outcome part) for pair (i, j).  Weights are
    evaluated in log space with max-subtraction.  Mutates z/taken in place and
    returns the updated link count.
    """
    n_b = z.shape[0]
    n_a = taken.shape[0]
    for j in range(n_b):
        if z[j] < n_a:
            taken[z[j]] = False
            n_links -= 1
        k = n_links
        m = -np.inf
        for i in range(n_a):
            if not taken[i]:
                v = logw_t[j, i]
                if v > m:
                    m = v
        if m == -np.inf:
            z[j] = n_a + j  # every File A record is held by some other j
            continue
        log_ck = (
            np.log(k + alpha_pi)
            - np.log(n_a - k)
            - np.log(n_b - k + beta_pi - 1.0)
        )
        mm = m + log_ck
        if mm < 0.0:
            mm = 0.0
        w0 = np.exp(-mm)
        total = w0
        for i in range(n_a):
            if not taken[i]:
                total += np.exp(logw_t[j, i] + log_ck - mm)
        u = uniforms[j] * total
        if u <= w0:
            z[j] = n_a + j
            continue
        acc = w0
        sel = -1
        for i in range(n_a):
            if not taken[i]:
                acc += np.exp(logw_t[j, i] + log_ck - mm)
                if acc >= u:
                    sel = i
                    break
        if sel < 0:
            for i in range(n_a - 1, -1, -1):  # round-off tail guard
                if not taken[i]:
                    sel = i
                    break
        z[j] = sel
        taken[sel] = True
        n_links += 1
    return n_links


@njit(cache=True)
def z_chain(z, taken, n_links, logw_t, alpha_pi, beta_pi, uniforms, out_z):
    """Run uniforms.shape[0] sweeps with fixed weights, recording z each sweep."""
    n_iter = uniforms.shape[0]
    n_b = z.shape[0]
    for it in range(n_iter):
        n_links = z_sweep(z, taken, n_links, logw_t, alpha_pi, beta_pi, uniforms[it])
        for j in range(n_b):
            out_z[it, j] = z[j]
    return n_links
