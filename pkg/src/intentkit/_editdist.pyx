# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled edit-distance kernel.

Mirrors ``_editdist_py.edit_ops`` exactly: two-row Levenshtein DP over
integer ids, operation counts carried per cell, ties resolved preferring
substitution, then deletion, then insertion.
"""
from libc.stdlib cimport malloc, free


def edit_ops(ref, hyp):
    """Return (substitutions, insertions, deletions) turning ref into hyp."""
    cdef Py_ssize_t m = len(ref), n = len(hyp)
    cdef Py_ssize_t i, j
    cdef long long ri, cost, d_diag, d_up, d_left
    cdef long long *r = NULL
    cdef long long *h = NULL
    # Two rows of four parallel arrays: distance, subs, ins, dels.
    cdef long long *pd = NULL
    cdef long long *ps = NULL
    cdef long long *pi = NULL
    cdef long long *pl = NULL
    cdef long long *cd = NULL
    cdef long long *cs = NULL
    cdef long long *ci = NULL
    cdef long long *cl = NULL
    cdef long long *tmp

    r = <long long *> malloc(max(m, 1) * sizeof(long long))
    h = <long long *> malloc(max(n, 1) * sizeof(long long))
    pd = <long long *> malloc((n + 1) * sizeof(long long))
    ps = <long long *> malloc((n + 1) * sizeof(long long))
    pi = <long long *> malloc((n + 1) * sizeof(long long))
    pl = <long long *> malloc((n + 1) * sizeof(long long))
    cd = <long long *> malloc((n + 1) * sizeof(long long))
    cs = <long long *> malloc((n + 1) * sizeof(long long))
    ci = <long long *> malloc((n + 1) * sizeof(long long))
    cl = <long long *> malloc((n + 1) * sizeof(long long))
    if (r == NULL or h == NULL or pd == NULL or ps == NULL or pi == NULL
            or pl == NULL or cd == NULL or cs == NULL or ci == NULL
            or cl == NULL):
        free(r); free(h); free(pd); free(ps); free(pi); free(pl)
        free(cd); free(cs); free(ci); free(cl)
        raise MemoryError()

    try:
        for i in range(m):
            r[i] = ref[i]
        for j in range(n):
            h[j] = hyp[j]
        for j in range(n + 1):
            pd[j] = j
            ps[j] = 0
            pi[j] = j
            pl[j] = 0
        for i in range(1, m + 1):
            cd[0] = i
            cs[0] = 0
            ci[0] = 0
            cl[0] = i
            ri = r[i - 1]
            for j in range(1, n + 1):
                cost = 0 if ri == h[j - 1] else 1
                d_diag = pd[j - 1] + cost
                d_up = pd[j] + 1
                d_left = cd[j - 1] + 1
                if d_diag <= d_up and d_diag <= d_left:
                    cd[j] = d_diag
                    cs[j] = ps[j - 1] + cost
                    ci[j] = pi[j - 1]
                    cl[j] = pl[j - 1]
                elif d_up <= d_left:
                    cd[j] = d_up
                    cs[j] = ps[j]
                    ci[j] = pi[j]
                    cl[j] = pl[j] + 1
                else:
                    cd[j] = d_left
                    cs[j] = cs[j - 1]
                    ci[j] = ci[j - 1] + 1
                    cl[j] = cl[j - 1]
            tmp = pd; pd = cd; cd = tmp
            tmp = ps; ps = cs; cs = tmp
            tmp = pi; pi = ci; ci = tmp
            tmp = pl; pl = cl; cl = tmp
        return ps[n], pi[n], pl[n]
    finally:
        free(r); free(h); free(pd); free(ps); free(pi); free(pl)
        free(cd); free(cs); free(ci); free(cl)
