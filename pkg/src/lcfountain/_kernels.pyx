# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; mirrors ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def floyd_batch(long K, degs, u):
    cdef cnp.int64_t[::1] d = np.ascontiguousarray(degs, dtype=np.int64)
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    out_arr = np.empty(uu.shape[0], dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t pos = 0, n, a, start
    cdef long j, t, pick, dd
    cdef bint hit
    for n in range(d.shape[0]):
        dd = d[n]
        start = pos
        for j in range(K - dd, K):
            t = <long>(uu[pos] * (j + 1))
            if t > j:
                t = j
            hit = False
            # degrees are small; a linear scan beats a hash set here
            for a in range(start, pos):
                if out[a] == t:
                    hit = True
                    break
            pick = j if hit else t
            out[pos] = pick
            pos += 1
    return out_arr


def structural_decode(int L, Py_ssize_t N, types, table, cptr, cidx, iptr, iadj, Py_ssize_t total_k):
    cdef cnp.int64_t[::1] ty = np.ascontiguousarray(types, dtype=np.int64)
    cdef cnp.uint8_t[:, :, ::1] tbl = np.ascontiguousarray(table, dtype=np.uint8).reshape(-1, L, 1 << L)
    cdef cnp.int64_t[::1] cp = np.ascontiguousarray(cptr, dtype=np.int64)
    cdef cnp.int64_t[::1] ci = np.ascontiguousarray(cidx, dtype=np.int64)
    cdef cnp.int64_t[::1] ip = np.ascontiguousarray(iptr, dtype=np.int64)
    cdef cnp.int64_t[::1] ia = np.ascontiguousarray(iadj, dtype=np.int64)

    cdef Py_ssize_t n_coded = L * N
    cdef int full = (1 << L) - 1

    cnt_arr = np.empty(n_coded, dtype=np.int64)
    rem_arr = np.zeros(n_coded, dtype=np.int64)
    rel_arr = np.zeros(n_coded, dtype=np.uint8)
    known_arr = np.zeros(N, dtype=np.int64)
    dirty_flag_arr = np.zeros(N, dtype=np.uint8)
    decoded_arr = np.zeros(total_k, dtype=np.uint8)
    cdef cnp.int64_t[::1] cnt = cnt_arr
    cdef cnp.int64_t[::1] rem = rem_arr
    cdef cnp.uint8_t[::1] released = rel_arr
    cdef cnp.int64_t[::1] known = known_arr
    cdef cnp.uint8_t[::1] is_dirty = dirty_flag_arr
    cdef cnp.uint8_t[::1] decoded = decoded_arr

    # every coded packet enters the peel queue at most once per time its count hits 1
    queue_arr = np.empty(n_coded + 1, dtype=np.int64)
    dirty_arr = np.empty(N + 1, dtype=np.int64)
    work_arr = np.empty(N + 1, dtype=np.int64)
    peel_arr = np.empty((total_k, 2), dtype=np.int64)
    relev_arr = np.empty((n_coded, 3), dtype=np.int64)
    cdef cnp.int64_t[::1] queue = queue_arr
    cdef cnp.int64_t[::1] dirty = dirty_arr
    cdef cnp.int64_t[::1] work = work_arr
    cdef cnp.int64_t[:, ::1] peel_ev = peel_arr
    cdef cnp.int64_t[:, ::1] rel_ev = relev_arr

    cdef Py_ssize_t c, c2, a, i, i2, g, head, qlen = 0, ndirty = 0, nwork, w
    cdef Py_ssize_t n_peel = 0, n_rel = 0, n_decoded = 0, released_now
    cdef int s, s2, t, mask, new
    rel_per_round = []
    dec_per_round = []

    for c in range(n_coded):
        cnt[c] = cp[c + 1] - cp[c]
        for a in range(cp[c], cp[c + 1]):
            rem[c] += ci[a]
    for i in range(N):
        if ty[i] >= 0:
            is_dirty[i] = 1
            dirty[ndirty] = i
            ndirty += 1

    while True:
        head = 0
        while head < qlen:
            c = queue[head]
            head += 1
            if cnt[c] != 1:
                continue
            g = rem[c]
            decoded[g] = 1
            n_decoded += 1
            peel_ev[n_peel, 0] = c
            peel_ev[n_peel, 1] = g
            n_peel += 1
            for a in range(ip[g], ip[g + 1]):
                c2 = ia[a]
                cnt[c2] -= 1
                rem[c2] -= g
                if cnt[c2] == 0:
                    i2 = c2 % N
                    s2 = <int>(c2 // N)
                    if not (known[i2] >> s2) & 1:
                        known[i2] |= 1 << s2
                        if not is_dirty[i2] and ty[i2] >= 0:
                            is_dirty[i2] = 1
                            dirty[ndirty] = i2
                            ndirty += 1
                elif cnt[c2] == 1 and released[c2]:
                    queue[qlen] = c2
                    qlen += 1
        qlen = 0

        nwork = ndirty
        for w in range(nwork):
            work[w] = dirty[w]
            is_dirty[dirty[w]] = 0
        ndirty = 0
        released_now = 0
        for w in range(nwork):
            i = work[w]
            t = <int>ty[i]
            mask = <int>known[i]
            if mask == full:
                continue
            new = 0
            for s in range(L):
                if not (mask >> s) & 1 and tbl[t, s, mask]:
                    c = s * N + i
                    released[c] = 1
                    new |= 1 << s
                    rel_ev[n_rel, 0] = i
                    rel_ev[n_rel, 1] = s
                    rel_ev[n_rel, 2] = mask
                    n_rel += 1
                    released_now += 1
                    if cnt[c] == 1:
                        queue[qlen] = c
                        qlen += 1
            if new:
                known[i] |= new
                if known[i] != full:
                    is_dirty[i] = 1
                    dirty[ndirty] = i
                    ndirty += 1
        rel_per_round.append(released_now)
        dec_per_round.append(n_decoded)
        if released_now == 0:
            break

    return (
        decoded_arr.astype(bool),
        peel_arr[:n_peel].copy(),
        relev_arr[:n_rel].copy(),
        np.array(rel_per_round, dtype=np.int64),
        np.array(dec_per_round, dtype=np.int64),
    )
