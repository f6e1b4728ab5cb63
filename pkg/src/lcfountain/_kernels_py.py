"""Pure-Python kernels; same contract as the compiled ``_kernels`` module."""

import numpy as np


def floyd_batch(K, degs, u):
    """Neighbor lists for packets of degrees ``degs`` from pre-drawn uniforms ``u``."""
    out = np.empty(len(u), dtype=np.int64)
    pos = 0
    for d in degs:
        d = int(d)
        chosen = set()
        for j in range(K - d, K):
            t = int(u[pos] * (j + 1))
            if t > j:
                t = j
            pick = j if t in chosen else t
            chosen.add(pick)
            out[pos] = pick
            pos += 1
    return out


def structural_decode(L, N, types, table, cptr, cidx, iptr, iadj, total_k):
    """Round-based batched BP on structure only.

    Coded packet ``c = s * N + i`` is user s's packet in slot i; its inputs
    are ``cidx[cptr[c]:cptr[c+1]]`` (global input ids) and input g feeds
    packets ``iadj[iptr[g]:iptr[g+1]]``.  ``table[t, s, mask]`` says whether
    slot type t releases v_s when the users in ``mask`` are known.

    Returns ``(decoded, peel_events, release_events, releases_per_round,
    decoded_per_round)``.  A peel event is ``(c, g)``: input g read off
    packet c.  A release event is ``(i, s, mask)``.
    """
    types = [int(t) for t in types]
    cptr = cptr.tolist()
    cidx = cidx.tolist()
    iptr = iptr.tolist()
    iadj = iadj.tolist()
    tbl = np.asarray(table).tolist()
    full = 1 << L

    n_coded = L * N
    cnt = [cptr[c + 1] - cptr[c] for c in range(n_coded)]
    rem = [sum(cidx[cptr[c]:cptr[c + 1]]) for c in range(n_coded)]
    released = [False] * n_coded
    known = [0] * N  # mask of users whose packet in the slot is known
    decoded = bytearray(total_k)
    queue = []
    peel_events, release_events = [], []
    rel_per_round, dec_per_round = [], []
    dirty = [i for i in range(N) if types[i] >= 0]
    is_dirty = [types[i] >= 0 for i in range(N)]
    n_decoded = 0

    while True:
        # stage 1: peel every user's released packets
        head = 0
        while head < len(queue):
            c = queue[head]
            head += 1
            if cnt[c] != 1:
                continue
            g = rem[c]
            decoded[g] = 1
            n_decoded += 1
            peel_events.append((c, g))
            for a in range(iptr[g], iptr[g + 1]):
                c2 = iadj[a]
                cnt[c2] -= 1
                rem[c2] -= g
                if cnt[c2] == 0:
                    i2 = c2 % N
                    s2 = c2 // N
                    if not known[i2] >> s2 & 1:
                        known[i2] |= 1 << s2
                        if not is_dirty[i2] and types[i2] >= 0:
                            is_dirty[i2] = True
                            dirty.append(i2)
                elif cnt[c2] == 1 and released[c2]:
                    queue.append(c2)
        queue = []

        # stage 2: one pass over slots whose known set moved
        work, dirty = dirty, []
        for i in work:
            is_dirty[i] = False
        released_now = 0
        for i in work:
            t = types[i]
            mask = known[i]
            if mask == full - 1:
                continue
            row = tbl[t]
            new = 0
            for s in range(L):
                if not mask >> s & 1 and row[s][mask]:
                    c = s * N + i
                    released[c] = True
                    new |= 1 << s
                    release_events.append((i, s, mask))
                    released_now += 1
                    if cnt[c] == 1:
                        queue.append(c)
            if new:
                known[i] |= new
                if known[i] != full - 1:
                    is_dirty[i] = True
                    dirty.append(i)
        rel_per_round.append(released_now)
        dec_per_round.append(n_decoded)
        if released_now == 0:
            break

    return (
        np.frombuffer(bytes(decoded), dtype=np.uint8).astype(bool),
        np.array(peel_events, dtype=np.int64).reshape(-1, 2),
        np.array(release_events, dtype=np.int64).reshape(-1, 3),
        np.array(rel_per_round, dtype=np.int64),
        np.array(dec_per_round, dtype=np.int64),
    )
