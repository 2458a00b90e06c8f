"""Numba kernels for the statevector hot path.

Statevector batches are float64 arrays of shape (2, NC, dim, B): real and
imaginary channel, NC jet components (1 = value only, 4 = value/dt/dx/dxx),
``dim = 2**n_q`` basis states with qubit ``q`` on bit ``q`` (qubit 0 least
significant), and the batch axis contiguous so the innermost loops vectorize.

Encoding-rotation coefficients (cos/sin half-angle jets of the per-point
encoding angles) are precomputed once per network evaluation and passed in as
``cs`` of shape (8, n_q, B) = (c0..c3, s0..s3), or (2, n_q, B) = (c0, s0) in
value-only mode; they are shared by every re-uploading block.

R_Y and R_X share one implementation: both map the amplitude pair as

    out_base(cha) = c (x) A + sg * (s (x) B)
    out_i1(chb)   = -sg * (s (x) A) + c (x) B

with A = w[cha, :, base], B = w[chb, :, i1] and channel groups
(cha, chb, sg) = (ch, ch, -1) for Y and (0, 1, +1), (1, 0, -1) for X; (x) is
the second-order jet product.  Keeping the channel-group loop outside the
batch loop keeps the live set small enough for the compiler to vectorize.

The backward kernel recomputes intra-block intermediates tile by tile instead
of storing them, which keeps tape memory at one statevector per block.  All
adjoints are plain real transposes of the forward maps.
"""

import math

import numpy as np
from numba import njit

AXIS_Y = 0
AXIS_X = 1
AXIS_Z = 2

TILE = 256

_FAST = {"cache": True, "fastmath": True}


@njit(inline="always")
def _groups(axis, g):
    if axis == AXIS_Y:
        return g, g, -1.0
    return (0, 1, 1.0) if g == 0 else (1, 0, -1.0)


@njit(inline="always")
def _enc_rot(win, wout, q, nc, dim, axis, cs, j, t0, t1):
    """Jet-angle rotation on qubit q; reads win, writes wout (aliasing safe)."""
    mask = 1 << q
    for base in range(dim):
        if base & mask:
            continue
        i1 = base | mask
        for g in range(2):
            cha, chb, sg = _groups(axis, g)
            if nc == 1:
                for b in range(t0, t1):
                    c0 = cs[0, j, b]
                    s0 = cs[1, j, b]
                    a0 = win[cha, 0, base, b]
                    b0 = win[chb, 0, i1, b]
                    wout[cha, 0, base, b] = c0 * a0 + sg * (s0 * b0)
                    wout[chb, 0, i1, b] = -sg * (s0 * a0) + c0 * b0
            else:
                for b in range(t0, t1):
                    c0 = cs[0, j, b]
                    c1 = cs[1, j, b]
                    c2 = cs[2, j, b]
                    c3 = cs[3, j, b]
                    s0 = cs[4, j, b]
                    s1 = cs[5, j, b]
                    s2 = cs[6, j, b]
                    s3 = cs[7, j, b]
                    a0 = win[cha, 0, base, b]
                    a1 = win[cha, 1, base, b]
                    a2 = win[cha, 2, base, b]
                    a3 = win[cha, 3, base, b]
                    b0 = win[chb, 0, i1, b]
                    b1 = win[chb, 1, i1, b]
                    b2 = win[chb, 2, i1, b]
                    b3 = win[chb, 3, i1, b]
                    wout[cha, 0, base, b] = c0 * a0 + sg * (s0 * b0)
                    wout[cha, 1, base, b] = (c1 * a0 + c0 * a1
                                             + sg * (s1 * b0 + s0 * b1))
                    wout[cha, 2, base, b] = (c2 * a0 + c0 * a2
                                             + sg * (s2 * b0 + s0 * b2))
                    wout[cha, 3, base, b] = (c3 * a0 + 2.0 * c2 * a2 + c0 * a3
                                             + sg * (s3 * b0 + 2.0 * s2 * b2 + s0 * b3))
                    wout[chb, 0, i1, b] = -sg * (s0 * a0) + c0 * b0
                    wout[chb, 1, i1, b] = (-sg * (s1 * a0 + s0 * a1)
                                           + c1 * b0 + c0 * b1)
                    wout[chb, 2, i1, b] = (-sg * (s2 * a0 + s0 * a2)
                                           + c2 * b0 + c0 * b2)
                    wout[chb, 3, i1, b] = (-sg * (s3 * a0 + 2.0 * s2 * a2 + s0 * a3)
                                           + c3 * b0 + 2.0 * c2 * b2 + c0 * b3)


@njit(inline="always")
def _const_rot(win, wout, q, nc, dim, axis, cv, sv, t0, t1):
    """Scalar-angle rotation; same pair structure with trivial coefficients."""
    mask = 1 << q
    if axis == AXIS_Z:
        for idx in range(dim):
            s_eff = -sv if (idx & mask) else sv  # e^{-+i theta/2}
            for m in range(nc):
                for b in range(t0, t1):
                    r = win[0, m, idx, b]
                    i = win[1, m, idx, b]
                    wout[0, m, idx, b] = cv * r + s_eff * i
                    wout[1, m, idx, b] = cv * i - s_eff * r
        return
    for base in range(dim):
        if base & mask:
            continue
        i1 = base | mask
        for g in range(2):
            cha, chb, sg = _groups(axis, g)
            for m in range(nc):
                for b in range(t0, t1):
                    a = win[cha, m, base, b]
                    bb = win[chb, m, i1, b]
                    wout[cha, m, base, b] = cv * a + sg * (sv * bb)
                    wout[chb, m, i1, b] = -sg * (sv * a) + cv * bb


@njit(inline="always")
def _cnot(w, control, target, nc, dim, t0, t1):
    cmask = 1 << control
    tmask = 1 << target
    for idx in range(dim):
        if (idx & cmask) and not (idx & tmask):
            jdx = idx | tmask
            for ch in range(2):
                for m in range(nc):
                    for b in range(t0, t1):
                        tmp = w[ch, m, idx, b]
                        w[ch, m, idx, b] = w[ch, m, jdx, b]
                        w[ch, m, jdx, b] = tmp


@njit(**_FAST)
def block_fwd(sv_in, cs, thetas, axis, sv_out):
    """One re-uploading block applied to the whole batch."""
    _, nc, dim, b_n = sv_in.shape
    nq = cs.shape[1]
    cy = np.empty(nq)
    sy = np.empty(nq)
    cz = np.empty(nq)
    sz = np.empty(nq)
    for j in range(nq):
        cy[j] = math.cos(0.5 * thetas[2 * j])
        sy[j] = math.sin(0.5 * thetas[2 * j])
        cz[j] = math.cos(0.5 * thetas[2 * j + 1])
        sz[j] = math.sin(0.5 * thetas[2 * j + 1])
    for t0 in range(0, b_n, TILE):
        t1 = min(t0 + TILE, b_n)
        _enc_rot(sv_in, sv_out, 0, nc, dim, axis, cs, 0, t0, t1)
        for j in range(1, nq):
            _enc_rot(sv_out, sv_out, j, nc, dim, axis, cs, j, t0, t1)
        for j in range(nq):
            _const_rot(sv_out, sv_out, j, nc, dim, AXIS_Y, cy[j], sy[j], t0, t1)
            _const_rot(sv_out, sv_out, j, nc, dim, AXIS_Z, cz[j], sz[j], t0, t1)
        if nq > 1:
            for j in range(nq):
                _cnot(sv_out, j, (j + 1) % nq, nc, dim, t0, t1)


@njit(inline="always")
def _const_rot_adj(adj, st, q, nc, dim, axis, cv, sv, tn):
    """Adjoint through R^T plus dL/dtheta for one tile; ``st`` holds the gate
    input state, ``adj`` is rewritten in place (both tile-local views)."""
    g_acc = 0.0
    mask = 1 << q
    if axis == AXIS_Z:
        for idx in range(dim):
            sig = -1.0 if (idx & mask) else 1.0  # sign of s_eff = sig*sv
            for m in range(nc):
                for b in range(tn):
                    r = st[0, m, idx, b]
                    i = st[1, m, idx, b]
                    dr = adj[0, m, idx, b]
                    di = adj[1, m, idx, b]
                    # fwd: re' = cv r + sig sv i ; im' = cv i - sig sv r
                    g_acc += 0.5 * (dr * (-sv * r + sig * cv * i)
                                    + di * (-sv * i - sig * cv * r))
                    adj[0, m, idx, b] = cv * dr - sig * sv * di
                    adj[1, m, idx, b] = sig * sv * dr + cv * di
        return g_acc
    for base in range(dim):
        if base & mask:
            continue
        i1 = base | mask
        for g in range(2):
            cha, chb, sg = _groups(axis, g)
            for m in range(nc):
                for b in range(tn):
                    a = st[cha, m, base, b]
                    bb = st[chb, m, i1, b]
                    da = adj[cha, m, base, b]
                    db = adj[chb, m, i1, b]
                    # fwd: out_a = cv A + sg sv B ; out_b = -sg sv A + cv B
                    g_acc += 0.5 * (da * (-sv * a + sg * cv * bb)
                                    + db * (-sg * cv * a - sv * bb))
                    adj[cha, m, base, b] = cv * da - sg * (sv * db)
                    adj[chb, m, i1, b] = sg * (sv * da) + cv * db
    return g_acc


@njit(inline="always")
def _enc_rot_adj(adj, st, q, nc, dim, axis, cs, adj_cs, j, tn):
    """Adjoint of the jet-angle rotation on one tile: rewrites ``adj`` with
    the amplitude adjoints and accumulates coefficient-jet adjoints."""
    mask = 1 << q
    for base in range(dim):
        if base & mask:
            continue
        i1 = base | mask
        for g in range(2):
            cha, chb, sg = _groups(axis, g)
            if nc == 1:
                for b in range(tn):
                    c0 = cs[0, j, b]
                    s0 = cs[1, j, b]
                    a0 = st[cha, 0, base, b]
                    b0 = st[chb, 0, i1, b]
                    da = adj[cha, 0, base, b]
                    db = adj[chb, 0, i1, b]
                    adj_cs[0, j, b] += da * a0 + db * b0
                    adj_cs[1, j, b] += sg * (da * b0 - db * a0)
                    adj[cha, 0, base, b] = c0 * da - sg * (s0 * db)
                    adj[chb, 0, i1, b] = sg * (s0 * da) + c0 * db
            else:
                # pass 1: coefficient adjoints, reading the pre-rewrite adj
                # adj_c += G(da, A) + G(db, B); adj_s += sg*(G(da, B) - G(db, A))
                for b in range(tn):
                    a0 = st[cha, 0, base, b]
                    a1 = st[cha, 1, base, b]
                    a2 = st[cha, 2, base, b]
                    a3 = st[cha, 3, base, b]
                    d0 = adj[cha, 0, base, b]
                    d1 = adj[cha, 1, base, b]
                    d2 = adj[cha, 2, base, b]
                    d3 = adj[cha, 3, base, b]
                    e0 = adj[chb, 0, i1, b]
                    e1 = adj[chb, 1, i1, b]
                    e2 = adj[chb, 2, i1, b]
                    e3 = adj[chb, 3, i1, b]
                    adj_cs[0, j, b] += d0 * a0 + d1 * a1 + d2 * a2 + d3 * a3
                    adj_cs[1, j, b] += d1 * a0
                    adj_cs[2, j, b] += d2 * a0 + 2.0 * d3 * a2
                    adj_cs[3, j, b] += d3 * a0
                    adj_cs[4, j, b] -= sg * (e0 * a0 + e1 * a1 + e2 * a2 + e3 * a3)
                    adj_cs[5, j, b] -= sg * (e1 * a0)
                    adj_cs[6, j, b] -= sg * (e2 * a0 + 2.0 * e3 * a2)
                    adj_cs[7, j, b] -= sg * (e3 * a0)
                for b in range(tn):
                    b0 = st[chb, 0, i1, b]
                    b1 = st[chb, 1, i1, b]
                    b2 = st[chb, 2, i1, b]
                    b3 = st[chb, 3, i1, b]
                    d0 = adj[cha, 0, base, b]
                    d1 = adj[cha, 1, base, b]
                    d2 = adj[cha, 2, base, b]
                    d3 = adj[cha, 3, base, b]
                    e0 = adj[chb, 0, i1, b]
                    e1 = adj[chb, 1, i1, b]
                    e2 = adj[chb, 2, i1, b]
                    e3 = adj[chb, 3, i1, b]
                    adj_cs[0, j, b] += e0 * b0 + e1 * b1 + e2 * b2 + e3 * b3
                    adj_cs[1, j, b] += e1 * b0
                    adj_cs[2, j, b] += e2 * b0 + 2.0 * e3 * b2
                    adj_cs[3, j, b] += e3 * b0
                    adj_cs[4, j, b] += sg * (d0 * b0 + d1 * b1 + d2 * b2 + d3 * b3)
                    adj_cs[5, j, b] += sg * (d1 * b0)
                    adj_cs[6, j, b] += sg * (d2 * b0 + 2.0 * d3 * b2)
                    adj_cs[7, j, b] += sg * (d3 * b0)
                # pass 2: amplitude adjoints
                # adj_A = T(c, da) - sg*T(s, db); adj_B = sg*T(s, da) + T(c, db)
                for b in range(tn):
                    c0 = cs[0, j, b]
                    c1 = cs[1, j, b]
                    c2 = cs[2, j, b]
                    c3 = cs[3, j, b]
                    s0 = cs[4, j, b]
                    s1 = cs[5, j, b]
                    s2 = cs[6, j, b]
                    s3 = cs[7, j, b]
                    d0 = adj[cha, 0, base, b]
                    d1 = adj[cha, 1, base, b]
                    d2 = adj[cha, 2, base, b]
                    d3 = adj[cha, 3, base, b]
                    e0 = adj[chb, 0, i1, b]
                    e1 = adj[chb, 1, i1, b]
                    e2 = adj[chb, 2, i1, b]
                    e3 = adj[chb, 3, i1, b]
                    adj[cha, 0, base, b] = (c0 * d0 + c1 * d1 + c2 * d2 + c3 * d3
                                            - sg * (s0 * e0 + s1 * e1 + s2 * e2 + s3 * e3))
                    adj[cha, 1, base, b] = c0 * d1 - sg * (s0 * e1)
                    adj[cha, 2, base, b] = (c0 * d2 + 2.0 * c2 * d3
                                            - sg * (s0 * e2 + 2.0 * s2 * e3))
                    adj[cha, 3, base, b] = c0 * d3 - sg * (s0 * e3)
                    adj[chb, 0, i1, b] = (sg * (s0 * d0 + s1 * d1 + s2 * d2 + s3 * d3)
                                          + c0 * e0 + c1 * e1 + c2 * e2 + c3 * e3)
                    adj[chb, 1, i1, b] = sg * (s0 * d1) + c0 * e1
                    adj[chb, 2, i1, b] = (sg * (s0 * d2 + 2.0 * s2 * d3)
                                          + c0 * e2 + 2.0 * c2 * e3)
                    adj[chb, 3, i1, b] = sg * (s0 * d3) + c0 * e3


@njit(**_FAST)
def block_bwd(adj_out, sv_in, cs, thetas, axis, adj_sv_in, adj_cs, adj_thetas):
    """Reverse one block; adj_sv_in is assigned, adj_cs/adj_thetas accumulate."""
    _, nc, dim, b_n = sv_in.shape
    nq = cs.shape[1]
    n_rot = 3 * nq
    cy = np.empty(nq)
    sy = np.empty(nq)
    cz = np.empty(nq)
    sz = np.empty(nq)
    for j in range(nq):
        cy[j] = math.cos(0.5 * thetas[2 * j])
        sy[j] = math.sin(0.5 * thetas[2 * j])
        cz[j] = math.cos(0.5 * thetas[2 * j + 1])
        sz[j] = math.sin(0.5 * thetas[2 * j + 1])
    ncs = cs.shape[0]
    st = np.empty((n_rot, 2, nc, dim, TILE))
    adj = np.empty((2, nc, dim, TILE))
    cs_t = np.empty((ncs, nq, TILE))
    acs_t = np.empty((ncs, nq, TILE))
    gths = np.zeros(2 * nq)
    for t0 in range(0, b_n, TILE):
        t1 = min(t0 + TILE, b_n)
        tn = t1 - t0
        cs_t[:, :, :tn] = cs[:, :, t0:t1]  # contiguous copies so loops vectorize
        acs_t[:] = 0.0
        # recompute the block: st[k] = input state of rotation k on this tile
        st[0, :, :, :, :tn] = sv_in[:, :, :, t0:t1]
        k = 0
        for j in range(nq):
            if k + 1 < n_rot:
                _enc_rot(st[k], st[k + 1], j, nc, dim, axis, cs_t, j, 0, tn)
            k += 1
        for j in range(nq):
            if k + 1 < n_rot:
                _const_rot(st[k], st[k + 1], j, nc, dim, AXIS_Y, cy[j], sy[j], 0, tn)
            k += 1
            if k + 1 < n_rot:
                _const_rot(st[k], st[k + 1], j, nc, dim, AXIS_Z, cz[j], sz[j], 0, tn)
            k += 1
        # adjoint sweep on the tile
        adj[:, :, :, :tn] = adj_out[:, :, :, t0:t1]
        if nq > 1:
            for j in range(nq - 1, -1, -1):
                _cnot(adj, j, (j + 1) % nq, nc, dim, 0, tn)  # self-adjoint
        k = n_rot
        for j in range(nq - 1, -1, -1):
            k -= 1
            gths[2 * j + 1] += _const_rot_adj(adj, st[k], j, nc, dim, AXIS_Z,
                                              cz[j], sz[j], tn)
            k -= 1
            gths[2 * j] += _const_rot_adj(adj, st[k], j, nc, dim, AXIS_Y,
                                          cy[j], sy[j], tn)
        for j in range(nq - 1, -1, -1):
            k -= 1
            _enc_rot_adj(adj, st[k], j, nc, dim, axis, cs_t, acs_t, j, tn)
        adj_sv_in[:, :, :, t0:t1] = adj[:, :, :, :tn]
        adj_cs[:, :, t0:t1] += acs_t[:, :, :tn]
    for j in range(2 * nq):
        adj_thetas[j] += gths[j]


@njit(**_FAST)
def expect_fwd(sv, out):
    """Per-qubit Z expectations with jet components: out is (NC, n_q, B)."""
    _, nc, dim, b_n = sv.shape
    nq = out.shape[1]
    out[:] = 0.0
    for jq in range(nq):
        mask = 1 << jq
        for i in range(dim):
            sgn = -1.0 if (i & mask) else 1.0
            for ch in range(2):
                if nc == 1:
                    for b in range(b_n):
                        v0 = sv[ch, 0, i, b]
                        out[0, jq, b] += sgn * v0 * v0
                else:
                    for b in range(b_n):
                        v0 = sv[ch, 0, i, b]
                        v1 = sv[ch, 1, i, b]
                        v2 = sv[ch, 2, i, b]
                        v3 = sv[ch, 3, i, b]
                        out[0, jq, b] += sgn * v0 * v0
                        out[1, jq, b] += sgn * 2.0 * v0 * v1
                        out[2, jq, b] += sgn * 2.0 * v0 * v2
                        out[3, jq, b] += sgn * (2.0 * v0 * v3 + 2.0 * v2 * v2)


@njit(**_FAST)
def expect_bwd(adj_e, sv, adj_sv):
    """Adjoint of expect_fwd; adj_e is (NC, n_q, B), accumulates into adj_sv."""
    _, nc, dim, b_n = sv.shape
    nq = adj_e.shape[1]
    for i in range(dim):
        for jq in range(nq):
            sgn = -1.0 if (i & (1 << jq)) else 1.0
            for ch in range(2):
                if nc == 1:
                    for b in range(b_n):
                        adj_sv[ch, 0, i, b] += 2.0 * sgn * adj_e[0, jq, b] * sv[ch, 0, i, b]
                else:
                    for b in range(b_n):
                        ae0 = sgn * adj_e[0, jq, b]
                        ae1 = sgn * adj_e[1, jq, b]
                        ae2 = sgn * adj_e[2, jq, b]
                        ae3 = sgn * adj_e[3, jq, b]
                        v0 = sv[ch, 0, i, b]
                        v1 = sv[ch, 1, i, b]
                        v2 = sv[ch, 2, i, b]
                        v3 = sv[ch, 3, i, b]
                        adj_sv[ch, 0, i, b] += 2.0 * (ae0 * v0 + ae1 * v1
                                                      + ae2 * v2 + ae3 * v3)
                        adj_sv[ch, 1, i, b] += 2.0 * ae1 * v0
                        adj_sv[ch, 2, i, b] += 2.0 * ae2 * v0 + 4.0 * ae3 * v2
                        adj_sv[ch, 3, i, b] += 2.0 * ae3 * v0
