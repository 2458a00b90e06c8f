"""Numba kernels for the dense-layer hot path (fused jet tanh)."""

import numpy as np
from numba import njit

_FAST = {"cache": True, "fastmath": True}


@njit(**_FAST)
def tanh_jet_chain(y, dt, dx, dxx, odt, odx, odxx):
    """Jet chain rule through tanh given the precomputed value y = tanh(v)."""
    n = y.size
    fy = y.reshape(n)
    fdt = dt.reshape(n)
    fdx = dx.reshape(n)
    fdxx = dxx.reshape(n)
    gdt = odt.reshape(n)
    gdx = odx.reshape(n)
    gdxx = odxx.reshape(n)
    for i in range(n):
        yy = fy[i]
        s = 1.0 - yy * yy
        gdt[i] = s * fdt[i]
        gdx[i] = s * fdx[i]
        gdxx[i] = s * fdxx[i] - 2.0 * yy * s * fdx[i] * fdx[i]


@njit(**_FAST)
def tanh_jet_bwd(y, dt, dx, dxx, av, adt, adx, adxx, gv, gdt, gdx, gdxx):
    """Adjoint of tanh_jet_fwd: inputs are the output value y and the INPUT
    derivative components; a* are output adjoints, g* accumulate input adjoints."""
    n = y.size
    fy = y.reshape(n)
    fdt = dt.reshape(n)
    fdx = dx.reshape(n)
    fdxx = dxx.reshape(n)
    bv = av.reshape(n)
    bdt = adt.reshape(n)
    bdx = adx.reshape(n)
    bdxx = adxx.reshape(n)
    cv = gv.reshape(n)
    cdt = gdt.reshape(n)
    cdx = gdx.reshape(n)
    cdxx = gdxx.reshape(n)
    for i in range(n):
        yy = fy[i]
        s = 1.0 - yy * yy
        ys = yy * s
        d2 = fdx[i]
        cv[i] += (s * bv[i] - 2.0 * ys * (fdt[i] * bdt[i] + d2 * bdx[i])
                  - (2.0 * ys * fdxx[i] + 2.0 * d2 * d2 * (s * s - 2.0 * yy * ys))
                  * bdxx[i])
        cdt[i] += s * bdt[i]
        cdx[i] += s * bdx[i] - 4.0 * ys * d2 * bdxx[i]
        cdxx[i] += s * bdxx[i]


@njit(**_FAST)
def tanh_val_bwd(y, av, gv):
    n = y.size
    fy = y.reshape(n)
    bv = av.reshape(n)
    cv = gv.reshape(n)
    for i in range(n):
        cv[i] += (1.0 - fy[i] * fy[i]) * bv[i]
