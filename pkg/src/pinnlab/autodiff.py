"""Second-order forward jets with a reverse-mode tape.

A :class:`Jet2` carries a value together with its first-t, first-x and
second-x derivative coefficients; propagating jets through arithmetic gives
exact input derivatives of anything built from the primitives below.  A
:class:`Tape` additionally records every primitive applied to tape variables,
so one reverse sweep yields exact gradients of a recorded scalar with respect
to all trainable parameters -- including gradients that flow through the
derivative coefficients (the PDE-residual case).

Jet components may be plain floats or numpy arrays of any broadcast-compatible
shape; a batch of points is simply a jet whose components are ``(n,)`` or
``(rows, n)`` arrays.  Derivative components may be ``None`` on evaluation
paths that never need input derivatives (data-fit losses, MSE grids), which
skips the corresponding arithmetic entirely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import StructuralError

__all__ = [
    "Jet2",
    "jet_const",
    "jet_time",
    "jet_space",
    "jet_add",
    "jet_sub",
    "jet_mul",
    "jet_scale",
    "jet_tanh",
    "jet_sin",
    "jet_cos",
    "ParamVector",
    "Tape",
    "JetVar",
    "ArrVar",
    "grad",
    "check_grad",
]


# --------------------------------------------------------------------------
# plain jets


@dataclass
class Jet2:
    """Value plus (d/dt, d/dx, d2/dx2) coefficients at one or many points."""

    v: float | np.ndarray
    dt: float | np.ndarray | None = 0.0
    dx: float | np.ndarray | None = 0.0
    dxx: float | np.ndarray | None = 0.0


def jet_const(c):
    """Lift a constant: zero derivatives."""
    return Jet2(c, 0.0, 0.0, 0.0)


def jet_time(t):
    """Seed the time coordinate: d/dt = 1."""
    return Jet2(t, 1.0, 0.0, 0.0)


def jet_space(x):
    """Seed the space coordinate: d/dx = 1."""
    return Jet2(x, 0.0, 1.0, 0.0)


def _z(c):
    return 0.0 if c is None else c


def jet_add(a: Jet2, b: Jet2) -> Jet2:
    return Jet2(a.v + b.v, _z(a.dt) + _z(b.dt), _z(a.dx) + _z(b.dx), _z(a.dxx) + _z(b.dxx))


def jet_sub(a: Jet2, b: Jet2) -> Jet2:
    return Jet2(a.v - b.v, _z(a.dt) - _z(b.dt), _z(a.dx) - _z(b.dx), _z(a.dxx) - _z(b.dxx))


def jet_mul(a: Jet2, b: Jet2) -> Jet2:
    adt, adx, adxx = _z(a.dt), _z(a.dx), _z(a.dxx)
    bdt, bdx, bdxx = _z(b.dt), _z(b.dx), _z(b.dxx)
    return Jet2(
        a.v * b.v,
        adt * b.v + a.v * bdt,
        adx * b.v + a.v * bdx,
        adxx * b.v + 2.0 * adx * bdx + a.v * bdxx,
    )


def jet_scale(a: Jet2, c: float) -> Jet2:
    return Jet2(a.v * c, _z(a.dt) * c, _z(a.dx) * c, _z(a.dxx) * c)


def jet_tanh(a: Jet2) -> Jet2:
    y = np.tanh(a.v)
    s = 1.0 - y * y
    adx = _z(a.dx)
    return Jet2(y, s * _z(a.dt), s * adx, s * _z(a.dxx) - 2.0 * y * s * adx * adx)


def jet_sin(a: Jet2) -> Jet2:
    y, c = np.sin(a.v), np.cos(a.v)
    adx = _z(a.dx)
    return Jet2(y, c * _z(a.dt), c * adx, c * _z(a.dxx) - y * adx * adx)


def jet_cos(a: Jet2) -> Jet2:
    y, s = np.cos(a.v), np.sin(a.v)
    adx = _z(a.dx)
    return Jet2(y, -s * _z(a.dt), -s * adx, -s * _z(a.dxx) - y * adx * adx)


# --------------------------------------------------------------------------
# parameters


class ParamVector:
    """Flat vector of trainable parameters; identifiers are the positions."""

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.ndim != 1:
            raise StructuralError("parameter vector must be one-dimensional")

    def __len__(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy())


# --------------------------------------------------------------------------
# tape machinery


def _acc(cur, delta):
    """Accumulate an adjoint contribution (None means zero so far)."""
    return delta if cur is None else cur + delta


def _reduce_to(adj, ref):
    """Sum a broadcast adjoint back down to the shape of ``ref``."""
    if np.isscalar(ref) or (isinstance(ref, np.ndarray) and ref.ndim == 0):
        return float(np.sum(adj))
    ref_shape = ref.shape
    adj = np.asarray(adj)
    if adj.shape == ref_shape:
        return adj
    extra = adj.ndim - len(ref_shape)
    if extra > 0:
        adj = adj.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(ref_shape) if n == 1 and adj.shape[i] != 1)
    if axes:
        adj = adj.sum(axis=axes, keepdims=True)
    return adj


class JetVar:
    """A jet-valued node on a tape."""

    __slots__ = ("tape", "v", "dt", "dx", "dxx", "adj_v", "adj_dt", "adj_dx", "adj_dxx")

    def __init__(self, tape, v, dt, dx, dxx):
        self.tape = tape
        self.v, self.dt, self.dx, self.dxx = v, dt, dx, dxx
        self.adj_v = self.adj_dt = self.adj_dx = self.adj_dxx = None

    def jet(self) -> Jet2:
        return Jet2(self.v, self.dt, self.dx, self.dxx)

    def value(self) -> float:
        return float(np.asarray(self.v).reshape(()))


class ArrVar:
    """A plain real-array node on a tape (no jet structure)."""

    __slots__ = ("tape", "a", "adj")

    def __init__(self, tape, a):
        self.tape = tape
        self.a = a
        self.adj = None

    def value(self) -> float:
        return float(np.asarray(self.a).reshape(()))


class Tape:
    """Append-only record of primitive operations over one parameter vector.

    Ops are appended in evaluation order, so the list is already a topological
    order; the reverse sweep visits each node exactly once.  A tape is
    single-threaded and rebuilt per batch.
    """

    def __init__(self, params: ParamVector | None = None):
        self.params = params
        self.pgrad = np.zeros(len(params)) if params is not None else None
        self._ops: list[Callable[[], None]] = []

    def _push(self, bwd: Callable[[], None]) -> None:
        self._ops.append(bwd)

    def _own(self, *vars_):
        for var in vars_:
            if var.tape is not self:
                raise StructuralError("operand recorded on a different tape")

    def _wslice(self, sl: slice) -> np.ndarray:
        if self.params is None:
            raise StructuralError("tape has no parameter vector attached")
        return self.params.values[sl]

    # -- leaves ------------------------------------------------------------

    def const(self, c) -> JetVar:
        return JetVar(self, np.asarray(c, dtype=np.float64), None, None, None)

    def seed_t(self, t) -> JetVar:
        t = np.asarray(t, dtype=np.float64)
        return JetVar(self, t, np.ones_like(t), np.zeros_like(t), np.zeros_like(t))

    def seed_x(self, x) -> JetVar:
        x = np.asarray(x, dtype=np.float64)
        return JetVar(self, x, np.zeros_like(x), np.ones_like(x), np.zeros_like(x))

    def inputs(self, ts, xs, with_jets: bool = True) -> JetVar:
        """Stack the two coordinates into a (2, n) jet leaf for dense layers."""
        v = np.stack([np.asarray(ts, dtype=np.float64), np.asarray(xs, dtype=np.float64)])
        if not with_jets:
            return JetVar(self, v, None, None, None)
        n = v.shape[1]
        dt = np.zeros((2, n))
        dt[0] = 1.0
        dx = np.zeros((2, n))
        dx[1] = 1.0
        return JetVar(self, v, dt, dx, np.zeros((2, n)))

    def param(self, i: int) -> JetVar:
        """Lift one trainable parameter to a (constant) jet node."""
        if self.params is None:
            raise StructuralError("tape has no parameter vector attached")
        out = JetVar(self, self.params.values[i], None, None, None)

        def bwd():
            if out.adj_v is not None:
                self.pgrad[i] += float(np.sum(out.adj_v))

        self._push(bwd)
        return out

    # -- elementwise jet ops -------------------------------------------------

    def add(self, a: JetVar, b: JetVar) -> JetVar:
        self._own(a, b)
        out = JetVar(
            self,
            a.v + b.v,
            _n_add(a.dt, b.dt),
            _n_add(a.dx, b.dx),
            _n_add(a.dxx, b.dxx),
        )

        def bwd():
            for comp in ("v", "dt", "dx", "dxx"):
                adj = getattr(out, "adj_" + comp)
                if adj is None:
                    continue
                for op in (a, b):
                    ref = getattr(op, comp)
                    if ref is not None or comp == "v":
                        cur = getattr(op, "adj_" + comp)
                        setattr(op, "adj_" + comp, _acc(cur, _reduce_to(adj, getattr(op, "v") if ref is None else ref)))

        self._push(bwd)
        return out

    def sub(self, a: JetVar, b: JetVar) -> JetVar:
        self._own(a, b)
        out = JetVar(
            self,
            a.v - b.v,
            _n_sub(a.dt, b.dt),
            _n_sub(a.dx, b.dx),
            _n_sub(a.dxx, b.dxx),
        )

        def bwd():
            for comp in ("v", "dt", "dx", "dxx"):
                adj = getattr(out, "adj_" + comp)
                if adj is None:
                    continue
                refa = getattr(a, comp)
                if refa is not None or comp == "v":
                    a_ref = a.v if refa is None else refa
                    setattr(a, "adj_" + comp, _acc(getattr(a, "adj_" + comp), _reduce_to(adj, a_ref)))
                refb = getattr(b, comp)
                if refb is not None or comp == "v":
                    b_ref = b.v if refb is None else refb
                    setattr(b, "adj_" + comp, _acc(getattr(b, "adj_" + comp), _reduce_to(-adj, b_ref)))

        self._push(bwd)
        return out

    def mul(self, a: JetVar, b: JetVar) -> JetVar:
        self._own(a, b)
        j = jet_mul(a.jet(), b.jet())
        has_d = not (a.dt is None and a.dx is None and a.dxx is None
                     and b.dt is None and b.dx is None and b.dxx is None)
        out = JetVar(self, j.v, j.dt if has_d else None, j.dx if has_d else None,
                     j.dxx if has_d else None)

        def bwd():
            av, adt, adx, adxx = a.v, _z(a.dt), _z(a.dx), _z(a.dxx)
            bv, bdt, bdx, bdxx = b.v, _z(b.dt), _z(b.dx), _z(b.dxx)
            ov, odt, odx, odxx = out.adj_v, out.adj_dt, out.adj_dx, out.adj_dxx
            ga = gb = 0.0
            if ov is not None:
                ga = ga + bv * ov
                gb = gb + av * ov
            if odt is not None:
                ga = ga + bdt * odt
                gb = gb + adt * odt
                a._accp("dt", bv * odt, self)
                b._accp("dt", av * odt, self)
            if odx is not None:
                ga = ga + bdx * odx
                gb = gb + adx * odx
                a._accp("dx", bv * odx, self)
                b._accp("dx", av * odx, self)
            if odxx is not None:
                ga = ga + bdxx * odxx
                gb = gb + adxx * odxx
                a._accp("dx", 2.0 * bdx * odxx, self)
                b._accp("dx", 2.0 * adx * odxx, self)
                a._accp("dxx", bv * odxx, self)
                b._accp("dxx", av * odxx, self)
            if not np.isscalar(ga) or ga != 0.0:
                a.adj_v = _acc(a.adj_v, _reduce_to(ga, a.v))
            if not np.isscalar(gb) or gb != 0.0:
                b.adj_v = _acc(b.adj_v, _reduce_to(gb, b.v))

        self._push(bwd)
        return out

    def scale(self, a: JetVar, c: float) -> JetVar:
        self._own(a)
        out = JetVar(self, a.v * c, _n_scale(a.dt, c), _n_scale(a.dx, c), _n_scale(a.dxx, c))

        def bwd():
            for comp in ("v", "dt", "dx", "dxx"):
                adj = getattr(out, "adj_" + comp)
                if adj is not None:
                    ref = getattr(a, comp)
                    ref = a.v if ref is None else ref
                    setattr(a, "adj_" + comp, _acc(getattr(a, "adj_" + comp), _reduce_to(c * adj, ref)))

        self._push(bwd)
        return out

    def tanh(self, a: JetVar) -> JetVar:
        self._own(a)
        full = (isinstance(a.v, np.ndarray) and a.dt is not None
                and a.dx is not None and a.dxx is not None
                and isinstance(a.dt, np.ndarray) and isinstance(a.dx, np.ndarray)
                and isinstance(a.dxx, np.ndarray)
                and a.dt.shape == a.v.shape == a.dx.shape == a.dxx.shape)
        if full:
            return self._tanh_jet_fast(a)
        if isinstance(a.v, np.ndarray) and a.dt is None and a.dx is None \
                and a.dxx is None:
            return self._tanh_val_fast(a)
        return self._tanh_generic(a)

    def _tanh_jet_fast(self, a: JetVar) -> JetVar:
        from . import _dkernels as dk

        ov = np.tanh(a.v)
        odt = np.empty_like(a.v)
        odx = np.empty_like(a.v)
        odxx = np.empty_like(a.v)
        dk.tanh_jet_chain(ov, a.dt, a.dx, a.dxx, odt, odx, odxx)
        out = JetVar(self, ov, odt, odx, odxx)

        def bwd():
            if (out.adj_v is None and out.adj_dt is None and out.adj_dx is None
                    and out.adj_dxx is None):
                return
            zeros = None
            adjs = []
            for adj in (out.adj_v, out.adj_dt, out.adj_dx, out.adj_dxx):
                if adj is None:
                    if zeros is None:
                        zeros = np.zeros_like(a.v)
                    adj = zeros
                elif not isinstance(adj, np.ndarray) or adj.shape != a.v.shape:
                    adj = np.broadcast_to(adj, a.v.shape).copy()
                adjs.append(adj)
            for comp in ("v", "dt", "dx", "dxx"):
                if getattr(a, "adj_" + comp) is None:
                    setattr(a, "adj_" + comp, np.zeros_like(a.v))
            dk.tanh_jet_bwd(ov, a.dt, a.dx, a.dxx, *adjs,
                            a.adj_v, a.adj_dt, a.adj_dx, a.adj_dxx)

        self._push(bwd)
        return out

    def _tanh_val_fast(self, a: JetVar) -> JetVar:
        from . import _dkernels as dk

        ov = np.tanh(a.v)
        out = JetVar(self, ov, None, None, None)

        def bwd():
            if out.adj_v is None:
                return
            adj = out.adj_v
            if not isinstance(adj, np.ndarray) or adj.shape != a.v.shape:
                adj = np.broadcast_to(adj, a.v.shape).copy()
            if a.adj_v is None:
                a.adj_v = np.zeros_like(a.v)
            dk.tanh_val_bwd(ov, adj, a.adj_v)

        self._push(bwd)
        return out

    def _tanh_generic(self, a: JetVar) -> JetVar:
        y = np.tanh(a.v)
        s = 1.0 - y * y
        adx = a.dx
        out = JetVar(
            self,
            y,
            None if a.dt is None else s * a.dt,
            None if adx is None else s * adx,
            None if a.dxx is None else s * a.dxx - 2.0 * y * s * _z(adx) * _z(adx),
        )

        def bwd():
            gv = 0.0
            if out.adj_v is not None:
                gv = gv + s * out.adj_v
            if out.adj_dt is not None:
                gv = gv - 2.0 * y * s * _z(a.dt) * out.adj_dt
                a._accp("dt", s * out.adj_dt, self)
            if out.adj_dx is not None:
                gv = gv - 2.0 * y * s * _z(a.dx) * out.adj_dx
                a._accp("dx", s * out.adj_dx, self)
            if out.adj_dxx is not None:
                d2 = _z(a.dx)
                gv = gv - (2.0 * y * s * _z(a.dxx) + 2.0 * d2 * d2 * (s * s - 2.0 * y * y * s)) * out.adj_dxx
                a._accp("dx", -4.0 * y * s * d2 * out.adj_dxx, self)
                a._accp("dxx", s * out.adj_dxx, self)
            if not np.isscalar(gv) or gv != 0.0:
                a.adj_v = _acc(a.adj_v, _reduce_to(gv, a.v))

        self._push(bwd)
        return out

    def sin(self, a: JetVar) -> JetVar:
        return self._trig(a, np.sin, np.cos, +1.0)

    def cos(self, a: JetVar) -> JetVar:
        return self._trig(a, np.cos, np.sin, -1.0)

    def _trig(self, a: JetVar, f, g, sgn: float) -> JetVar:
        # sin: y=f=sin, d=sgn*g=cos ; cos: y=f=cos, d=sgn*g=-sin
        self._own(a)
        y = f(a.v)
        d = sgn * g(a.v)
        adx = _z(a.dx)
        out = JetVar(
            self,
            y,
            None if a.dt is None else d * a.dt,
            None if a.dx is None else d * a.dx,
            None if a.dxx is None else d * a.dxx - y * adx * adx,
        )

        def bwd():
            gv = 0.0
            if out.adj_v is not None:
                gv = gv + d * out.adj_v
            if out.adj_dt is not None:
                gv = gv - y * _z(a.dt) * out.adj_dt
                a._accp("dt", d * out.adj_dt, self)
            if out.adj_dx is not None:
                gv = gv - y * _z(a.dx) * out.adj_dx
                a._accp("dx", d * out.adj_dx, self)
            if out.adj_dxx is not None:
                d2 = _z(a.dx)
                gv = gv + (-y * _z(a.dxx) - d * d2 * d2) * out.adj_dxx
                a._accp("dx", -2.0 * y * d2 * out.adj_dxx, self)
                a._accp("dxx", d * out.adj_dxx, self)
            if not np.isscalar(gv) or gv != 0.0:
                a.adj_v = _acc(a.adj_v, _reduce_to(gv, a.v))

        self._push(bwd)
        return out

    # -- structure ops -------------------------------------------------------

    def comp(self, a: JetVar, which: str) -> ArrVar:
        """Extract one jet component as a plain array node."""
        self._own(a)
        val = getattr(a, which)
        if val is None:
            raise StructuralError(f"component {which!r} not carried on this path")
        out = ArrVar(self, np.asarray(val))

        def bwd():
            if out.adj is not None:
                setattr(a, "adj_" + which, _acc(getattr(a, "adj_" + which), out.adj))

        self._push(bwd)
        return out

    def affine(self, x: JetVar, w_slice: slice, b_slice: slice | None,
               n_in: int, n_out: int) -> JetVar:
        """Dense layer W @ x + b applied to each jet component (W, b trainable)."""
        self._own(x)
        w = self._wslice(w_slice).reshape(n_out, n_in)
        b = None if b_slice is None else self._wslice(b_slice)
        v = w @ x.v
        if b is not None:
            v += b[:, None]
        out = JetVar(
            self,
            v,
            None if x.dt is None else w @ x.dt,
            None if x.dx is None else w @ x.dx,
            None if x.dxx is None else w @ x.dxx,
        )

        def bwd():
            gw = None
            for comp in ("v", "dt", "dx", "dxx"):
                adj = getattr(out, "adj_" + comp)
                if adj is None:
                    continue
                if not isinstance(adj, np.ndarray) or adj.shape != out.v.shape:
                    adj = np.broadcast_to(np.asarray(adj, dtype=np.float64),
                                          out.v.shape)
                xc = x.v if comp == "v" else getattr(x, comp)
                if xc is not None:
                    gw = _acc(gw, adj @ xc.T)
                    setattr(x, "adj_" + comp, _acc(getattr(x, "adj_" + comp), w.T @ adj))
            if gw is not None:
                self.pgrad[w_slice] += gw.ravel()
            if b is not None and out.adj_v is not None:
                adj_v = out.adj_v
                if not isinstance(adj_v, np.ndarray) or adj_v.shape != out.v.shape:
                    adj_v = np.broadcast_to(np.asarray(adj_v), out.v.shape)
                self.pgrad[b_slice] += adj_v.sum(axis=1)

        self._push(bwd)
        return out

    def cols(self, a: JetVar, lo: int, hi: int) -> JetVar:
        """Select the column range [lo, hi) of a (B,)-shaped jet node."""
        self._own(a)
        out = JetVar(
            self,
            a.v[lo:hi],
            None if a.dt is None else a.dt[lo:hi],
            None if a.dx is None else a.dx[lo:hi],
            None if a.dxx is None else a.dxx[lo:hi],
        )

        def bwd():
            for comp in ("v", "dt", "dx", "dxx"):
                adj = getattr(out, "adj_" + comp)
                if adj is None:
                    continue
                cur = getattr(a, "adj_" + comp)
                if cur is None:
                    cur = np.zeros_like(np.asarray(a.v, dtype=np.float64))
                cur[lo:hi] += adj
                setattr(a, "adj_" + comp, cur)

        self._push(bwd)
        return out

    def row(self, a: JetVar, i: int) -> JetVar:
        """Select row i of a (rows, n) jet node."""
        self._own(a)
        out = JetVar(
            self,
            a.v[i],
            None if a.dt is None else a.dt[i],
            None if a.dx is None else a.dx[i],
            None if a.dxx is None else a.dxx[i],
        )

        def bwd():
            for comp in ("v", "dt", "dx", "dxx"):
                adj = getattr(out, "adj_" + comp)
                if adj is None:
                    continue
                cur = getattr(a, "adj_" + comp)
                if cur is None:
                    cur = np.zeros_like(np.asarray(a.v, dtype=np.float64))
                cur[i] += adj
                setattr(a, "adj_" + comp, cur)

        self._push(bwd)
        return out

    # -- reductions / loss assembly -------------------------------------------

    def mean_sq(self, r: ArrVar) -> ArrVar:
        """mean(r**2) over all entries."""
        self._own(r)
        n = np.asarray(r.a).size
        out = ArrVar(self, np.asarray(np.mean(np.square(r.a))))

        def bwd():
            if out.adj is not None:
                r.adj = _acc(r.adj, (2.0 / n) * r.a * out.adj)

        self._push(bwd)
        return out

    def mse_to(self, u: JetVar, targets: np.ndarray) -> ArrVar:
        """mean((u.v - targets)**2); only the value component participates."""
        self._own(u)
        diff = u.v - targets
        n = np.asarray(diff).size
        out = ArrVar(self, np.asarray(np.mean(np.square(diff))))

        def bwd():
            if out.adj is not None:
                u.adj_v = _acc(u.adj_v, (2.0 / n) * diff * out.adj)

        self._push(bwd)
        return out

    def pde_residual(self, u: JetVar, lin: float, nonlin: float, f_vals: np.ndarray) -> ArrVar:
        """u_t - lin*u_xx + nonlin*u*u_x - f, as a plain array node."""
        self._own(u)
        if u.dt is None or u.dx is None or u.dxx is None:
            raise StructuralError("residual requires a full jet evaluation")
        r = u.dt - lin * u.dxx + nonlin * u.v * u.dx - f_vals
        out = ArrVar(self, r)

        def bwd():
            if out.adj is None:
                return
            adj = out.adj
            u.adj_dt = _acc(u.adj_dt, adj)
            u.adj_dxx = _acc(u.adj_dxx, -lin * adj)
            if nonlin != 0.0:
                u.adj_v = _acc(u.adj_v, nonlin * u.dx * adj)
                u.adj_dx = _acc(u.adj_dx, nonlin * u.v * adj)

        self._push(bwd)
        return out

    def wsum(self, terms: Sequence[ArrVar], weights: Sequence[float]) -> ArrVar:
        """Weighted sum of scalar nodes; weights are constants, not variables."""
        for t in terms:
            self._own(t)
        out = ArrVar(self, np.asarray(sum(w * t.a for t, w in zip(terms, weights))))

        def bwd():
            if out.adj is None:
                return
            for t, w in zip(terms, weights):
                t.adj = _acc(t.adj, w * out.adj)

        self._push(bwd)
        return out

    # -- reverse sweep ---------------------------------------------------------

    def backward(self, loss) -> np.ndarray:
        """Seed the loss value with adjoint 1 and sweep the tape once."""
        if loss.tape is not self:
            raise StructuralError("loss recorded on a different tape")
        if isinstance(loss, ArrVar):
            loss.adj = np.ones_like(np.asarray(loss.a, dtype=np.float64))
        else:
            loss.adj_v = np.ones_like(np.asarray(loss.v, dtype=np.float64))
        for bwd in reversed(self._ops):
            bwd()
        return self.pgrad


def _n_add(a, b):
    if a is None and b is None:
        return None
    return _z(a) + _z(b)


def _n_sub(a, b):
    if a is None and b is None:
        return None
    return _z(a) - _z(b)


def _n_scale(a, c):
    return None if a is None else a * c


def _jetvar_accp(self, comp, delta, tape):
    ref = getattr(self, comp)
    if ref is None:
        return  # component not carried: derivative w.r.t. it is discarded
    setattr(self, "adj_" + comp, _acc(getattr(self, "adj_" + comp), _reduce_to(delta, ref)))


JetVar._accp = _jetvar_accp


def grad(loss, params: ParamVector | None = None) -> np.ndarray:
    """Gradient of a recorded scalar with respect to all trainable parameters."""
    tape = loss.tape
    if tape.params is None:
        raise StructuralError("tape has no parameter vector attached")
    if params is not None and params is not tape.params:
        raise StructuralError("gradient requested for a foreign parameter vector")
    return np.array(tape.backward(loss), dtype=np.float64)


def check_grad(build: Callable[[Tape, ParamVector], "ArrVar | JetVar"],
               params: ParamVector, step: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``build`` records a scalar loss for the current parameter values on the
    tape it is given; it is re-invoked at shifted values for the differences.
    """
    tape = Tape(params)
    g = grad(build(tape, params), params)

    def value() -> float:
        return build(Tape(params), params).value()

    worst = 0.0
    vals = params.values
    for i in range(len(params)):
        orig = vals[i]
        vals[i] = orig + step
        fp = value()
        vals[i] = orig - step
        fm = value()
        vals[i] = orig
        fd = (fp - fm) / (2.0 * step)
        err = abs(g[i] - fd) / max(1.0, abs(g[i]))
        worst = max(worst, err)
    return worst
