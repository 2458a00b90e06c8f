"""Differentiable statevector simulator for the data re-uploading circuit.

Two entry levels:

* spec-surface ops (:func:`apply_rotation`, :func:`apply_cnot`,
  :func:`expect_z`, :func:`run_circuit`) on a single :class:`Statevector`
  with jet-valued amplitude components -- plain numpy, used directly and as a
  cross-check of the fast path;
* :func:`circuit_on_tape`, which records the whole circuit on a tape as one
  fused node per re-uploading block (numba kernels from ``_qkernels``), for
  batched training.

Basis convention: index ``i`` has qubit ``q`` on bit ``q`` (qubit 0 least
significant), so |q0=1, q1=0, q2=0> is index 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _qkernels as qk
from .autodiff import Jet2, JetVar, Tape, _acc
from .errors import StructuralError

AXIS_Y = qk.AXIS_Y
AXIS_X = qk.AXIS_X
AXIS_Z = qk.AXIS_Z
_AXES = {"X": AXIS_X, "Y": AXIS_Y, "Z": AXIS_Z}


@dataclass
class CircuitLayout:
    """Hardware-efficient re-uploading layout: one encoding rotation per qubit
    before every variational block (R_Y on even blocks, R_X on odd), each
    variational block being per-qubit R_Y, R_Z followed by the CNOT ring."""

    n_q: int = 3
    depth: int = 1
    rotations_per_qubit: int = 2

    def __post_init__(self):
        if self.n_q < 1 or self.n_q > 8:
            raise StructuralError("qubit count must be in 1..8")
        if self.depth < 0:
            raise StructuralError("depth must be non-negative")

    @property
    def n_angles(self) -> int:
        return self.depth * self.n_q * self.rotations_per_qubit

    def encoding_axis(self, block: int) -> int:
        return AXIS_Y if block % 2 == 0 else AXIS_X

    @property
    def dim(self) -> int:
        return 1 << self.n_q


class Statevector:
    """2**n_q complex amplitudes whose components carry jets.

    Stored as a (4, dim) complex array: axis 0 is the jet component
    (value, dt, dx, dxx) of both real and imaginary parts at once.
    """

    __slots__ = ("n_q", "a")

    def __init__(self, n_q: int, a: np.ndarray | None = None):
        self.n_q = n_q
        if a is None:
            a = np.zeros((4, 1 << n_q), dtype=np.complex128)
            a[0, 0] = 1.0
        self.a = a

    @classmethod
    def ground(cls, n_q: int) -> "Statevector":
        return cls(n_q)

    @property
    def dim(self) -> int:
        return 1 << self.n_q

    def copy(self) -> "Statevector":
        return Statevector(self.n_q, self.a.copy())

    def amplitude(self, i: int) -> tuple[Jet2, Jet2]:
        """Real and imaginary parts of amplitude ``i`` as jets."""
        col = self.a[:, i]
        return (Jet2(col[0].real, col[1].real, col[2].real, col[3].real),
                Jet2(col[0].imag, col[1].imag, col[2].imag, col[3].imag))

    def norm_value(self) -> float:
        """Value-level norm (squared amplitudes of the value component)."""
        return float(np.sum(np.abs(self.a[0]) ** 2))


def _angle_tuple(angle: Jet2) -> tuple[float, float, float, float]:
    z = lambda c: 0.0 if c is None else float(c)
    return float(angle.v), z(angle.dt), z(angle.dx), z(angle.dxx)


def apply_rotation(sv: Statevector, axis: str, qubit: int, angle: Jet2) -> Statevector:
    """Single-qubit rotation exp(-i*angle*sigma_axis/2); derivatives of the
    angle propagate into the amplitude jets."""
    if not 0 <= qubit < sv.n_q:
        raise StructuralError(f"qubit {qubit} out of range for {sv.n_q} qubits")
    ax = _AXES[axis.upper()] if isinstance(axis, str) else axis
    a0, a1, a2, a3 = _angle_tuple(angle)
    half = Jet2(0.5 * a0, 0.5 * a1, 0.5 * a2, 0.5 * a3)
    c = _jet_cos_arr(half)
    s = _jet_sin_arr(half)
    mask = 1 << qubit
    idx = np.arange(sv.dim)
    lo = idx[(idx & mask) == 0]
    hi = lo | mask
    out = sv.copy()
    if ax == AXIS_Z:
        out.a[:, lo] = _jet_cmul(c - 1j * s, sv.a[:, lo])  # e^{-i angle/2}
        out.a[:, hi] = _jet_cmul(c + 1j * s, sv.a[:, hi])
        return out
    m01 = -s if ax == AXIS_Y else -1j * s
    m10 = s if ax == AXIS_Y else -1j * s
    out.a[:, lo] = _jet_cmul(c, sv.a[:, lo]) + _jet_cmul(m01, sv.a[:, hi])
    out.a[:, hi] = _jet_cmul(m10, sv.a[:, lo]) + _jet_cmul(c, sv.a[:, hi])
    return out


def _jet_cos_arr(j: Jet2) -> np.ndarray:
    v = math.cos(j.v)
    s = math.sin(j.v)
    return np.array([v, -s * j.dt, -s * j.dx, -s * j.dxx - v * j.dx * j.dx])


def _jet_sin_arr(j: Jet2) -> np.ndarray:
    v = math.sin(j.v)
    c = math.cos(j.v)
    return np.array([v, c * j.dt, c * j.dx, c * j.dxx - v * j.dx * j.dx])


def _jet_cmul(g: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Truncated product of a complex jet (4,) with complex jet columns (4, m)."""
    out = np.empty_like(a)
    out[0] = g[0] * a[0]
    out[1] = g[1] * a[0] + g[0] * a[1]
    out[2] = g[2] * a[0] + g[0] * a[2]
    out[3] = g[3] * a[0] + 2.0 * g[2] * a[2] + g[0] * a[3]
    return out


def apply_cnot(sv: Statevector, control: int, target: int) -> Statevector:
    if control == target:
        raise StructuralError("control and target must differ")
    if not (0 <= control < sv.n_q and 0 <= target < sv.n_q):
        raise StructuralError("cnot qubit index out of range")
    out = sv.copy()
    idx = np.arange(sv.dim)
    sel = ((idx & (1 << control)) != 0) & ((idx & (1 << target)) == 0)
    src = idx[sel]
    dst = src | (1 << target)
    out.a[:, src] = sv.a[:, dst]
    out.a[:, dst] = sv.a[:, src]
    return out


def expect_z(sv: Statevector, qubit: int) -> Jet2:
    """Pauli-Z expectation on one qubit, with jet components."""
    if not 0 <= qubit < sv.n_q:
        raise StructuralError(f"qubit {qubit} out of range")
    mask = 1 << qubit
    signs = np.where((np.arange(sv.dim) & mask) == 0, 1.0, -1.0)
    a0, ad, ax, axx = sv.a[0], sv.a[1], sv.a[2], sv.a[3]
    e0 = float(np.sum(signs * np.abs(a0) ** 2))
    e1 = float(np.sum(signs * 2.0 * (np.conj(a0) * ad).real))
    e2 = float(np.sum(signs * 2.0 * (np.conj(a0) * ax).real))
    e3 = float(np.sum(signs * (2.0 * (np.conj(a0) * axx).real + 2.0 * np.abs(ax) ** 2)))
    return Jet2(e0, e1, e2, e3)


def run_circuit(layout: CircuitLayout, inputs, thetas: np.ndarray) -> list[Jet2]:
    """Evaluate the circuit on one point: encoding inputs are n_q jets, thetas
    the flat trainable angles; returns the n_q Pauli-Z expectation jets."""
    if len(inputs) != layout.n_q:
        raise StructuralError("need one encoding input per qubit")
    thetas = np.asarray(thetas, dtype=np.float64)
    if thetas.shape != (layout.n_angles,):
        raise StructuralError(
            f"expected {layout.n_angles} trainable angles, got {thetas.shape}")
    sv = Statevector.ground(layout.n_q)
    r = layout.rotations_per_qubit
    for block in range(layout.depth):
        ax = "Y" if layout.encoding_axis(block) == AXIS_Y else "X"
        for j in range(layout.n_q):
            sv = apply_rotation(sv, ax, j, inputs[j])
        base = block * layout.n_q * r
        for j in range(layout.n_q):
            sv = apply_rotation(sv, "Y", j, jet_scalar(thetas[base + 2 * j]))
            sv = apply_rotation(sv, "Z", j, jet_scalar(thetas[base + 2 * j + 1]))
        if layout.n_q > 1:
            for j in range(layout.n_q):
                sv = apply_cnot(sv, j, (j + 1) % layout.n_q)
    return [expect_z(sv, j) for j in range(layout.n_q)]


def jet_scalar(v: float) -> Jet2:
    return Jet2(float(v), 0.0, 0.0, 0.0)


# --------------------------------------------------------------------------
# tape integration


class SvVar:
    """Batched statevector node: payload float (2, NC, dim, B) (re/im split)."""

    __slots__ = ("tape", "sv", "adj")

    def __init__(self, tape, sv):
        self.tape = tape
        self.sv = sv
        self.adj = None


class CoeffVar:
    """Half-angle cos/sin jets of the encoding angles: (8 or 2, n_q, B)."""

    __slots__ = ("tape", "arr", "adj")

    def __init__(self, tape, arr):
        self.tape = tape
        self.arr = arr
        self.adj = None


def encoding_coeffs(tape: Tape, x: JetVar) -> CoeffVar:
    """Precompute the rotation-coefficient jets shared by every block."""
    tape._own(x)
    with_jets = x.dt is not None
    h = 0.5 * x.v
    cv = np.cos(h)
    sv = np.sin(h)
    if with_jets:
        dxsq = x.dx * x.dx
        arr = np.stack([
            cv, -0.5 * sv * x.dt, -0.5 * sv * x.dx,
            -0.5 * sv * x.dxx - 0.25 * cv * dxsq,
            sv, 0.5 * cv * x.dt, 0.5 * cv * x.dx,
            0.5 * cv * x.dxx - 0.25 * sv * dxsq,
        ])
    else:
        arr = np.stack([cv, sv])
    out = CoeffVar(tape, arr)

    def bwd():
        if out.adj is None:
            return
        a = out.adj
        if with_jets:
            gc0, gc1, gc2, gc3, gs0, gs1, gs2, gs3 = a
            x.adj_v = _acc(x.adj_v,
                           -0.5 * sv * gc0 - 0.25 * cv * x.dt * gc1
                           - 0.25 * cv * x.dx * gc2
                           + (-0.25 * cv * x.dxx + 0.125 * sv * dxsq) * gc3
                           + 0.5 * cv * gs0 - 0.25 * sv * x.dt * gs1
                           - 0.25 * sv * x.dx * gs2
                           + (-0.25 * sv * x.dxx - 0.125 * cv * dxsq) * gs3)
            x.adj_dt = _acc(x.adj_dt, -0.5 * sv * gc1 + 0.5 * cv * gs1)
            x.adj_dx = _acc(x.adj_dx, -0.5 * sv * gc2 - 0.5 * cv * x.dx * gc3
                            + 0.5 * cv * gs2 - 0.5 * sv * x.dx * gs3)
            x.adj_dxx = _acc(x.adj_dxx, -0.5 * sv * gc3 + 0.5 * cv * gs3)
        else:
            x.adj_v = _acc(x.adj_v, -0.5 * sv * a[0] + 0.5 * cv * a[1])

    tape._push(bwd)
    return out


def ground_state(tape: Tape, n_points: int, n_q: int, with_jets: bool) -> SvVar:
    nc = 4 if with_jets else 1
    sv = np.zeros((2, nc, 1 << n_q, n_points))
    sv[0, 0, 0, :] = 1.0
    return SvVar(tape, sv)


def block_on_tape(tape: Tape, sv: SvVar, cs: CoeffVar, theta_slice: slice,
                  axis: int) -> SvVar:
    """One fused re-uploading block (encoding + variational + entangler)."""
    tape._own(sv, cs)
    thetas = tape._wslice(theta_slice)
    out_sv = np.empty_like(sv.sv)
    qk.block_fwd(sv.sv, cs.arr, thetas, axis, out_sv)
    out = SvVar(tape, out_sv)

    def bwd():
        if out.adj is None:
            return
        if cs.adj is None:
            cs.adj = np.zeros_like(cs.arr)
        buf = np.empty_like(sv.sv)
        qk.block_bwd(out.adj, sv.sv, cs.arr, thetas, axis,
                     buf, cs.adj, tape.pgrad[theta_slice])
        sv.adj = buf if sv.adj is None else sv.adj + buf

    tape._push(bwd)
    return out


def expect_on_tape(tape: Tape, sv: SvVar, n_q: int) -> JetVar:
    """Per-qubit Z expectations as an (n_q, B) jet node."""
    tape._own(sv)
    _, nc, _, b_n = sv.sv.shape
    e = np.empty((nc, n_q, b_n))
    qk.expect_fwd(sv.sv, e)
    out = JetVar(tape, e[0],
                 e[1] if nc == 4 else None,
                 e[2] if nc == 4 else None,
                 e[3] if nc == 4 else None)

    def bwd():
        comps = (out.adj_v, out.adj_dt, out.adj_dx, out.adj_dxx)[:nc]
        if all(c is None for c in comps):
            return
        adj_e = np.zeros((nc, n_q, b_n))
        for k, c in enumerate(comps):
            if c is not None:
                adj_e[k] = c
        if sv.adj is None:
            sv.adj = np.zeros_like(sv.sv)
        qk.expect_bwd(adj_e, sv.sv, sv.adj)

    tape._push(bwd)
    return out


def circuit_on_tape(tape: Tape, layout: CircuitLayout, encoder_out: JetVar,
                    theta_offset: int) -> JetVar:
    """Record the full circuit: encoder_out is the (n_q, B) jet of encoding
    angles, theta_offset the start of the circuit angles in the parameter
    vector.  Returns the (n_q, B) expectation jet."""
    if encoder_out.v.shape[0] != layout.n_q:
        raise StructuralError("encoder output width must equal the qubit count")
    b_n = encoder_out.v.shape[1]
    with_jets = encoder_out.dt is not None
    cs = encoding_coeffs(tape, encoder_out)
    sv = ground_state(tape, b_n, layout.n_q, with_jets)
    per_block = layout.n_q * layout.rotations_per_qubit
    for block in range(layout.depth):
        sl = slice(theta_offset + block * per_block,
                   theta_offset + (block + 1) * per_block)
        sv = block_on_tape(tape, sv, cs, sl, layout.encoding_axis(block))
    return expect_on_tape(tape, sv, layout.n_q)
