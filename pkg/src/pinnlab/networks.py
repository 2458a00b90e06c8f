"""Dense and hybrid (encoder -> circuit -> decoder) PINN construction.

Parameter budgeting follows the target-count matching rules: dense nets get a
uniform hidden width minimizing |count - target|, hybrids get a circuit depth
d = round((target - classical)/ (n_q * r)).  Parameter vectors are flat; each
spec knows the slice layout of its weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Jet2, JetVar, ParamVector, Tape
from .errors import ConfigurationError, StructuralError
from .qsim import CircuitLayout, circuit_on_tape

N_QUBITS = 3
ROTS_PER_QUBIT = 2
CODER_WIDTH = 6


@dataclass(frozen=True)
class DenseSpec:
    """Fully connected tanh network with linear output and biases everywhere."""

    widths: tuple[int, ...]

    def __post_init__(self):
        if len(self.widths) < 2 or any(w < 1 for w in self.widths):
            raise ConfigurationError(f"bad layer widths {self.widths}")

    @property
    def param_count(self) -> int:
        return sum((a + 1) * b for a, b in zip(self.widths[:-1], self.widths[1:]))

    def layer_slices(self, offset: int = 0):
        """Yields (w_slice, b_slice, n_in, n_out) per layer."""
        out = []
        for a, b in zip(self.widths[:-1], self.widths[1:]):
            w = slice(offset, offset + a * b)
            offset += a * b
            bs = slice(offset, offset + b)
            offset += b
            out.append((w, bs, a, b))
        return out


@dataclass(frozen=True)
class HybridSpec:
    """Classical encoder, re-uploading circuit, classical decoder."""

    encoder: DenseSpec
    layout: CircuitLayout
    decoder: DenseSpec

    def __post_init__(self):
        if self.encoder.widths[-1] != self.layout.n_q:
            raise ConfigurationError("encoder output width must equal qubit count")
        if self.decoder.widths[0] != self.layout.n_q:
            raise ConfigurationError("decoder input width must equal qubit count")

    @property
    def param_count(self) -> int:
        return (self.encoder.param_count + self.layout.n_angles
                + self.decoder.param_count)

    @property
    def theta_offset(self) -> int:
        return self.encoder.param_count

    @property
    def decoder_offset(self) -> int:
        return self.encoder.param_count + self.layout.n_angles


def count_params(spec) -> int:
    return spec.param_count


def plan_cpinn(target: int, depth: int) -> DenseSpec:
    """Uniform-width dense net of the given hidden depth closest to target."""
    if depth < 1:
        raise ConfigurationError("a 2->1 affine map cannot approach the targets; "
                                 "depth must be >= 1")
    best = None
    w = 1
    while True:
        spec = DenseSpec((2,) + (w,) * depth + (1,))
        diff = abs(spec.param_count - target)
        if best is None or diff < best[0]:  # ties keep the smaller width
            best = (diff, spec)
        if spec.param_count > target:
            break
        w += 1
    return best[1]


def _coder_spec(n_in: int, n_out: int, depth_c: int) -> DenseSpec:
    return DenseSpec((n_in,) + (CODER_WIDTH,) * depth_c + (n_out,))


def plan_qpinn(target: int, depth_c: int, n_q: int = N_QUBITS) -> HybridSpec:
    """Hybrid spec whose circuit depth matches the parameter target."""
    if depth_c not in (0, 1):
        raise ConfigurationError("classical coder depth must be 0 or 1")
    encoder = _coder_spec(2, n_q, depth_c)
    decoder = _coder_spec(n_q, 1, depth_c)
    classical = encoder.param_count + decoder.param_count
    remainder = target - classical
    if remainder <= 0:
        raise ConfigurationError(
            f"target {target} leaves no parameters for the circuit "
            f"(classical part already uses {classical})")
    per_block = n_q * ROTS_PER_QUBIT
    d = max(1, int(remainder / per_block + 0.5))
    return HybridSpec(encoder, CircuitLayout(n_q=n_q, depth=d), decoder)


@dataclass
class ModelHandle:
    """A spec bound to its parameter vector plus accounting metadata."""

    kind: str  # "cpinn" | "qpinn"
    spec: DenseSpec | HybridSpec
    params: ParamVector
    target: int
    seed: int

    def __post_init__(self):
        if len(self.params) != self.spec.param_count:
            raise StructuralError("parameter vector length does not match spec")

    @property
    def actual(self) -> int:
        return self.spec.param_count


def _init_dense(rng: np.random.Generator, spec: DenseSpec, out: list) -> None:
    for a, b in zip(spec.widths[:-1], spec.widths[1:]):
        lim = np.sqrt(6.0 / (a + b))
        out.append(rng.uniform(-lim, lim, size=a * b))
        out.append(np.zeros(b))


def init_params(spec, seed: int) -> ParamVector:
    """Glorot-uniform dense weights, zero biases, uniform(0, 2pi) angles."""
    rng = np.random.default_rng(seed)
    parts: list[np.ndarray] = []
    if isinstance(spec, DenseSpec):
        _init_dense(rng, spec, parts)
    else:
        _init_dense(rng, spec.encoder, parts)
        parts.append(rng.uniform(0.0, 2.0 * np.pi, size=spec.layout.n_angles))
        _init_dense(rng, spec.decoder, parts)
    return ParamVector(np.concatenate(parts))


def build_model(kind: str, target: int, arch: int, seed: int) -> ModelHandle:
    """arch = hidden depth for cpinn, coder depth (0|1) for qpinn."""
    if kind == "cpinn":
        spec = plan_cpinn(target, arch)
    elif kind == "qpinn":
        spec = plan_qpinn(target, arch)
    else:
        raise ConfigurationError(f"unknown model kind {kind!r}")
    return ModelHandle(kind, spec, init_params(spec, seed), target, seed)


# --------------------------------------------------------------------------
# evaluation


def _dense_on_tape(tape: Tape, spec: DenseSpec, x: JetVar, offset: int) -> JetVar:
    layers = spec.layer_slices(offset)
    h = x
    for k, (w_sl, b_sl, n_in, n_out) in enumerate(layers):
        h = tape.affine(h, w_sl, b_sl, n_in, n_out)
        if k < len(layers) - 1:
            h = tape.tanh(h)
    return h


def model_on_tape(tape: Tape, model: ModelHandle, ts: np.ndarray, xs: np.ndarray,
                  with_jets: bool = True) -> JetVar:
    """Record the network evaluation at the given points; returns the output
    as a jet node with (B,) components."""
    x = tape.inputs(ts, xs, with_jets)
    if isinstance(model.spec, DenseSpec):
        u = _dense_on_tape(tape, model.spec, x, 0)
    else:
        spec = model.spec
        enc = _dense_on_tape(tape, spec.encoder, x, 0)
        e = circuit_on_tape(tape, spec.layout, enc, spec.theta_offset)
        u = _dense_on_tape(tape, spec.decoder, e, spec.decoder_offset)
    return tape.row(u, 0)


def forward(model: ModelHandle, t: Jet2, x: Jet2) -> Jet2:
    """Evaluate the network on a single (t, x) jet pair."""
    tape = Tape(model.params)
    arr = lambda c: np.atleast_1d(np.asarray(c, dtype=np.float64))
    tv, xv = arr(t.v), arr(x.v)
    v = np.stack([tv, xv])
    dt = np.stack([arr(0.0 if t.dt is None else t.dt) * np.ones_like(tv),
                   arr(0.0 if x.dt is None else x.dt) * np.ones_like(xv)])
    dx = np.stack([arr(0.0 if t.dx is None else t.dx) * np.ones_like(tv),
                   arr(0.0 if x.dx is None else x.dx) * np.ones_like(xv)])
    dxx = np.stack([arr(0.0 if t.dxx is None else t.dxx) * np.ones_like(tv),
                    arr(0.0 if x.dxx is None else x.dxx) * np.ones_like(xv)])
    inp = JetVar(tape, v, dt, dx, dxx)
    if isinstance(model.spec, DenseSpec):
        u = _dense_on_tape(tape, model.spec, inp, 0)
    else:
        spec = model.spec
        enc = _dense_on_tape(tape, spec.encoder, inp, 0)
        e = circuit_on_tape(tape, spec.layout, enc, spec.theta_offset)
        u = _dense_on_tape(tape, spec.decoder, e, spec.decoder_offset)
    out = tape.row(u, 0)
    scal = lambda c: float(np.asarray(c).reshape(-1)[0])
    if np.asarray(t.v).ndim == 0 and np.asarray(x.v).ndim == 0:
        return Jet2(scal(out.v), scal(out.dt), scal(out.dx), scal(out.dxx))
    return Jet2(out.v, out.dt, out.dx, out.dxx)


def forward_values(model: ModelHandle, ts: np.ndarray, xs: np.ndarray,
                   chunk: int = 8192) -> np.ndarray:
    """Value-only batched evaluation (no derivatives, no gradients)."""
    ts = np.asarray(ts, dtype=np.float64).ravel()
    xs = np.asarray(xs, dtype=np.float64).ravel()
    outs = []
    for lo in range(0, ts.size, chunk):
        hi = min(lo + chunk, ts.size)
        tape = Tape(model.params)
        u = model_on_tape(tape, model, ts[lo:hi], xs[lo:hi], with_jets=False)
        outs.append(np.asarray(u.v))
    return np.concatenate(outs) if outs else np.zeros(0)


def hybrid_signals(model: ModelHandle, ts: np.ndarray, xs: np.ndarray):
    """Encoder outputs i_j and circuit outputs o_j at the given points."""
    if not isinstance(model.spec, HybridSpec):
        raise StructuralError("intermediate probes require a hybrid model")
    tape = Tape(model.params)
    x = tape.inputs(np.asarray(ts, dtype=np.float64).ravel(),
                    np.asarray(xs, dtype=np.float64).ravel(), with_jets=False)
    spec = model.spec
    enc = _dense_on_tape(tape, spec.encoder, x, 0)
    e = circuit_on_tape(tape, spec.layout, enc, spec.theta_offset)
    return np.asarray(enc.v).copy(), np.asarray(e.v).copy()


# --------------------------------------------------------------------------
# checkpoints

CHECKPOINT_FORMAT = "pinnlab-checkpoint-v1"


def _spec_to_dict(spec) -> dict:
    if isinstance(spec, DenseSpec):
        return {"type": "dense", "widths": list(spec.widths)}
    return {
        "type": "hybrid",
        "encoder": list(spec.encoder.widths),
        "decoder": list(spec.decoder.widths),
        "n_q": spec.layout.n_q,
        "depth": spec.layout.depth,
        "rotations_per_qubit": spec.layout.rotations_per_qubit,
    }


def _spec_from_dict(d: dict):
    if d["type"] == "dense":
        return DenseSpec(tuple(d["widths"]))
    return HybridSpec(
        DenseSpec(tuple(d["encoder"])),
        CircuitLayout(n_q=d["n_q"], depth=d["depth"],
                      rotations_per_qubit=d["rotations_per_qubit"]),
        DenseSpec(tuple(d["decoder"])),
    )


def save_checkpoint(model: ModelHandle, path, epoch: int) -> None:
    record = {
        "format": CHECKPOINT_FORMAT,
        "kind": model.kind,
        "target": model.target,
        "seed": model.seed,
        "epoch": epoch,
        "spec": _spec_to_dict(model.spec),
        "values": model.params.values.tolist(),
    }
    Path(path).write_text(json.dumps(record))


def load_checkpoint(path) -> tuple[ModelHandle, int]:
    record = json.loads(Path(path).read_text())
    if record.get("format") != CHECKPOINT_FORMAT:
        raise ConfigurationError(f"unrecognized checkpoint format in {path}")
    spec = _spec_from_dict(record["spec"])
    model = ModelHandle(record["kind"], spec,
                        ParamVector(np.array(record["values"], dtype=np.float64)),
                        record["target"], record["seed"])
    return model, record["epoch"]
