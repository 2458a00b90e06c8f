"""Finite-difference reference solutions for the MSE evaluation.

IMEX time stepping: Crank-Nicolson on the diffusion term (constant
tridiagonal solve per step), two-step Adams-Bashforth on the central-difference
advection term and the forcing.  Dirichlet walls are pinned exactly at every
step.  Solutions are cached on disk keyed by a hash of the (problem, solver)
descriptor.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError, StructuralError
from .networks import ModelHandle, forward_values
from .pde import PdeProblem

CACHE_FORMAT = "pinnlab-reference-v1"


@dataclass(frozen=True)
class SolverConfig:
    nx: int = 513
    dt: float = 1e-4
    save_every: int = 10

    def __post_init__(self):
        if self.nx < 3 or self.nx % 2 == 0:
            raise ConfigurationError("nx must be odd and >= 3 (x = midpoint on grid)")
        if self.dt <= 0 or self.save_every < 1:
            raise ConfigurationError("need dt > 0 and save_every >= 1")


@dataclass
class ReferenceSolution:
    t_grid: np.ndarray
    x_grid: np.ndarray
    u: np.ndarray  # (nt, nx)
    descriptor: dict

    def __post_init__(self):
        self._grid_cache: dict[int, np.ndarray] = {}

    def sample(self, t: float, x: float) -> float:
        """Bilinear interpolation at one point; raises outside the domain."""
        return float(self.sample_many(np.asarray([t]), np.asarray([x]))[0])

    def sample_many(self, ts: np.ndarray, xs: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=np.float64).ravel()
        xs = np.asarray(xs, dtype=np.float64).ravel()
        tg, xg = self.t_grid, self.x_grid
        eps = 1e-12
        if (ts < tg[0] - eps).any() or (ts > tg[-1] + eps).any() \
                or (xs < xg[0] - eps).any() or (xs > xg[-1] + eps).any():
            raise StructuralError("sample point outside the solved domain")
        dt = tg[1] - tg[0]
        dx = xg[1] - xg[0]
        it = np.clip(((ts - tg[0]) / dt).astype(int), 0, len(tg) - 2)
        ix = np.clip(((xs - xg[0]) / dx).astype(int), 0, len(xg) - 2)
        ft = (ts - tg[it]) / dt
        fx = (xs - xg[ix]) / dx
        u = self.u
        return ((1 - ft) * (1 - fx) * u[it, ix] + (1 - ft) * fx * u[it, ix + 1]
                + ft * (1 - fx) * u[it + 1, ix] + ft * fx * u[it + 1, ix + 1])

    def eval_grid(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Uniform n x n evaluation grid (tt, xx, u_ref), cached per size."""
        if n not in self._grid_cache:
            tt, xx = np.meshgrid(np.linspace(self.t_grid[0], self.t_grid[-1], n),
                                 np.linspace(self.x_grid[0], self.x_grid[-1], n),
                                 indexing="ij")
            self._grid_cache[n] = (tt, xx, self.sample_many(tt, xx).reshape(n, n))
        return self._grid_cache[n]


def _descriptor(problem: PdeProblem, config: SolverConfig) -> dict:
    return {
        "format": CACHE_FORMAT,
        "problem": {
            "lin": problem.lin,
            "nonlin": problem.nonlin,
            "family": problem.family.name,
            "c": problem.family.c,
            "t_max": problem.domain.t_max,
            "x_lo": problem.domain.x_lo,
            "x_hi": problem.domain.x_hi,
        },
        "solver": {"nx": config.nx, "dt": config.dt, "save_every": config.save_every},
    }


def solve(problem: PdeProblem, config: SolverConfig = SolverConfig()) -> ReferenceSolution:
    """March u_t = L u_xx - N u u_x + F(t) to t_max on the configured grid."""
    dom = problem.domain
    nx = config.nx
    x = np.linspace(dom.x_lo, dom.x_hi, nx)
    dx = x[1] - x[0]
    dt = config.dt
    n_steps = int(round(dom.t_max / dt))
    if abs(n_steps * dt - dom.t_max) > 1e-9 * dom.t_max:
        raise ConfigurationError("dt must divide the time horizon")

    lin, nonlin = problem.lin, problem.nonlin
    fam = problem.family
    bc_lo, bc_hi = fam.boundary_values(dom)
    u = fam.initial_condition(x).copy()
    u[0], u[-1] = bc_lo, bc_hi

    r = lin * dt / (dx * dx)
    ab = np.zeros((3, nx))
    ab[0, 2:] = -0.5 * r
    ab[1, :] = 1.0 + r
    ab[2, :-2] = -0.5 * r
    ab[1, 0] = ab[1, -1] = 1.0
    ab[0, 1] = ab[2, -2] = 0.0

    def advective(un: np.ndarray, t: float) -> np.ndarray:
        a = np.zeros_like(un)
        a[1:-1] = -nonlin * un[1:-1] * (un[2:] - un[:-2]) / (2.0 * dx) + fam.forcing(t)
        return a

    saved = [u.copy()]
    saved_t = [0.0]
    a_prev = advective(u, 0.0)
    max_speed_cap = dx / dt
    for step in range(1, n_steps + 1):
        t_n = (step - 1) * dt
        a_now = advective(u, t_n)
        rhs = u.copy()
        rhs[1:-1] += 0.5 * r * (u[2:] - 2.0 * u[1:-1] + u[:-2]) \
            + dt * (1.5 * a_now[1:-1] - 0.5 * a_prev[1:-1])
        rhs[0], rhs[-1] = bc_lo, bc_hi
        u = solve_banded((1, 1), ab, rhs)
        u[0], u[-1] = bc_lo, bc_hi
        a_prev = a_now
        if nonlin != 0.0:
            speed = float(np.max(np.abs(u)))
            if speed > max_speed_cap:
                raise ConfigurationError(
                    f"advective stability monitor tripped at t={step * dt:.4f} "
                    f"(|u|={speed:.3g} > dx/dt={max_speed_cap:.3g}); shrink dt")
        if step % config.save_every == 0 or step == n_steps:
            saved.append(u.copy())
            saved_t.append(step * dt)

    return ReferenceSolution(np.array(saved_t), x, np.array(saved),
                             _descriptor(problem, config))


# --------------------------------------------------------------------------
# cache


def _cache_path(cache_dir, descriptor: dict) -> Path:
    blob = json.dumps(descriptor, sort_keys=True)
    key = hashlib.sha256(blob.encode()).hexdigest()[:16]
    return Path(cache_dir) / f"reference_{key}.npz"


def solve_cached(problem: PdeProblem, config: SolverConfig = SolverConfig(),
                 cache_dir=None) -> ReferenceSolution:
    """Disk-cached solve; concurrent readers safe, writers keyed and atomic."""
    if cache_dir is None:
        return solve(problem, config)
    desc = _descriptor(problem, config)
    path = _cache_path(cache_dir, desc)
    if path.exists():
        with np.load(path, allow_pickle=False) as data:
            stored = json.loads(str(data["descriptor"]))
            if stored != desc:
                raise ConfigurationError(f"cache collision at {path}")
            return ReferenceSolution(data["t"], data["x"], data["u"], stored)
    sol = solve(problem, config)
    path.parent.mkdir(parents=True, exist_ok=True)
    # the suffix must stay ".npz" or numpy would append one to the temp name
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp.npz")
    os.close(fd)
    try:
        np.savez(tmp, t=sol.t_grid, x=sol.x_grid, u=sol.u,
                 descriptor=json.dumps(desc, sort_keys=True))
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return sol


def mse(model: ModelHandle, solution: ReferenceSolution, grid: int = 101) -> float:
    """Mean squared error of the network against the reference on a fixed
    uniform grid over the full domain."""
    tt, xx, u_ref = solution.eval_grid(grid)
    f = forward_values(model, tt.ravel(), xx.ravel())
    return float(np.mean((f - u_ref.ravel()) ** 2))
