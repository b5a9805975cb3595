"""Time integration of the interaction dynamics to steady state.

A fixed-step classical Runge-Kutta scheme is used with

    dt = 0.5 / (eta * rho_total),

half the inverse of the fastest loss rate.  The right-hand side is quadratic
with Lipschitz constant of order eta*rho, so this bound keeps the scheme
stable and, for forward-Euler substeps, positivity-preserving; a fixed step
also makes runs bit-reproducible.  Convergence is declared on the max-norm
of the right-hand side itself (invariant under dt, directly measures how far
from equilibrium the state is), not on state increments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelParams, NumericsParams, admissible, occupancy
from .kinetics import MixtureState, make_rhs
from .tables import build_game_tables

SAFETY_FACTOR = 0.5
MASS_DRIFT_TOL = 1e-9


class NumericalFailureError(RuntimeError):
    """Raised when the state leaves the representable range (NaN/Inf)."""


@dataclass(frozen=True)
class RelaxationResult:
    """Outcome of one relaxation run.

    converged requires both the residual criterion and per-species mass
    conservation; a run whose mass drifted by more than MASS_DRIFT_TOL is
    flagged as failed even if the residual is small (the vacuum state of the
    non-conserving formulation is such a false equilibrium).
    """

    final_state: MixtureState
    converged: bool
    residual: float
    t_final: float
    steps: int
    mass_drift: tuple[float, ...]
    residual_history: np.ndarray | None = None
    trajectory: list[tuple[float, MixtureState]] | None = None


def stability_timestep(eta: float, rho_total: float, safety: float = SAFETY_FACTOR) -> float:
    """Largest time step with an explicit-Euler positivity margin."""
    if rho_total <= 0:
        raise ValueError(f"rho_total must be positive, got {rho_total}")
    return safety / (eta * rho_total)


def step(state: MixtureState, dt: float, rhs) -> MixtureState:
    """One classical fourth-order Runge-Kutta step.

    rhs maps the stacked distribution vector to its time derivative.
    """
    sizes = tuple(f.size for f in state.distributions)
    flat = _rk4(state.stacked(), dt, rhs)
    if not np.all(np.isfinite(flat)):
        raise NumericalFailureError("non-finite state after time step")
    return MixtureState.from_stacked(flat, sizes)


def _rk4(flat: np.ndarray, dt: float, rhs) -> np.ndarray:
    half = 0.5 * dt
    k1 = rhs(flat)
    k2 = rhs(flat + half * k1)
    k3 = rhs(flat + half * k2)
    k4 = rhs(flat + dt * k3)
    return flat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def relax_to_equilibrium(initial: MixtureState, params: ModelParams,
                         numerics: NumericsParams,
                         formulation: str = "well-balanced",
                         record_residuals: bool = False,
                         trajectory_every: int = 0) -> RelaxationResult:
    """Integrate from `initial` until the residual drops below tolerance.

    Interaction tables are built once at the initial occupancy (the dynamics
    conserve every per-species mass, so the occupancy never changes).
    Non-convergence within t_max is reported in the result, not raised:
    sweeps must run to completion.

    formulation: "well-balanced" (loss from the instantaneous mass) or
    "naive" (loss frozen at the initial densities; single population only).
    """
    if initial.n_populations != len(params.populations):
        raise ValueError(f"state has {initial.n_populations} populations, "
                         f"model has {len(params.populations)}")
    masses0 = initial.densities
    if not admissible(masses0, params.populations):
        raise ValueError(f"initial mixture not admissible: densities {masses0}")

    s = occupancy(masses0, params.populations)
    tables = build_game_tables(params, s)
    if formulation == "well-balanced":
        rhs = make_rhs(tables, params.eta)
    elif formulation == "naive":
        if initial.n_populations != 1:
            raise ValueError("the naive formulation is a single-population demonstration")
        rhs = make_rhs(tables, params.eta, frozen_masses=masses0)
    else:
        raise ValueError(f"unknown formulation {formulation!r}")

    rho_total = initial.total_density
    if numerics.dt is not None:
        dt = numerics.dt
    elif rho_total > 0:
        dt = stability_timestep(params.eta, rho_total)
    else:
        dt = numerics.t_max  # vacuum: residual is zero, no step ever taken

    sizes = tables.sizes
    slices = tables.slices()
    flat = initial.stacked()
    tol, t_max = numerics.tol, numerics.t_max
    residuals = [] if record_residuals else None
    trajectory = [] if trajectory_every else None

    t = 0.0
    steps = 0
    converged = False
    while True:
        k1 = rhs(flat)
        residual = float(np.max(np.abs(k1))) if k1.size else 0.0
        if residuals is not None:
            residuals.append(residual)
        if trajectory is not None and steps % trajectory_every == 0:
            trajectory.append((t, MixtureState.from_stacked(flat, sizes)))
        if not np.isfinite(residual):
            raise NumericalFailureError(f"non-finite residual at t={t}")
        if residual <= tol:
            converged = True
            break
        if t >= t_max:
            break
        half = 0.5 * dt
        k2 = rhs(flat + half * k1)
        k3 = rhs(flat + half * k2)
        k4 = rhs(flat + dt * k3)
        flat = flat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        steps += 1
        t = steps * dt

    final = MixtureState.from_stacked(flat, sizes)
    drift = tuple(abs(float(flat[sl].sum()) - m0) for sl, m0 in zip(slices, masses0))
    if any(d > MASS_DRIFT_TOL for d in drift):
        converged = False
    if trajectory is not None and (not trajectory or trajectory[-1][0] != t):
        trajectory.append((t, final))

    return RelaxationResult(
        final_state=final,
        converged=converged,
        residual=residual,
        t_final=t,
        steps=steps,
        mass_drift=drift,
        residual_history=np.array(residuals) if residuals is not None else None,
        trajectory=trajectory,
    )
