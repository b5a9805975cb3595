"""Collision operators and macroscopic moments.

The right-hand sides evaluate, for every speed class j of population p,

    df_j/dt = eta * [ sum of gain terms over (h, k) pairs  -  f_j * (total mass) ]

where the gain collects the self- and cross-interaction tables.  The loss
factor is always the *instantaneous* total mass, never the nominal initial
density: the two are equal analytically, but freezing the density parameter
turns the conserved manifold into an unstable one and round-off then drains
the mass (see rhs_single_naive, kept for demonstrating exactly that).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SpeedLattice
from .tables import GameTables


@dataclass(frozen=True, eq=False)
class MixtureState:
    """Per-population distribution vectors over speed classes [vehicles/km]."""

    distributions: tuple[np.ndarray, ...]

    def __post_init__(self):
        arrays = []
        for i, raw in enumerate(self.distributions):
            f = np.asarray(raw, dtype=float)
            if f.ndim != 1:
                raise ValueError(f"population {i}: distribution must be a vector")
            if not np.all(np.isfinite(f)):
                raise ValueError(f"population {i}: non-finite entries in distribution")
            if np.any(f < -1e-9):
                raise ValueError(f"population {i}: negative entries in distribution")
            if np.any(f < 0):
                # round-off dust from time stepping, not a modelling error
                f = np.where(f < 0, 0.0, f)
            arrays.append(f)
        object.__setattr__(self, "distributions", tuple(arrays))

    @property
    def n_populations(self) -> int:
        return len(self.distributions)

    @property
    def densities(self) -> tuple[float, ...]:
        return tuple(float(f.sum()) for f in self.distributions)

    @property
    def total_density(self) -> float:
        return float(sum(f.sum() for f in self.distributions))

    def stacked(self) -> np.ndarray:
        return np.concatenate(self.distributions)

    @classmethod
    def from_stacked(cls, flat: np.ndarray, sizes) -> "MixtureState":
        parts, start = [], 0
        for n in sizes:
            parts.append(np.array(flat[start:start + n]))
            start += n
        return cls(tuple(parts))

    @classmethod
    def uniform(cls, densities, sizes) -> "MixtureState":
        """Mass spread evenly over the speed classes of each population."""
        return cls(tuple(np.full(n, rho / n) for rho, n in zip(densities, sizes)))


@dataclass(frozen=True)
class Moments:
    """Macroscopic observables: density [veh/km], flux [veh/h], mean speed [km/h].

    Mean speeds of empty populations are NaN, not zero; a zero would read as
    a standstill in speed diagrams.
    """

    rho: tuple[float, ...]
    q: tuple[float, ...]
    u: tuple[float, ...]

    @property
    def rho_total(self) -> float:
        return sum(self.rho)

    @property
    def q_total(self) -> float:
        return sum(self.q)

    @property
    def u_total(self) -> float:
        return self.q_total / self.rho_total if self.rho_total > 0 else float("nan")


def moments(state: MixtureState, lattices) -> Moments:
    """First moments of the distributions against their speed lattices."""
    if len(lattices) != state.n_populations:
        raise ValueError(f"{len(lattices)} lattices for {state.n_populations} populations")
    rho, q, u = [], [], []
    for f, lattice in zip(state.distributions, lattices):
        speeds = lattice.speeds if isinstance(lattice, SpeedLattice) else tuple(lattice)
        if len(speeds) != f.size:
            raise ValueError(f"distribution of size {f.size} on lattice of size {len(speeds)}")
        r = float(f.sum())
        flux = float(np.dot(speeds, f))
        rho.append(r)
        q.append(flux)
        u.append(flux / r if r > 0 else float("nan"))
    return Moments(rho=tuple(rho), q=tuple(q), u=tuple(u))


def _collision_rhs(flat: np.ndarray, kernel: np.ndarray, slices, eta: float,
                   loss_masses: np.ndarray | None = None) -> np.ndarray:
    """Gain minus loss on the stacked state.

    loss_masses: frozen per-population masses for the non-conservative
    formulation; None selects the instantaneous (mass-conserving) loss.
    """
    gain = kernel @ np.outer(flat, flat).ravel()
    if loss_masses is None:
        rhs = eta * (gain - flat * flat.sum())
        # The gain/loss cancellation is exact in real arithmetic; remove the
        # floating-point residue per species (proportionally, so vacuum and
        # empty classes stay exact fixed points).
        for sl in slices:
            block = rhs[sl]
            mass = flat[sl].sum()
            if mass > 0.0:
                block -= block.sum() * (flat[sl] / mass)
        return rhs
    return eta * (gain - flat * float(loss_masses.sum()))


def rhs_single(f: np.ndarray, tables: GameTables, eta: float = 1.0) -> np.ndarray:
    """Time derivative of a single-population distribution."""
    if tables.n_populations != 1:
        raise ValueError("rhs_single requires single-population tables")
    f = np.asarray(f, dtype=float)
    if f.size != tables.sizes[0]:
        raise ValueError(f"distribution of size {f.size} against tables of size {tables.sizes[0]}")
    return _collision_rhs(f, tables.gain_kernel(), tables.slices(), eta)


def rhs_single_naive(f: np.ndarray, tables: GameTables, eta: float,
                     rho_param: float) -> np.ndarray:
    """Single-population derivative with the loss frozen at the nominal density.

    Analytically identical to rhs_single on the manifold sum(f) == rho_param,
    but the total mass y then obeys dy/dt = eta*y*(y - rho_param) whose
    conserving equilibrium is unstable: any perturbation decays to vacuum.
    Provided solely to reproduce that instability.
    """
    if tables.n_populations != 1:
        raise ValueError("rhs_single_naive requires single-population tables")
    f = np.asarray(f, dtype=float)
    if f.size != tables.sizes[0]:
        raise ValueError(f"distribution of size {f.size} against tables of size {tables.sizes[0]}")
    return _collision_rhs(f, tables.gain_kernel(), tables.slices(), eta,
                          loss_masses=np.array([rho_param]))


def rhs_two_population(state: MixtureState, tables: GameTables,
                       eta: float = 1.0) -> tuple[np.ndarray, ...]:
    """Per-population time derivatives of a two-population mixture."""
    if tables.n_populations != state.n_populations:
        raise ValueError(f"state has {state.n_populations} populations, "
                         f"tables have {tables.n_populations}")
    for f, n in zip(state.distributions, tables.sizes):
        if f.size != n:
            raise ValueError(f"distribution of size {f.size} against lattice of size {n}")
    flat = state.stacked()
    rhs = _collision_rhs(flat, tables.gain_kernel(), tables.slices(), eta)
    return tuple(rhs[sl] for sl in tables.slices())


def make_rhs(tables: GameTables, eta: float,
             frozen_masses: tuple[float, ...] | None = None):
    """Stacked-state derivative function for the integrator.

    With frozen_masses the non-conservative loss is used (demonstration
    only); otherwise the mass-conserving formulation.
    """
    kernel = tables.gain_kernel()
    slices = tables.slices()
    loss = None if frozen_masses is None else np.asarray(frozen_masses, dtype=float)

    def rhs(flat: np.ndarray) -> np.ndarray:
        return _collision_rhs(flat, kernel, slices, eta, loss_masses=loss)

    return rhs
