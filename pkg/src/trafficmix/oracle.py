"""Closed-form free-phase equilibria and phase-transition constants.

Under optimal driving conditions (alpha = 1, so nobody brakes spontaneously)
write R = 1 - P for the probability of *not* gaining the top outcome of an
interaction.  As long as R <= 1/2 the stable equilibrium empties every speed
class below the trucks' top class: trucks all travel at their maximum speed
and the car distribution over the remaining classes solves a chain of
quadratic equations, one per class, closed by mass conservation.  These
formulas are exact and serve as ground truth for the time integrator.

The derivation breaks down for R > 1/2 (the congested phase), where
equilibria are only available numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SpeedLattice


@dataclass(frozen=True, eq=False)
class FreePhaseEquilibrium:
    """Free-phase equilibrium of a car/truck mixture.

    valid is False when R > 1/2 (outside the free phase); the distributions
    and flux are then None.  When valid: the truck distribution has all mass
    in its top class, the car distribution vanishes below that class, and
    flux is the total equilibrium flux [veh/h].
    """

    f_car: np.ndarray | None
    f_truck: np.ndarray | None
    valid: bool
    flux: float | None


def critical_space(gamma: float) -> float:
    """Road occupancy of the free/congested transition: s_c = (1/2)**(1/gamma).

    With the acceleration probability P = 1 - s**gamma, the transition sits
    where R = s**gamma crosses 1/2.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return 0.5 ** (1.0 / gamma)


def max_flux(gamma: float, v_max: float, rho_max_cars: float) -> float:
    """Road capacity: flux of a cars-only road at critical occupancy.

    At s = s_c with no trucks, all cars travel at v_max and the car density
    is rho_max_cars * s_c, hence q_max = v_max * rho_max_cars / 2**(1/gamma).
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if v_max < 0 or rho_max_cars < 0:
        raise ValueError("v_max and rho_max_cars must be nonnegative")
    return v_max * rho_max_cars * critical_space(gamma)


def _positive_root(r: float, b: float, c: float) -> float:
    """Positive root of -r*x**2 + b*x + c = 0 with r > 0, c >= 0.

    The discriminant b**2 + 4*r*c is nonnegative by construction; assert
    rather than clamp.  Picks the cancellation-free expression depending on
    the sign of b.
    """
    delta = b * b + 4.0 * r * c
    assert delta >= 0.0, f"negative discriminant {delta} (b={b}, c={c}, r={r})"
    sqrt_delta = math.sqrt(delta)
    if b > 0.0:
        return (b + sqrt_delta) / (2.0 * r)
    denom = sqrt_delta - b
    if denom == 0.0:  # b == 0 and c == 0
        return 0.0
    return 2.0 * c / denom


def free_phase_equilibrium(rho_car: float, rho_truck: float,
                           lattices: tuple[SpeedLattice, SpeedLattice],
                           r_value: float) -> FreePhaseEquilibrium:
    """Exact equilibrium of the two-population mixture for R <= 1/2.

    Arguments:
        rho_car, rho_truck: species densities [veh/km].
        lattices: (car lattice, truck lattice), trucks nested in cars.
        r_value: R = 1 - P at the mixture's occupancy (R = s**gamma when
            alpha = 1).

    Returns valid=False without computing anything when R > 1/2.
    """
    if not 0.0 <= r_value <= 1.0:
        raise ValueError(f"R must lie in [0, 1], got {r_value}")
    if rho_car < 0 or rho_truck < 0:
        raise ValueError(f"densities must be nonnegative, got ({rho_car}, {rho_truck})")
    car_lattice, truck_lattice = lattices
    if not truck_lattice.is_prefix_of(car_lattice):
        raise ValueError("truck lattice must be a prefix of the car lattice")
    if r_value > 0.5:
        return FreePhaseEquilibrium(f_car=None, f_truck=None, valid=False, flux=None)

    n_car, n_truck = car_lattice.n, truck_lattice.n
    f_truck = np.zeros(n_truck)
    f_truck[-1] = rho_truck
    f_car = np.zeros(n_car)

    if r_value == 0.0:
        # Empty-road limit: every interaction accelerates, all mass ends up
        # in the top class of its own lattice.
        f_car[-1] = rho_car
    else:
        r = r_value
        rho = rho_car + rho_truck
        top = n_truck - 1  # index of the trucks' top class on the car lattice
        f_car[top] = _positive_root(
            r, (2.0 * r - 1.0) * rho_car - rho_truck, r * rho_car * rho_truck
        )
        for j in range(top + 1, n_car - 1):
            partial = float(f_car[top:j].sum())
            b = (1.0 - 3.0 * r) * partial + (2.0 * r - 1.0) * rho_car - r * rho_truck
            if j == top + 1:
                c_j = f_car[top] * rho
            else:
                c_j = f_car[j - 1] * (rho_car - float(f_car[top:j - 1].sum()))
            f_car[j] = _positive_root(r, b, (1.0 - r) * c_j)
        f_car[-1] = rho_car - float(f_car[:-1].sum())

    flux = rho_truck * truck_lattice.v_max + float(
        np.dot(car_lattice.speeds, f_car)
    )
    return FreePhaseEquilibrium(f_car=f_car, f_truck=f_truck, valid=True, flux=flux)


def single_pop_equilibrium_two_speeds(rho: float, rho_max: float) -> tuple[float, float]:
    """Equilibrium of a single population with two speed classes (alpha = 1).

    With R = rho/rho_max: below half occupancy everything moves, (0, rho);
    above it the standing class fills to (2R-1)*rho/R.  The two branches
    join continuously at R = 1/2.
    """
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    if rho_max <= 0:
        raise ValueError(f"rho_max must be positive, got {rho_max}")
    if rho > rho_max:
        raise ValueError(f"rho={rho} exceeds rho_max={rho_max}")
    r = rho / rho_max
    if r <= 0.5:
        return (0.0, rho)
    f1 = (2.0 * r - 1.0) * rho / r
    return (f1, rho - f1)
