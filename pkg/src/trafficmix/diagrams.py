"""Fundamental-diagram datasets: deterministic and random mixture sweeps.

A sweep walks a grid of road occupancies s, picks one or more density pairs
(rho_car, rho_truck) realising each s, relaxes every pair to equilibrium and
records one DiagramPoint per pair.  Points are embarrassingly parallel;
results are sorted by (s, sample) before returning so output files do not
depend on worker scheduling.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, field, replace

import numpy as np

from .config import (
    ModelParams,
    NumericsParams,
    PopulationSpec,
    SpeedLattice,
    occupancy,
)
from .integrator import NumericalFailureError, relax_to_equilibrium
from .kinetics import MixtureState, moments

SWEEP_MODES = ("table2", "random", "single-pop", "ablation-speeds",
               "ablation-lengths", "macroscopic")

# Mixture archetypes: fraction of the occupied space taken by each class.
TABLE2_COMBOS = (
    ("cars-heavy", 2.0 / 3.0),
    ("even", 1.0 / 2.0),
    ("trucks-heavy", 1.0 / 3.0),
)


@dataclass(frozen=True)
class DiagramPoint:
    """One equilibrium observation of a sweep."""

    s: float
    rho_c: float
    rho_t: float
    rho_total: float
    q_c: float
    q_t: float
    q_total: float
    u_c: float
    u_t: float
    u_total: float
    converged: bool
    residual: float
    t_final: float
    sample_id: int
    combo_label: str


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep: mode, occupancy grid, sampling, and model overrides.

    s_values None selects the uniform grid with numerics.s_steps intervals
    on [0, 1]; samples_per_s / seed None fall back to the numerics values.
    gamma / alpha override the model parameters when given.
    """

    mode: str
    s_values: tuple[float, ...] | None = None
    samples_per_s: int | None = None
    seed: int | None = None
    gamma: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.mode not in SWEEP_MODES:
            raise ValueError(f"unknown sweep mode {self.mode!r}; expected one of {SWEEP_MODES}")
        if self.s_values is not None:
            vals = tuple(float(s) for s in self.s_values)
            if any(not 0.0 <= s <= 1.0 for s in vals):
                raise ValueError("occupancy grid must lie within [0, 1]")
            object.__setattr__(self, "s_values", vals)


def table2_mixtures(s: float, lengths: tuple[float, float]) -> list[tuple[str, float, float]]:
    """Three deterministic pairs realising occupancy s.

    The occupied space is split between cars and trucks as 2:1 (cars-heavy),
    1:1 (even) and 1:2 (trucks-heavy); each pair returns (label, rho_car,
    rho_truck) with rho_car*l_car + rho_truck*l_truck == s.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"occupancy s must lie in [0, 1], got {s}")
    l_car, l_truck = lengths
    return [
        (label, car_share * s / l_car, (1.0 - car_share) * s / l_truck)
        for label, car_share in TABLE2_COMBOS
    ]


def split_mixture(s: float, theta: float, lengths: tuple[float, float]) -> tuple[float, float]:
    """Density pair giving occupancy s with a car share theta of the space."""
    l_car, l_truck = lengths
    return (theta * s / l_car, (1.0 - theta) * s / l_truck)


def random_mixtures(s: float, count: int, seed,
                    lengths: tuple[float, float] = (0.004, 0.012)) -> list[tuple[float, float]]:
    """Uniformly random space splits at fixed occupancy s.

    Each sample draws theta ~ U[0, 1] for the cars' share of the occupied
    space and maps it through split_mixture.  Deterministic given the seed
    (an int or a numpy SeedSequence).  Lengths default to the reference
    4 m / 12 m car/truck geometry.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [split_mixture(s, theta, lengths) for theta in _random_thetas(count, seed)]


def _random_thetas(count: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.random(count)


def macroscopic_flux(rho_1: float, rho_2: float, lengths: tuple[float, float],
                     v_max_pair: tuple[float, float]) -> tuple[float, float, float]:
    """Per-class and total flux of the two-class aggregate (non-kinetic) model.

    Every class moves at its free speed scaled by the unoccupied space:
    F_p = rho_p * (1 - s) * V_p.  Unlike the kinetic equilibrium flux this
    varies smoothly across every occupancy, with no phase transition.
    """
    s = rho_1 * lengths[0] + rho_2 * lengths[1]
    if s > 1.0 + 1e-12:
        raise ValueError(f"mixture over-packs the road: s = {s}")
    f1 = rho_1 * (1.0 - s) * v_max_pair[0]
    f2 = rho_2 * (1.0 - s) * v_max_pair[1]
    return (f1, f2, f1 + f2)


def ablation_params(params: ModelParams, mode: str) -> ModelParams:
    """Population overrides for the one-characteristic-at-a-time studies.

    ablation-speeds: both classes get the cars' length; the lattices become
    {0, 0.5, 0.8, 1}*V_max for the fast class and its 3-point prefix for the
    slow one (fast and slow drivers in identical vehicles).

    ablation-lengths: lengths stay distinct but both classes share the full
    car lattice (identical driving, different vehicle sizes).
    """
    if len(params.populations) != 2:
        raise ValueError(f"ablations need a two-population model, got {len(params.populations)}")
    fast, slow = params.populations
    if mode == "ablation-speeds":
        v_max = fast.lattice.v_max
        lattice = SpeedLattice((0.0, 0.5 * v_max, 0.8 * v_max, v_max))
        pops = (
            PopulationSpec(fast.name, fast.length, lattice),
            PopulationSpec(slow.name, fast.length, lattice.prefix(3)),
        )
    elif mode == "ablation-lengths":
        pops = (
            PopulationSpec(fast.name, fast.length, fast.lattice),
            PopulationSpec(slow.name, slow.length, fast.lattice),
        )
    else:
        raise ValueError(f"not an ablation mode: {mode!r}")
    return replace(params, populations=pops)


def _effective_params(spec: SweepSpec, params: ModelParams) -> ModelParams:
    if spec.gamma is not None or spec.alpha is not None:
        params = replace(
            params,
            gamma=params.gamma if spec.gamma is None else spec.gamma,
            alpha=params.alpha if spec.alpha is None else spec.alpha,
        )
    if spec.mode in ("ablation-speeds", "ablation-lengths"):
        params = ablation_params(params, spec.mode)
    if spec.mode == "single-pop":
        params = replace(params, populations=(params.populations[0],))
    return params


# One task per diagram point: (s, rho_car, rho_truck, sample_id, label).
_WORKER_STATE: dict = {}


def _init_sweep_worker(params: ModelParams, numerics: NumericsParams):
    _WORKER_STATE["params"] = params
    _WORKER_STATE["numerics"] = numerics


def _point_from_moments(mom, s, converged, residual, t_final, sample_id, label) -> DiagramPoint:
    two = len(mom.rho) == 2
    return DiagramPoint(
        s=s,
        rho_c=mom.rho[0],
        rho_t=mom.rho[1] if two else 0.0,
        rho_total=mom.rho_total,
        q_c=mom.q[0],
        q_t=mom.q[1] if two else 0.0,
        q_total=mom.q_total,
        u_c=mom.u[0],
        u_t=mom.u[1] if two else float("nan"),
        u_total=mom.u_total,
        converged=converged,
        residual=residual,
        t_final=t_final,
        sample_id=sample_id,
        combo_label=label,
    )


def _relax_task(task) -> DiagramPoint:
    params: ModelParams = _WORKER_STATE["params"]
    numerics: NumericsParams = _WORKER_STATE["numerics"]
    _, densities, sample_id, label = task
    sizes = [p.lattice.n for p in params.populations]
    initial = MixtureState.uniform(densities, sizes)
    s = occupancy(densities, params.populations)
    try:
        result = relax_to_equilibrium(initial, params, numerics)
        state, converged = result.final_state, result.converged
        residual, t_final = result.residual, result.t_final
    except NumericalFailureError:
        state, converged, residual, t_final = initial, False, float("inf"), 0.0
    mom = moments(state, params.lattices)
    return _point_from_moments(mom, s, converged, residual, t_final, sample_id, label)


def _macroscopic_point(params: ModelParams, s, densities, sample_id) -> DiagramPoint:
    fast, slow = params.populations
    v_pair = (fast.lattice.v_max, slow.lattice.v_max)
    f1, f2, ftot = macroscopic_flux(densities[0], densities[1],
                                    (fast.length, slow.length), v_pair)
    s_actual = occupancy(densities, params.populations)
    rho_total = densities[0] + densities[1]
    return DiagramPoint(
        s=s_actual,
        rho_c=densities[0],
        rho_t=densities[1],
        rho_total=rho_total,
        q_c=f1,
        q_t=f2,
        q_total=ftot,
        u_c=(1.0 - s_actual) * v_pair[0],
        u_t=(1.0 - s_actual) * v_pair[1],
        u_total=ftot / rho_total if rho_total > 0 else float("nan"),
        converged=True,
        residual=0.0,
        t_final=0.0,
        sample_id=sample_id,
        combo_label="macroscopic",
    )


def run_sweep(spec: SweepSpec, params: ModelParams, numerics: NumericsParams,
              jobs: int = 1) -> list[DiagramPoint]:
    """Produce the diagram dataset for one sweep specification.

    Numerical failures surface as unconverged points; the sweep always runs
    to completion.  Output order is (s, sample_id) regardless of jobs.
    """
    params = _effective_params(spec, params)
    if spec.s_values is not None:
        s_grid = spec.s_values
    else:
        s_grid = tuple(np.linspace(0.0, 1.0, numerics.s_steps + 1))
    samples = spec.samples_per_s if spec.samples_per_s is not None else numerics.samples_per_s
    seed = spec.seed if spec.seed is not None else numerics.seed

    tasks = []
    for i_s, s in enumerate(s_grid):
        if spec.mode == "table2":
            for sample_id, (label, rho_c, rho_t) in enumerate(table2_mixtures(s, params.lengths)):
                tasks.append((s, (rho_c, rho_t), sample_id, label))
        elif spec.mode == "single-pop":
            rho = s * params.populations[0].rho_max
            for sample_id in range(samples):
                tasks.append((s, (rho,), sample_id, "single"))
        else:  # random-driven modes share the mixture driver
            thetas = _random_thetas(samples, np.random.SeedSequence((seed, i_s)))
            label = "random" if spec.mode == "random" else spec.mode
            for sample_id, theta in enumerate(thetas):
                pair = split_mixture(s, theta, params.lengths)
                tasks.append((s, pair, sample_id, label))

    if spec.mode == "macroscopic":
        points = [_macroscopic_point(params, s, pair, sample_id)
                  for s, pair, sample_id, _ in tasks]
    elif jobs > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (jobs * 8))
        with multiprocessing.Pool(jobs, initializer=_init_sweep_worker,
                                  initargs=(params, numerics)) as pool:
            points = pool.map(_relax_task, tasks, chunksize=chunk)
    else:
        _init_sweep_worker(params, numerics)
        points = [_relax_task(task) for task in tasks]

    points.sort(key=lambda p: (p.s, p.sample_id, p.combo_label))
    return points


@dataclass(frozen=True)
class BinStats:
    """Flux statistics of one total-density bin."""

    lo: float
    hi: float
    count: int
    q_mean: float
    q_std: float
    q_min: float
    q_max: float

    @property
    def q_range(self) -> float:
        return self.q_max - self.q_min


@dataclass
class ScatterReport:
    """Per-bin flux dispersion, split by traffic phase."""

    free: list[BinStats] = field(default_factory=list)
    congested: list[BinStats] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


def scatter_statistics(points: list[DiagramPoint], bin_edges=None,
                       s_c: float = 0.5) -> ScatterReport:
    """Bin converged points by total density and report flux dispersion.

    Points at or below the critical occupancy s_c go to the free-phase
    report, the rest to the congested one.  Bins holding fewer than two
    points of a phase are skipped with a note.  Default bins: 50 uniform
    over the observed density range.
    """
    converged = [p for p in points if p.converged]
    if bin_edges is None:
        top = max((p.rho_total for p in converged), default=1.0)
        bin_edges = np.linspace(0.0, top, 51)
    bin_edges = np.asarray(bin_edges, dtype=float)

    report = ScatterReport()
    for phase, out in (("free", report.free), ("congested", report.congested)):
        in_phase = [p for p in converged
                    if (p.s <= s_c) == (phase == "free")]
        for lo, hi in zip(bin_edges, bin_edges[1:]):
            q = np.array([p.q_total for p in in_phase if lo <= p.rho_total < hi])
            if q.size < 2:
                if q.size:
                    report.skipped.append(
                        f"{phase} bin [{lo:g}, {hi:g}): only {q.size} point(s), skipped")
                continue
            out.append(BinStats(
                lo=float(lo), hi=float(hi), count=int(q.size),
                q_mean=float(q.mean()), q_std=float(q.std()),
                q_min=float(q.min()), q_max=float(q.max()),
            ))
    return report
