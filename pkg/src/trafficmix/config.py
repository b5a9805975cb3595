"""Model and run configuration.

All quantities use kilometers and hours: vehicle lengths in km, speeds in
km/h, densities in vehicles/km.  With these units the jam density of a
population is exactly the reciprocal of its vehicle length, so no unit
conversion is ever needed.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Raised when a configuration document is malformed or inconsistent."""


@dataclass(frozen=True)
class SpeedLattice:
    """Ordered discrete speed classes of one vehicle population.

    Attributes:
        speeds: strictly increasing speeds [km/h]; speeds[0] must be 0 and
            speeds[-1] is the population's maximum speed.
    """

    speeds: tuple[float, ...]

    def __post_init__(self):
        if len(self.speeds) < 2:
            raise ConfigError("lattice: at least two speed classes required")
        if self.speeds[0] != 0.0:
            raise ConfigError(f"lattice: first speed must be 0, got {self.speeds[0]}")
        for a, b in zip(self.speeds, self.speeds[1:]):
            if not b > a:
                raise ConfigError(f"lattice: speeds must be strictly increasing, got {a} before {b}")
        object.__setattr__(self, "speeds", tuple(float(v) for v in self.speeds))

    @property
    def n(self) -> int:
        return len(self.speeds)

    @property
    def v_max(self) -> float:
        return self.speeds[-1]

    @classmethod
    def equispaced(cls, n: int, v_max: float) -> "SpeedLattice":
        """Uniform lattice v_j = (j-1)/(n-1) * v_max, j = 1..n."""
        if n < 2:
            raise ConfigError(f"lattice: need n >= 2 speed classes, got {n}")
        if v_max <= 0:
            raise ConfigError(f"lattice: v_max must be positive, got {v_max}")
        return cls(tuple(j / (n - 1) * v_max for j in range(n)))

    def prefix(self, n: int) -> "SpeedLattice":
        """First n speed classes of this lattice (for the slower population)."""
        if not 2 <= n <= self.n:
            raise ConfigError(f"lattice: prefix size {n} outside [2, {self.n}]")
        return SpeedLattice(self.speeds[:n])

    def is_prefix_of(self, other: "SpeedLattice") -> bool:
        if self.n > other.n:
            return False
        return all(
            math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)
            for a, b in zip(self.speeds, other.speeds)
        )


@dataclass(frozen=True)
class PopulationSpec:
    """Physical parameters of one vehicle class.

    Attributes:
        name: label used in output files (e.g. "car", "truck").
        length: space taken by one vehicle [km] (bumper-to-bumper).
        lattice: admissible speed classes of this class.
        rho_max: jam density [vehicles/km]; always 1/length.  It may be given
            redundantly (e.g. in a hand-written config) and is then checked.
    """

    name: str
    length: float
    lattice: SpeedLattice
    rho_max: float = field(default=0.0)

    def __post_init__(self):
        if self.length <= 0:
            raise ConfigError(f"population '{self.name}': length must be positive, got {self.length}")
        derived = 1.0 / self.length
        if self.rho_max:
            if not math.isclose(self.rho_max, derived, rel_tol=1e-9):
                raise ConfigError(
                    f"population '{self.name}': rho_max={self.rho_max} inconsistent "
                    f"with length={self.length} (1/length = {derived})"
                )
        object.__setattr__(self, "rho_max", derived)


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the interaction model.

    Attributes:
        populations: one or two PopulationSpec.  With two, the first is the
            fast/short class ("cars") and the second the slow/long class
            ("trucks"); the second lattice must be a prefix of the first.
        alpha: environmental parameter in [0, 1] (1 = optimal conditions).
        gamma: exponent of the acceleration-probability law, > 0.
        eta: constant interaction rate [1/h], > 0.
    """

    populations: tuple[PopulationSpec, ...]
    alpha: float = 1.0
    gamma: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        if not 1 <= len(self.populations) <= 2:
            raise ConfigError(f"model: expected 1 or 2 populations, got {len(self.populations)}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"model: alpha must lie in [0, 1], got {self.alpha}")
        if self.gamma <= 0:
            raise ConfigError(f"model: gamma must be positive, got {self.gamma}")
        if self.eta <= 0:
            raise ConfigError(f"model: eta must be positive, got {self.eta}")
        object.__setattr__(self, "populations", tuple(self.populations))
        if len(self.populations) == 2:
            fast, slow = self.populations
            if not slow.lattice.is_prefix_of(fast.lattice):
                raise ConfigError(
                    f"model: lattice of '{slow.name}' {slow.lattice.speeds} is not a "
                    f"prefix of lattice of '{fast.name}' {fast.lattice.speeds}"
                )
            # Deliberately a warning: ablation studies equalise lengths or speeds.
            if fast.length > slow.length:
                warnings.warn(
                    f"'{fast.name}' is longer than '{slow.name}' "
                    f"({fast.length} km > {slow.length} km)",
                    stacklevel=2,
                )

    @property
    def lattices(self) -> tuple[SpeedLattice, ...]:
        return tuple(p.lattice for p in self.populations)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(p.length for p in self.populations)


@dataclass(frozen=True)
class NumericsParams:
    """Numerical parameters of relaxation runs and diagram sweeps.

    Attributes:
        dt: time step [h]; None selects the stability policy
            dt = 0.5 / (eta * rho_total) per run.
        tol: equilibrium residual tolerance (max-norm of df/dt).
        t_max: maximum relaxation time [h] before giving up.
        seed: RNG seed for random mixtures.
        s_steps: number of occupancy grid intervals on [0, 1].
        samples_per_s: mixtures drawn per occupancy value.
    """

    dt: float | None = None
    tol: float = 1e-10
    t_max: float = 1000.0
    seed: int = 0
    s_steps: int = 200
    samples_per_s: int = 3

    def __post_init__(self):
        if self.dt is not None and self.dt <= 0:
            raise ConfigError(f"numerics: dt must be positive, got {self.dt}")
        if self.tol <= 0:
            raise ConfigError(f"numerics: tol must be positive, got {self.tol}")
        if self.t_max <= 0:
            raise ConfigError(f"numerics: t_max must be positive, got {self.t_max}")
        if self.s_steps < 2:
            raise ConfigError(f"numerics: s_steps must be >= 2, got {self.s_steps}")
        if self.samples_per_s < 1:
            raise ConfigError(f"numerics: samples_per_s must be >= 1, got {self.samples_per_s}")


def occupancy(densities, specs) -> float:
    """Fraction of road length covered by vehicles: s = sum_p rho_p * l_p."""
    if len(densities) != len(specs):
        raise ValueError(f"{len(densities)} densities for {len(specs)} populations")
    return float(sum(rho * spec.length for rho, spec in zip(densities, specs)))


def admissible(densities, specs) -> bool:
    """True iff all densities are nonnegative and the mixture fits on the road."""
    if any(rho < 0 for rho in densities):
        return False
    return 0.0 <= occupancy(densities, specs) <= 1.0


def _population_from_dict(entry: dict, master: SpeedLattice | None, index: int) -> PopulationSpec:
    if not isinstance(entry, dict):
        raise ConfigError(f"population #{index}: expected an object, got {type(entry).__name__}")
    name = entry.get("name", f"pop{index}")
    try:
        length = float(entry["length"])
    except KeyError:
        raise ConfigError(f"population '{name}': missing required field 'length'") from None

    if "speeds" in entry:
        lattice = SpeedLattice(tuple(float(v) for v in entry["speeds"]))
    elif "num_speeds" in entry:
        n = int(entry["num_speeds"])
        if master is None:
            if "v_max" not in entry:
                raise ConfigError(f"population '{name}': 'v_max' required with 'num_speeds'")
            lattice = SpeedLattice.equispaced(n, float(entry["v_max"]))
        else:
            # The slower population rides on the leading population's lattice.
            lattice = master.prefix(n)
    else:
        raise ConfigError(f"population '{name}': give either 'speeds' or 'num_speeds'")

    return PopulationSpec(
        name=name,
        length=length,
        lattice=lattice,
        rho_max=float(entry.get("rho_max", 0.0)),
    )


def load_config(text: str) -> tuple[ModelParams, NumericsParams]:
    """Parse a JSON configuration document.

    Expected layout::

        {
          "model": {
            "alpha": 1.0, "gamma": 1.0, "eta": 1.0,
            "populations": [
              {"name": "car",   "length": 0.004, "num_speeds": 3, "v_max": 100.0},
              {"name": "truck", "length": 0.012, "num_speeds": 2}
            ]
          },
          "numerics": {"tol": 1e-10, "t_max": 1000.0, "seed": 0,
                       "s_steps": 200, "samples_per_s": 3}
        }

    Populations may alternatively list explicit "speeds"; "rho_max" may be
    stated redundantly and is checked against 1/length.  Raises ConfigError
    naming the offending field on any violation.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    if not isinstance(doc, dict) or "model" not in doc:
        raise ConfigError("config: missing top-level 'model' section")
    return model_from_dict(doc["model"]), numerics_from_dict(doc.get("numerics", {}))


def model_from_dict(model: dict) -> ModelParams:
    """Build ModelParams from the 'model' section of a config document."""
    pop_entries = model.get("populations")
    if not pop_entries:
        raise ConfigError("model: 'populations' must list one or two entries")

    populations = []
    master = None
    for i, entry in enumerate(pop_entries):
        spec = _population_from_dict(entry, master, i)
        if master is None:
            master = spec.lattice
        populations.append(spec)

    return ModelParams(
        populations=tuple(populations),
        alpha=float(model.get("alpha", 1.0)),
        gamma=float(model.get("gamma", 1.0)),
        eta=float(model.get("eta", 1.0)),
    )


def numerics_from_dict(num: dict) -> NumericsParams:
    """Build NumericsParams from the 'numerics' section of a config document."""
    dt = num.get("dt")
    return NumericsParams(
        dt=None if dt is None else float(dt),
        tol=float(num.get("tol", 1e-10)),
        t_max=float(num.get("t_max", 1000.0)),
        seed=int(num.get("seed", 0)),
        s_steps=int(num.get("s_steps", 200)),
        samples_per_s=int(num.get("samples_per_s", 3)),
    )


def load_config_file(path) -> tuple[ModelParams, NumericsParams]:
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read())


def table1_params(n_car: int = 3, n_truck: int = 2, v_max: float = 100.0,
                  alpha: float = 1.0, gamma: float = 1.0, eta: float = 1.0) -> ModelParams:
    """Reference car/truck mixture: 4 m cars, 12 m trucks, 100 km/h top speed."""
    car_lattice = SpeedLattice.equispaced(n_car, v_max)
    return ModelParams(
        populations=(
            PopulationSpec("car", 0.004, car_lattice),
            PopulationSpec("truck", 0.012, car_lattice.prefix(n_truck)),
        ),
        alpha=alpha,
        gamma=gamma,
        eta=eta,
    )


def single_population_params(n: int = 2, v_max: float = 100.0, length: float = 1.0,
                             alpha: float = 1.0, gamma: float = 1.0, eta: float = 1.0) -> ModelParams:
    """One normalized population (length 1 km gives rho_max = 1 veh/km)."""
    return ModelParams(
        populations=(PopulationSpec("pop", length, SpeedLattice.equispaced(n, v_max)),),
        alpha=alpha,
        gamma=gamma,
        eta=eta,
    )


def model_to_dict(params: ModelParams) -> dict:
    """JSON-serializable snapshot of the model (round-trips through load_config)."""
    return {
        "alpha": params.alpha,
        "gamma": params.gamma,
        "eta": params.eta,
        "populations": [
            {
                "name": p.name,
                "length": p.length,
                "rho_max": p.rho_max,
                "speeds": list(p.lattice.speeds),
            }
            for p in params.populations
        ],
    }


def numerics_to_dict(numerics: NumericsParams) -> dict:
    return {
        "dt": numerics.dt,
        "tol": numerics.tol,
        "t_max": numerics.t_max,
        "seed": numerics.seed,
        "s_steps": numerics.s_steps,
        "samples_per_s": numerics.samples_per_s,
    }
