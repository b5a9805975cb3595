"""Interaction probability tables ("tables of games").

For every outcome speed class j, a table holds the probability that a
candidate vehicle at speed class h adopts class j after meeting a field
vehicle at class k.  Tables are stored as stacks of shape (n_j, n_h, n_k)
indexed [j, h, k].

Interaction rules (alpha-law probabilities P = acceleration, Q = braking):

* field faster (h < k): keep speed with 1-P, accelerate one class with P;
* field slower (h > k): overtake and keep speed with P, queue down to the
  field speed k with 1-P;
* equal speeds, bottom class (h = k = 1): keep with 1-P, accelerate with P;
* equal speeds, interior: brake one class with Q, keep with 1-(P+Q),
  accelerate one class with P;
* equal speeds, candidate at its own top class: brake with Q, keep with 1-Q.

Cross-population tables follow the same rules on the shared speed classes.
The one genuinely new case: a candidate already at its own top class that
meets a strictly faster field vehicle cannot accelerate and keeps its speed
with probability 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ModelParams

STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class TransitionProbabilities:
    """Acceleration probability P and braking probability Q at one occupancy.

    Requires 0 <= P, Q <= 1 and P + Q <= 1 so that 1-(P+Q) is a probability.
    """

    p: float
    q: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"P must lie in [0, 1], got {self.p}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"Q must lie in [0, 1], got {self.q}")
        if self.p + self.q > 1.0 + 1e-15:
            raise ValueError(f"P + Q must not exceed 1, got {self.p + self.q}")

    @property
    def r(self) -> float:
        """Complement 1 - P (probability of not gaining the top outcome)."""
        return 1.0 - self.p


def transition_probabilities(s: float, alpha: float, gamma: float = 1.0) -> TransitionProbabilities:
    """Probabilities at road occupancy s: P = alpha*(1 - s**gamma), Q = (1-alpha)*s.

    The gamma exponent sharpens or flattens the decay of the acceleration
    probability with congestion; braking keeps the linear law.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"occupancy s must lie in [0, 1], got {s}")
    return TransitionProbabilities(p=alpha * (1.0 - s**gamma), q=(1.0 - alpha) * s)


def _renormalize(stack: np.ndarray) -> np.ndarray:
    """Pin each (h, k) outcome distribution to unit mass at round-off level.

    Quadratic collision sums inherit any table mass defect as a systematic
    density drift, so the largest entry absorbs the floating-point residue.
    """
    defect = stack.sum(axis=0) - 1.0
    jmax = stack.argmax(axis=0)
    h_idx, k_idx = np.indices(defect.shape)
    stack[jmax, h_idx, k_idx] -= defect
    return stack


def _build_stack(n_p: int, n_q: int, probs: TransitionProbabilities) -> np.ndarray:
    """Probability stack for candidates on an n_p lattice against an n_q field.

    The candidate population's top class is n_p; nested lattices share speed
    classes by index, so h and k are directly comparable.
    """
    p, q = probs.p, probs.q
    t = np.zeros((n_p, n_p, n_q))
    for h in range(n_p):
        for k in range(n_q):
            if h < k:
                if h == n_p - 1:
                    # Candidate capped at its own top speed: the faster field
                    # vehicle cannot be followed, the speed is simply kept.
                    t[h, h, k] = 1.0
                else:
                    t[h, h, k] += 1.0 - p
                    t[h + 1, h, k] += p
            elif h > k:
                t[k, h, k] += 1.0 - p
                t[h, h, k] += p
            elif h == 0:
                t[0, h, k] += 1.0 - p
                t[1, h, k] += p
            elif h == n_p - 1:
                t[h - 1, h, k] += q
                t[h, h, k] += 1.0 - q
            else:
                t[h - 1, h, k] += q
                t[h, h, k] += 1.0 - (p + q)
                t[h + 1, h, k] += p
    return _renormalize(t)


def build_self_tables(n: int, probs: TransitionProbabilities) -> np.ndarray:
    """Within-population tables: n stacked n x n matrices, indexed [j, h, k]."""
    if n < 2:
        raise ValueError(f"need at least 2 speed classes, got {n}")
    return _build_stack(n, n, probs)


def build_cross_tables(n_p: int, n_q: int, probs: TransitionProbabilities,
                       p_is_slower_capped: bool) -> np.ndarray:
    """Cross-population tables: n_p stacked n_p x n_q matrices, indexed [j, h, k].

    Rows index the candidate speed h in population p, columns the field speed
    k in population q; the lattices must be nested.  `p_is_slower_capped`
    declares that the candidate population is the one with the shorter
    lattice (n_p <= n_q), whose top class can face faster field vehicles.
    """
    if n_p < 2 or n_q < 2:
        raise ValueError(f"need at least 2 speed classes, got ({n_p}, {n_q})")
    if p_is_slower_capped and n_p > n_q:
        raise ValueError(f"capped candidate population must not out-range the field ({n_p} > {n_q})")
    if not p_is_slower_capped and n_p < n_q:
        raise ValueError(f"candidate lattice {n_p} shorter than field lattice {n_q}; "
                         "the candidate population is the capped one")
    return _build_stack(n_p, n_q, probs)


@dataclass
class StochasticityReport:
    """Outcome of check_stochastic: one entry per defective (h, k) pair."""

    violations: list[tuple[str, str, int, int, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "all outcome distributions sum to 1"
        lines = [
            f"table {cand}|{fld}: outcome mass at (h={h}, k={k}) sums to {total:.17g}"
            for cand, fld, h, k, total in self.violations
        ]
        return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class GameTables:
    """All interaction tables of a mixture at one fixed road occupancy.

    Attributes:
        s: road occupancy the tables were built for.
        probs: transition probabilities at that occupancy.
        names: population labels, fast class first.
        self_tables: per population p, stack (n_p, n_p, n_p).
        cross_tables: cross_tables[p][q] is the stack (n_p, n_p, n_q) for
            candidates of p against fields of q; None on the diagonal and
            for single-population tables.
    """

    s: float
    probs: TransitionProbabilities
    names: tuple[str, ...]
    self_tables: tuple[np.ndarray, ...]
    cross_tables: tuple[tuple[np.ndarray | None, ...], ...]
    _kernel: np.ndarray | None = field(default=None, repr=False)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(t.shape[0] for t in self.self_tables)

    @property
    def n_populations(self) -> int:
        return len(self.self_tables)

    def slices(self) -> tuple[slice, ...]:
        """Index ranges of each population in the stacked state vector."""
        out, start = [], 0
        for n in self.sizes:
            out.append(slice(start, start + n))
            start += n
        return tuple(out)

    def gain_kernel(self) -> np.ndarray:
        """Bilinear gain operator on the stacked state.

        Returns K of shape (N, N*N) with N = sum of lattice sizes such that
        gain = K @ outer(f, f).ravel() collects every self- and
        cross-interaction contribution.  Built once, then reused.
        """
        if self._kernel is None:
            sls = self.slices()
            n_total = sum(self.sizes)
            kernel = np.zeros((n_total, n_total * n_total))
            for p, sp in enumerate(sls):
                for q, sq in enumerate(sls):
                    stack = self.self_tables[p] if p == q else self.cross_tables[p][q]
                    for j in range(stack.shape[0]):
                        block = np.zeros((n_total, n_total))
                        block[sp, sq] = stack[j]
                        kernel[sp.start + j] += block.ravel()
            object.__setattr__(self, "_kernel", kernel)
        return self._kernel


def build_game_tables(params: ModelParams, s: float) -> GameTables:
    """Build every table of the mixture at road occupancy s."""
    probs = transition_probabilities(s, params.alpha, params.gamma)
    sizes = [p.lattice.n for p in params.populations]
    self_tables = tuple(build_self_tables(n, probs) for n in sizes)
    if len(sizes) == 1:
        cross: tuple = ((None,),)
    else:
        n_fast, n_slow = sizes
        cross = (
            (None, build_cross_tables(n_fast, n_slow, probs, p_is_slower_capped=False)),
            (build_cross_tables(n_slow, n_fast, probs, p_is_slower_capped=True), None),
        )
    return GameTables(
        s=s,
        probs=probs,
        names=tuple(p.name for p in params.populations),
        self_tables=self_tables,
        cross_tables=cross,
    )


def check_stochastic(tables: GameTables, tol: float = STOCHASTIC_TOL) -> StochasticityReport:
    """List every (candidate, field, h, k) whose outcome mass deviates from 1."""
    report = StochasticityReport()

    def scan(stack: np.ndarray, cand: str, fld: str):
        sums = stack.sum(axis=0)
        bad = np.argwhere(np.abs(sums - 1.0) > tol)
        for h, k in bad:
            report.violations.append((cand, fld, int(h) + 1, int(k) + 1, float(sums[h, k])))

    for p, name_p in enumerate(tables.names):
        scan(tables.self_tables[p], name_p, name_p)
        for q, name_q in enumerate(tables.names):
            if p != q and tables.cross_tables[p][q] is not None:
                scan(tables.cross_tables[p][q], name_p, name_q)
    return report


def dump_tables_csv(tables: GameTables, path) -> None:
    """Debug dump: one j-indexed block per table, rows h, columns k."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# interaction tables at s={tables.s!r} "
                 f"(P={tables.probs.p!r}, Q={tables.probs.q!r})\n")

        def write_stack(stack: np.ndarray, cand: str, fld: str):
            for j in range(stack.shape[0]):
                fh.write(f"table,{cand},{fld},j={j + 1}\n")
                for row in stack[j]:
                    fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

        for p, name_p in enumerate(tables.names):
            write_stack(tables.self_tables[p], name_p, name_p)
        for p, name_p in enumerate(tables.names):
            for q, name_q in enumerate(tables.names):
                if p != q and tables.cross_tables[p][q] is not None:
                    write_stack(tables.cross_tables[p][q], name_p, name_q)
