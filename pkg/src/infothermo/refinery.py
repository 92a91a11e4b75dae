"""Register swap dynamics, sorting objectives and stream refiners.

A register is a bit vector whose 0/1 counts are conserved by every swap.
Its readiness for a sequential engine is measured against the symmetrized
cyclic shift ``H = (C + C^T) / 2``: the defect ``Z = 1/2 |C psi - psi|^2``
vanishes for constant registers and equals 1 for a single cyclic block
(the difference vector has two unit entries).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .thermo import LN2, ThermalContext


class RefineryError(ValueError):
    pass


@dataclass(frozen=True)
class RegisterVector:
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise RefineryError("register entries must be bits")
        object.__setattr__(self, "bits", bits)

    def __len__(self):
        return len(self.bits)

    @property
    def n1(self) -> int:
        return sum(self.bits)

    @property
    def n0(self) -> int:
        return len(self.bits) - self.n1

    @property
    def array(self) -> np.ndarray:
        return np.array(self.bits, dtype=float)


@dataclass(frozen=True)
class SwapStep:
    """Candidate swap of ``x`` and ``y``.

    In ``data`` mode the swap fires when bit ``z`` is 1 (Fredkin semantics);
    in ``schedule`` mode it fires when ``apply`` is true, independent of
    the register content.
    """

    x: int
    y: int
    z: int
    mode: str = "data"
    apply: bool = True

    def __post_init__(self):
        if self.mode not in ("data", "schedule"):
            raise RefineryError(f"unknown step mode {self.mode!r}")
        if len({self.x, self.y, self.z}) != 3 or min(self.x, self.y, self.z) < 0:
            raise RefineryError(f"step addresses must be distinct and nonnegative: {self}")

    @classmethod
    def schedule(cls, x: int, y: int, apply: bool = True) -> "SwapStep":
        z = next(i for i in range(3) if i not in (x, y))
        return cls(x, y, z, "schedule", bool(apply))

    def check(self, n: int):
        if max(self.x, self.y, self.z) >= n:
            raise RefineryError(f"step {self} out of range for register of width {n}")

    def fires(self, bits: Sequence[int]) -> bool:
        return bool(bits[self.z]) if self.mode == "data" else self.apply


Trajectory = tuple  # of SwapStep


def swap_step(psi: RegisterVector, step: SwapStep) -> RegisterVector:
    step.check(len(psi))
    if not step.fires(psi.bits):
        return psi
    bits = list(psi.bits)
    bits[step.x], bits[step.y] = bits[step.y], bits[step.x]
    return RegisterVector(tuple(bits))


def run_trajectory(psi: RegisterVector, traj: Iterable[SwapStep]) -> RegisterVector:
    for step in traj:
        psi = swap_step(psi, step)
    return psi


def step_matrix(step: SwapStep, n: int, psi: RegisterVector | None = None) -> np.ndarray:
    """The N x N unit or near-unit permutation matrix realized by ``step``.

    Data-controlled steps need the register they act on.
    """
    step.check(n)
    u = np.eye(n, dtype=np.int64)
    if step.mode == "data":
        if psi is None:
            raise RefineryError("data-controlled step needs the register to pick its matrix")
        fires = step.fires(psi.bits)
    else:
        fires = step.apply
    if fires:
        u[[step.x, step.y]] = u[[step.y, step.x]]
    return u


def cyclic_shift(n: int) -> np.ndarray:
    return np.roll(np.eye(n), 1, axis=0)


def shift_hamiltonian(n: int) -> np.ndarray:
    c = cyclic_shift(n)
    return 0.5 * (c + c.T)


def uniformity_defect(psi: RegisterVector) -> float:
    if len(psi) < 2:
        raise RefineryError("defect needs at least two bits")
    v = psi.array
    d = np.roll(v, 1) - v
    return 0.5 * float(d @ d)


def sample_covariance(samples: Sequence[RegisterVector]) -> np.ndarray:
    if not samples:
        raise RefineryError("no samples")
    widths = {len(s) for s in samples}
    if len(widths) != 1:
        raise RefineryError(f"samples have mixed widths {sorted(widths)}")
    x = np.array([s.bits for s in samples], dtype=float)
    return x.T @ x / len(samples)


def schedule_permutation(traj: Iterable[SwapStep], n: int) -> np.ndarray:
    """Index array ``perm`` with ``(U psi)[i] == psi[perm[i]]``."""
    perm = np.arange(n)
    for step in traj:
        if step.mode != "schedule":
            raise RefineryError("objective is defined for schedule-controlled steps only")
        step.check(n)
        if step.apply:
            perm[[step.x, step.y]] = perm[[step.y, step.x]]
    return perm


def _objective_perm(cov: np.ndarray, h: np.ndarray, perm: np.ndarray) -> float:
    return float(np.sum(h * cov[np.ix_(perm, perm)]))


def avg_objective(cov: np.ndarray, traj: Iterable[SwapStep]) -> float:
    """``F = Tr(H U Q U^T)`` for a schedule-controlled trajectory."""
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    if cov.shape != (n, n):
        raise RefineryError(f"covariance must be square, got {cov.shape}")
    return _objective_perm(cov, shift_hamiltonian(n), schedule_permutation(traj, n))


def avg_defect(cov: np.ndarray, traj: Iterable[SwapStep]) -> float:
    """Mean defect over the samples behind ``cov`` after the trajectory."""
    return float(np.trace(cov)) - avg_objective(cov, traj)


@dataclass
class SearchResult:
    trajectory: tuple[SwapStep, ...]
    objective: float
    history: list[float] = field(default_factory=list)


def optimize_trajectory(
    samples: Sequence[RegisterVector],
    max_len: int = 3,
    budget: int = 4000,
    seed: int = 0,
    restarts: int = 4,
) -> SearchResult:
    """Search for a short swap schedule maximizing the sorting objective.

    Greedy best-improvement appending builds a first trajectory; simulated
    annealing restarts then edit it (replace, insert or delete one swap)
    within ``budget`` objective evaluations.  ``history`` records the best
    objective after every improvement and is nondecreasing.
    """
    cov = sample_covariance(samples)
    n = cov.shape[0]
    if n < 3:
        raise RefineryError("swap steps need registers of width >= 3")
    h = shift_hamiltonian(n)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rng = np.random.default_rng(seed)

    def score(swaps):
        perm = np.arange(n)
        for i, j in swaps:
            perm[[i, j]] = perm[[j, i]]
        return _objective_perm(cov, h, perm)

    best = []
    best_f = score(best)
    history = [best_f]

    # greedy phase
    while len(best) < max_len:
        cand_f, cand = max(((score(best + [p]), p) for p in pairs), key=lambda t: t[0])
        if cand_f <= best_f + 1e-12:
            break
        best, best_f = best + [cand], cand_f
        history.append(best_f)

    evals = 0
    per_restart = max(1, budget // max(1, restarts))
    for r in range(restarts):
        cur = list(best) if r % 2 == 0 else [pairs[int(k)] for k in rng.integers(len(pairs), size=int(rng.integers(0, max_len + 1)))]
        cur_f = score(cur)
        temp0 = 0.5
        for it in range(per_restart):
            if evals >= budget:
                break
            temp = temp0 * (1e-3 / temp0) ** (it / per_restart)
            prop = list(cur)
            move = int(rng.integers(3))
            if move == 0 and prop:
                prop[int(rng.integers(len(prop)))] = pairs[int(rng.integers(len(pairs)))]
            elif move == 1 and len(prop) < max_len:
                prop.insert(int(rng.integers(len(prop) + 1)), pairs[int(rng.integers(len(pairs)))])
            elif prop:
                del prop[int(rng.integers(len(prop)))]
            else:
                continue
            f = score(prop)
            evals += 1
            if f >= cur_f or rng.random() < math.exp((f - cur_f) / temp):
                cur, cur_f = prop, f
                if cur_f > best_f + 1e-12:
                    best, best_f = list(cur), cur_f
                    history.append(best_f)

    traj = tuple(SwapStep.schedule(i, j) for i, j in best)
    return SearchResult(traj, best_f, history)


# -- stream refiners ----------------------------------------------------------


class StreamRefiner:
    """Reversible transform of a bit stream into an error stream.

    ``identity`` and ``negation`` are memoryless.  ``delay-xor`` outputs
    ``x_n ^ x_{n-1}``.  ``table`` outputs ``x_n ^ u(x_{n-1}, ..., x_{n-k})``
    where ``u`` is a lookup over the delay window.  Windows start at zero.
    """

    KINDS = ("identity", "negation", "delay-xor", "table")

    def __init__(self, kind: str = "identity", k: int = 0, u: Mapping | Callable | None = None,
                 window: Sequence[int] | None = None):
        if kind not in self.KINDS:
            raise RefineryError(f"unknown refiner kind {kind!r}")
        if kind == "delay-xor":
            k, u = 1, (lambda w: w[0])
        elif kind in ("identity", "negation"):
            k = 0
        elif u is None or k < 1:
            raise RefineryError("table refiner needs k >= 1 and a lookup u")
        self.kind = kind
        self.k = k
        self._table = self._tabulate(u, k) if kind in ("delay-xor", "table") else None
        self.initial = tuple(window) if window is not None else (0,) * k
        if len(self.initial) != k:
            raise RefineryError(f"initial window must have {k} bits")
        self.reset()

    @staticmethod
    def _tabulate(u, k):
        table = []
        for idx in range(1 << k):
            w = tuple((idx >> i) & 1 for i in range(k))
            v = u(w) if callable(u) else u[w]
            if v not in (0, 1):
                raise RefineryError(f"lookup must return bits, got {v!r} for {w}")
            table.append(int(v))
        return tuple(table)

    @classmethod
    def delay_xor(cls):
        return cls("delay-xor")

    def reset(self):
        # window[0] is x_{n-1}, window[-1] is x_{n-k}
        self.window = list(self.initial)
        self.seen = 0

    @property
    def warm(self) -> bool:
        """False while the output still depends on the artificial initial window."""
        return self.seen >= self.k

    def predict(self) -> int:
        """Bit the refiner expects next (what it XORs out)."""
        if self.kind == "identity":
            return 0
        if self.kind == "negation":
            return 1
        idx = sum(b << i for i, b in enumerate(self.window))
        return self._table[idx]

    def _push(self, x: int):
        if self.k:
            self.window = [x] + self.window[:-1]
        self.seen += 1

    def refine(self, x: int) -> int:
        if x not in (0, 1):
            raise RefineryError(f"stream entries must be bits, got {x!r}")
        eps = x ^ self.predict()
        self._push(x)
        return eps

    def invert(self, eps: int) -> int:
        x = eps ^ self.predict()
        self._push(x)
        return x

    def spawn(self) -> "StreamRefiner":
        """Fresh refiner of the same kind, lookup and initial window."""
        clone = object.__new__(StreamRefiner)
        clone.kind, clone.k, clone._table, clone.initial = self.kind, self.k, self._table, self.initial
        clone.reset()
        return clone


def refine_stream(refiner: StreamRefiner, xs: Iterable[int]) -> list[int]:
    r = refiner.spawn()
    return [r.refine(x) for x in xs]


def invert_refinement(refiner: StreamRefiner, eps: Iterable[int], initial_window: Sequence[int] | None = None) -> list[int]:
    """Reconstruct the raw stream from an error stream.

    ``initial_window`` must be the delay window the forward pass started
    from; it defaults to the refiner's own.
    """
    r = refiner.spawn()
    if initial_window is not None:
        if len(initial_window) != r.k:
            raise RefineryError(f"initial window must have {r.k} bits")
        r.initial = tuple(initial_window)
        r.reset()
    return [r.invert(e) for e in eps]


def purity(eps: Sequence[int], warmup: int = 0) -> float:
    """Fraction of zeros, skipping the first ``warmup`` outputs."""
    body = list(eps)[warmup:]
    if not body:
        raise RefineryError("purity of an empty stream")
    return 1.0 - sum(body) / len(body)


def binary_entropy_bits(q: float) -> float:
    h = 0.0
    for p in (q, 1.0 - q):
        if p > 0:
            h -= p * math.log2(p)
    return h


def energy_rate(ctx: ThermalContext, q: float) -> float:
    """Work per bit extractable from a stream with zero-fraction ``q``."""
    if not 0.0 <= q <= 1.0:
        raise RefineryError("purity must lie in [0, 1]")
    return ctx.kT * LN2 * (1.0 - binary_entropy_bits(q))


# -- text formats -------------------------------------------------------------


def parse_bits(text: str) -> list[list[int]]:
    """Newline-terminated records of ``0``/``1`` characters."""
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if set(line) - {"0", "1"}:
            raise RefineryError(f"line {lineno}: not a bit record")
        records.append([int(c) for c in line])
    return records


def format_bits(records: Iterable[Iterable[int]]) -> str:
    return "".join("".join(str(int(b)) for b in r) + "\n" for r in records)


def dumps_trajectory(traj: Iterable[SwapStep]) -> str:
    lines = []
    for s in traj:
        if s.mode == "schedule":
            lines.append(f"SWAP {s.x} {s.y} {int(s.apply)}")
        else:
            lines.append(f"DATA {s.x} {s.y} {s.z}")
    return "".join(line + "\n" for line in lines)


def loads_trajectory(text: str) -> tuple[SwapStep, ...]:
    steps = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        try:
            head, a, b, c = parts
            if head == "SWAP":
                steps.append(SwapStep.schedule(int(a), int(b), bool(int(c))))
            elif head == "DATA":
                steps.append(SwapStep(int(a), int(b), int(c), "data"))
            else:
                raise RefineryError(f"unknown step {head!r}")
        except ValueError as exc:
            raise RefineryError(f"line {lineno}: cannot parse {line!r}") from exc
    return tuple(steps)
