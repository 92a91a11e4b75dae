"""Autonomous Turing machine: a reader, refiner, engine and actuator
sharing one energy reservoir.

All ledger arithmetic is done in integer micro-bits (1e-6 of ``kT ln 2``)
so that balances are exact; floats appear only in reports.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .refinery import StreamRefiner
from .rng import stream
from .thermo import LN2, EngineConfig, ThermalContext

MICRO = 1_000_000
CHUNK = 4096


class AtmError(RuntimeError):
    pass


class DeadMachine(AtmError):
    pass


def to_micro(bits: float) -> int:
    return int(round(bits * MICRO))


def format_micro(v: int) -> str:
    """Exact decimal rendering of a micro-bit amount in bits."""
    sign = "-" if v < 0 else ""
    q, r = divmod(abs(v), MICRO)
    return f"{sign}{q}.{r:06d}"


# -- worlds ---------------------------------------------------------------------


@dataclass(frozen=True)
class WorldSpec:
    """What the memory space contains.

    kinds: ``constant`` (value), ``iid`` (p = probability of a 1), ``band``
    (mean_band), ``band-noise`` (mean_band, noise) and ``image`` (grid).
    Band kinds are one-dimensional; ``image`` is two-dimensional.
    """

    kind: str = "constant"
    dim: int = 1
    value: int = 0
    p: float = 0.5
    mean_band: float = 20.0
    noise: float = 0.0
    grid: tuple | None = None
    shape: tuple[int, int] = (32, 32)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise AtmError("memory worlds are 1- or 2-dimensional")
        if self.kind not in ("constant", "iid", "band", "band-noise", "image"):
            raise AtmError(f"unknown world kind {self.kind!r}")
        if self.kind.startswith("band") and self.dim != 1:
            raise AtmError("band worlds are one-dimensional")
        if self.kind == "image" and (self.dim != 2 or self.grid is None):
            raise AtmError("image worlds need dim = 2 and a grid")
        if self.kind.startswith("band") and self.mean_band < 1:
            raise AtmError("mean band length must be >= 1")


class _BandSource:
    def __init__(self, rng, mean, noise, start):
        self.rng, self.mean, self.noise = rng, mean, noise
        self.sym = start
        self.left = int(rng.geometric(1.0 / mean))

    def take(self, n):
        out = np.empty(n, dtype=np.int8)
        pos = 0
        while pos < n:
            k = min(self.left, n - pos)
            out[pos : pos + k] = self.sym
            pos += k
            self.left -= k
            if self.left == 0:
                self.sym ^= 1
                self.left = int(self.rng.geometric(1.0 / self.mean))
        if self.noise:
            out ^= (self.rng.random(n) < self.noise).astype(np.int8)
        return out


class MemoryWorld:
    """One bit per cell.  Consumed cells read back as fresh fair coin flips.

    1D tapes are unbounded in both directions and generated lazily; 2D
    worlds are finite grids with toroidal wrap.
    """

    def __init__(self, spec: WorldSpec, rng: np.random.Generator, noise_rng: np.random.Generator | None = None):
        self.spec = spec
        self.dim = spec.dim
        self._rng = rng
        self._noise_rng = noise_rng if noise_rng is not None else rng
        self.consumed: set = set()
        if self.dim == 2:
            if spec.kind == "image":
                self.grid = np.array(spec.grid, dtype=np.int8)
            elif spec.kind == "constant":
                self.grid = np.full(spec.shape, spec.value, dtype=np.int8)
            else:
                self.grid = (rng.random(spec.shape) < spec.p).astype(np.int8)
        else:
            self._chunks: dict[int, np.ndarray] = {}
            self._sources = {}

    def _gen(self, direction: int, n: int) -> np.ndarray:
        s = self.spec
        if s.kind == "constant":
            return np.full(n, s.value, dtype=np.int8)
        if s.kind == "iid":
            return (self._rng.random(n) < s.p).astype(np.int8)
        if direction not in self._sources:
            start = int(self._rng.integers(2))
            noise = s.noise if s.kind == "band-noise" else 0.0
            self._sources[direction] = _BandSource(self._rng, s.mean_band, noise, start)
        return self._sources[direction].take(n)

    def _cell_1d(self, pos: int) -> int:
        idx = pos // CHUNK
        step = 1 if idx >= 0 else -1
        first = 0 if idx >= 0 else -1
        k = first
        while idx not in self._chunks:
            if k not in self._chunks:
                data = self._gen(step, CHUNK)
                self._chunks[k] = data if step > 0 else data[::-1]
            k += step
        return int(self._chunks[idx][pos % CHUNK])

    def wrap(self, pos):
        if self.dim == 1:
            return int(pos)
        r, c = pos
        rows, cols = self.grid.shape
        return (int(r) % rows, int(c) % cols)

    def peek(self, pos) -> int:
        """Stored content, ignoring consumption."""
        pos = self.wrap(pos)
        return self._cell_1d(pos) if self.dim == 1 else int(self.grid[pos])

    def read(self, pos) -> int:
        pos = self.wrap(pos)
        if pos in self.consumed:
            return int(self._noise_rng.integers(2))
        return self.peek(pos)

    def consume(self, pos):
        self.consumed.add(self.wrap(pos))

    def move(self, pos, delta):
        if self.dim == 1:
            return int(pos) + int(delta)
        return self.wrap((pos[0] + delta[0], pos[1] + delta[1]))


# -- machine -----------------------------------------------------------------------


@dataclass
class AtmConfig:
    """Machine wiring.

    ``decision_table`` maps a context of the last ``c`` raw bits, newest
    first, to a decision vector; it must cover all ``2**c`` contexts or be
    empty (no actuator).  ``action_moves`` maps nonzero decision vectors to
    displacements; a decision without a listed move only resets the
    register.  ``default_pattern`` is the cyclic free motion.
    """

    refiner: StreamRefiner = field(default_factory=StreamRefiner)
    engine: EngineConfig = field(default_factory=lambda: EngineConfig(strategy=(0.95, 0.05)))
    decision_table: Mapping[tuple, tuple] = field(default_factory=dict)
    action_moves: Mapping[tuple, object] = field(default_factory=dict)
    default_pattern: Sequence = (1,)
    overhead_bits: float = 0.0
    initial_balance_bits: float = 100.0
    capacity_bits: float | None = None

    def __post_init__(self):
        widths = {len(k) for k in self.decision_table}
        if len(widths) > 1:
            raise AtmError("decision contexts must share one width")
        self.context_width = widths.pop() if widths else 0
        if self.decision_table and len(self.decision_table) != 2**self.context_width:
            raise AtmError("decision table must be total on its context domain")
        if len({len(v) for v in self.decision_table.values()}) > 1:
            raise AtmError("decision vectors must share one width")
        if not self.default_pattern:
            raise AtmError("default motion pattern is empty")
        if self.overhead_bits < 0:
            raise AtmError("overhead must be nonnegative")
        if self.initial_balance_bits <= 0:
            raise AtmError("initial balance must be positive")

    @property
    def decision_width(self) -> int:
        return len(next(iter(self.decision_table.values()))) if self.decision_table else 0


@dataclass(frozen=True)
class StepEvent:
    step: int
    pos: object
    x: int
    eps: int
    e_in: int
    e_out: int
    action: str
    balance: int
    # ledger components, all in micro-bits
    engine: int = 0
    reset: int = 0
    overhead: int = 0
    spill: int = 0
    decision_bits: int = 0


class Atm:
    """One simulated machine.  Not thread-safe; step strictly in order."""

    def __init__(self, config: AtmConfig, world: MemoryWorld, start=None, seed: int = 0):
        self.config = config
        self.world = world
        self.pos = start if start is not None else (0 if world.dim == 1 else (0, 0))
        self.refiner = config.refiner.spawn()
        self.balance = to_micro(config.initial_balance_bits)
        self.initial = self.balance
        self.capacity = None if config.capacity_bits is None else to_micro(config.capacity_bits)
        self.t = 0
        self.phase = 0
        self.history: list[int] = []
        self.rng = stream(seed, "atm")
        self._yield = {
            b: to_micro(math.log2(config.engine.strategy[config.engine.compartment(b)] / config.engine.prior[config.engine.compartment(b)]))
            for b in (0, 1)
        }
        self._overhead = to_micro(config.overhead_bits)

    @property
    def alive(self) -> bool:
        return self.balance > 0

    def _context(self) -> tuple:
        c = self.config.context_width
        h = self.history[-c:][::-1] if c else []
        return tuple(h) + (0,) * (c - len(h))

    def step(self) -> StepEvent:
        if not self.alive:
            raise DeadMachine(f"balance {format_micro(self.balance)} bits at step {self.t}")
        cfg = self.config
        pos = self.pos
        x = self.world.read(pos)
        self.history.append(x)
        eps = self.refiner.refine(x)

        engine = self._yield[eps]
        self.world.consume(pos)

        reset = 0
        n_dec = 0
        action = "default"
        move = cfg.default_pattern[self.phase % len(cfg.default_pattern)]
        if eps == 1 and cfg.decision_table:
            delta = tuple(cfg.decision_table[self._context()])
            n_dec = sum(delta)
            if n_dec:
                reset = n_dec * MICRO
                action = "act:" + "".join(map(str, delta))
                move = cfg.action_moves.get(delta, move)
        self.phase += 1

        e_in = max(engine, 0)
        e_out = max(-engine, 0) + reset + self._overhead
        after = self.balance + e_in - e_out
        spill = 0
        if self.capacity is not None and after > self.capacity:
            spill = after - self.capacity
            e_out += spill
            after = self.capacity
        self.balance = after
        self.pos = self.world.move(pos, move)
        self.t += 1
        return StepEvent(self.t, pos, x, eps, e_in, e_out, action, after,
                         engine, reset, self._overhead, spill, n_dec)


@dataclass
class RunResult:
    trace: list[StepEvent]
    summary: dict


def summarize(trace: Sequence[StepEvent], initial: int, max_steps: int, warmup: int = 0) -> dict:
    engine = sum(e.engine for e in trace)
    credit = sum(e.engine for e in trace if e.engine > 0)
    reset = sum(e.reset for e in trace)
    overhead = sum(e.overhead for e in trace)
    spill = sum(e.spill for e in trace)
    final = trace[-1].balance if trace else initial
    n = len(trace)
    eps_body = [e.eps for e in trace[warmup:]]
    U = engine
    A = reset + overhead + spill
    unit = sum((1 if e.eps == 0 else -e.decision_bits) for e in trace)
    return {
        "steps": n,
        "max_steps": max_steps,
        "alive": final > 0,
        "died_at": None if final > 0 else n,
        "initial_balance": format_micro(initial),
        "final_balance": format_micro(final),
        "U": format_micro(U),
        "A": format_micro(A),
        "E": format_micro(U - A),
        "engine_credit": format_micro(credit),
        "engine_loss": format_micro(credit - engine),
        "reset_cost": format_micro(reset),
        "overhead": format_micro(overhead),
        "spilled": format_micro(spill),
        "mean_net_per_step": (U - A) / MICRO / n if n else 0.0,
        "purity": (1.0 - sum(eps_body) / len(eps_body)) if eps_body else None,
        "unit_ledger": unit,
    }


def run(config: AtmConfig, world: MemoryWorld, max_steps: int, seed: int = 0, start=None) -> RunResult:
    """Step until ``max_steps`` or death.  Deterministic given the seed and world."""
    m = Atm(config, world, start=start, seed=seed)
    trace = []
    while m.t < max_steps and m.alive:
        trace.append(m.step())
    return RunResult(trace, summarize(trace, m.initial, max_steps, warmup=config.refiner.k))


def make_world(spec: WorldSpec, seed: int) -> MemoryWorld:
    return MemoryWorld(spec, stream(seed, "world"), stream(seed, "consumed"))


def trace_csv(trace: Sequence[StepEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "pos", "x", "eps", "e_in", "e_out", "action", "balance"])
    for e in trace:
        pos = e.pos if isinstance(e.pos, int) else ":".join(map(str, e.pos))
        w.writerow([e.step, pos, e.x, e.eps, format_micro(e.e_in), format_micro(e.e_out), e.action, format_micro(e.balance)])
    return buf.getvalue()


def summary_json(summary: Mapping) -> str:
    return json.dumps(summary, sort_keys=True)


def predicted_horizon(initial_bits: float, mean_yield_bits: float, overhead_bits: float) -> float:
    """Expected death step when the per-step drift is negative."""
    drift = mean_yield_bits - overhead_bits
    return math.inf if drift >= 0 else initial_bits / -drift


# -- band-swapping engines -------------------------------------------------------


def band_tape(rng, n, mean_band, noise=0.0, periodic=False):
    """Clean band symbols and the stored (possibly noisy) cells."""
    if periodic:
        length = int(round(mean_band))
        clean = ((np.arange(n) // length) % 2).astype(np.int8)
    else:
        clean = _BandSource(rng, mean_band, 0.0, int(rng.integers(2))).take(n)
    cells = clean ^ (rng.random(n) < noise).astype(np.int8) if noise else clean.copy()
    return clean, cells


def band_strategy_eval(ctx: ThermalContext, N: float, I: int, steps: int, seed: int = 0,
                       noise: float = 0.0, strategy: float = 2 / 3, periodic: bool = False,
                       runs: int = 1, phase: int | None = None) -> dict:
    """Measured loss of the swap-every-I-steps policy on band tapes.

    Every ``I`` cells the machine pays one bit to measure the current cell
    and turns its engine to match.  A cell read with the wrong orientation
    forfeits ``kT ln(Q / (1 - Q))`` against a correctly turned engine of the
    same strategy ``Q``; the default ``Q = 2/3`` makes that exactly one bit.
    With ``phase=None`` the result is averaged exactly over all ``I``
    offsets of the measurement grid.  Returned energies are in ``kT`` units.
    """
    if N < 1 or I < 1:
        raise ValueError("N and I must be >= 1")
    if not 0.5 < strategy < 1.0:
        raise ValueError("strategy must lie in (1/2, 1)")
    rng = stream(seed, "bands")
    bit = ctx.kT * LN2
    g, w = math.log2(2 * strategy), math.log2(2 * (1 - strategy))
    mismatch_cost = g - w

    loss = meas = mism = 0.0
    bands = 0
    aligned_deficit = aligned = 0.0
    offsets = range(I) if phase is None else [phase % I]
    for _ in range(runs):
        clean, cells = band_tape(rng, steps, N, noise, periodic)
        bands += 1 + int(np.count_nonzero(np.diff(clean)))
        for off in offsets:
            idx = np.arange(steps)
            anchor = np.maximum(((idx - off) // I) * I + off, 0)
            orient = cells[anchor]
            n_meas = len(range(off, steps, I)) + (1 if off > 0 else 0)
            wrong_orient = orient != clean
            m = int(np.count_nonzero(wrong_orient))
            meas += n_meas
            mism += m
            # noise losses on correctly oriented cells, against an ideal bit
            ok = ~wrong_orient
            y = np.where(cells[ok] == orient[ok], g, w)
            aligned_deficit += float(np.sum(1.0 - y))
            aligned += int(np.count_nonzero(ok))
    k = len(offsets)
    meas, mism = meas / k, mism / k
    aligned_deficit, aligned = aligned_deficit / k, aligned / k
    total = meas + mism * mismatch_cost
    return {
        "loss_per_band": total * bit / bands,
        "measurements_per_band": meas / bands,
        "mismatches_per_band": mism / bands,
        "bands": bands,
        "analytic_loss_per_band": (N / I + I / 2) * bit,
        "noise_loss_per_bit": (aligned_deficit / aligned) * bit if aligned else 0.0,
    }
