"""Hierarchical pattern learning by statistical sorting.

Two entry points share one dictionary type:

* ``learn_pairs`` builds composites from adjacent tokens in a symbol stream.
* ``act_learn`` walks a gaze point over a binary image, logging colors and
  moves, and promotes (color, move, color) and (move, color, move) triples.

A composite stores its parts and its full primitive expansion, so pruning a
pattern never orphans the ones built on top of it.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .thermo import LN2, ThermalContext

BLACK, WHITE = "B", "W"
ACTIONS = ("R", "D", "L", "U")
MOVES = {"R": (0, 1), "D": (1, 0), "L": (0, -1), "U": (-1, 0)}


class LearnerError(ValueError):
    pass


@dataclass
class Pattern:
    id: str
    kind: str  # "data" or "action"
    parts: tuple[str, ...]
    expansion: tuple[str, ...]
    count: int = 0
    lift: float | None = None

    @property
    def primitive(self) -> bool:
        return len(self.expansion) == 1 and self.parts == ()


@dataclass
class PatternDictionary:
    theta: float = 3.0
    phi: float = 1e-4
    min_support: int = 5
    patterns: dict[str, Pattern] = field(default_factory=dict)
    history: list[str] = field(default_factory=list)  # composite ids, in promotion order
    _next: int = 1

    @classmethod
    def from_alphabet(cls, data=(), actions=(), **kw) -> "PatternDictionary":
        d = cls(**kw)
        for s in data:
            d.add_primitive(s, "data")
        for s in actions:
            d.add_primitive(s, "action")
        return d

    @classmethod
    def for_gaze(cls, **kw) -> "PatternDictionary":
        return cls.from_alphabet((BLACK, WHITE), ACTIONS, **kw)

    def add_primitive(self, symbol: str, kind: str = "data") -> None:
        if symbol in self.patterns:
            raise LearnerError(f"duplicate primitive {symbol!r}")
        self.patterns[symbol] = Pattern(symbol, kind, (), (symbol,))

    def add_composite(self, parts, kind: str, lift: float | None = None) -> Pattern:
        for p in parts:
            if p not in self.patterns:
                raise LearnerError(f"unknown part {p!r}")
        exp = tuple(s for p in parts for s in self.patterns[p].expansion)
        if self.find(exp) is not None:
            raise LearnerError(f"pattern {'-'.join(exp)} already stored")
        pid = f"c{self._next}"
        self._next += 1
        pat = Pattern(pid, kind, tuple(parts), exp, lift=lift)
        self.patterns[pid] = pat
        self.history.append(pid)
        return pat

    def prune(self, pid: str) -> None:
        pat = self.patterns[pid]
        if pat.primitive:
            raise LearnerError("primitives are never pruned")
        del self.patterns[pid]
        for other in self.patterns.values():
            if pid in other.parts:
                other.parts = tuple(q for p in other.parts for q in ((p,) if p != pid else pat.parts))

    def find(self, expansion) -> str | None:
        expansion = tuple(expansion)
        for p in self.patterns.values():
            if p.expansion == expansion:
                return p.id
        return None

    def label(self, pid: str) -> str:
        return "-".join(self.patterns[pid].expansion)

    @property
    def primitives(self) -> list[str]:
        return [p.id for p in self.patterns.values() if p.primitive]

    @property
    def composites(self) -> list[Pattern]:
        return [p for p in self.patterns.values() if not p.primitive]

    def expand(self, tokens) -> list[str]:
        out = []
        for t in tokens:
            if t not in self.patterns:
                raise LearnerError(f"unknown token {t!r}")
            out.extend(self.patterns[t].expansion)
        return out

    def tokenize(self, symbols, kinds=None) -> list[str]:
        """Greedy longest-match tokenization of a primitive stream."""
        by_len: dict[int, dict[tuple, str]] = {}
        for p in self.patterns.values():
            if kinds is None or p.primitive or p.kind in kinds:
                by_len.setdefault(len(p.expansion), {})[p.expansion] = p.id
        lengths = sorted(by_len, reverse=True)
        symbols = list(symbols)
        out, i = [], 0
        while i < len(symbols):
            for n in lengths:
                pid = by_len[n].get(tuple(symbols[i:i + n]))
                if pid is not None:
                    out.append(pid)
                    i += n
                    break
            else:
                raise LearnerError(f"unknown token {symbols[i]!r}")
        return out

    # -- serialization --------------------------------------------------------------

    def to_json(self) -> str:
        body = {
            "theta": self.theta,
            "phi": self.phi,
            "min_support": self.min_support,
            "patterns": [
                {"id": p.id, "kind": p.kind, "parts": list(p.parts), "expansion": list(p.expansion), "count": p.count}
                for p in self.patterns.values()
            ],
            "history": self.history,
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PatternDictionary":
        body = json.loads(text)
        d = cls(theta=body["theta"], phi=body["phi"], min_support=body["min_support"])
        top = 0
        for rec in body["patterns"]:
            d.patterns[rec["id"]] = Pattern(rec["id"], rec["kind"], tuple(rec["parts"]), tuple(rec["expansion"]), rec["count"])
            if rec["id"].startswith("c"):
                top = max(top, int(rec["id"][1:]))
        d.history = list(body.get("history", []))
        d._next = top + 1
        return d


def _substring_counts(symbols, length_set) -> Counter:
    c: Counter = Counter()
    n = len(symbols)
    for L in length_set:
        for i in range(n - L + 1):
            c[tuple(symbols[i:i + L])] += 1
    return c


def _refresh_counts(d: PatternDictionary, seqs) -> int:
    """Set each pattern's count to its occurrences in the primitive sequences."""
    counts: Counter = Counter()
    lengths = {len(p.expansion) for p in d.patterns.values()}
    for seq in seqs:
        counts.update(_substring_counts(seq, lengths))
    for p in d.patterns.values():
        p.count = counts.get(p.expansion, 0)
    return sum(len(seq) for seq in seqs)


def _prune_rare(d: PatternDictionary, total: int) -> list[str]:
    if not total:
        return []
    gone = [p.id for p in d.composites if p.count / total < d.phi]
    for pid in gone:
        d.prune(pid)
    return gone


def pair_lift(d: PatternDictionary, symbols, x: str, y: str, counts=None) -> tuple[float, int]:
    """Lift of the pair (x, y): frequency of the joined expansion over the product of part frequencies."""
    ex, ey = d.patterns[x].expansion, d.patterns[y].expansion
    if counts is None:
        counts = _substring_counts(symbols, {len(ex), len(ey), len(ex) + len(ey)})
    joint = counts[ex + ey]
    if joint == 0:
        return 0.0, 0
    return joint * len(symbols) / (counts[ex] * counts[ey]), joint


def learn_pairs(stream, d: PatternDictionary, passes: int = 1, per_pass: int = 1) -> PatternDictionary:
    """Promote frequent adjacent pairs into composites, ``per_pass`` at a time."""
    symbols = d.expand(stream)
    if not symbols:
        return d
    for _ in range(passes):
        tokens = d.tokenize(symbols)
        cand = sorted(set(zip(tokens, tokens[1:])))
        lengths = {len(d.patterns[t].expansion) for t in set(tokens)}
        lengths |= {a + b for a in lengths for b in lengths}
        counts = _substring_counts(symbols, lengths)
        scored = []
        for x, y in cand:
            lift, support = pair_lift(d, symbols, x, y, counts)
            if support >= d.min_support and lift >= d.theta and d.find(d.patterns[x].expansion + d.patterns[y].expansion) is None:
                scored.append((-lift, _order_key(d, (x, y)), x, y, lift))
        scored.sort()
        for _, _, x, y, lift in scored[:per_pass]:
            d.add_composite((x, y), d.patterns[x].kind, lift)
        _prune_rare(d, _refresh_counts(d, [symbols]))
        if not scored:
            break
    return d


def _order_key(d: PatternDictionary, ids) -> tuple:
    order = {pid: i for i, pid in enumerate(d.patterns)}
    return tuple(order[i] for i in ids)


# -- gaze world ------------------------------------------------------------------------


@dataclass
class GazeWorld:
    grid: np.ndarray  # bool, True = black

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=bool)
        if self.grid.ndim != 2 or self.grid.size == 0:
            raise LearnerError("gaze world needs a non-empty 2D grid")

    @property
    def shape(self):
        return self.grid.shape

    def color(self, pos) -> str:
        return BLACK if self.grid[pos] else WHITE

    def move(self, pos, action: str):
        dr, dc = MOVES[action]
        r, c = self.shape
        return ((pos[0] + dr) % r, (pos[1] + dc) % c)

    @classmethod
    def horizontal_lines(cls, rows=16, cols=16, spacing=4, offset=0) -> "GazeWorld":
        g = np.zeros((rows, cols), dtype=bool)
        g[offset::spacing, :] = True
        return cls(g)


def parse_image(text: str) -> GazeWorld:
    rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise LearnerError("image rows must be non-empty and equally long")
    bad = set("".join(rows)) - {"#", "."}
    if bad:
        raise LearnerError(f"bad image characters {sorted(bad)}")
    return GazeWorld(np.array([[ch == "#" for ch in r] for r in rows]))


def format_image(world: GazeWorld) -> str:
    return "".join("".join("#" if b else "." for b in row) + "\n" for row in world.grid)


@dataclass(frozen=True)
class ActionRecord:
    step: int
    pos: tuple[int, int]
    color: str
    action: str
    deterministic: bool
    pattern: str | None = None


@dataclass
class WalkLog:
    records: list[ActionRecord]
    symbols: list[str]  # interleaved color, action, color, ...; one list per episode joined
    episodes: list[tuple[int, int]]  # (start, stop) indices into records

    @property
    def deterministic_count(self) -> int:
        return sum(r.deterministic for r in self.records)

    def deterministic_fraction(self, color: str | None = None) -> float:
        sel = [r for r in self.records if color is None or r.color == color]
        return sum(r.deterministic for r in sel) / len(sel) if sel else 0.0


def _policy(d: PatternDictionary, tail: list[str]) -> tuple[str | None, str | None]:
    """Longest stored prefix matching the end of ``tail``; data composites win ties."""
    best = None
    for p in d.composites:
        exp = p.expansion
        for k in range(len(exp) - 1, 0, -1):
            if exp[k] not in MOVES or exp[k - 1] in MOVES:
                continue
            if k <= len(tail) and tuple(tail[-k:]) == exp[:k]:
                key = (k, p.kind == "data", p.lift or 0.0, -int(p.id[1:]))
                if best is None or key > best[0]:
                    best = (key, exp[k], p.id)
                break
    return (best[1], best[2]) if best else (None, None)


def walk(world: GazeWorld, steps: int, d: PatternDictionary, seed: int = 0, episode_len: int = 64) -> WalkLog:
    """Gaze random walk; stored patterns override the random move when they match."""
    from .rng import stream

    rng = stream(seed, "learner")
    records, symbols, episodes = [], [], []
    pos, tail, ep_start = None, [], 0
    for t in range(steps):
        if t % episode_len == 0:
            if t:
                episodes.append((ep_start, t))
                symbols.append("|")
            ep_start = t
            pos = (int(rng.integers(world.shape[0])), int(rng.integers(world.shape[1])))
            tail = []
        color = world.color(pos)
        tail.append(color)
        symbols.append(color)
        # draw every step so runs under different dictionaries stay coupled
        rand_action = ACTIONS[int(rng.integers(len(ACTIONS)))]
        action, pid = _policy(d, tail)
        det = action is not None
        if not det:
            action = rand_action
        records.append(ActionRecord(t, pos, color, action, det, pid))
        tail.append(action)
        symbols.append(action)
        pos = world.move(pos, action)
    if steps:
        episodes.append((ep_start, steps))
        symbols.append(world.color(pos))
    return WalkLog(records, symbols, episodes)


def triple_stats(d: PatternDictionary, log: WalkLog):
    """Candidate triples with their lift and support.

    Data triples (x, a, y) are measured only over steps whose move was random,
    so they describe the image rather than the current policy. Action triples
    (a, x, b) compare P(b | a, x) with P(b | x).
    """
    data_c, data_pre, data_last = Counter(), Counter(), Counter()
    act_c, act_pre, act_ctx = Counter(), Counter(), Counter()
    n_data = 0
    chunks = _split_episodes(log)
    for syms, rand in chunks:
        toks = _typed_tokens(d, syms)
        for i in range(len(toks) - 2):
            a, b, c = toks[i], toks[i + 1], toks[i + 2]
            ta, tb, tc = (_kind(d, t[0]) for t in (a, b, c))
            if ta == "data" and tb == "action" and tc == "data":
                if d.patterns[b[0]].primitive and rand[b[1]]:
                    data_c[(a[0], b[0], c[0])] += 1
                    data_pre[(a[0], b[0])] += 1
                    data_last[c[0]] += 1
                    n_data += 1
            elif ta == "action" and tb == "data" and tc == "action":
                act_c[(a[0], b[0], c[0])] += 1
                act_pre[(a[0], b[0])] += 1
                act_ctx[(b[0], c[0])] += 1
    ctx_tot = Counter()
    for (x, _), v in act_ctx.items():
        ctx_tot[x] += v
    out = []
    for key, n in data_c.items():
        lift = n * n_data / (data_pre[key[:2]] * data_last[key[2]])
        out.append(("data", key, lift, n))
    for key, n in act_c.items():
        a, x, b = key
        lift = (n / act_pre[(a, x)]) / (act_ctx[(x, b)] / ctx_tot[x])
        out.append(("action", key, lift, n))
    return out


def _kind(d, pid):
    return d.patterns[pid].kind


def _split_episodes(log: WalkLog):
    """Per-episode primitive symbols plus a per-symbol random-move flag."""
    rand_iter = iter(not r.deterministic for r in log.records)
    seq, flags = [], []
    for s in log.symbols:
        if s == "|":
            yield seq, flags
            seq, flags = [], []
            continue
        seq.append(s)
        flags.append(next(rand_iter) if s in MOVES else False)
    if seq:
        yield seq, flags


def _typed_tokens(d: PatternDictionary, syms):
    """Greedy tokens paired with the index of their first primitive symbol."""
    toks = d.tokenize(syms)
    out, i = [], 0
    for t in toks:
        out.append((t, i))
        i += len(d.patterns[t].expansion)
    return out


def act_learn(world: GazeWorld, steps: int, d: PatternDictionary, seed: int = 0, episode_len: int = 64):
    """One training epoch: walk, then promote the strongest qualifying triple.

    Data triples are considered before action triples. Returns (dict, log).
    """
    log = walk(world, steps, d, seed, episode_len)
    if not log.records:
        return d, log
    stats = triple_stats(d, log)
    for kind in ("data", "action"):
        ok = [
            (-lift, _order_key(d, key), key, lift)
            for k, key, lift, n in stats
            if k == kind and n >= d.min_support and lift >= d.theta
            and d.find(tuple(s for p in key for s in d.patterns[p].expansion)) is None
        ]
        if ok:
            ok.sort()
            _, _, key, lift = ok[0]
            d.add_composite(key, kind, lift)
            break
    seqs = [seq for seq, _ in _split_episodes(log)]
    _prune_rare(d, _refresh_counts(d, seqs))
    return d, log


def train(world: GazeWorld, steps: int, epochs: int, d: PatternDictionary | None = None, seed: int = 0, episode_len: int = 64):
    d = d if d is not None else PatternDictionary.for_gaze()
    logs = []
    for _ in range(epochs):
        d, log = act_learn(world, steps, d, seed, episode_len)
        logs.append(log)
    return d, logs


def decision_bits(log: WalkLog, n_actions: int = len(ACTIONS)) -> float:
    """Entropy of every random choice, in bits; pattern-driven moves are free."""
    per = math.log2(n_actions)
    return per * sum(not r.deterministic for r in log.records)


def decision_energy(log: WalkLog, ctx: ThermalContext, n_actions: int = len(ACTIONS)) -> float:
    return ctx.kT * LN2 * decision_bits(log, n_actions)


def log_csv(log: WalkLog) -> str:
    lines = ["step,row,col,color,action,deterministic,pattern"]
    for r in log.records:
        lines.append(f"{r.step},{r.pos[0]},{r.pos[1]},{r.color},{r.action},{int(r.deterministic)},{r.pattern or ''}")
    return "\n".join(lines) + "\n"
