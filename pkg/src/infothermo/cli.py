"""Scenario runner.

    infothermo <subcommand> --config PATH --seed N --out DIR

Subcommands: thermo-table, refine, atm-run, learn, terrain.  Each writes its
trace files plus ``summary.json`` into DIR.  Exit status: 0 ok, 2 config
error, 3 runtime or domain error, 4 machine died before ``min_steps``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import atm, learner, refinery, terrain, thermo
from .config import Config, ConfigError
from .rng import stream

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_DIED = 0, 2, 3, 4


class Died(Exception):
    pass


def _write(out: Path, name: str, text: str) -> None:
    (out / name).write_text(text, encoding="utf-8", newline="\n")


def _summary(out: Path, body: dict) -> None:
    _write(out, "summary.json", json.dumps(body, indent=2, sort_keys=True) + "\n")


def _wrap(err_type, fn, *a, **kw):
    """Turn a library ValueError raised while reading config values into ConfigError."""
    try:
        return fn(*a, **kw)
    except err_type as e:
        raise ConfigError(str(e)) from None


# -- thermo-table ------------------------------------------------------------------------


def thermo_table(cfg: Config, seed: int, out: Path) -> dict:
    s = "thermo"
    ctx = _wrap(ValueError, thermo.ThermalContext, cfg.float(s, "kT", 1.0))
    r_start, r_stop, r_step = cfg.float(s, "r_start", 0.5), cfg.float(s, "r_stop", 0.99), cfg.float(s, "r_step", 0.07)
    ps = cfg.floats(s, "p", [0.5])
    extra = cfg.floats(s, "r_extra", [])
    if r_step <= 0 or not 0 <= r_start <= r_stop <= 1:
        raise ConfigError("[thermo] needs 0 <= r_start <= r_stop <= 1 and r_step > 0")
    rs = [r_start + i * r_step for i in range(int(math.floor((r_stop - r_start) / r_step + 1e-9)) + 1)]
    rs = sorted(set(round(r, 12) for r in rs + extra))
    if any(not 0 <= r <= 1 for r in rs) or any(not 0 < p < 1 for p in ps):
        raise ConfigError("[thermo] R must lie in [0, 1] and P in (0, 1)")
    rows = ["R,P,Q,expected_yield,kl_gain,generator_cost,conjugacy_residual"]
    worst = 0.0
    for p in ps:
        for r in rs:
            belief = thermo.Belief(r)
            q = thermo.optimal_strategy(belief)
            eng = thermo.EngineConfig(prior=(p, 1 - p), strategy=q)
            y = thermo.expected_yield(ctx, eng, belief)
            kl = ctx.kT * thermo.kl_gain(belief.pair, (p, 1 - p))
            gen = thermo.generator_cost(ctx, belief)
            # best engine on a fair prior plus the generator cost for the same R
            resid = ctx.kT * thermo.kl_gain(belief.pair, (0.5, 0.5)) + gen - thermo.bit_energy(ctx)
            worst = max(worst, abs(resid))
            rows.append(",".join(repr(float(v)) for v in (r, p, q[0], y, kl, gen, resid)))
    _write(out, "thermo_table.csv", "\n".join(rows) + "\n")
    return {"rows": len(rows) - 1, "max_conjugacy_residual": worst, "kT": ctx.kT}


# -- refine ------------------------------------------------------------------------------


def _refiner(cfg: Config, s: str) -> refinery.StreamRefiner:
    kind = cfg.str(s, "kind", "identity", choices=refinery.StreamRefiner.KINDS)
    if kind != "table":
        return refinery.StreamRefiner(kind)
    k = cfg.int(s, "k")
    bits = cfg.str(s, "table")
    if len(bits) != 1 << k or set(bits) - {"0", "1"}:
        raise ConfigError(f"[{s}] table must be {1 << k} bits, indexed by the window read as a little-endian number")
    lookup = {}
    for idx, b in enumerate(bits):
        lookup[tuple((idx >> i) & 1 for i in range(k))] = int(b)
    return _wrap(refinery.RefineryError, refinery.StreamRefiner, "table", k=k, u=lookup)


def refine(cfg: Config, seed: int, out: Path) -> dict:
    s = "refine"
    if cfg.has(s, "samples"):
        records = _wrap(refinery.RefineryError, refinery.parse_bits, cfg.read(s, "samples"))
    else:
        template = cfg.str(s, "template")
        if not template or set(template) - {"0", "1"}:
            raise ConfigError("[refine] template must be a bit string")
        n, flip = cfg.int(s, "n_samples", 32), cfg.float(s, "noise", 0.1)
        rng = stream(seed, "refinery")
        base = np.array([int(c) for c in template])
        records = [list(map(int, base ^ (rng.random(len(base)) < flip))) for _ in range(n)]
    widths = {len(r) for r in records}
    if len(widths) != 1 or widths.pop() < 3:
        raise ConfigError("[refine] samples must share one length of at least 3")
    samples = [refinery.RegisterVector(tuple(r)) for r in records]
    res = refinery.optimize_trajectory(
        samples, max_len=cfg.int(s, "max_len", 3), budget=cfg.int(s, "budget", 4000),
        seed=seed, restarts=cfg.int(s, "restarts", 4),
    )
    cov = refinery.sample_covariance(samples)
    _write(out, "trajectory.txt", refinery.dumps_trajectory(res.trajectory))
    _write(out, "history.csv", "improvement,F\n" + "".join(f"{i},{f!r}\n" for i, f in enumerate(res.history)))
    _write(out, "sorted.txt", refinery.format_bits(refinery.run_trajectory(v, res.trajectory).bits for v in samples))
    body = {
        "samples": len(samples),
        "trace_Q": float(np.trace(cov)),
        "F_initial": refinery.avg_objective(cov, ()),
        "F_final": res.objective,
        "Z_mean_initial": refinery.avg_defect(cov, ()),
        "Z_mean_final": refinery.avg_defect(cov, res.trajectory),
        "trajectory_length": len(res.trajectory),
    }
    if cfg.has("stream"):
        r = _refiner(cfg, "stream")
        spec = _world_spec(cfg, "stream")
        n = cfg.int("stream", "length", 10_000)
        world = atm.make_world(spec, seed)
        xs = [world.peek(i) for i in range(n)]
        eps = refinery.refine_stream(r, xs)
        if refinery.invert_refinement(r, eps) != xs:
            raise RuntimeError("refiner failed to invert its own output")
        q = refinery.purity(eps, warmup=r.k)
        _write(out, "stream.txt", refinery.format_bits([xs, eps]))
        body.update(stream_purity=q, stream_energy_rate_bits=1.0 - refinery.binary_entropy_bits(q))
    return body


# -- atm-run -----------------------------------------------------------------------------


def _world_spec(cfg: Config, s: str) -> atm.WorldSpec:
    kind = cfg.str(s, "world", cfg.str(s, "kind", "constant") if s == "world" else "band")
    kw = dict(kind=kind, dim=cfg.int(s, "dim", 2 if kind == "image" else 1))
    if cfg.has(s, "value"):
        kw["value"] = cfg.int(s, "value")
    for key in ("p", "mean_band", "noise"):
        if cfg.has(s, key):
            kw[key] = cfg.float(s, key)
    if kind == "image":
        img = learner.parse_image(cfg.read(s, "image")) if cfg.has(s, "image") else None
        if img is None:
            raise ConfigError(f"[{s}] image worlds need an image file")
        kw["grid"] = tuple(tuple(int(b) for b in row) for row in img.grid)
    return _wrap(atm.AtmError, atm.WorldSpec, **kw)


def _vector(text: str):
    vals = [int(t) for t in text.split(",") if t.strip()]
    return vals[0] if len(vals) == 1 else tuple(vals)


def atm_config(cfg: Config) -> atm.AtmConfig:
    q = cfg.float("engine", "q", 0.95)
    p = cfg.float("engine", "prior", 0.5)
    engine = _wrap(ValueError, thermo.EngineConfig, prior=(p, 1 - p), strategy=(q, 1 - q))
    table = {}
    for ctx_bits, vec in cfg.items("actuator"):
        if set(ctx_bits) - {"0", "1"} or set(vec) - {"0", "1"}:
            raise ConfigError(f"[actuator] {ctx_bits} = {vec}: keys and values are bit strings")
        table[tuple(int(c) for c in ctx_bits)] = tuple(int(c) for c in vec)
    moves = {}
    for vec, disp in cfg.items("moves"):
        try:
            moves[tuple(int(c) for c in vec)] = _vector(disp)
        except ValueError:
            raise ConfigError(f"[moves] {vec} = {disp}: bad displacement") from None
    m = "machine"
    try:
        pattern = tuple(_vector(t) for t in cfg.str(m, "default_pattern", "1").split(";"))
    except ValueError:
        raise ConfigError("[machine] default_pattern must be ';'-separated moves") from None
    capacity = cfg.float(m, "capacity", None)
    return _wrap(
        atm.AtmError,
        atm.AtmConfig,
        refiner=_refiner(cfg, "refiner"),
        engine=engine,
        decision_table=table,
        action_moves=moves,
        default_pattern=pattern,
        overhead_bits=cfg.float(m, "overhead", 0.0),
        initial_balance_bits=cfg.float(m, "initial_balance", 100.0),
        capacity_bits=capacity,
    )


def atm_run(cfg: Config, seed: int, out: Path) -> dict:
    conf = atm_config(cfg)
    spec = _world_spec(cfg, "world")
    steps = cfg.int("machine", "steps", 10_000)
    min_steps = cfg.int("machine", "min_steps", steps)
    res = atm.run(conf, atm.make_world(spec, seed), steps, seed=seed)
    _write(out, "trace.csv", atm.trace_csv(res.trace))
    body = dict(res.summary)
    body["predicted_net_per_step"] = _predicted_rate(conf, res.summary)
    _summary(out, body)
    if res.summary["steps"] < min_steps:
        raise Died(f"machine died at step {res.summary['steps']} before min_steps={min_steps}")
    return body


def _predicted_rate(conf: atm.AtmConfig, summary: dict):
    """Per-step net from the observed purity, when the machine has an engine ledger."""
    q = summary.get("purity")
    if q is None:
        return None
    (p1, p2), (q1, q2) = conf.engine.prior, conf.engine.strategy
    gain = q * math.log2(q1 / p1) + (1 - q) * math.log2(q2 / p2)
    return gain - (1 - q) * conf.decision_width - conf.overhead_bits


# -- learn -------------------------------------------------------------------------------


def learn(cfg: Config, seed: int, out: Path) -> dict:
    s = "learn"
    mode = cfg.str(s, "mode", "gaze", choices=("gaze", "pairs"))
    kw = dict(theta=cfg.float(s, "theta", 3.0), phi=cfg.float(s, "phi", 1e-4), min_support=cfg.int(s, "min_support", 5))
    if mode == "pairs":
        tokens = cfg.read(s, "stream").split()
        alphabet = sorted(set(tokens))
        d = learner.PatternDictionary.from_alphabet(alphabet, **kw)
        learner.learn_pairs(tokens, d, passes=cfg.int(s, "passes", 3))
        _write(out, "dictionary.json", d.to_json())
        return {"mode": mode, "tokens": len(tokens), "promoted": [d.label(p) for p in d.history if p in d.patterns]}
    if cfg.has(s, "image"):
        world = _wrap(learner.LearnerError, learner.parse_image, cfg.read(s, "image"))
    else:
        rows, cols, spacing = cfg.int(s, "rows", 16), cfg.int(s, "cols", 16), cfg.int(s, "spacing", 4)
        if min(rows, cols, spacing) < 1:
            raise ConfigError("[learn] rows, cols and spacing must be positive")
        world = learner.GazeWorld.horizontal_lines(rows, cols, spacing)
    steps, epochs = cfg.int(s, "steps", 20_000), cfg.int(s, "epochs", 3)
    ep_len, eval_steps = cfg.int(s, "episode_len", 64), cfg.int(s, "eval_steps", 10_000)
    d = learner.PatternDictionary.for_gaze(**kw)
    d, logs = learner.train(world, steps, epochs, d, seed=seed, episode_len=ep_len)
    trained = learner.walk(world, eval_steps, d, seed=seed, episode_len=ep_len)
    base = learner.walk(world, eval_steps, learner.PatternDictionary.for_gaze(**kw), seed=seed, episode_len=ep_len)
    _write(out, "dictionary.json", d.to_json())
    _write(out, "walk.csv", learner.log_csv(trained))
    _write(out, "image.txt", learner.format_image(world))
    tb, bb = learner.decision_bits(trained), learner.decision_bits(base)
    return {
        "mode": mode,
        "promoted": [d.label(p) for p in d.history if p in d.patterns],
        "first_promotion": d.label(d.history[0]) if d.history else None,
        "deterministic_per_epoch": [lg.deterministic_count for lg in logs],
        "deterministic_fraction_black": trained.deterministic_fraction(learner.BLACK),
        "decision_bits_trained": tb,
        "decision_bits_untrained": bb,
        "decision_ratio": tb / bb if bb else None,
    }


# -- terrain -----------------------------------------------------------------------------


def _field(cfg: Config) -> terrain.TerrainField:
    s = "field"
    kind = cfg.str(s, "kind", "constant", choices=("constant", "linear", "harmonic", "gaussian", "grid"))
    dim = cfg.int(s, "dim", 1)
    if kind == "grid":
        return _wrap(terrain.TerrainError, terrain.load_grid, cfg.read(s, "file"))
    if kind == "constant":
        return _wrap(terrain.TerrainError, terrain.TerrainField.constant, cfg.float(s, "c", 0.0), dim)
    if kind == "linear":
        return _wrap(terrain.TerrainError, terrain.TerrainField.linear, cfg.floats(s, "g"), dim)
    if kind == "harmonic":
        return _wrap(terrain.TerrainError, terrain.TerrainField.harmonic, cfg.float(s, "k", 1.0), cfg.floats(s, "center", None), dim)
    bumps = []
    for item in cfg.str(s, "bumps").split(";"):
        try:
            amp, centre, width = item.split(":")
            bumps.append((float(amp), [float(t) for t in centre.split(",")], float(width)))
        except ValueError:
            raise ConfigError(f"[field] bump {item.strip()!r} is not amp:center:width") from None
    return _wrap(terrain.TerrainError, terrain.TerrainField.gaussian, bumps, dim)


def terrain_run(cfg: Config, seed: int, out: Path) -> dict:
    f = _field(cfg)
    r = "robot"
    params = _wrap(
        terrain.TerrainError, terrain.RobotParams,
        mu=cfg.float(r, "mu", 1.0), eps=cfg.float(r, "eps", 1.0), T=cfg.float(r, "T", 1.0),
        U0=cfg.float(r, "U0", 0.0), dt=cfg.float(r, "dt", 1e-3),
    )
    p = "plan"
    waypoints = [cfg.floats(p, "start")]
    if cfg.has(p, "via"):
        waypoints += [[float(t) for t in w.split(",")] for w in cfg.str(p, "via").split(";")]
    waypoints.append(cfg.floats(p, "goal"))
    if any(len(w) != f.dim for w in waypoints):
        raise ConfigError(f"[plan] points must have {f.dim} coordinates")
    durations = cfg.floats(p, "durations", None)
    if durations is None:
        durations = [cfg.float(p, "t1", 1.0) - cfg.float(p, "t0", 0.0)]
    if len(durations) != len(waypoints) - 1 or min(durations) <= 0:
        raise ConfigError("[plan] need one positive duration per leg")
    legs = terrain.plan_legs(waypoints, durations, f, params, tol=cfg.float(p, "tol", 1e-6), max_iter=cfg.int(p, "max_iter", 100))
    S, drifts, lines = 0.0, [], []
    for k, leg in enumerate(legs):
        S += terrain.entropy_functional(leg.path, f, params)
        if leg.path.n >= 3:
            drifts.append(terrain.max_drift(terrain.flow_invariant(leg.path, f, params)))
        body = terrain.path_csv(leg.path, f, params).splitlines()
        lines += body if k == 0 else body[1:]
    _write(out, "path.csv", "\n".join(lines) + "\n")
    return {
        "legs": len(legs),
        "S": S,
        "F": params.U0 - params.T * S,
        "max_flow_drift": max(drifts) if drifts else 0.0,
        "iterations": [leg.iterations for leg in legs],
        "max_miss": max(leg.miss for leg in legs),
    }


COMMANDS = {
    "thermo-table": thermo_table,
    "refine": refine,
    "atm-run": atm_run,
    "learn": learn,
    "terrain": terrain_run,
}

RUNTIME_ERRORS = (
    atm.AtmError,
    refinery.RefineryError,
    learner.LearnerError,
    terrain.TerrainError,
    ValueError,
    RuntimeError,
)


def run_scenario(command: str, config: Config, seed: int, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    body = COMMANDS[command](config, seed, out)
    if command != "atm-run":
        body = {"command": command, "seed": seed, **body}
        _summary(out, body)
    return body


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="infothermo", description="Information-thermodynamics scenario runner.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="scenario file (key = value with [section] headers)")
    ap.add_argument("--seed", type=int, default=0, help="64-bit scenario seed")
    ap.add_argument("--out", default="out", help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = Config.load(args.config)
        run_scenario(args.command, cfg, args.seed, Path(args.out))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Died as e:
        print(f"died: {e}", file=sys.stderr)
        return EXIT_DIED
    except RUNTIME_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
