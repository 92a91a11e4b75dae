"""Navigation in a continuous resource field.

The robot trades motion cost against resource uptake. A path is scored by

    S = sum mu |x[i+1] - x[i]|^2 / (2 dt)  -  dt * sum w[i] eps V(x[i])

with trapezoid weights w (1/2 at both ends). Setting dS/dx[i] = 0 at an
interior sample gives exactly the update used by ``next_step``, so paths
produced by the integrator are stationary points of S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class TerrainError(ValueError):
    pass


class DomainExit(TerrainError):
    """A query left the region where the field is defined."""


class PlanError(TerrainError):
    def __init__(self, msg, best_miss):
        super().__init__(f"{msg} (best miss {best_miss:.3e})")
        self.best_miss = best_miss


def _vec(x, dim):
    a = np.atleast_1d(np.asarray(x, dtype=float))
    if a.shape != (dim,):
        raise TerrainError(f"expected a point of dimension {dim}, got shape {a.shape}")
    return a


@dataclass
class TerrainField:
    """Resource density V over 1D or 2D space.

    kinds: constant (c), linear (g), harmonic (k, center; V = k|x-c|^2/2),
    gaussian (bumps: list of (amp, center, width)), grid (values, origin, spacing).
    """

    dim: int
    kind: str
    c: float = 0.0
    g: tuple = ()
    k: float = 1.0
    center: tuple = ()
    bumps: tuple = ()
    values: np.ndarray | None = None
    origin: tuple = ()
    spacing: tuple = ()

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise TerrainError("dim must be 1 or 2")
        if self.kind not in ("constant", "linear", "harmonic", "gaussian", "grid"):
            raise TerrainError(f"unknown field kind {self.kind!r}")
        if self.kind == "linear":
            self.g = tuple(_vec(self.g, self.dim))
        if self.kind == "harmonic":
            self.center = tuple(_vec(self.center if self.center else [0.0] * self.dim, self.dim))
        if self.kind == "gaussian":
            self.bumps = tuple((float(a), tuple(_vec(c, self.dim)), float(w)) for a, c, w in self.bumps)
            if any(w <= 0 for _, _, w in self.bumps):
                raise TerrainError("bump widths must be positive")
        if self.kind == "grid":
            v = np.asarray(self.values, dtype=float)
            if self.dim == 1:
                v = v.reshape(1, -1)
            if v.ndim != 2 or v.shape[1] < 2 or (self.dim == 2 and v.shape[0] < 2):
                raise TerrainError("grid too small for interpolation")
            if not np.all(np.isfinite(v)):
                raise TerrainError("grid values must be finite")
            self.values = v
            self.origin = tuple(float(o) for o in self.origin)
            self.spacing = tuple(float(s) for s in self.spacing)
            if any(s <= 0 for s in self.spacing[: self.dim]):
                raise TerrainError("grid spacing must be positive")

    # constructors ----------------------------------------------------------------------

    @classmethod
    def constant(cls, c=0.0, dim=1):
        return cls(dim, "constant", c=float(c))

    @classmethod
    def linear(cls, g, dim=None):
        g = np.atleast_1d(np.asarray(g, dtype=float))
        return cls(dim or len(g), "linear", g=tuple(g))

    @classmethod
    def harmonic(cls, k=1.0, center=None, dim=1):
        return cls(dim, "harmonic", k=float(k), center=tuple(center) if center is not None else ())

    @classmethod
    def gaussian(cls, bumps, dim=1):
        return cls(dim, "gaussian", bumps=tuple(bumps))

    @classmethod
    def grid(cls, values, origin, spacing):
        v = np.asarray(values, dtype=float)
        dim = 1 if v.ndim == 1 or v.shape[0] == 1 else 2
        return cls(dim, "grid", values=v, origin=tuple(origin), spacing=tuple(spacing))

    # evaluation ------------------------------------------------------------------------

    def V(self, x) -> float:
        x = _vec(x, self.dim)
        if self.kind == "constant":
            return self.c
        if self.kind == "linear":
            return float(np.dot(self.g, x))
        if self.kind == "harmonic":
            d = x - np.array(self.center)
            return 0.5 * self.k * float(d @ d)
        if self.kind == "gaussian":
            total = 0.0
            for a, c, w in self.bumps:
                d = x - np.array(c)
                total += a * math.exp(-float(d @ d) / (2 * w * w))
            return total
        return self._bilinear(x)[0]

    def grad(self, x) -> np.ndarray:
        x = _vec(x, self.dim)
        if self.kind == "constant":
            return np.zeros(self.dim)
        if self.kind == "linear":
            return np.array(self.g)
        if self.kind == "harmonic":
            return self.k * (x - np.array(self.center))
        if self.kind == "gaussian":
            out = np.zeros(self.dim)
            for a, c, w in self.bumps:
                d = x - np.array(c)
                out -= a * math.exp(-float(d @ d) / (2 * w * w)) * d / (w * w)
            return out
        return self._bilinear(x)[1]

    def _bilinear(self, x):
        v = self.values
        rows, cols = v.shape
        fx = (x[0] - self.origin[0]) / self.spacing[0]
        if self.dim == 1:
            fy = 0.0
        else:
            fy = (x[1] - self.origin[1]) / self.spacing[1]
        if not (0 <= fx <= cols - 1) or not (0 <= fy <= rows - 1):
            raise DomainExit(f"point {x.tolist()} is outside the grid")
        j = min(int(fx), cols - 2)
        tx = fx - j
        if self.dim == 1:
            a, b = v[0, j], v[0, j + 1]
            return a + tx * (b - a), np.array([(b - a) / self.spacing[0]])
        i = min(int(fy), rows - 2)
        ty = fy - i
        v00, v01, v10, v11 = v[i, j], v[i, j + 1], v[i + 1, j], v[i + 1, j + 1]
        val = (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11)
        gx = ((1 - ty) * (v01 - v00) + ty * (v11 - v10)) / self.spacing[0]
        gy = ((1 - tx) * (v10 - v00) + tx * (v11 - v01)) / self.spacing[1]
        return val, np.array([gx, gy])

    def V_many(self, xs) -> np.ndarray:
        return np.array([self.V(x) for x in np.asarray(xs, dtype=float).reshape(-1, self.dim)])


def load_grid(text: str) -> TerrainField:
    """Grid file: header ``rows cols x0 y0 dx dy`` then row-major values."""
    nums = text.split()
    if len(nums) < 6:
        raise TerrainError("grid header needs rows cols x0 y0 dx dy")
    try:
        rows, cols = int(nums[0]), int(nums[1])
        x0, y0, dx, dy = (float(t) for t in nums[2:6])
        vals = np.array([float(t) for t in nums[6:]])
    except ValueError as e:
        raise TerrainError(f"bad grid file: {e}") from None
    if vals.size != rows * cols:
        raise TerrainError(f"grid expects {rows * cols} values, found {vals.size}")
    return TerrainField.grid(vals.reshape(rows, cols), (x0, y0), (dx, dy))


def dump_grid(f: TerrainField) -> str:
    v = f.values
    oy = f.origin[1] if len(f.origin) > 1 else 0.0
    sy = f.spacing[1] if len(f.spacing) > 1 else 1.0
    head = f"{v.shape[0]} {v.shape[1]} {f.origin[0]!r} {oy!r} {f.spacing[0]!r} {sy!r}\n"
    return head + "".join(" ".join(repr(float(a)) for a in row) + "\n" for row in v)


@dataclass(frozen=True)
class RobotParams:
    mu: float = 1.0
    eps: float = 1.0
    T: float = 1.0
    U0: float = 0.0
    dt: float = 1e-3

    def __post_init__(self):
        if min(self.mu, self.eps, self.T, self.dt) <= 0:
            raise TerrainError("mu, eps, T and dt must be positive")
        if self.U0 < 0:
            raise TerrainError("U0 must be nonnegative")


@dataclass
class Path:
    t0: float
    dt: float
    xs: np.ndarray  # shape (n, dim)

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        if self.xs.ndim == 1:
            self.xs = self.xs[:, None]

    @property
    def n(self) -> int:
        return len(self.xs)

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t1(self) -> float:
        return self.t0 + self.dt * (self.n - 1)


def entropy_functional(path: Path, f: TerrainField, p: RobotParams) -> float:
    if path.n < 2:
        raise TerrainError("path needs at least two samples")
    dx = np.diff(path.xs, axis=0)
    kinetic = p.mu * float(np.sum(dx * dx)) / (2 * path.dt)
    v = f.V_many(path.xs)
    w = np.ones(path.n)
    w[0] = w[-1] = 0.5
    return kinetic - path.dt * p.eps * float(w @ v)


def free_energy(path: Path, f: TerrainField, p: RobotParams) -> float:
    return p.U0 - p.T * entropy_functional(path, f, p)


def next_step(x_prev, x_curr, f: TerrainField, p: RobotParams, dt: float | None = None) -> np.ndarray:
    dt = p.dt if dt is None else dt
    x_prev, x_curr = _vec(x_prev, f.dim), _vec(x_curr, f.dim)
    return -(dt * dt / p.mu) * p.eps * f.grad(x_curr) + 2 * x_curr - x_prev


def _scalar_grad(f: TerrainField):
    """Plain-float gradient for 1D analytic fields, or None."""
    if f.dim != 1:
        return None
    if f.kind == "constant":
        return lambda x: 0.0
    if f.kind == "linear":
        g = float(f.g[0])
        return lambda x: g
    if f.kind == "harmonic":
        k, c = f.k, float(f.center[0])
        return lambda x: k * (x - c)
    return None


def integrate(x0, x1, n_steps: int, f: TerrainField, p: RobotParams, t0=0.0, dt=None) -> Path:
    """Roll the discrete rule forward from the first two samples."""
    dt = p.dt if dt is None else dt
    xs = np.empty((n_steps + 1, f.dim))
    xs[0], xs[1] = _vec(x0, f.dim), _vec(x1, f.dim)
    sg = _scalar_grad(f)
    if sg is not None:
        # same arithmetic as next_step, on floats
        c = dt * dt / p.mu
        out = [float(xs[0, 0]), float(xs[1, 0])]
        a, b = out
        for _ in range(1, n_steps):
            a, b = b, -c * p.eps * sg(b) + 2 * b - a
            out.append(b)
        xs[:, 0] = out
        return Path(t0, dt, xs)
    for i in range(1, n_steps):
        xs[i + 1] = next_step(xs[i - 1], xs[i], f, p, dt)
    return Path(t0, dt, xs)


def reverse(path: Path) -> Path:
    return Path(path.t0, path.dt, path.xs[::-1].copy())


def flow_invariant(path: Path, f: TerrainField, p: RobotParams) -> np.ndarray:
    """mu v^2/2 + eps V at interior samples, v by centered difference."""
    if path.n < 3:
        raise TerrainError("flow invariant needs at least three samples")
    v = (path.xs[2:] - path.xs[:-2]) / (2 * path.dt)
    ke = 0.5 * p.mu * np.sum(v * v, axis=1)
    return ke + p.eps * f.V_many(path.xs[1:-1])


def max_drift(series) -> float:
    """Largest relative departure from the first value (absolute when that is 0)."""
    e = np.asarray(series, dtype=float)
    scale = abs(e[0]) if e[0] != 0 else 1.0
    return float(np.max(np.abs(e - e[0])) / scale)


# -- planning ---------------------------------------------------------------------------


@dataclass
class PlanResult:
    path: Path
    iterations: int
    miss: float
    flow: np.ndarray = field(repr=False, default=None)


def _steps_for(t0, t1, dt):
    if not t1 > t0:
        raise TerrainError("t1 must exceed t0")
    n = max(1, int(round((t1 - t0) / dt)))
    return n, (t1 - t0) / n


def plan(x0, x1, t0, t1, f: TerrainField, p: RobotParams, tol=1e-6, max_iter=100) -> PlanResult:
    """Shoot on the first step until the rolled-out path lands on ``x1``.

    The terminal miss is differenced against a small first-step nudge per
    coordinate (a secant step), which is exact for linear-gradient fields.
    """
    x0, x1 = _vec(x0, f.dim), _vec(x1, f.dim)
    n, dt = _steps_for(t0, t1, p.dt)
    if n == 1:
        path = Path(t0, dt, np.stack([x0, x1]))
        return PlanResult(path, 0, 0.0)

    def shoot(first):
        return integrate(x0, first, n, f, p, t0, dt)

    first = x0 + (x1 - x0) / n
    best = None
    h = 1e-6 * max(1.0, float(np.max(np.abs(x1 - x0))))
    for it in range(1, max_iter + 1):
        try:
            path = shoot(first)
        except DomainExit:
            raise PlanError("shooting left the field domain", best[0] if best else math.inf) from None
        miss_vec = path.xs[-1] - x1
        miss = float(np.max(np.abs(miss_vec)))
        if best is None or miss < best[0]:
            best = (miss, path)
        if miss <= tol:
            return PlanResult(path, it, miss, flow_invariant(path, f, p) if path.n >= 3 else None)
        jac = np.empty((f.dim, f.dim))
        for c in range(f.dim):
            bumped = first.copy()
            bumped[c] += h
            jac[:, c] = (shoot(bumped).xs[-1] - path.xs[-1]) / h
        try:
            first = first - np.linalg.solve(jac, miss_vec)
        except np.linalg.LinAlgError:
            break
    raise PlanError("shooting did not converge", best[0])


def plan_legs(waypoints, t_legs, f: TerrainField, p: RobotParams, **kw) -> list[PlanResult]:
    """Chain plans so each leg starts where the previous one ended."""
    if len(t_legs) != len(waypoints) - 1:
        raise TerrainError("need one duration per leg")
    out, t = [], 0.0
    for a, b, dur in zip(waypoints, waypoints[1:], t_legs):
        out.append(plan(a, b, t, t + dur, f, p, **kw))
        t += dur
    return out


def harmonic_boundary_solution(x0, x1, t0, t1, omega, t):
    """Closed form of x'' = -omega^2 x through (t0, x0) and (t1, x1)."""
    s = math.sin(omega * (t1 - t0))
    t = np.asarray(t, dtype=float)
    return (x0 * np.sin(omega * (t1 - t)) + x1 * np.sin(omega * (t - t0))) / s


BRUTE_MAX_INTERIOR = 5
BRUTE_MAX_CANDIDATES = 9


def brute_force_path(x0, x1, t0, t1, f: TerrainField, p: RobotParams, candidates) -> tuple[Path, float]:
    """Exhaustive minimizer of S over candidate positions at each interior sample.

    ``candidates`` holds one list of points per interior sample; the time step
    is (t1 - t0) / (len(candidates) + 1).
    """
    m = len(candidates)
    if m == 0 or m > BRUTE_MAX_INTERIOR or any(not 0 < len(c) <= BRUTE_MAX_CANDIDATES for c in candidates):
        raise TerrainError(f"instance too large: at most {BRUTE_MAX_INTERIOR} samples of {BRUTE_MAX_CANDIDATES} candidates")
    x0, x1 = _vec(x0, f.dim), _vec(x1, f.dim)
    cands = [np.array([_vec(c, f.dim) for c in cs]) for cs in candidates]
    vals = [f.V_many(c) for c in cands]
    dt = (t1 - t0) / (m + 1)
    grids = np.meshgrid(*(np.arange(len(c)) for c in cands), indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)  # lexicographic order
    pts = np.stack([cands[i][idx[:, i]] for i in range(m)], axis=1)  # (K, m, dim)
    full = np.concatenate([np.broadcast_to(x0, (len(idx), 1, f.dim)), pts, np.broadcast_to(x1, (len(idx), 1, f.dim))], axis=1)
    kin = np.sum(np.diff(full, axis=1) ** 2, axis=(1, 2))
    pot = 0.5 * (f.V(x0) + f.V(x1)) + sum(vals[i][idx[:, i]] for i in range(m))
    s = p.mu * kin / (2 * dt) - dt * p.eps * pot
    best = int(np.argmin(s))
    return Path(t0, dt, full[best].copy()), float(s[best])


def path_csv(path: Path, f: TerrainField, p: RobotParams) -> str:
    cols = ["t", "x"] + (["y"] if path.dim == 2 else []) + ["E_flow"]
    flow = flow_invariant(path, f, p) if path.n >= 3 else []
    lines = [",".join(cols)]
    for i, t in enumerate(path.times):
        e = repr(float(flow[i - 1])) if 0 < i < path.n - 1 else ""
        lines.append(",".join([repr(float(t))] + [repr(float(c)) for c in path.xs[i]] + [e]))
    return "\n".join(lines) + "\n"
