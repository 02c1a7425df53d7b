"""Grid discretization of the two-slope energy and its minimizers.

A :class:`GridField` stores one slope bit per cell of an M x K grid on
(-L, 0) x (0, 1); column j carries the profile u_j(y) obtained by cumulative
sums with u_j(0) = 0.  The grid energy uses finite differences between
column centres for d(u)/d(x1), the horizontal interface length for the
surface term and the exact H^{1/2} seminorm of the last column's piecewise
affine trace for the austenite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constructions import MicrostructureField
from .energy import EnergyBreakdown, h12_neumann, h12_periodic
from .params import NEUMANN, PERIODIC, ModelParams, ParameterError
from .trace import TraceProfile

MAX_ANNEAL_CELLS = 4096
MAX_EXHAUSTIVE_STATES = 4096

# annealing constants: start and end temperatures relative to the start energy
T_START = 2e-2
T_END = 1e-5
PROPOSAL_WEIGHTS = (0.3, 0.3, 0.1, 0.1, 0.2)  # move interface, flip/swap, block, copy column, column block


def grid_theta(theta: float, K: int, bc: str) -> float:
    """Slope offset used on a K-row grid; periodic columns need round(theta K) minority cells."""
    return round(theta * K) / K if bc == PERIODIC else theta


@dataclass(frozen=True, eq=False)
class GridField:
    theta: float
    L: float
    bits: np.ndarray  # (M, K) int8, 1 where d(u)/d(x2) = theta - 1
    bc: str = NEUMANN
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        b = np.asarray(self.bits)
        if b.ndim != 2 or b.size == 0 or not np.all((b == 0) | (b == 1)):
            raise ParameterError("bits must be a non-empty 2D array of zeros and ones")
        object.__setattr__(self, "bits", b.astype(np.int8))
        if self.bc == PERIODIC:
            want = round(self.theta * self.K)
            if np.any(b.sum(axis=1) != want):
                raise ParameterError(f"periodic grid columns need exactly {want} minority cells")

    @property
    def M(self) -> int:
        return self.bits.shape[0]

    @property
    def K(self) -> int:
        return self.bits.shape[1]

    @property
    def dx(self) -> float:
        return self.L / self.M

    @property
    def slope_theta(self) -> float:
        return grid_theta(self.theta, self.K, self.bc)

    def u(self) -> np.ndarray:
        """Nodal values u_j(k/K), shape (M, K + 1)."""
        return _profiles(self.bits, self.slope_theta)

    def trace(self) -> TraceProfile:
        return TraceProfile(np.linspace(0.0, 1.0, self.K + 1), self.u()[-1])

    def interface_count(self) -> int:
        return int(np.count_nonzero(np.diff(self.bits, axis=1)))

    def energy(self, params: ModelParams) -> EnergyBreakdown:
        return grid_energy(self, params)


def _profiles(bits: np.ndarray, theta: float) -> np.ndarray:
    K = bits.shape[-1]
    steps = (theta - bits) / K
    zero = np.zeros(bits.shape[:-1] + (1,))
    return np.concatenate((zero, np.cumsum(steps, axis=-1)), axis=-1)


def _pair_elastic(ua: np.ndarray, ub: np.ndarray, dx: float, K: int) -> np.ndarray:
    """dx * int ((ub - ua) / dx)^2 dy for piecewise affine columns (last axis = nodes)."""
    d = (ub - ua) / dx
    return dx * np.sum(d[..., :-1] ** 2 + d[..., :-1] * d[..., 1:] + d[..., 1:] ** 2, axis=-1) / (3.0 * K)


def _austenite(u_last: np.ndarray, bc: str) -> float:
    tr = TraceProfile(np.linspace(0.0, 1.0, u_last.size), np.asarray(u_last, dtype=float))
    return h12_periodic(tr) if bc == PERIODIC else h12_neumann(tr)


def _check(params: ModelParams, g: GridField) -> None:
    if params.bc != g.bc or params.theta != g.theta or abs(params.L - g.L) > 1e-12 * params.L:
        raise ParameterError("grid field and params disagree on bc, theta or L")


def grid_energy(g: GridField, params: ModelParams) -> EnergyBreakdown:
    _check(params, g)
    u = g.u()
    elastic = float(np.sum(_pair_elastic(u[:-1], u[1:], g.dx, g.K))) if g.M > 1 else 0.0
    surface = params.eps * g.dx * g.interface_count()
    aus = params.mu * _austenite(u[-1], g.bc)
    out = EnergyBreakdown({"martensite_elastic": elastic, "surface": surface,
                           "austenite_optimal": aus, "total": elastic + surface + aus})
    out.check_finite()
    return out


# -- projection ----------------------------------------------------------------------


def project_field(fld: MicrostructureField, M: int, K: int) -> GridField:
    """Grid field whose cumulative minority fraction rounds that of ``fld`` at column centres.

    With m(y) = theta y - u(x, y) nondecreasing and 1-Lipschitz, the rounded
    values K m(k/K) step by 0 or 1, so the bits are well defined and periodic
    columns keep exactly round(theta K) minority cells.
    """
    if fld.height != 1.0:
        raise ParameterError("projection needs a field on the unit-height strip")
    xc = -fld.L + (np.arange(M) + 0.5) * fld.L / M
    yk = np.arange(K + 1) / K
    X, Y = np.meshgrid(xc, yk, indexing="ij")
    m = fld.theta * Y - fld.evaluate(X, Y)
    counts = np.rint(K * m + 1e-9)
    counts[:, 0] = 0
    bits = np.clip(np.diff(counts, axis=1), 0, 1).astype(np.int8)
    if fld.bc == PERIODIC:
        want = round(fld.theta * K)
        for j in range(M):
            _fix_count(bits[j], want)
    return GridField(fld.theta, fld.L, bits, fld.bc, {"projected": fld.info.get("kind", "field")})


def _fix_count(col: np.ndarray, want: int) -> None:
    # rounding at y = 1 can leave one cell too many or too few
    while col.sum() > want:
        col[np.flatnonzero(col)[-1]] = 0
    while col.sum() < want:
        col[np.flatnonzero(col == 0)[-1]] = 1


# -- annealing -----------------------------------------------------------------------


def _stripes(K: int, n_runs: int, count: int, offset: int = 0) -> np.ndarray:
    col = np.zeros(K, dtype=np.int8)
    if count <= 0 or n_runs <= 0:
        return col
    n_runs = min(n_runs, count)
    sizes = np.full(n_runs, count // n_runs)
    sizes[: count % n_runs] += 1
    for r, size in enumerate(sizes):
        start = offset + (r * K) // n_runs
        col[np.arange(start, start + size) % K] = 1
    return col


def _starts(M: int, K: int, theta: float, bc: str, rng: np.random.Generator) -> list[np.ndarray]:
    count = round(theta * K)
    out = []
    if bc == NEUMANN:
        out.append(np.zeros((M, K), dtype=np.int8))
    runs = [2**k for k in range(K.bit_length()) if 2**k < count] + [max(count, 1)]
    for n in runs:
        out.append(np.tile(_stripes(K, n, count), (M, 1)))
    rand = np.zeros((M, K), dtype=np.int8)
    for j in range(M):
        rand[j, rng.choice(K, size=count, replace=False)] = 1
    out.append(rand)
    return out


class _Chain:
    """Energy bookkeeping for single-column updates."""

    def __init__(self, bits: np.ndarray, params: ModelParams, L: float, theta_k: float):
        self.bits = bits.copy()
        self.p = params
        self.M, self.K = bits.shape
        self.dx = L / self.M
        self.th = theta_k
        self.u = _profiles(self.bits, theta_k)
        self.pair = (_pair_elastic(self.u[:-1], self.u[1:], self.dx, self.K)
                     if self.M > 1 else np.zeros(0))
        self.ifaces = np.count_nonzero(np.diff(self.bits, axis=1), axis=1)
        self.aus = params.mu * _austenite(self.u[-1], params.bc)
        self.total = self._total(self.pair.sum(), self.ifaces.sum(), self.aus)

    def _total(self, elastic: float, ifaces: int, aus: float) -> float:
        return float(elastic + self.p.eps * self.dx * ifaces + aus)

    def propose(self, j0: int, cols: np.ndarray):
        """Energy change and bookkeeping for replacing columns j0, j0 + 1, ... by ``cols``."""
        n = cols.shape[0]
        uj = _profiles(cols, self.th)
        lo, hi = max(j0 - 1, 0), min(j0 + n, self.M - 1)
        U = self.u[lo:hi + 1].copy()
        U[j0 - lo:j0 - lo + n] = uj
        pair = _pair_elastic(U[:-1], U[1:], self.dx, self.K)
        dpair = float(pair.sum() - self.pair[lo:hi].sum())
        nif = np.count_nonzero(np.diff(cols, axis=1), axis=1)
        aus = self.aus
        if j0 + n == self.M:
            aus = self.p.mu * _austenite(uj[-1], self.p.bc)
        dif = int(nif.sum() - self.ifaces[j0:j0 + n].sum())
        delta = dpair + self.p.eps * self.dx * dif + (aus - self.aus)
        return delta, (j0, cols, uj, lo, pair, nif, aus)

    def accept(self, move, delta: float) -> None:
        j0, cols, uj, lo, pair, nif, aus = move
        n = cols.shape[0]
        self.bits[j0:j0 + n] = cols
        self.u[j0:j0 + n] = uj
        self.pair[lo:lo + pair.size] = pair
        self.ifaces[j0:j0 + n] = nif
        self.aus = aus
        self.total += delta

    def refresh(self) -> None:
        """Recompute the total from scratch to shed accumulated rounding."""
        self.total = self._total(self.pair.sum(), self.ifaces.sum(), self.aus)


def _propose(bits: np.ndarray, bc: str, rng: np.random.Generator) -> tuple[int, np.ndarray] | None:
    """First column index and replacement columns, or None for a void proposal."""
    M, K = bits.shape
    kind = rng.choice(5, p=PROPOSAL_WEIGHTS)
    if kind == 4:
        # the same block change on a run of neighbouring columns
        j0, j1 = sorted(rng.integers(0, M, size=2))
        cols = bits[j0:j1 + 1].copy()
        if bc == NEUMANN:
            a, b = sorted(rng.integers(0, K + 1, size=2))
            if a == b:
                return None
            cols[:, a:b] ^= 1
        else:
            cols = np.roll(cols, 1 if rng.random() < 0.5 else -1, axis=1)
        return (int(j0), cols) if not np.array_equal(cols, bits[j0:j1 + 1]) else None
    j = int(rng.integers(M))
    col = bits[j].copy()
    if kind == 0:
        # move one interface by one row
        edges = np.flatnonzero(np.diff(col))
        if edges.size == 0:
            return None
        k = int(rng.choice(edges))
        if bc == NEUMANN:
            col[k + rng.integers(2)] ^= 1
        else:
            col[k], col[k + 1] = col[k + 1], col[k]
    elif kind == 1:
        if bc == NEUMANN:
            col[rng.integers(K)] ^= 1
        else:
            ones, zeros = np.flatnonzero(col), np.flatnonzero(col == 0)
            if ones.size == 0 or zeros.size == 0:
                return None
            a, b = rng.choice(ones), rng.choice(zeros)
            col[a], col[b] = 0, 1
    elif kind == 2:
        if bc == NEUMANN:
            a, b = sorted(rng.integers(0, K + 1, size=2))
            if a == b:
                return None
            col[a:b] ^= 1
        else:
            col = np.roll(col, 1 if rng.random() < 0.5 else -1)
    else:
        if M == 1:
            return None
        k = j - 1 if (j == M - 1 or (j > 0 and rng.random() < 0.5)) else j + 1
        col = bits[k].copy()
    if np.array_equal(col, bits[j]):
        return None
    return j, col[None, :]


def anneal(params: ModelParams, start: np.ndarray, steps: int, rng: np.random.Generator) -> tuple[np.ndarray, float, int]:
    """Metropolis chain with geometric cooling; returns best bits, energy and improvement count."""
    th_k = grid_theta(params.theta, start.shape[1], params.bc)
    chain = _Chain(start, params, params.L, th_k)
    best_bits, best = chain.bits.copy(), chain.total
    scale = max(abs(chain.total), 1e-300)
    t0, t1 = T_START * scale, T_END * scale
    improvements = 0
    for step in range(steps):
        temp = t0 * (t1 / t0) ** (step / max(steps - 1, 1))
        prop = _propose(chain.bits, params.bc, rng)
        if prop is None:
            continue
        delta, move = chain.propose(*prop)
        if delta <= 0 or rng.random() < math.exp(-delta / temp):
            chain.accept(move, delta)
            if chain.total < best - 1e-15 * scale:
                best, best_bits = chain.total, chain.bits.copy()
                improvements += 1
        if step % 1000 == 999:
            chain.refresh()
    return best_bits, best, improvements


# -- exhaustive restricted class --------------------------------------------------


def restricted_columns(K: int, theta: float, bc: str) -> np.ndarray:
    """Columns with at most two interior interfaces (periodic: exactly round(theta K) ones)."""
    cols = set()
    if bc == PERIODIC:
        c = round(theta * K)
        for r in range(K if 0 < c < K else 1):
            col = np.zeros(K, dtype=np.int8)
            col[np.arange(r, r + c) % K] = 1
            if np.count_nonzero(np.diff(col)) <= 2:
                cols.add(col.tobytes())
    else:
        for a in range(K + 1):
            for b in range(a, K + 1):
                col = np.zeros(K, dtype=np.int8)
                col[a:b] = 1
                cols.add(col.tobytes())
                cols.add((1 - col).astype(np.int8).tobytes())
    out = np.array([np.frombuffer(c, dtype=np.int8) for c in sorted(cols)])
    return out


def exhaustive_minimize(params: ModelParams, M: int, K: int) -> tuple[GridField, float]:
    """Certified grid optimum over the restricted class by dynamic programming over columns.

    The energy is a chain: pair terms couple neighbouring columns, the
    surface term is per column and the austenite term depends on the last
    column only, so a Viterbi pass finds the exact minimum.
    """
    states = restricted_columns(K, params.theta, params.bc)
    S = len(states)
    if S > MAX_EXHAUSTIVE_STATES:
        raise ParameterError(f"restricted class has {S} column states, limit {MAX_EXHAUSTIVE_STATES}")
    th_k = grid_theta(params.theta, K, params.bc)
    U = _profiles(states, th_k)
    dx = params.L / M
    pair = np.empty((S, S))
    rows = max(1, 2**22 // (S * (K + 1)))
    for i in range(0, S, rows):
        pair[i:i + rows] = _pair_elastic(U[i:i + rows, None, :], U[None, :, :], dx, K)
    surf = params.eps * dx * np.count_nonzero(np.diff(states, axis=1), axis=1)
    aus = np.array([params.mu * _austenite(U[s], params.bc) for s in range(S)])
    V = surf.copy()
    back = np.zeros((M, S), dtype=np.int64)
    for j in range(1, M):
        cand = V[:, None] + pair
        back[j] = np.argmin(cand, axis=0)
        V = cand[back[j], np.arange(S)] + surf
    V = V + aus
    s = int(np.argmin(V))
    best = float(V[s])
    path = [s]
    for j in range(M - 1, 0, -1):
        s = int(back[j][s])
        path.append(s)
    bits = states[np.array(path[::-1])]
    g = GridField(params.theta, params.L, bits, params.bc, {"mode": "exhaustive", "states": S})
    return g, best


def brute_force_minimize(params: ModelParams, M: int, K: int, budget: int = 20000, seed: int = 0,
                         mode: str = "anneal") -> tuple[GridField, EnergyBreakdown]:
    """Grid minimizer: seeded annealing from several simple starts, or the exhaustive restricted class.

    ``budget`` is the total number of proposals, split evenly over the starts.
    ``info['improved']`` is False when no chain improved on its start.
    """
    if M < 1 or K < 2:
        raise ParameterError("grid needs M >= 1 and K >= 2")
    if mode == "exhaustive":
        g, _ = exhaustive_minimize(params, M, K)
        return g, grid_energy(g, params)
    if mode != "anneal":
        raise ParameterError(f"unknown mode {mode!r}")
    if M * K > MAX_ANNEAL_CELLS:
        raise ParameterError(f"annealing grid has {M * K} cells, limit {MAX_ANNEAL_CELLS}")
    if budget < 0:
        raise ParameterError("budget must be non-negative")
    rng = np.random.default_rng(seed)
    starts = _starts(M, K, params.theta, params.bc, rng)
    per = budget // len(starts)
    best_bits, best, improved = None, math.inf, 0
    for k, start in enumerate(starts):
        chain_rng = np.random.default_rng([seed, k])
        bits, e, imp = anneal(params, start, per, chain_rng)
        improved += imp
        if e < best:
            best, best_bits = e, bits
    g = GridField(params.theta, params.L, best_bits, params.bc,
                  {"mode": "anneal", "seed": seed, "budget": budget, "improved": improved > 0})
    return g, grid_energy(g, params)
