"""Exact representation of two-slope piecewise-affine fields in a vertical strip.

Within a strip ``x_lo <= x1 <= x_hi`` the vertical derivative of ``u`` takes
the values ``theta`` (bit 0) and ``theta - 1`` (bit 1), switching across
interfaces ``x2 = p + q * s`` with ``s = x1 - x_hi``.  A cell is either a
:class:`Leaf` (explicit interfaces) or a :class:`Stack` of repeated child
cells.  Repetition counts are plain integers, so patterns with ``2**60``
copies cost nothing to store; all integrals are composed exactly.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Union

import numpy as np

# Gauss-Legendre nodes on [-1, 1]; integrands are at most cubic in s.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(3)


@dataclass(frozen=True)
class Leaf:
    height: float
    first_bit: int
    p: tuple[float, ...] = ()
    q: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.p) != len(self.q):
            raise ValueError("p and q must have equal length")
        if self.first_bit not in (0, 1):
            raise ValueError("first_bit must be 0 or 1")
        if not self.height > 0:
            raise ValueError("cell height must be positive")

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def last_bit(self) -> int:
        return self.first_bit ^ (self.n & 1)

    def canonical(self, tol: float = 1e-14) -> "Leaf":
        """Remove zero-width regions so every stored interface carries a jump."""
        p, q = list(self.p), list(self.q)
        first = self.first_bit
        scale = tol * max(self.height, 1e-300)
        changed = True
        while changed:
            changed = False
            if p and abs(p[0]) <= scale and q[0] == 0.0:
                p.pop(0), q.pop(0)
                first ^= 1
                changed = True
                continue
            if p and abs(p[-1] - self.height) <= scale and q[-1] == 0.0:
                p.pop(), q.pop()
                changed = True
                continue
            for k in range(len(p) - 1):
                if abs(p[k] - p[k + 1]) <= scale and abs(q[k] - q[k + 1]) <= tol * max(abs(q[k]), 1.0):
                    del p[k:k + 2], q[k:k + 2]
                    changed = True
                    break
        return Leaf(self.height, first, tuple(p), tuple(q))

    def frozen_at(self, s: float) -> "Leaf":
        """The x1-independent pattern this leaf shows at position ``s``."""
        return Leaf(self.height, self.first_bit,
                    tuple(pk + qk * s for pk, qk in zip(self.p, self.q)),
                    (0.0,) * self.n).canonical()

    def scaled(self, factor: float) -> "Leaf":
        """Pattern stretched by ``factor`` in both directions."""
        return Leaf(self.height * factor, self.first_bit,
                    tuple(pk * factor for pk in self.p), self.q)


@dataclass(frozen=True)
class Stack:
    parts: tuple[tuple["Cell", int], ...]

    def __post_init__(self) -> None:
        if not self.parts:
            raise ValueError("empty stack")
        for cell, reps in self.parts:
            if int(reps) != reps or reps < 1:
                raise ValueError("repetition counts must be positive integers")

    @property
    def height(self) -> float:
        return sum(cell.height * reps for cell, reps in self.parts)

    @property
    def first_bit(self) -> int:
        return self.parts[0][0].first_bit

    @property
    def last_bit(self) -> int:
        return self.parts[-1][0].last_bit

    def frozen_at(self, s: float) -> "Stack":
        return Stack(tuple((cell.frozen_at(s), reps) for cell, reps in self.parts))

    def scaled(self, factor: float) -> "Stack":
        return Stack(tuple((cell.scaled(factor), reps) for cell, reps in self.parts))


Cell = Union[Leaf, Stack]


def leaf_bounds(leaf: Leaf, s):
    """Interface heights, padded with the cell bottom and top, shape (n+2, len(s))."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    rows = [np.zeros_like(s)]
    rows += [pk + qk * s for pk, qk in zip(leaf.p, leaf.q)]
    rows.append(np.full_like(s, leaf.height))
    return np.vstack(rows)


def check_cell(cell: Cell, length: float, tol: float = 1e-12) -> None:
    """Interfaces must stay ordered and inside their cell on [-length, 0]."""
    if isinstance(cell, Stack):
        for child, _ in cell.parts:
            check_cell(child, length, tol)
        return
    for s in (-length, 0.0):
        y = leaf_bounds(cell, [s])[:, 0]
        if np.any(np.diff(y) < -tol * cell.height):
            raise ValueError(f"interfaces cross or leave the cell at s={s}")


@dataclass
class CellSummary:
    """Exact integrals of one cell over a strip of given length.

    With ``A`` the value of d(u)/d(x1) at the cell bottom, the weighted
    integral of (d(u)/d(x1))^2 over the cell is ``alpha*A^2 + 2*beta*A + gamma``
    and ``D`` is the increment of d(u)/d(x1) from bottom to top.
    """

    alpha: float
    beta: float
    gamma: float
    D: float
    net0: float  # u(top) - u(bottom) at s = 0
    net1: float  # d/ds of the same increment
    minority_area: float
    interfaces: Counter  # slope q -> count (each interface spans the strip)
    first_bit: int
    last_bit: int


class StripIntegrator:
    """Computes :class:`CellSummary` objects with a fixed x1-weight."""

    def __init__(self, theta: float, length: float, weight=None, s_range: tuple[float, float] | None = None):
        self.theta = theta
        self.length = length
        lo, hi = s_range if s_range is not None else (-length, 0.0)
        self.s_lo, self.s_hi = lo, hi
        half = 0.5 * (hi - lo)
        self.s = 0.5 * (hi + lo) + half * _GL_X
        w = np.ones_like(self.s) if weight is None else np.asarray(weight(self.s), dtype=float)
        self.W = half * _GL_W * w
        self._memo: dict[int, CellSummary] = {}

    def summary(self, cell: Cell) -> CellSummary:
        key = id(cell)
        hit = self._memo.get(key)
        if hit is not None and hit[0] is cell:
            return hit[1]
        out = self._leaf(cell) if isinstance(cell, Leaf) else self._stack(cell)
        self._memo[key] = (cell, out)
        return out

    def _leaf(self, leaf: Leaf) -> CellSummary:
        th = self.theta
        y = leaf_bounds(leaf, self.s)
        widths = np.diff(y, axis=0)
        area = widths @ self.W
        n = leaf.n
        bits = np.array([leaf.first_bit ^ (m & 1) for m in range(n + 1)])
        slopes = th - bits
        sigma = bits[1:] - bits[:-1]  # slope jump below minus above
        q = np.asarray(leaf.q, dtype=float)
        P = np.concatenate(([0.0], np.cumsum(q * sigma)))
        p = np.concatenate(([0.0], np.asarray(leaf.p, dtype=float), [leaf.height]))
        qq = np.concatenate(([0.0], q, [0.0]))
        net0 = float(np.sum(slopes * np.diff(p)))
        net1 = float(np.sum(slopes * np.diff(qq)))
        return CellSummary(
            alpha=float(area.sum()),
            beta=float(P @ area),
            gamma=float((P**2) @ area),
            D=float(P[-1]),
            net0=net0,
            net1=net1,
            minority_area=float(area[bits == 1].sum()),
            interfaces=Counter(float(v) for v in leaf.q),
            first_bit=leaf.first_bit,
            last_bit=leaf.last_bit,
        )

    def _stack(self, stack: Stack) -> CellSummary:
        alpha = beta = gamma = 0.0
        S = 0.0
        net0 = net1 = minority = 0.0
        ifaces: Counter = Counter()
        prev_last = None
        for cell, R in stack.parts:
            c = self.summary(cell)
            # R repetitions of the child, composed in closed form.
            sj = R * (R - 1) / 2.0
            sj2 = (R - 1) * R * (2 * R - 1) / 6.0
            a_R = R * c.alpha
            b_R = c.alpha * c.D * sj + R * c.beta
            g_R = c.alpha * c.D**2 * sj2 + 2.0 * c.beta * c.D * sj + R * c.gamma
            alpha += a_R
            beta += a_R * S + b_R
            gamma += a_R * S * S + 2.0 * b_R * S + g_R
            S += R * c.D
            net0 += R * c.net0
            net1 += R * c.net1
            minority += R * c.minority_area
            for qv, cnt in c.interfaces.items():
                ifaces[qv] += cnt * R
            if c.first_bit != c.last_bit and R > 1:
                ifaces[0.0] += R - 1
            if prev_last is not None and prev_last != c.first_bit:
                ifaces[0.0] += 1
            prev_last = c.last_bit
        return CellSummary(alpha, beta, gamma, S, net0, net1, minority, ifaces,
                           stack.first_bit, stack.last_bit)


def net_coefficients(cell: Cell, theta: float, memo: dict | None = None) -> tuple[float, float]:
    """Increment u(top) - u(bottom) of a cell as n0 + n1 * s."""
    memo = {} if memo is None else memo
    hit = memo.get(id(cell))
    if hit is not None and hit[0] is cell:
        return hit[1]
    if isinstance(cell, Leaf):
        bits = np.array([cell.first_bit ^ (m & 1) for m in range(cell.n + 1)])
        slopes = theta - bits
        p = np.concatenate(([0.0], cell.p, [cell.height]))
        q = np.concatenate(([0.0], cell.q, [0.0]))
        out = (float(np.sum(slopes * np.diff(p))), float(np.sum(slopes * np.diff(q))))
    else:
        n0 = n1 = 0.0
        for child, R in cell.parts:
            a, b = net_coefficients(child, theta, memo)
            n0 += R * a
            n1 += R * b
        out = (n0, n1)
    memo[id(cell)] = (cell, out)
    return out


def evaluate_cell(cell: Cell, theta: float, s, y, memo: dict | None = None):
    """u(s, y) - u(s, 0) and the slope bit at points inside the cell (vectorized)."""
    memo = {} if memo is None else memo
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(cell, Leaf):
        bounds = leaf_bounds(cell, s.ravel()).reshape((cell.n + 2,) + s.shape)
        value = theta * y
        bit = np.full(y.shape, cell.first_bit, dtype=np.int8)
        for m in range(cell.n + 1):
            lo, hi = bounds[m], bounds[m + 1]
            b = cell.first_bit ^ (m & 1)
            if b == 1:
                value = value - np.clip(y - lo, 0.0, np.maximum(hi - lo, 0.0))
            if m > 0:
                bit = np.where(y > lo, b, bit)
        return value, bit
    value = np.zeros(y.shape)
    bit = np.zeros(y.shape, dtype=np.int8)
    base0 = np.zeros(y.shape)
    offset = 0.0
    for child, R in cell.parts:
        hc = child.height
        top = offset + R * hc
        inside = (y >= offset) & (y <= top) if child is cell.parts[-1][0] else (y >= offset) & (y < top)
        if np.any(inside):
            n0, n1 = net_coefficients(child, theta, memo)
            yi = y[inside] - offset
            j = np.clip(np.floor(yi / hc), 0, R - 1)
            si = s[inside]
            v, bt = evaluate_cell(child, theta, si, yi - j * hc, memo)
            value[inside] = base0[inside] + j * (n0 + n1 * si) + v
            bit[inside] = bt
        n0, n1 = net_coefficients(child, theta, memo)
        base0 = base0 + R * (n0 + n1 * s)
        offset = top
    return value, bit


def expand_breakpoints(cell: Cell, theta: float, s: float, limit: int = 5_000_000):
    """Explicit breakpoints and values of u(s, .) - u(s, 0) over the cell height."""
    memo: dict = {}

    def size(c: Cell) -> int:
        if isinstance(c, Leaf):
            return c.n + 1
        return sum(size(ch) * R for ch, R in c.parts)

    if size(cell) > limit:
        raise ValueError("pattern too fine to expand explicitly")

    def profile(c: Cell):
        hit = memo.get(id(c))
        if hit is not None and hit[0] is c:
            return hit[1]
        if isinstance(c, Leaf):
            b = leaf_bounds(c, [s])[:, 0]
            slopes = theta - np.array([c.first_bit ^ (m & 1) for m in range(c.n + 1)])
            u = np.concatenate(([0.0], np.cumsum(slopes * np.diff(b))))
            out = (b[:-1], u[:-1], float(u[-1]))
        else:
            ys, us = [], []
            y0 = u0 = 0.0
            for child, R in c.parts:
                yc, uc, nc = profile(child)
                j = np.arange(R, dtype=float)
                ys.append(((y0 + j * child.height)[:, None] + yc[None, :]).ravel())
                us.append(((u0 + j * nc)[:, None] + uc[None, :]).ravel())
                y0 += R * child.height
                u0 += R * nc
            out = (np.concatenate(ys), np.concatenate(us), u0)
        memo[id(c)] = (c, out)
        return out

    y, v, top = profile(cell)
    return np.append(y, cell.height), np.append(v, top)


def _affine_moments(cell: Cell, theta: float, s: float, slope: float, memo: dict):
    """For g(y) = u(y) - u(0) - slope*y on the cell: (int g, int g^2, g(top))."""
    key = (id(cell), slope)
    hit = memo.get(key)
    if hit is not None and hit[0] is cell:
        return hit[1]
    if isinstance(cell, Leaf):
        b = leaf_bounds(cell, [s])[:, 0]
        slopes = theta - np.array([cell.first_bit ^ (m & 1) for m in range(cell.n + 1)])
        u = np.concatenate(([0.0], np.cumsum(slopes * np.diff(b))))
        g = u - slope * b
        w = np.diff(b)
        ga, gb = g[:-1], g[1:]
        out = (float(np.sum(w * (ga + gb)) / 2.0),
               float(np.sum(w * (ga * ga + ga * gb + gb * gb)) / 3.0),
               float(g[-1]))
    else:
        G1 = G2 = base = 0.0
        for child, R in cell.parts:
            c1, c2, cn = _affine_moments(child, theta, s, slope, memo)
            hc = child.height
            sj = R * (R - 1) / 2.0
            sj2 = (R - 1) * R * (2 * R - 1) / 6.0
            lin = R * base + cn * sj
            G1 += R * c1 + hc * lin
            G2 += R * c2 + 2.0 * c1 * lin + hc * (R * base**2 + 2.0 * base * cn * sj + cn**2 * sj2)
            base += R * cn
        out = (G1, G2, base)
    memo[key] = (cell, out)
    return out


def l2_distance_to_trace(cell: Cell, theta: float, s: float, trace) -> float:
    """Exact int_0^H (u(s, y) - trace(y))^2 dy with u(s, 0) = 0.

    Runs of repeated cells on which the trace is affine are summed in closed
    form, so the cost grows with the tree size, not with the number of stripes.
    """
    bx = np.asarray(trace.breakpoints, dtype=float)
    slopes = np.asarray(trace.slopes, dtype=float)
    memo: dict = {}
    net_memo: dict = {}
    H = cell.height
    tol = 1e-13 * H

    def inner_breaks(a: float, b: float) -> np.ndarray:
        return bx[(bx > a + tol) & (bx < b - tol)]

    def slope_at(y: float) -> float:
        k = int(np.clip(np.searchsorted(bx, y, side="right") - 1, 0, slopes.size - 1))
        return float(slopes[k])

    def affine_run(child: Cell, R: int, y0: float, u0: float) -> float:
        sl = slope_at(y0 + 0.5 * R * child.height) if R * child.height > 0 else 0.0
        run = child if R == 1 else Stack(((child, R),))
        g1, g2, _ = _affine_moments(run, theta, s, sl, memo)
        C = u0 - float(trace(y0))
        return g2 + 2.0 * C * g1 + C * C * run.height

    def rec(c: Cell, y0: float, u0: float) -> float:
        if inner_breaks(y0, y0 + c.height).size == 0:
            return affine_run(c, 1, y0, u0)
        if isinstance(c, Leaf):
            b = leaf_bounds(c, [s])[:, 0]
            sl = theta - np.array([c.first_bit ^ (m & 1) for m in range(c.n + 1)])
            u = u0 + np.concatenate(([0.0], np.cumsum(sl * np.diff(b))))
            y = np.union1d(y0 + b, inner_breaks(y0, y0 + c.height))
            d = np.interp(y, y0 + b, u) - trace(y)
            w = np.diff(y)
            return float(np.sum(w * (d[:-1] ** 2 + d[:-1] * d[1:] + d[1:] ** 2)) / 3.0)
        total = 0.0
        for child, R in c.parts:
            hc = child.height
            n0, n1 = net_coefficients(child, theta, net_memo)
            net = n0 + n1 * s
            top = y0 + R * hc
            cuts = inner_breaks(y0, top)
            if cuts.size == 0:
                total += affine_run(child, R, y0, u0)
            else:
                reps = sorted(set(int(min(R - 1, (b - y0) // hc)) for b in cuts))
                j = 0
                for r in reps:
                    if r > j:
                        total += affine_run(child, r - j, y0 + j * hc, u0 + j * net)
                    total += rec(child, y0 + r * hc, u0 + r * net)
                    j = r + 1
                if j < R:
                    total += affine_run(child, R - j, y0 + j * hc, u0 + j * net)
            y0 = top
            u0 += R * net
        return total

    return rec(cell, 0.0, 0.0)


def split_cell(cell: Cell, y: float, s_values=(0.0,), tol: float = 1e-12) -> tuple[Cell | None, Cell | None]:
    """Cut a cell at height ``y``; no interface may cross the cut."""
    H = cell.height
    if y <= tol * H:
        return None, cell
    if y >= H * (1 - tol):
        return cell, None
    if isinstance(cell, Leaf):
        lower_p, lower_q, upper_p, upper_q = [], [], [], []
        for pk, qk in zip(cell.p, cell.q):
            vals = [pk + qk * sv for sv in s_values]
            if max(vals) <= y + tol * H:
                lower_p.append(pk), lower_q.append(qk)
            elif min(vals) >= y - tol * H:
                upper_p.append(pk - y), upper_q.append(qk)
            else:
                raise ValueError("an interface crosses the cut")
        mid_bit = cell.first_bit ^ (len(lower_p) & 1)
        lower = Leaf(y, cell.first_bit, tuple(lower_p), tuple(lower_q)).canonical()
        upper = Leaf(H - y, mid_bit, tuple(upper_p), tuple(upper_q)).canonical()
        return lower, upper
    low_parts: list = []
    up_parts: list = []
    offset = 0.0
    for k, (child, R) in enumerate(cell.parts):
        hc = child.height
        top = offset + R * hc
        if y >= top - tol * H:
            low_parts.append((child, R))
        elif y <= offset + tol * H:
            up_parts.append((child, R))
        else:
            j = int(np.floor((y - offset) / hc))
            r = y - offset - j * hc
            if r > hc * (1 - tol):
                j, r = j + 1, 0.0
            if j:
                low_parts.append((child, j))
            lo_c, up_c = split_cell(child, r, s_values, tol)
            if lo_c is not None:
                low_parts.append((lo_c, 1))
            if up_c is not None:
                up_parts.append((up_c, 1))
            rest = R - j - 1
            if rest:
                up_parts.append((child, rest))
        offset = top
    lower = Stack(tuple(low_parts)) if low_parts else None
    upper = Stack(tuple(up_parts)) if up_parts else None
    return lower, upper


def roll_cell(cell: Cell, shift: float, s_values=(0.0,)) -> Cell:
    """Cyclically shift the pattern: new(y) = old((y + shift) mod H)."""
    lower, upper = split_cell(cell, shift, s_values)
    if lower is None or upper is None:
        return cell
    return Stack(((upper, 1), (lower, 1)))
