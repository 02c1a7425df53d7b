"""Command-line interface.

Exit codes: 0 success, 2 invalid flags or inputs, 3 non-finite energies or
other runtime failures.  Range flags take ``a:b:n`` (n log-spaced samples
from a to b inclusive).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .analysis import (KM, PLASTIC, Axis, SweepSpec, compare_constructions, fmt, phase_diagram,
                       scaling_fit, thread_count)
from .constructions import (branch_cell, branch_cell_connected, build_single_laminate, build_tsb,
                            build_uniform)
from .energy import total_energy_km
from .io import dumps, load_field, save_field
from .oracle import brute_force_minimize
from .params import (BOUNDARY_CONDITIONS, NEUMANN, ConstructionParams, ModelParams, ParameterError,
                     scaling_km, scaling_plastic)
from .plasticity import (PLASTIC_REGIMES, PlasticParams, build_vkm, grid_energy, lift_km_to_3d,
                         plastic_energy, step0_uniform)
from .plotting import field_svg, fit_svg, phase_diagram_svg

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if not (v > 0 and np.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _grid(text: str) -> tuple[int, int]:
    try:
        m, k = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must look like MxK, got {text!r}") from exc
    if m < 1 or k < 2:
        raise argparse.ArgumentTypeError("grid needs M >= 1 and K >= 2")
    return m, k


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _model_flags(p: argparse.ArgumentParser, eps_required: bool = True) -> None:
    g = p.add_argument_group("model parameters (dimensionless)")
    e = g.add_mutually_exclusive_group(required=eps_required)
    e.add_argument("--eps", type=_positive, help="surface / line-tension energy density")
    e.add_argument("--eps-hat", type=_positive, dest="eps_hat",
                   help="rescaled eps: eps/theta^2 (km) or eps/(L theta^2) (plastic)")
    g.add_argument("--mu", type=_positive, required=True, help="austenite / exterior modulus ratio")
    g.add_argument("--theta", type=_positive, required=True, help="minority volume fraction in (0, 1/2]")
    g.add_argument("--L", type=_positive, required=True, help="martensite depth or grain edge")
    g.add_argument("--bc", choices=BOUNDARY_CONDITIONS, default=NEUMANN,
                   help="top/bottom boundary conditions")


def _model_params(a, model: str = KM) -> ModelParams:
    if a.eps is not None:
        return ModelParams(eps=a.eps, mu=a.mu, L=a.L, theta=a.theta, bc=a.bc)
    return ModelParams.from_eps_hat(a.eps_hat, a.mu, a.L, a.theta, bc=a.bc, model=model)


def build_parser() -> argparse.ArgumentParser:
    fmt_cls = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="microbranch", description="Microstructure constructions, energies and scaling laws.",
                formatter_class=fmt_cls)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    sp = sub.add_parser("predict", help="closed-form scaling prediction as JSON", formatter_class=fmt_cls)
    sp.add_argument("--model", choices=(KM, PLASTIC), default=KM, help="energy model")
    _model_flags(sp)

    sp = sub.add_parser("construct", help="build a microstructure and save it as JSON", formatter_class=fmt_cls)
    sp.add_argument("--type", required=True,
                    choices=("uniform", "single-laminate", "tsb", "branch-cell", "branch-cell-connected"),
                    help="construction")
    sp.add_argument("--theta", type=_positive, required=True, help="minority volume fraction")
    sp.add_argument("--L", type=_positive, default=1.0, help="martensite depth")
    sp.add_argument("--bc", choices=BOUNDARY_CONDITIONS, default=NEUMANN, help="boundary conditions")
    sp.add_argument("--N", type=int, default=1, help="number of periods (tsb)")
    sp.add_argument("--h", type=_positive, default=1.0, help="band height fraction (tsb) or cell height")
    sp.add_argument("--ell", type=_positive, default=None, help="refinement depth, default L")
    sp.add_argument("--eta", type=_positive, default=None, help="minority height of a branch cell")
    sp.add_argument("--truncation-level", type=int, default=None, dest="truncation_level",
                    help="stop refinement at this level (tsb)")
    sp.add_argument("--out", required=True, help="output JSON path")
    sp.add_argument("--svg", default=None, help="optional SVG picture of the slope pattern")

    sp = sub.add_parser("energy", help="energy terms of a saved field as JSON", formatter_class=fmt_cls)
    sp.add_argument("--field", required=True, help="field JSON written by construct")
    sp.add_argument("--eps", type=_positive, required=True, help="surface energy density")
    sp.add_argument("--mu", type=_positive, required=True, help="austenite modulus ratio")
    sp.add_argument("--out", default=None, help="output JSON path, default stdout")

    sp = sub.add_parser("phase-diagram", help="regime map over two parameters", formatter_class=fmt_cls)
    sp.add_argument("--model", choices=(KM, PLASTIC), default=KM, help="energy model")
    sp.add_argument("--theta", type=_positive, required=True, help="minority volume fraction")
    sp.add_argument("--L", type=_positive, required=True, help="martensite depth or grain edge")
    sp.add_argument("--mu", required=True, help="range a:b:n of the modulus ratio")
    sp.add_argument("--eps-hat", required=True, dest="eps_hat", help="range a:b:n of the rescaled eps")
    sp.add_argument("--bc", choices=BOUNDARY_CONDITIONS, default=NEUMANN, help="boundary conditions")
    sp.add_argument("--out", default=None, help="CSV path (mu,eps_hat,regime,value), default stdout")
    sp.add_argument("--svg", default=None, help="optional SVG map")
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads, default $MICROBRANCH_THREADS or CPU count")

    sp = sub.add_parser("fit", help="log-log exponent of a construction family", formatter_class=fmt_cls)
    sp.add_argument("--family", required=True,
                    choices=("branching", "laminate", "truncated", "tsb", "uniform", "single_laminate"),
                    help="construction family")
    sp.add_argument("--param", choices=("eps_hat", "mu", "L", "theta"), default="eps_hat",
                    help="swept parameter")
    sp.add_argument("--range", required=True, dest="span", help="range a:b:n of the swept parameter")
    sp.add_argument("--eps-hat", type=_positive, default=None, dest="eps_hat", help="fixed eps/theta^2")
    sp.add_argument("--mu", type=_positive, default=None, help="fixed modulus ratio")
    sp.add_argument("--theta", type=_positive, default=None, help="fixed volume fraction")
    sp.add_argument("--L", type=_positive, default=None, help="fixed depth")
    sp.add_argument("--bc", choices=BOUNDARY_CONDITIONS, default=NEUMANN, help="boundary conditions")
    sp.add_argument("--out", default=None, help="CSV path, default stdout")
    sp.add_argument("--svg", default=None, help="optional SVG plot")
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads, default $MICROBRANCH_THREADS or CPU count")

    sp = sub.add_parser("compare", help="energies of all constructions against the prediction",
                        formatter_class=fmt_cls)
    _model_flags(sp)
    sp.add_argument("--out", default=None, help="CSV path, default stdout")

    sp = sub.add_parser("minimize", help="grid oracle by annealing or exhaustive search", formatter_class=fmt_cls)
    _model_flags(sp)
    sp.add_argument("--grid", type=_grid, default=(16, 32), help="columns x rows, e.g. 16x32")
    sp.add_argument("--seed", type=int, default=0, help="random seed")
    sp.add_argument("--budget", type=int, default=40000, help="annealing proposals in total")
    sp.add_argument("--mode", choices=("anneal", "exhaustive"), default="anneal", help="search mode")
    sp.add_argument("--out", default=None, help="CSV path for the energy terms, default stdout")
    sp.add_argument("--bits", default=None, help="optional CSV path for the slope bits (one column per line)")

    sp = sub.add_parser("plastic", help="energy of a lifted plasticity construction", formatter_class=fmt_cls)
    sp.add_argument("--regime", required=True, choices=PLASTIC_REGIMES, help="construction")
    e = sp.add_mutually_exclusive_group(required=True)
    e.add_argument("--eps", type=_positive, help="line-tension energy")
    e.add_argument("--eps-hat", type=_positive, dest="eps_hat", help="eps/(L theta^2)")
    sp.add_argument("--mu", type=_positive, required=True, help="exterior modulus ratio")
    sp.add_argument("--theta", type=_positive, required=True, help="minority slip fraction")
    sp.add_argument("--L", type=_positive, default=1.0, help="grain edge length")
    sp.add_argument("--grid-n", type=int, default=0, dest="grid_n",
                    help="also report the grid estimate with n cells per axis (0 = off, else >= 16)")
    sp.add_argument("--out", default=None, help="output JSON path, default stdout")
    return p


# -- commands --------------------------------------------------------------------------


def cmd_predict(a) -> int:
    mp = _model_params(a, a.model)
    pred = scaling_km(mp) if a.model == KM else scaling_plastic(mp)
    _write(None, dumps(pred.as_dict()))
    return EXIT_OK


def cmd_construct(a) -> int:
    ell = a.L if a.ell is None else a.ell
    if a.type == "uniform":
        f = build_uniform(a.theta, a.L)
    elif a.type == "single-laminate":
        f = build_single_laminate(a.theta, a.L, a.bc)
    elif a.type == "tsb":
        cp = ConstructionParams(N=a.N, h=a.h, ell=ell, theta=a.theta, L=a.L, bc=a.bc,
                                truncation_level=a.truncation_level)
        # eps and mu do not enter the geometry
        f = build_tsb(cp, ModelParams(eps=1.0, mu=1.0, L=a.L, theta=a.theta, bc=a.bc))
    else:
        if a.eta is None:
            raise ParameterError("--eta is required for branch cells")
        build = branch_cell if a.type == "branch-cell" else branch_cell_connected
        f = build(a.h, a.eta, ell, a.theta)
    save_field(f, a.out)
    if a.svg:
        _write(a.svg, field_svg(f))
    print(f"wrote {a.type} field with {len(f.strips)} strips to {a.out}", file=sys.stderr)
    return EXIT_OK


def cmd_energy(a) -> int:
    f = load_field(a.field)
    mp = ModelParams(eps=a.eps, mu=a.mu, L=f.L, theta=f.theta, bc=f.bc)
    e = total_energy_km(f, mp)
    _write(a.out, dumps(e.as_dict()))
    return EXIT_OK


def cmd_phase_diagram(a) -> int:
    spec = SweepSpec((Axis.parse("mu", a.mu), Axis.parse("eps_hat", a.eps_hat)),
                     {"L": a.L, "theta": a.theta}, a.bc, a.model)
    pd = phase_diagram(spec, thread_count(a.threads))
    _write(a.out, pd.to_csv())
    if a.svg:
        _write(a.svg, phase_diagram_svg(pd))
    print(f"{len(pd.rows)} points, regimes: {', '.join(sorted(pd.regimes()))}", file=sys.stderr)
    return EXIT_OK


def cmd_fit(a) -> int:
    fixed = {k: getattr(a, k) for k in ("eps_hat", "mu", "theta", "L") if k != a.param}
    missing = [k for k, v in fixed.items() if v is None]
    if missing:
        raise ParameterError("missing fixed parameter(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    spec = SweepSpec((Axis.parse(a.param, a.span),), fixed, a.bc, KM)
    r = scaling_fit(spec, a.family, thread_count(a.threads))
    _write(a.out, r.to_csv())
    if a.svg:
        _write(a.svg, fit_svg(r))
    print(f"slope {fmt(r.slope)} intercept {fmt(r.intercept)} residual {fmt(r.residual)}", file=sys.stderr)
    return EXIT_OK


def cmd_compare(a) -> int:
    c = compare_constructions(_model_params(a))
    _write(a.out, c.to_csv())
    print(f"best {c.best}, ratio to prediction {fmt(c.ratio)} ({c.regime})", file=sys.stderr)
    return EXIT_OK


def cmd_minimize(a) -> int:
    mp = _model_params(a)
    M, K = a.grid
    g, e = brute_force_minimize(mp, M, K, a.budget, a.seed, a.mode)
    _write(a.out, e.to_csv())
    if a.bits:
        _write(a.bits, "\n".join(",".join(str(int(b)) for b in col) for col in g.bits) + "\n")
    if g.info.get("mode") == "anneal" and not g.info.get("improved"):
        print("budget exhausted without improving on the starts", file=sys.stderr)
    print(f"grid {M}x{K} energy {fmt(e.total)} interfaces {g.interface_count()}", file=sys.stderr)
    return EXIT_OK


def cmd_plastic(a) -> int:
    if a.eps is not None:
        pp = PlasticParams(a.eps, a.mu, a.theta, a.L)
    else:
        pp = PlasticParams.from_eps_hat(a.eps_hat, a.mu, a.theta, a.L)
    if a.grid_n and a.grid_n < 16:
        raise ParameterError("--grid-n must be 0 or at least 16")
    vkm = build_vkm(a.regime, pp)
    if vkm.kind == "uniform":
        state = step0_uniform(pp)
    else:
        state = lift_km_to_3d(vkm, vkm.T, pp, n=max(a.grid_n, 16))
    e = plastic_energy(state)
    out = {"state": state.as_dict(), "energy": e.as_dict(),
           "prediction": scaling_plastic(pp.model_params()).as_dict()}
    if a.grid_n:
        out["grid"] = grid_energy(state, a.grid_n).as_dict()
    _write(a.out, dumps(out))
    return EXIT_OK


COMMANDS = {
    "predict": cmd_predict,
    "construct": cmd_construct,
    "energy": cmd_energy,
    "phase-diagram": cmd_phase_diagram,
    "fit": cmd_fit,
    "compare": cmd_compare,
    "minimize": cmd_minimize,
    "plastic": cmd_plastic,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.cmd](args)
    except (ParameterError, ValueError) as exc:
        print(f"microbranch {args.cmd}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FloatingPointError, ArithmeticError, RuntimeError) as exc:
        print(f"microbranch {args.cmd}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"microbranch {args.cmd}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
