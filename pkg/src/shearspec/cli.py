"""Command-line front end: one subcommand per lab, CSV or JSON output."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def _f17(x: float) -> float:
    return float(f"{float(x):.17g}")


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _bc(text: str) -> str:
    t = text.upper()
    if t not in ("S", "D"):
        raise argparse.ArgumentTypeError("bc must be S or D")
    return t


@dataclass
class RunConfig:
    subcommand: str
    flow: str
    bc: str
    n: Optional[int]
    fmt: str
    out: Optional[str]
    args: argparse.Namespace


def _flow(cfg: RunConfig, n: Optional[int] = None):
    from .flow_operators import make_flow
    from .spectral_core import build_grid

    return make_flow(cfg.flow, build_grid(n or cfg.n or 128))


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# subcommands


def cmd_spectrum(cfg: RunConfig) -> str:
    from .flow_operators import orr_sommerfeld_pencil, os_spectrum

    a = cfg.args
    sp = os_spectrum(orr_sommerfeld_pencil(a.alpha, a.beta, _flow(cfg), cfg.bc))
    if cfg.fmt == "csv":
        order = np.argsort(sp.Lambda.real, kind="stable")
        rows = ["re_Lambda,im_Lambda"] + [f"{z.real:.17g},{z.imag:.17g}" for z in sp.Lambda[order]]
        return "\n".join(rows) + "\n"
    return sp.to_json() + "\n"


def cmd_resolvent_scan(cfg: RunConfig) -> str:
    from .resolvent_lab import fit_exponent, fit_report_json, records_csv, scan

    a = cfg.args
    recs = scan(_flow(cfg), cfg.bc, a.beta, a.alpha_rule, a.upsilon, n=cfg.n)
    if cfg.fmt == "csv":
        return records_csv(recs)
    if len(set(a.beta)) < 3:
        raise ValueError("the fit report needs at least three beta values")
    band = (a.band_center - 0.13, a.band_center + 0.13)
    return fit_report_json(fit_exponent(recs, band)) + "\n"


def cmd_bstar(cfg: RunConfig) -> str:
    from .resolvent_lab import b_star, records_csv

    a = cfg.args
    res = b_star(a.upsilon, a.epsilon, a.L, _flow(cfg), cfg.bc, a.alpha_rule, n=cfg.n)
    if cfg.fmt == "csv":
        return records_csv(res["records"])
    return _json({
        "b_star": _f17(res["value"]),
        "beta1": _f17(res["beta1"]),
        "beta_grid": [_f17(b) for b in res["betas"]],
        "per_beta": [[_f17(b), _f17(v)] for b, v in res["per_beta"].items()],
        "truncation": "sup over beta truncated at 8 beta1",
    })


def cmd_airy_zeros(cfg: RunConfig) -> str:
    from . import airy_special as asp

    zs = asp.a0_zero_set() if cfg.args.which == "a0" else asp.dirichlet_zero_set()
    if cfg.fmt == "csv":
        rows = ["re,im"] + [f"{z.real:.17g},{z.imag:.17g}" for z in zs.zeros]
        return "\n".join(rows) + "\n"
    d = json.loads(zs.to_json())
    d["complete"] = bool(zs.complete)
    return _json(d)


def cmd_constants(cfg: RunConfig) -> str:
    from . import airy_special as asp
    from .constrained_spectra import hat_mu_m

    d = asp.constants().to_dict()
    if not cfg.args.skip_mu_hat:
        d["hat_mu_m"] = _f17(hat_mu_m())
    return _json(d)


def cmd_mu0(cfg: RunConfig) -> str:
    from .constrained_spectra import curve_csv, mu0, mu0_curve

    a = cfg.args
    if a.theta is not None:
        p = mu0(a.theta)
        if p is None:
            raise ArithmeticError("no zero of F in the search window")
        return _json({"theta": _f17(p.theta), "mu0": _f17(p.mu), "lambda": [_f17(p.lam.real), _f17(p.lam.imag)],
                      "residual": _f17(p.residual)})
    return curve_csv(mu0_curve(a.theta_max, a.step))


def cmd_semigroup(cfg: RunConfig) -> str:
    from .hodge_semigroup import theorem_rate_check

    a = cfg.args
    rep = theorem_rate_check(_flow(cfg), a.epsilon, a.L, cfg.bc, a.upsilon, n_modes=a.modes)
    if cfg.fmt == "csv":
        return rep.curve_csv(a.mode)
    d = json.loads(rep.to_json())
    d.update({"tail_slope": _f17(rep.tail_slope), "apriori_ok": bool(rep.apriori_ok),
              "beta1": _f17(rep.beta1), "modes": list(rep.modes)})
    return _json(d)


def cmd_hodge_demo(cfg: RunConfig) -> str:
    from .hodge_semigroup import PeriodicField, hodge_decompose, project_p, project_pi, recover_pressure

    a = cfg.args
    worst = {k: 0.0 for k in ("pi_idempotent", "p_idempotent", "commutation", "reconstruction",
                              "orthogonality", "pressure")}
    for s in range(a.samples):
        f = PeriodicField.random(a.L, a.modes, cfg.n or 48, seed=a.seed + s)
        nf = f.norm()
        P, Pi = project_p(f), project_pi(f)
        h = hodge_decompose(f)
        e = h.constant_field(f)
        G = h.curl_part + e
        q = recover_pressure(G)
        vals = {
            "pi_idempotent": (project_pi(Pi) - Pi).norm() / nf,
            "p_idempotent": (project_p(P) - P).norm() / nf,
            "commutation": (project_pi(P) - project_p(Pi)).norm() / nf,
            "reconstruction": (f - h.curl_part - h.div_part - e).norm() / nf,
            "orthogonality": max(abs(h.curl_part.inner(h.div_part)), abs(h.curl_part.inner(e)),
                                 abs(h.div_part.inner(e))) / nf**2,
            "pressure": (q.gradient() - G).norm() / max(G.norm(), 1e-300),
        }
        for k, v in vals.items():
            worst[k] = max(worst[k], float(v))
    return _json({k: _f17(v) for k, v in worst.items()} | {"samples": a.samples})


def cmd_probe_rayleigh(cfg: RunConfig) -> str:
    from .resolvent_lab import rayleigh_probe

    a = cfg.args
    rep = rayleigh_probe(_flow(cfg), a.p, a.mu, a.alpha)
    d = json.loads(rep.to_json())
    d["flow"] = cfg.flow
    return _json(d)


def cmd_probe_optimality(cfg: RunConfig) -> str:
    from .resolvent_lab import optimality_probe

    a = cfg.args
    rep = optimality_probe(_flow(cfg), a.nu, a.mu, method=a.method, n=cfg.n or 128)
    return _json({
        "nu": _f17(rep.nu),
        "mu": [_f17(m) for m in rep.mu_list],
        "values": [None if v is None else _f17(v) for v in rep.values],
        "flags": rep.flags,
        "bounded_below": rep.bounded_below,
    })


def cmd_critical_reynolds(cfg: RunConfig) -> str:
    from .flow_operators import critical_reynolds

    a = cfg.args
    R, lam_hat = critical_reynolds(_flow(cfg), a.alpha, cfg.bc, bracket=(a.r_min, a.r_max))
    return _json({"alpha": _f17(a.alpha), "reynolds": _f17(R), "bc": cfg.bc, "flow": cfg.flow,
                  "lambda_hat": [_f17(lam_hat.real), _f17(lam_hat.imag)]})


COMMANDS = {
    "spectrum": cmd_spectrum,
    "resolvent-scan": cmd_resolvent_scan,
    "bstar": cmd_bstar,
    "airy-zeros": cmd_airy_zeros,
    "constants": cmd_constants,
    "mu0": cmd_mu0,
    "semigroup": cmd_semigroup,
    "hodge-demo": cmd_hodge_demo,
    "probe-rayleigh": cmd_probe_rayleigh,
    "probe-optimality": cmd_probe_optimality,
    "critical-reynolds": cmd_critical_reynolds,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="shearspec", description="Spectral and resolvent labs for plane shear flows.")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp, flow="couette", fmt="json", bc="S", n=128):
        sp.add_argument("--flow", default=flow, help="couette | poiseuille | nearly:<d> | convex:<c>")
        sp.add_argument("--bc", type=_bc, default=bc)
        sp.add_argument("--n", type=int, default=n, help="Chebyshev grid size")
        sp.add_argument("--format", dest="fmt", choices=("csv", "json"), default=fmt)
        sp.add_argument("--out", default=None, help="output path (stdout if omitted)")

    s = sub.add_parser("spectrum")
    common(s)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--beta", type=float, required=True)

    for name in ("resolvent-scan", "bstar"):
        s = sub.add_parser(name)
        common(s, fmt="csv" if name == "resolvent-scan" else "json", n=None)
        s.add_argument("--alpha-rule", choices=("default", "wide", "zero"), default="default")
        s.add_argument("--upsilon", type=float, default=0.5)
        if name == "resolvent-scan":
            s.add_argument("--beta", type=_floats, required=True, help="comma-separated list")
            s.add_argument("--band-center", type=float, default=-5.0 / 6.0)
        else:
            s.add_argument("--epsilon", type=float, required=True)
            s.add_argument("--L", type=float, required=True)

    s = sub.add_parser("airy-zeros")
    common(s)
    s.add_argument("--which", choices=("a0", "dirichlet"), default="a0")

    s = sub.add_parser("constants")
    common(s)
    s.add_argument("--skip-mu-hat", action="store_true")

    s = sub.add_parser("mu0")
    common(s, fmt="csv")
    s.add_argument("--theta", type=float, default=None)
    s.add_argument("--theta-max", type=float, default=12.0)
    s.add_argument("--step", type=float, default=0.05)

    s = sub.add_parser("semigroup")
    common(s)
    s.add_argument("--epsilon", type=float, default=1e-3)
    s.add_argument("--L", type=float, default=6.0)
    s.add_argument("--upsilon", type=float, required=True)
    s.add_argument("--modes", type=int, default=4)
    s.add_argument("--mode", type=int, default=1, help="mode written in CSV output")

    s = sub.add_parser("hodge-demo")
    common(s, n=48)
    s.add_argument("--L", type=float, default=2 * math.pi)
    s.add_argument("--modes", type=int, default=3)
    s.add_argument("--samples", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("probe-rayleigh")
    common(s, flow="nearly:0.05")
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--mu", type=_floats, default=[1e-1, 1e-2, 1e-3])
    s.add_argument("--alpha", type=_floats, default=[0.0, 1.0, 4.0])

    s = sub.add_parser("probe-optimality")
    common(s)
    s.add_argument("--nu", type=float, default=0.0)
    s.add_argument("--mu", type=_floats, default=[1e-2, 1e-3])
    s.add_argument("--method", choices=("ode", "collocation"), default="ode")

    s = sub.add_parser("critical-reynolds")
    common(s, flow="poiseuille", bc="D")
    s.add_argument("--alpha", type=float, default=1.02)
    s.add_argument("--r-min", type=float, default=5000.0)
    s.add_argument("--r-max", type=float, default=6500.0)
    return p


def _threads():
    v = os.environ.get("SHEARSPEC_THREADS")
    if not v:
        return
    import numba

    numba.set_num_threads(max(1, min(int(v), numba.config.NUMBA_NUM_THREADS)))


def run(argv: Optional[Sequence[str]] = None) -> int:
    from .constrained_spectra import BranchSingularityError, UnderResolvedError
    from .dense_complex import ExpmOverflowError, NonConvergenceError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    cfg = RunConfig(args.subcommand, args.flow, args.bc, args.n, args.fmt, args.out, args)
    try:
        _threads()
        text = COMMANDS[cfg.subcommand](cfg)
    except (np.linalg.LinAlgError, ZeroDivisionError, ArithmeticError, ExpmOverflowError,
            NonConvergenceError, BranchSingularityError, UnderResolvedError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except ValueError as exc:
        sys.stderr.write(f"precondition violated: {exc}\n")
        return EXIT_PRECONDITION
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
