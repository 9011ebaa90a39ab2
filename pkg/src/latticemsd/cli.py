"""Command line entry point.

Exit codes: 0 success, 1 invalid input or precondition failure (nothing is
written), 2 budget or convergence failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from .bodies import format_body, parse_body
from .config import COMMANDS, ConfigError, RunConfig
from .discrepancy import sweep_and_fit, window_msd
from .fourier import FourierConvergenceError, TailError, decay_scan, poisson_rest
from .lattice import BudgetError, count_points
from .mollifier import QuadratureError, mollified_count, mollified_rest, shell_bound_diag
from .plot import emit_plot
from .rotations import reports_to_csv, rotation_scan

FAILURES = (BudgetError, QuadratureError, FourierConvergenceError, TailError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="latticemsd", description="Lattice points in dilated convex bodies.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("params", nargs="*", help="body descriptor and key=value overrides")
        sp.add_argument("--config", help="INI file with a [run] section")
        sp.add_argument("--body", help="body descriptor, e.g. ball:d=2,r=1")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--budget", type=int)
    return p


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    cfg.command = args.command
    over = {}
    for tok in args.params:
        key, sep, val = tok.partition("=")
        if ":" in key or not sep:
            over["body"] = tok
        else:
            over[key] = val
    for k in ("body", "out", "threads", "budget"):
        v = getattr(args, k)
        if v is not None:
            over[k] = v
    cfg.update(over, "<command line>")
    cfg.validate()
    return cfg


def _meta(cfg: RunConfig) -> dict:
    return {"tool": "latticemsd", "version": __version__, "command": cfg.command, "body": cfg.body}


def _meta_line(cfg: RunConfig) -> str:
    return f"# tool=latticemsd {__version__}, command={cfg.command}, config=run.ini\n"


def _write_json(path, rec) -> None:
    with open(path, "w") as f:
        json.dump(rec, f, indent=2, sort_keys=True, allow_nan=True)
        f.write("\n")


def _prepend(path, line: str) -> None:
    with open(path) as f:
        body = f.read()
    with open(path, "w") as f:
        f.write(line + body)


# --------------------------------------------------------------------------
# commands: each returns (stdout text, {filename: writer})


def _cmd_count(cfg, body):
    n = count_points(body, Fraction(cfg.t), cfg.budget, cfg.threads)
    rec = {"meta": _meta(cfg), "t": cfg.t, "count": n}
    return str(n), {"count.json": lambda p: _write_json(p, rec)}


def _cmd_msd(cfg, body):
    w = window_msd(body, cfg.R, cfg.h, cfg.relative, cfg.budget, cfg.threads)
    rec = {"meta": _meta(cfg), "R": w.R, "h": w.h, "G": w.G, "events_used": w.events_used,
           "relative": w.relative, "integral": w.integral}
    return repr(w.G), {"msd.json": lambda p: _write_json(p, rec)}


def _cmd_sweep(cfg, body):
    rule = cfg.window if cfg.window in ("full", "short") else float(cfg.window)
    tab = sweep_and_fit(body, cfg.R_grid, rule, True, cfg.budget, cfg.threads)
    rep = tab.report()
    rep["meta"] = _meta(cfg)

    def csv(p):
        tab.to_csv(p)
        _prepend(p, _meta_line(cfg))

    def svg(p):
        f = tab.fit
        emit_plot(tab.R, tab.G, p, f.slope if f else None, f.intercept if f else None,
                  f"{tab.body} G(R)")

    out = {"sweep.csv": csv, "sweep.json": lambda p: _write_json(p, rep), "sweep.svg": svg}
    return f"slope={tab.fit.slope!r}" if tab.fit else "", out


def _cmd_mollify(cfg, body):
    n = mollified_count(body, cfg.t, cfg.eps)
    e = n - body.volume() * cfg.t**body.dim
    rec = {"meta": _meta(cfg), "t": cfg.t, "eps": cfg.eps, "N_eps": n, "E_eps": e,
           "N": count_points(body, Fraction(cfg.t), cfg.budget)}
    return repr(e), {"mollify.json": lambda p: _write_json(p, rec)}


def _cmd_poisson(cfg, body):
    r = poisson_rest(body, cfg.t, cfg.eps, cfg.K, cfg.tail_tol)
    direct = mollified_rest(body, cfg.t, cfg.eps)
    rec = {"meta": _meta(cfg), "t": r.t, "eps": r.eps, "K": r.K, "poisson": r.value,
           "direct": direct, "tail_bound": r.tail_bound, "imag": r.imag}
    return f"poisson={r.value!r} direct={direct!r}", {"poisson.json": lambda p: _write_json(p, rec)}


def _cmd_fourier(cfg, body):
    s = np.geomspace(cfg.xi_min, cfg.xi_max, cfg.n_xi)
    if body.dim == 2:
        dirs = [[math.cos(a), math.sin(a)] for a in cfg.directions]
    else:
        dirs = [np.eye(body.dim)[0]]
    scan = decay_scan(body, s, dirs)

    def csv(p):
        scan.to_csv(p, format_body(body))
        _prepend(p, _meta_line(cfg))

    rec = {"meta": _meta(cfg), "sup": scan.sup, "profile": scan.profile().tolist()}
    out = {"fourier_scan.csv": csv, "fourier_scan.json": lambda p: _write_json(p, rec),
           "fourier_scan.svg": lambda p: emit_plot(s, scan.abs_ft.max(axis=0), p, title=f"{cfg.body} |FT|")}
    return f"sup={scan.sup!r}", out


def _cmd_rotate(cfg, body):
    reps = rotation_scan(body, cfg.angles, cfg.rot_R if cfg.rot_R > 0 else None, cfg.rot_K, cfg.eps,
                         cfg.strip, cfg.mode, cfg.budget)
    data = [r.as_dict() for r in reps]

    def csv(p):
        reports_to_csv(reps, p, cfg.body)
        _prepend(p, _meta_line(cfg))

    return f"{len(reps)} angles", {"rotations.json": lambda p: _write_json(p, data), "rotations.csv": csv}


def _cmd_diag(cfg, body):
    d = shell_bound_diag(body, cfg.tau, cfg.eps)
    rec = {"meta": _meta(cfg), "tau": d.tau, "eps": d.eps, "S": d.S, "c0_hat": d.c0_hat,
           "lemma16_lhs": d.lemma16_lhs, "lemma16_rhs_parts": list(d.lemma16_rhs_parts),
           "eps_check": d.eps_check, "delta0": d.delta0, "vacuous": d.vacuous}
    return f"S={d.S} c0_hat={d.c0_hat!r}", {"diag.json": lambda p: _write_json(p, rec)}


_DISPATCH = {
    "count": _cmd_count, "msd": _cmd_msd, "sweep": _cmd_sweep, "mollify": _cmd_mollify,
    "poisson-check": _cmd_poisson, "fourier-scan": _cmd_fourier, "rotate-scan": _cmd_rotate,
    "diag": _cmd_diag,
}


def run(cfg: RunConfig) -> tuple:
    """Run one command; returns ``(exit_code, stdout_text)`` and writes artifacts."""
    try:
        cfg.validate()
        body = parse_body(cfg.body)
    except (ConfigError, ValueError) as e:
        return 1, f"error: {e}"
    t0 = time.perf_counter()
    try:
        text, files = _DISPATCH[cfg.command](cfg, body)
    except FAILURES as e:
        return 2, f"failure: {e}"
    except (ValueError, NotImplementedError) as e:
        return 1, f"error: {e}"
    os.makedirs(cfg.out, exist_ok=True)
    cfg.save(os.path.join(cfg.out, "run.ini"))
    for name, writer in files.items():
        writer(os.path.join(cfg.out, name))
    # wall time goes to stderr so artifacts stay byte-identical across reruns
    print(f"wall_time={time.perf_counter() - t0:.3f}s", file=sys.stderr)
    return 0, text


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _config_from_args(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    code, text = run(cfg)
    if code == 0:
        print(text)
    else:
        print(text, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
