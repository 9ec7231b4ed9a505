"""Command-line front end: wavedg <command> [options]."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import convergence as cv
from . import dg, energy
from .problems import BUILTIN, get_problem
from .sparse import SolveError

COMMANDS = ("solve", "audit", "temporal-study", "spatial-study", "probe")
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


@dataclass
class RunConfig:
    command: str = "solve"
    scheme: str = "dg1"
    nx: int = 64
    nt: int = 32
    nx_list: tuple = (8, 16, 32, 64)
    nt_list: tuple = (8, 16, 32, 64, 128)
    t_final: float = 1.0
    a: float = 0.0
    b: float = math.pi
    problem: str = "sinwave"
    output: Optional[str] = None
    format: str = "csv"
    samples: int = 5
    seed: int = 0

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.scheme not in dg.SCHEMES:
            raise UsageError(f"unsupported scheme {self.scheme!r}; choose dg0 or dg1")
        if self.format not in ("csv", "json"):
            raise UsageError(f"unsupported format {self.format!r}")
        if self.problem not in BUILTIN:
            raise UsageError(f"unknown problem {self.problem!r}")
        if not self.t_final > 0:
            raise UsageError("t-final must be positive")
        if not self.b > self.a:
            raise UsageError("domain needs b > a")
        if self.nx < 2 or self.nt < 1:
            raise UsageError("need nx >= 2 and nt >= 1")
        if not self.nx_list or not self.nt_list:
            raise UsageError("ladders must be nonempty")
        if self.samples < 2:
            raise UsageError("samples must be at least 2")


FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _ladder(text: str) -> tuple:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"malformed ladder {text!r}") from None
    if not values:
        raise UsageError(f"empty ladder {text!r}")
    return values


def _convert(key: str, text: str):
    kind = FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise UsageError(f"malformed number for {key}: {text!r}") from None
    if kind == "tuple":
        return _ladder(text)
    return text


def read_config_file(path: str) -> dict:
    """Flat 'key = value' file; '#' starts a comment."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    values = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in FIELD_TYPES:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _convert(key, val)
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wavedg", description="dG(0)/dG(1) + P1 solver for the 1D wave equation.")
    p.add_argument("command", nargs="?", choices=COMMANDS, help="what to run (default: solve)")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--scheme")
    p.add_argument("--nx")
    p.add_argument("--nt")
    p.add_argument("--nx-list")
    p.add_argument("--nt-list")
    p.add_argument("--t-final")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--problem", help=f"one of {', '.join(sorted(BUILTIN))}")
    p.add_argument("--output", "-o")
    p.add_argument("--format")
    p.add_argument("--samples")
    p.add_argument("--seed")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def parse_args(argv: Sequence[str]) -> RunConfig:
    if not argv:
        raise UsageError("no arguments given")
    parser = build_parser()
    known = parser._option_string_actions
    for token in argv:
        flag = token.split("=", 1)[0]
        if flag.startswith("-") and not _is_number(flag) and flag not in known:
            raise UsageError(f"unknown option {flag}")
    ns = parser.parse_args(list(argv))
    values = read_config_file(ns.config) if ns.config else {}
    for key in FIELD_TYPES:
        flag = getattr(ns, key, None)
        if flag is not None:
            values[key] = flag if key == "command" else _convert(key, flag)
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def write_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".wavedg-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def check_output(path: Optional[str]):
    if path is None:
        return
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory) or not os.access(directory, os.W_OK):
        raise UsageError(f"output directory is not writable: {directory}")
    if os.path.isdir(path):
        raise UsageError(f"output path is a directory: {path}")


def _records_to_text(header, rows, fmt: str) -> str:
    if fmt == "json":
        out = [{h: (None if isinstance(v, float) and not math.isfinite(v) else v)
                for h, v in zip(header, r)} for r in rows]
        return json.dumps({"columns": list(header), "rows": out}, indent=1)
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(str(v) if isinstance(v, int) else cv.fmt(float(v)) for v in r))
    return "\n".join(lines) + "\n"


def _solve(cfg: RunConfig):
    sol = get_problem(cfg.problem)
    part = dg.TimePartition.uniform(cfg.t_final, cfg.nt)
    disc = cv.Discretization.build(cfg.a, cfg.b, cfg.nx)
    traj, _ = cv.solve_problem(sol, cfg.scheme, cfg.nx, part, disc)
    return sol, disc, traj


def cmd_solve(cfg: RunConfig):
    sol, disc, traj = _solve(cfg)
    u1, u2 = traj.eval(cfg.t_final)
    space = disc.space
    x = space.mesh.nodes
    rows = list(zip(x, space.full_nodal(u1), space.full_nodal(u2)))
    text = _records_to_text(("x", "u1", "u2"), rows, cfg.format)
    errs = cv.nodal_errors(traj, space, sol)
    if not all(map(math.isfinite, errs)):
        raise NumericalFailure("non-finite solution")
    summary = (f"solve {cfg.scheme} nx={cfg.nx} nt={cfg.nt} T={cfg.t_final:g}: "
               f"u1 L2={errs[0]:.6e} u1 H1={errs[1]:.6e} u2 L2={errs[2]:.6e}")
    return text, summary, None


def cmd_audit(cfg: RunConfig):
    sol, disc, traj = _solve(cfg)
    load = sol.load_fn(disc.space)
    ledger = energy.audit(traj, disc.M, disc.A, load)
    header = ("n", "t", "energy", "jump_sum", "work", "residual")
    rows = [(n, *vals) for n, vals in enumerate(zip(ledger.t, ledger.e_node, ledger.jump_sum,
                                                    ledger.work, ledger.partial_residuals))]
    text = _records_to_text(header, rows, cfg.format)
    rel = ledger.relative_residual
    tol = 1e-10 if load is None else 1e-9
    summary = f"audit {cfg.scheme} nx={cfg.nx} nt={cfg.nt}: relative energy residual={rel:.3e}"
    failure = None if rel <= tol else f"energy residual {rel:.3e} exceeds {tol:g}"
    return text, summary, failure


def _study_failure(table: cv.RateTable) -> Optional[str]:
    for c in cv.ERROR_COLUMNS:
        errs = table.errors[c]
        if not all(map(math.isfinite, errs)):
            return f"non-finite error in {c}"
    return None


def cmd_study(cfg: RunConfig):
    study_cfg = cv.StudyConfig(scheme=cfg.scheme, nx=cfg.nx, nx_list=cfg.nx_list, n_list=cfg.nt_list,
                               t_final=cfg.t_final, domain=(cfg.a, cfg.b), samples=cfg.samples,
                               problem=cfg.problem)
    if cfg.command == "temporal-study":
        table = cv.run_temporal_study(study_cfg)
    else:
        table = cv.run_spatial_study(study_cfg)
    text = table.to_json() if cfg.format == "json" else table.to_csv()
    summary = (f"{cfg.command} {cfg.scheme}: final-pair EOC u1 L2 nodal="
               f"{table.final_eoc('err_u1_l2_nodal'):.3f} u1 L2 uniform={table.final_eoc('err_u1_l2_unif'):.3f}"
               f" u1 H1 nodal={table.final_eoc('err_u1_h1_nodal'):.3f}")
    return text, summary, _study_failure(table), table


def cmd_probe(cfg: RunConfig):
    q = dg.SCHEMES.index(cfg.scheme)
    parts = [dg.TimePartition.uniform(cfg.t_final, n) for n in cfg.nt_list]
    rep = cv.interpolation_rate_probe(np.cos, parts, q)
    rows = [(n, p.k_max, e, r) for n, p, e, r in zip(rep.n_list, parts, rep.errors, [math.nan] + rep.eocs)]
    text = _records_to_text(("resolution", "k", "error", "eoc"), rows, cfg.format)
    last = rep.eocs[-1] if rep.eocs else math.nan
    summary = (f"probe q={q}: final EOC={last:.3f} nodal residual={rep.nodal_residual:.1e} "
               f"moment residual={rep.moment_residual:.1e}")
    worst = max(rep.nodal_residual, rep.moment_residual)
    failure = None if worst <= 1e-12 else f"interpolant conditions violated ({worst:.1e})"
    return text, summary, failure


def execute(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    check_output(cfg.output)
    table = None
    try:
        if cfg.command == "solve":
            text, summary, failure = cmd_solve(cfg)
        elif cfg.command == "audit":
            text, summary, failure = cmd_audit(cfg)
        elif cfg.command in ("temporal-study", "spatial-study"):
            text, summary, failure, table = cmd_study(cfg)
        else:
            text, summary, failure = cmd_probe(cfg)
    except (SolveError, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.output:
        write_atomic(cfg.output, text)
        if table is not None:
            write_atomic(cfg.output + ".plot.dat", table.plot_data())
    else:
        stdout.write(text)
    print(summary, file=stdout)
    if failure:
        print(f"numerical failure: {failure}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if "-v" in argv or "--verbose" in argv else logging.WARNING)
        return execute(cfg)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(f"wavedg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
