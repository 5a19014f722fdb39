"""Command-line scenario runner.

    kdvbvp run CONFIG [--check]
    kdvbvp list-classes [--json]
"""
from __future__ import annotations

import argparse
import configparser
import json
import os
import re
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .domain import (CLASS_ROWS, Field, Grid, apply_Bk, class_template, extract_traces,
                     validate_class)
from .errors import ConfigInvalid, KdVError
from .linear import boundary_residual, solve_linear
from .nonlinear import solve_kdv
from .norms import kato_report, x_norm
from .oracle_fd import solve_fd

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4

ALLOWED = {
    "problem": {"class", "a", "b", "a30", "b30", "l", "t", "s_tier", "equation"},
    "data": {"initial", "h1", "h2", "h3"},
    "grid": {"nx", "nt", "pad"},
    "solver": {"tol", "r_max", "extension", "window", "oracle", "levels", "check_tol"},
    "outputs": {"directory", "field", "norms", "comparison"},
}

CLASS_TEXT = {
    1: ("A1, B1, C", "u(0,t)", "u(L,t)", "u_x(L,t) + a30 u(0,t) + b30 u(L,t)"),
    2: ("A1, C, B2", "u(0,t)", "u_x(L,t) + a30 u(0,t) + b30 u(L,t)",
        "u_xx(L,t) + a20 u(0,t) + a21 u_x(0,t) + b20 u(L,t) + b21 u_x(L,t)"),
    3: ("A2, B1, C", "u_xx(0,t) + a10 u(0,t) + a11 u_x(0,t) + b10 u(L,t) + b11 u_x(L,t)",
        "u(L,t)", "u_x(L,t) + a30 u(0,t) + b30 u(L,t)"),
    4: ("A2, C, B2", "u_xx(0,t) + a10 u(0,t) + a11 u_x(0,t) + b10 u(L,t) + b11 u_x(L,t)",
        "u_x(L,t) + a30 u(0,t) + b30 u(L,t)",
        "u_xx(L,t) + a20 u(0,t) + a21 u_x(0,t) + b20 u(L,t) + b21 u_x(L,t)"),
}

HYPOTHESES = {
    "A1": "a12 = a11 = 0, a10 != 0, b12 = b11 = b10 = 0",
    "A2": "a12 != 0, b12 = 0",
    "B1": "a22 = a21 = a20 = 0, b20 != 0, b22 = b21 = 0",
    "B2": "b22 != 0, a22 = 0",
    "C": "a32 = a31 = 0, b31 != 0, b32 = 0",
}


def class_descriptors():
    out = []
    for k, (hyp, f1, f2, f3) in CLASS_TEXT.items():
        out.append({"k": k, "hypotheses": list(CLASS_ROWS[k]),
                    "constraints": {r: HYPOTHESES[r] for r in CLASS_ROWS[k]},
                    "functionals": [f1, f2, f3], "damping": 1 if k == 4 else 0})
    return out


def list_classes(as_json=False):
    desc = class_descriptors()
    if as_json:
        return json.dumps(desc, indent=2) + "\n"
    blocks = []
    for d in desc:
        lines = [f"class {d['k']}: ({', '.join(d['hypotheses'])})"]
        lines += [f"  {r}: {c}" for r, c in d["constraints"].items()]
        lines += [f"  B{i + 1} u = {f}" for i, f in enumerate(d["functionals"])]
        lines.append(f"  damping delta = {d['damping']}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


# --- data profiles ---------------------------------------------------------

_CALL = re.compile(r"^\s*([a-z0-9\-]+)\s*(?:\((.*)\))?\s*$", re.I)


def _parse_call(text, key):
    m = _CALL.match(text)
    if not m:
        raise ConfigInvalid(f"cannot parse profile for '{key}': {text!r}")
    name, args = m.group(1).lower(), m.group(2) or ""
    params = {}
    for part in filter(None, (p.strip() for p in args.split(","))):
        if "=" not in part:
            raise ConfigInvalid(f"profile argument for '{key}' must be name=value: {part!r}")
        k, v = part.split("=", 1)
        try:
            params[k.strip().lower()] = float(v)
        except ValueError:
            raise ConfigInvalid(f"non-numeric profile argument for '{key}': {part!r}") from None
    return name, params


def initial_profile(text, x, L, base_dir=Path(".")):
    if text.startswith("file:"):
        return _load_samples(base_dir / text[5:], len(x), "initial")
    name, p = _parse_call(text, "initial")
    amp = p.get("amp", 0.1)
    if name == "zero":
        return np.zeros_like(x)
    if name == "gaussian":
        c, w = p.get("center", 0.5) * L, p.get("width", 0.1) * L
        return amp * np.exp(-((x - c) / w) ** 2)
    if name == "sine-mode":
        return amp * np.sin(p.get("mode", 1.0) * np.pi * x / L)
    if name == "sech2":
        c, w = p.get("center", 0.5) * L, p.get("width", 0.1) * L
        return amp / np.cosh((x - c) / w) ** 2
    raise ConfigInvalid(f"unknown initial profile '{name}'")


def boundary_profile(text, t, key, base_dir=Path(".")):
    """Time signal added to the held initial trace; named profiles vanish at t=0."""
    if text.startswith("file:"):
        return _load_samples(base_dir / text[5:], len(t), key)
    name, p = _parse_call(text, key)
    amp = p.get("amp", 0.0)
    T = t[-1]
    if name in ("zero", "hold"):
        return np.zeros_like(t)
    if name == "sine":
        return amp * np.sin(2 * np.pi * p.get("freq", 1.0) * t / T)
    if name == "ramp":
        return amp * (1 - np.cos(np.pi * t / T)) / 2
    raise ConfigInvalid(f"unknown boundary profile '{name}' for '{key}'")


def _load_samples(path, n, key):
    try:
        vals = np.loadtxt(path, delimiter=",", comments="#", ndmin=1)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read samples for '{key}': {exc}") from None
    if vals.shape != (n,):
        raise ConfigInvalid(f"samples for '{key}' have shape {vals.shape}, expected ({n},)")
    return vals


# --- config ----------------------------------------------------------------

def _matrix(text, key):
    try:
        vals = [float(v) for v in re.split(r"[\s,;]+", text.strip()) if v]
    except ValueError:
        raise ConfigInvalid(f"'{key}' must hold 9 numbers") from None
    if len(vals) != 9:
        raise ConfigInvalid(f"'{key}' must hold 9 numbers, got {len(vals)}")
    return np.array(vals).reshape(3, 3)


def load_config(path):
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from None
    for sec in cp.sections():
        if sec not in ALLOWED:
            raise ConfigInvalid(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in ALLOWED[sec]:
                raise ConfigInvalid(f"unknown key '{key}' in [{sec}]")
    if "problem" not in cp:
        raise ConfigInvalid("missing section [problem]")
    return cp


def _get(cp, sec, key, conv, default):
    if sec not in cp or key not in cp[sec]:
        return default
    try:
        return conv(cp[sec][key])
    except ValueError:
        raise ConfigInvalid(f"invalid value for '{key}' in [{sec}]: {cp[sec][key]!r}") from None


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def build_problem(cp, base_dir=Path(".")):
    pr = cp["problem"]
    if "a" in pr or "b" in pr:
        if not ("a" in pr and "b" in pr):
            raise ConfigInvalid("raw coefficients need both 'a' and 'b'")
        a, b = _matrix(pr["a"], "a"), _matrix(pr["b"], "b")
    elif "class" in pr:
        k = _get(cp, "problem", "class", int, None)
        if k not in (1, 2, 3, 4):
            raise ConfigInvalid(f"'class' must be 1..4, got {pr['class']!r}")
        a, b = class_template(k, _get(cp, "problem", "a30", float, 0.0),
                              _get(cp, "problem", "b30", float, 0.0))
    else:
        raise ConfigInvalid("[problem] needs 'class' or raw 'a'/'b'")
    cls = validate_class(a, b)
    L = _get(cp, "problem", "l", float, 1.0)
    T = _get(cp, "problem", "t", float, 0.05)
    equation = _get(cp, "problem", "equation", str.strip, "kdv")
    if equation not in ("kdv", "linear"):
        raise ConfigInvalid(f"'equation' must be kdv or linear, got {equation!r}")
    nx = _get(cp, "grid", "nx", int, 65)
    nt = _get(cp, "grid", "nt", int, 129)
    try:
        grid = Grid(L, T, nx, nt)
    except (ValueError, KdVError) as exc:
        raise ConfigInvalid(f"invalid grid: {exc}") from None
    return cls, grid, equation


def build_data(cp, cls, grid, equation, base_dir=Path(".")):
    init = _get(cp, "data", "initial", str.strip, "zero")
    phi = initial_profile(init, grid.x, grid.L, base_dir)
    held = np.zeros((3, grid.nt))
    if np.any(phi):
        tr = extract_traces(Field(grid, np.repeat(phi[:, None], grid.nt, axis=1)))
        if equation == "kdv":
            held = apply_Bk(cls, tr).h
        else:
            held = np.array([tr.get(e, p) for e, p in cls.principal()])
    h = np.array([held[i] + boundary_profile(_get(cp, "data", f"h{i + 1}", str.strip, "zero"),
                                             grid.t, f"h{i + 1}", base_dir) for i in range(3)])
    return phi, h


# --- outputs ---------------------------------------------------------------

def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def field_csv(u: Field):
    g = u.grid
    X, Tt = np.meshgrid(g.x, g.t, indexing="xy")
    lines = ["# kdv-bvp field v1", "x,t,u"]
    vals = u.values.T
    for n in range(g.nt):
        for i in range(g.nx):
            lines.append(f"{X[n, i]:.17g},{Tt[n, i]:.17g},{vals[n, i]:.17g}")
    return "\n".join(lines) + "\n"


def norm_csv(reports):
    lines = ["report_kind,key,value,grid_level,stable_flag"]
    for rep in reports:
        for kind, key, val, lvl, flag in rep.rows():
            lines.append(f"{kind},{key},{val:.17g},{lvl},{flag}")
    return "\n".join(lines) + "\n"


# --- runner ----------------------------------------------------------------

def _solve(cls, grid, equation, phi, h, opts):
    if equation == "linear":
        u, rep = solve_linear(cls.k, phi, None, h, grid, R=opts["R"], extension=opts["extension"])
    else:
        u, rep = solve_kdv(cls.k, cls, phi, h, grid=grid, tol=opts["tol"], R=opts["R"],
                           extension=opts["extension"], theta=opts["window"])
    return u, rep


def _oracle_level(args):
    cls_ab, grid_t, equation, cp_dict, base_dir, opts = args
    with threadpool_limits(limits=1):
        cls = validate_class(*cls_ab)
        grid = Grid(*grid_t)
        cp = configparser.ConfigParser()
        cp.read_dict(cp_dict)
        phi, h = build_data(cp, cls, grid, equation, Path(base_dir))
        u, _ = _solve(cls, grid, equation, phi, h, opts)
        if equation == "linear":
            ufd = solve_fd(cls.k, cls, phi, h, grid, nonlinear=False, transport=False,
                           delta=cls.delta, principal_only=True)
        else:
            ufd = solve_fd(cls.k, cls, phi, h, grid, nonlinear=True)
        return float(np.sqrt(grid.dx * grid.dt * np.sum((u.values - ufd.values) ** 2)))


def _threads():
    env = os.environ.get("KDVBVP_THREADS")
    if env is None:
        return os.cpu_count() or 1
    try:
        n = int(env)
    except ValueError:
        raise ConfigInvalid(f"KDVBVP_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigInvalid("KDVBVP_THREADS must be >= 1")
    return n


def run_scenario(config_path, check=False, stdout=sys.stdout):
    """Execute a scenario; returns the exit status."""
    config_path = Path(config_path)
    base_dir = config_path.parent
    try:
        cp = load_config(config_path)
        cls, grid, equation = build_problem(cp, base_dir)
        phi, h = build_data(cp, cls, grid, equation, base_dir)
        opts = {"tol": _get(cp, "solver", "tol", float, 1e-8),
                "R": _get(cp, "solver", "r_max", float, None),
                "extension": _get(cp, "solver", "extension", str.strip, "poly"),
                "window": _get(cp, "solver", "window", float, None)}
        if opts["extension"] not in ("poly", "smooth", "zero"):
            raise ConfigInvalid(f"unknown extension {opts['extension']!r}")
        oracle = _get(cp, "solver", "oracle", _bool, False)
        levels = _get(cp, "solver", "levels", int, 3)
        check_tol = _get(cp, "solver", "check_tol", float, 1e-3)
        outdir = Path(_get(cp, "outputs", "directory", str.strip, "out"))
        if not outdir.is_absolute():
            outdir = base_dir / outdir
        want_field = _get(cp, "outputs", "field", _bool, True)
        want_norms = _get(cp, "outputs", "norms", _bool, True)
        workers = _threads()
    except ConfigInvalid as exc:
        print(f"ConfigInvalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    failures = []
    try:
        with threadpool_limits(limits=1):
            u, rep = _solve(cls, grid, equation, phi, h, opts)
        if want_field:
            _atomic_write(outdir / "field.csv", field_csv(u))
        if want_norms:
            dn = x_norm(cls.k, phi, h, grid.L, grid.dt)
            _atomic_write(outdir / "norms.csv", norm_csv([kato_report(u, dn)]))
        summary = {"class": cls.k, "equation": equation, "iterations": rep.iterations,
                   "contraction": rep.contraction, "residuals": rep.residuals,
                   "quadrature": rep.quadrature}
        if check:
            hb = h if equation == "linear" else None
            if hb is not None:
                res = boundary_residual(u, cls, hb)
                ref = max(float(np.sqrt(grid.dt * np.sum(h ** 2))), 1e-300)
                if max(res) / ref > check_tol and max(res) > 1e-12:
                    failures.append(f"boundary residual {max(res):.3e}")
            if any(c > 0.9 for c in rep.contraction):
                failures.append("contraction factor above 0.9")
        if oracle:
            base_n = grid.nx - 1
            items = []
            for lvl in range(levels):
                nx = base_n * 2 ** lvl + 1
                nt = (grid.nt - 1) * 2 ** lvl + 1
                items.append(((cls.a.copy(), cls.b.copy()), (grid.L, grid.T, nx, nt), equation,
                              {s: dict(cp[s]) for s in cp.sections()}, str(base_dir), opts))
            if workers > 1:
                with ProcessPoolExecutor(max_workers=min(workers, levels)) as ex:
                    diffs = list(ex.map(_oracle_level, items))
            else:
                diffs = [_oracle_level(it) for it in items]
            lines = ["level,nx,nt,l2_difference"]
            for lvl, (it, d) in enumerate(zip(items, diffs)):
                lines.append(f"{lvl},{it[1][2]},{it[1][3]},{d:.17g}")
            _atomic_write(outdir / "comparison.csv", "\n".join(lines) + "\n")
            summary["oracle_differences"] = diffs
            if check:
                for a, b in zip(diffs, diffs[1:]):
                    if b > 0.4 * a:
                        failures.append(f"oracle difference ratio {b / a:.3f} > 0.4")
        _atomic_write(outdir / "report.json", json.dumps(summary, indent=2, default=float) + "\n")
    except KdVError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if failures:
        for f in failures:
            print(f"check failed: {f}", file=sys.stderr)
        return EXIT_CHECK
    print(f"ok: wrote outputs to {outdir}", file=stdout)
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(prog="kdvbvp", description="KdV interval problems")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--check", action="store_true", help="exit 4 if acceptance checks fail")
    p_list = sub.add_parser("list-classes", help="print the four boundary classes")
    p_list.add_argument("--json", action="store_true")
    args = parser.parse_args(argv)
    if args.command == "list-classes":
        sys.stdout.write(list_classes(args.json))
        return EXIT_OK
    return run_scenario(args.config, args.check)


if __name__ == "__main__":
    sys.exit(main())
