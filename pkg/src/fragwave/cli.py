"""Command-line front end: ``python -m fragwave <subcommand> ...``.

Every run writes its CSV tables plus a ``manifest.json`` into ``--out``.
``python -m fragwave --from-manifest DIR/manifest.json`` repeats a run with
the recorded parameters and the spec embedded in the manifest.
"""
from __future__ import annotations

import argparse
import csv
import json
import platform
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import Battery
from .dislocation import (DislocationMeasure, c_of_p, critical_exponent, critical_speed,
                          killing_rate, phi, phi_prime)
from .errors import FragwaveError, NumericalError, ValidationError
from .fkpp import cross_validate, phase_scan, solve_wave
from .levy import scale_function
from .simulator import run_trials, summarize
from .streams import DEFAULT_SEED, check_seed

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 1, 2, 3
SPEC_KEYS = {"model", "atoms", "defaults"}
DEFAULT_KEYS = {"dx", "x_max", "horizon", "block_cap", "trials"}
CRITICAL_GRID = np.round(np.arange(-0.9, 4.0001, 0.1), 10)


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which is reserved for numerical failures
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# spec files ---------------------------------------------------------------------

def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def _atom_lines(text: str) -> list[int]:
    """Line of each element of the top-level "atoms" array (text is valid JSON)."""
    m = re.search(r'"atoms"\s*:\s*\[', text)
    if m is None:
        return []
    dec = json.JSONDecoder()
    lines, i = [], m.end()
    while True:
        while i < len(text) and text[i] in " \t\r\n,":
            i += 1
        if i >= len(text) or text[i] == "]":
            return lines
        lines.append(_line_of(text, i))
        _, i = dec.raw_decode(text, i)


def parse_spec(text: str, source: str = "<spec>") -> tuple[DislocationMeasure, dict]:
    """Parse a JSON spec into a measure and its optional run defaults.

    Atoms are ``{"weight": w, "fragments": [...]}`` objects or ``[w, [...]]`` pairs.
    Errors name the source line and the offending field.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{source} line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{source} line 1: top level must be an object with an \"atoms\" array")
    unknown = set(data) - SPEC_KEYS
    if unknown:
        raise ValidationError(f"{source}: unknown field(s) {sorted(unknown)}")
    atoms = data.get("atoms")
    if not isinstance(atoms, list) or not atoms:
        raise ValidationError(f"{source}: field \"atoms\" must be a nonempty array")
    lines = _atom_lines(text)
    pairs = []
    for i, atom in enumerate(atoms):
        where = f"{source} line {lines[i] if i < len(lines) else '?'}: atoms[{i}]"
        if isinstance(atom, dict):
            extra = set(atom) - {"weight", "fragments"}
            if extra or "weight" not in atom or "fragments" not in atom:
                raise ValidationError(f"{where}: expected fields \"weight\" and \"fragments\"")
            w, frags = atom["weight"], atom["fragments"]
        elif isinstance(atom, list) and len(atom) == 2:
            w, frags = atom
        else:
            raise ValidationError(f"{where}: expected {{\"weight\", \"fragments\"}} or [weight, [sizes]]")
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise ValidationError(f"{where}.weight: expected a number, got {w!r}")
        if not isinstance(frags, list) or any(isinstance(s, bool) or not isinstance(s, (int, float))
                                              for s in frags):
            raise ValidationError(f"{where}.fragments: expected an array of numbers")
        try:
            DislocationMeasure([(w, frags)])
        except ValidationError as exc:
            msg = str(exc).removeprefix("atom 0: ")
            field = "weight" if "weight" in msg else "fragments"
            raise ValidationError(f"{where}.{field}: {msg}") from None
        pairs.append((w, frags))
    defaults = data.get("defaults", {})
    if not isinstance(defaults, dict):
        raise ValidationError(f"{source}: \"defaults\" must be an object")
    unknown = sorted(set(defaults) - DEFAULT_KEYS)
    if unknown:
        raise ValidationError(f"{source}: unknown defaults {unknown}; "
                              f"allowed keys are {sorted(DEFAULT_KEYS)}")
    for k, v in defaults.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ValidationError(f"{source}: defaults.{k} must be a positive number")
    model = data.get("model", Path(source).stem)
    return DislocationMeasure(pairs, name=str(model)), defaults


def load_spec(path: str) -> tuple[DislocationMeasure, dict, dict]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read spec {path}: {exc.strerror}") from None
    nu, defaults = parse_spec(text, path)
    return nu, defaults, json.loads(text)


# output handling ------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Outputs:
    """Tracks files written by one run so a failure can remove them."""

    def __init__(self, out: str):
        self.dir = Path(out)
        self.written: list[Path] = []

    def csv(self, name: str, header, rows) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        self.written.append(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        return path

    def json(self, name: str, obj) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        self.written.append(path)
        path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
        return path

    def discard(self):
        for p in self.written:
            p.unlink(missing_ok=True)
        self.written.clear()


def _param(args, name, defaults, fallback):
    v = getattr(args, name)
    if v is None:
        v = defaults.get(name, fallback)
    return v


# subcommands -------------------------------------------------------------------------

def cmd_critical(args, nu, defaults, out: Outputs, echo) -> int:
    pbar = critical_exponent(nu)
    cbar = critical_speed(nu)
    echo(f"p_bar = {pbar:.12g}")
    echo(f"c_pbar = {cbar:.12g}")
    echo(f"killing rate = {killing_rate(nu):.12g}")
    grid = sorted(set(CRITICAL_GRID.tolist()) | {pbar})
    out.csv("critical.csv", ["p", "phi", "phi_prime", "c_p"],
            ([p, float(phi(nu, p)), float(phi_prime(nu, p)), float(c_of_p(nu, p))] for p in grid))
    return EXIT_OK


def cmd_simulate(args, nu, defaults, out: Outputs, echo) -> int:
    trials = int(_param(args, "trials", defaults, 1000))
    horizon = float(_param(args, "horizon", defaults, 50.0))
    cap = int(_param(args, "block_cap", defaults, 500))
    results = run_trials(nu, args.x, args.c, horizon, cap, trials, args.seed, args.threads)
    est = summarize(results)
    out.csv("trials.csv", ["trial_id", "outcome", "extinction_time", "peak_blocks", "events"],
            ([i, r.outcome.value, r.extinction_time, r.peak_blocks, r.events]
             for i, r in enumerate(results)))
    echo(f"phi_hat({args.x:g}) = {est.point:.6f} +- {est.std_error:.6f} "
         f"(99% CI [{est.ci_low:.6f}, {est.ci_high:.6f}], {trials} trials)")
    echo(f"extinct {est.n_extinct}, survived at horizon {est.n_survived_horizon} "
         f"({est.ambiguous} ambiguous), survived at cap {est.n_survived_cap}")
    if est.bound_violations:
        raise NumericalError(f"block-count bound violated {est.bound_violations} times")
    return EXIT_OK


def cmd_wave(args, nu, defaults, out: Outputs, echo) -> int:
    dx = _param(args, "dx", defaults, None)
    x_max = _param(args, "x_max", defaults, None)
    wave, rep = solve_wave(nu, args.c, dx=dx, x_max=x_max, tol=args.tol)
    out.csv("wave.csv", ["x", "f"], zip(wave.x.tolist(), wave.values.tolist()))
    out.csv("residual.csv", ["x", "residual"], zip(rep.x.tolist(), rep.residual.tolist()))
    table = scale_function(nu, args.c, x_max=wave.x_max, dx=args.scale_dx)
    out.csv("scale.csv", ["x", "W"], zip(table.x.tolist(), table.values.tolist()))
    echo(f"f(0+) = {wave.values[0]:.8f}, dx = {wave.dx:.6g}, x_max = {wave.x_max:.6g}, "
         f"max |residual| = {rep.max_abs_residual:.3e}")
    if args.check:
        trials = int(_param(args, "trials", defaults, 4000))
        horizon = float(_param(args, "horizon", defaults, 50.0))
        cap = int(_param(args, "block_cap", defaults, 500))
        cv = cross_validate(nu, args.c, args.check, trials, horizon, cap, args.seed,
                            wave=wave, workers=args.threads)
        out.csv("crossval.csv", ["x", "f_solver", "phi_mc", "se", "pass"],
                ([r.x, r.f_solver, r.phi_mc, r.se, r.passed] for r in cv.rows))
        for r in cv.rows:
            echo(f"x = {r.x:g}: f = {r.f_solver:.5f}, phi_mc = {r.phi_mc:.5f} +- {r.se:.5f} "
                 f"-> {'pass' if r.passed else 'FAIL'}")
    return EXIT_OK


def cmd_scan(args, nu, defaults, out: Outputs, echo) -> int:
    if args.steps < 2 or not 0 < args.c_min < args.c_max:
        raise ValidationError("scan needs 0 < --c-min < --c-max and --steps >= 2")
    trials = int(_param(args, "trials", defaults, 1000))
    horizon = float(_param(args, "horizon", defaults, 50.0))
    cap = int(_param(args, "block_cap", defaults, 500))
    cs = np.linspace(args.c_min, args.c_max, args.steps).tolist()
    rows = phase_scan(nu, args.x, cs, trials, horizon, cap, args.seed, args.threads)
    out.csv("scan.csv", ["c", "phi_hat", "se", "ci_low", "ci_high", "n_trials", "n_extinct",
                         "n_survived_horizon", "n_survived_cap"],
            ([c, e.point, e.std_error, e.ci_low, e.ci_high, e.n_trials, e.n_extinct,
              e.n_survived_horizon, e.n_survived_cap] for c, e in rows))
    echo(f"c_pbar = {critical_speed(nu):.6g}")
    for c, e in rows:
        echo(f"c = {c:.4f}: phi_hat = {e.point:.4f} +- {e.std_error:.4f}")
    return EXIT_OK


def cmd_verify(args, nu, defaults, out: Outputs, echo) -> int:
    echo(f"spec '{nu.name}': c_pbar = {critical_speed(nu):.6g}; running the reference battery "
         f"(budget {args.budget})")
    results = Battery(args.budget, args.seed, args.threads).run(echo)
    out.csv("acceptance.csv", ["criterion", "name", "passed", "seconds", "detail"],
            ([r.number, r.name, r.passed, r.seconds, r.detail] for r in results))
    failed = [r.number for r in results if not r.passed]
    echo("all criteria passed" if not failed else f"failed criteria: {failed}")
    return EXIT_OK if not failed else EXIT_ACCEPTANCE


COMMANDS = {"critical": cmd_critical, "simulate": cmd_simulate, "wave": cmd_wave,
            "scan": cmd_scan, "verify": cmd_verify}


# argument parsing -------------------------------------------------------------------

def _seed(text: str) -> int:
    try:
        return check_seed(int(text, 0))
    except (ValueError, ValidationError):
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text!r}")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        v = 0
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _points(text: str) -> list[float]:
    try:
        pts = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not pts:
        raise argparse.ArgumentTypeError("expected at least one point")
    return pts


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fragwave", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fragwave {__version__}")
    parser.add_argument("--from-manifest", metavar="PATH",
                        help="repeat the run recorded in a manifest.json")
    parser.add_argument("--out", help="output directory (overrides the manifest when rerunning)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--spec", required=True, help="JSON spec file")
        p.add_argument("--seed", type=_seed, default=DEFAULT_SEED, help="master seed (default 0xF4A6)")
        p.add_argument("--threads", type=_positive_int, default=1, help="worker processes")
        p.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
        return p

    add("critical", "critical exponent and speed, plus a Phi table")

    def mc_flags(p):
        p.add_argument("--trials", type=_positive_int)
        p.add_argument("--horizon", type=float)
        p.add_argument("--cap", dest="block_cap", type=_positive_int)

    p = add("simulate", "Monte Carlo extinction trials")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    mc_flags(p)

    p = add("wave", "solve the travelling wave and its scale function")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--dx", type=float)
    p.add_argument("--x-max", dest="x_max", type=float)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--scale-dx", type=float, default=2.0 ** -8)
    p.add_argument("--check", type=_points, metavar="X1,X2,...",
                   help="cross-validate against Monte Carlo at these points")
    mc_flags(p)

    p = add("scan", "extinction probability along a range of speeds")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--c-min", type=float, required=True)
    p.add_argument("--c-max", type=float, required=True)
    p.add_argument("--steps", type=_positive_int, default=16)
    mc_flags(p)

    p = add("verify", "run the acceptance battery")
    p.add_argument("--budget", choices=("quick", "full"), default="full")
    return parser


def _params(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("from_manifest",)}


def _from_manifest(path: str, out_override) -> tuple[argparse.Namespace, DislocationMeasure, dict, dict]:
    try:
        man = json.loads(Path(path).read_text())
        params = dict(man["params"])
        spec_data = man["spec_data"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ValidationError(f"cannot read manifest {path}: {exc}") from None
    if man.get("subcommand") not in COMMANDS:
        raise ValidationError(f"manifest {path}: unknown subcommand {man.get('subcommand')!r}")
    params["command"] = man["subcommand"]
    if out_override is not None:
        params["out"] = out_override
    nu, defaults = parse_spec(json.dumps(spec_data), params.get("spec", path))
    return argparse.Namespace(**params), nu, defaults, spec_data


def run(argv=None, echo=print) -> int:
    out = None
    try:
        args = build_parser().parse_args(argv)
        if args.from_manifest:
            args, nu, defaults, spec_data = _from_manifest(args.from_manifest, args.out)
        else:
            if args.command is None:
                raise UsageError("fragwave: a subcommand or --from-manifest is required")
            nu, defaults, spec_data = load_spec(args.spec)
        if getattr(args, "out", None) is None:
            args.out = "fragwave_out"
        out = Outputs(args.out)
        t0 = time.perf_counter()
        code = COMMANDS[args.command](args, nu, defaults, out, echo)
        out.json("manifest.json", {
            "subcommand": args.command,
            "params": _params(args),
            "spec_data": spec_data,
            "seed": args.seed,
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "wall_time_s": round(time.perf_counter() - t0, 3),
            "outputs": [p.name for p in out.written],
        })
        return code
    except ValidationError as exc:
        code, msg = EXIT_VALIDATION, str(exc)
    except NumericalError as exc:
        code, msg = EXIT_NUMERICAL, str(exc)
    except FragwaveError as exc:
        code, msg = EXIT_NUMERICAL, str(exc)
    except OSError as exc:
        code, msg = EXIT_VALIDATION, f"I/O error: {exc}"
    if out is not None:
        out.discard()
    print(f"error: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
