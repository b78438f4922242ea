from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np
import yaml

from gbdt_devlog import devlog_path, log_event, prune_devlogs, run_stage
from weylgbdt import __version__
from weylgbdt.artifacts import POTENTIAL_HEADER, SOLUTION_HEADER, csv_sink, emit_json, write_rows
from weylgbdt.config import TRIPLE_SCHEMA, Grid, RunConfig, load_run_config
from weylgbdt.errors import (
    ConfigError,
    ConstraintViolated,
    GBDTError,
    IdentityViolated,
    InconsistentLowerPart,
    NotHermitian,
    NotSkewSymmetric,
    ProfileEvaluationError,
    ShapeError,
)
from weylgbdt.gbdt_explicit import Method, default_workers, eval_psi, eval_S, sample_profile
from weylgbdt.gbdt_general import SeedPotential, eval_psi_general, integrate_dressing, transformed_potential
from weylgbdt.linalg_core import hermitian_min_eig
from weylgbdt.parameter_triples import (
    ParameterTriple,
    make_example1,
    make_example2,
    make_example3,
    make_example4,
    operator_identity_residual,
    random_example3,
    random_example4,
    realness_conditions,
    spectrum_halfplane_check,
    triple_from_document,
    triple_to_document,
)
from weylgbdt.verification import full_report

logger = logging.getLogger("weyl-gbdt")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

DEFAULT_XGRID = "-3:3:0.1"
DEFAULT_YGRID = "-1:1:0.5"
DEFAULT_VERIFY_XGRID = "-2:2:0.25"

# Parameter errors are a property of the input, not of the numerics.
_INPUT_ERRORS = (ConfigError, ConstraintViolated, NotSkewSymmetric, InconsistentLowerPart, ShapeError)

DEVLOG: Optional[Path] = None


def status(glyph: str, message: str) -> None:
    print(f"{glyph} {message}", file=sys.stderr)


# -- argument parsing -----------------------------------------------------------

def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}")


def _tolerance_override(text: str) -> Tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {key} must be a number")


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    src = p.add_argument_group("triple source")
    src.add_argument("--config", type=Path, help="Run config (YAML or JSON)")
    src.add_argument("--triple", type=Path, help="Serialized triple document (JSON/YAML)")
    src.add_argument("--triple-json", type=str, help="Serialized triple given inline")
    src.add_argument("--example", type=int, choices=[1, 2, 3, 4], help="Built-in example family")
    src.add_argument("--calA", type=float, help="Example 1: calA > 0")
    src.add_argument("--m1", type=float, help="Example 1: |Lambda_1(0)|")
    src.add_argument("--m2", type=float, help="Example 1: |Lambda_2(0)|")
    src.add_argument("--sign1", type=int, choices=[1, -1], help="Example 1: sign of Lambda_1(0)")
    src.add_argument("--sign2", type=int, choices=[1, -1], help="Example 1: sign of Lambda_2(0)")
    src.add_argument("--n", type=int, help="Examples 3/4: order of the random triple")
    src.add_argument("--rng-seed", type=int, help="Examples 3/4: RNG seed (required for random triples)")
    src.add_argument("--h1", type=_float_list, help="Examples 3/4: h1 as comma-separated reals")
    src.add_argument("--h2", type=_float_list, help="Examples 3/4: h2 as comma-separated reals")
    src.add_argument("--calA0", type=str, help="Example 3: skew-symmetric calA0 as a JSON matrix")
    src.add_argument("--lower", type=str, help="Example 4: strictly lower part of calA as a JSON matrix")

    run = p.add_argument_group("run")
    run.add_argument("--seed", type=str, help="zero | constant:c | gaussian:amp,center,width | tabulated:FILE")
    run.add_argument("--method", choices=[m.value for m in Method], help="How S(x) is computed on the zero seed")
    run.add_argument("--tol", action="append", type=_tolerance_override, default=[], metavar="KEY=VALUE",
                     help="Override one tolerance (repeatable)")
    run.add_argument("--workers", type=int, help="Threads for grid sampling")
    run.add_argument("--out", type=Path, help="Write output to this path instead of stdout")
    run.add_argument("--devlog", action="store_true", help="Write dev log (JSONL) with 90-day retention")
    run.add_argument("-v", "--verbose", action="store_true", help="Enable verbose logging output")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="weyl-gbdt",
        description="GBDT potentials and solutions of the Dirac-Weyl system",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Commands (what they do):\n"
            "  validate    Check a parameter triple (identity, Hermiticity, positivity, realness, spectrum)\n"
            "  potential   CSV profile x,u_re,u_im,min_eig_S,identity_residual[,U]\n"
            "  solve       CSV solution x,y,psi1_re,psi1_im,psi2_re,psi2_im\n"
            "  verify      JSON verification report; exit 0 iff every criterion passes\n"
            "  example     Print a built-in triple as a JSON document\n"
            "\n"
            "Common flows:\n"
            "  weyl-gbdt validate --example 2\n"
            "  weyl-gbdt potential --example 1 --calA 1 --m1 1 --m2 1 --xgrid -5:5:0.1\n"
            "  weyl-gbdt solve --example 2 --x 0 --y 0 --h e1\n"
            "  weyl-gbdt verify --example 3 --n 4 --rng-seed 7 --seed gaussian:1,0,1\n"
            "\n"
            "Grids are min:max:step, endpoints included within half a step.\n"
        ),
    )
    parser.add_argument("--version", action="version", version=f"weyl-gbdt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="Validate a parameter triple")

    pot = sub.add_parser("potential", parents=[common], help="Dressed potential profile (CSV)")
    _add_xgrid(pot)
    pot.add_argument("--hbar-vf", type=float, help="hbar*v_F product (energy*length); adds a U column")
    pot.add_argument("--energy", type=float, help="Energy E for the U column")

    solve = sub.add_parser("solve", parents=[common], help="Dressed solution on an (x, y) grid (CSV)")
    _add_xgrid(solve)
    _add_ygrid(solve)
    solve.add_argument("--h", type=str, help="e<k> | 0 | comma-separated complex entries")

    verify = sub.add_parser("verify", parents=[common], help="Verification report (JSON)")
    _add_xgrid(verify)
    _add_ygrid(verify)
    verify.add_argument("--h", type=str, help="Verify a single h instead of the standard basis")
    verify.add_argument("--inject-error", action="store_true", help="Corrupt the solution samples (negative control)")

    ex = sub.add_parser("example", parents=[common], help="Print a built-in triple document")
    ex.add_argument("number", nargs="?", type=int, choices=[1, 2, 3, 4], help="Example family")
    return parser


def _add_xgrid(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--xgrid", type=str, help="x grid min:max:step")
    g.add_argument("--x", type=float, help="Single x value")


def _add_ygrid(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--ygrid", type=str, help="y grid min:max:step")
    g.add_argument("--y", type=float, help="Single y value")


# -- config resolution ----------------------------------------------------------

def _matrix_arg(text: Optional[str], name: str) -> Optional[np.ndarray]:
    if text is None:
        return None
    try:
        return np.asarray(json.loads(text), dtype=float)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"--{name} must be a JSON matrix of reals: {e}")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()

    if getattr(args, "number", None) is not None:
        args.example = args.number
    if args.example is not None:
        cfg.example = args.example
        cfg.triple_doc = None
    params = dict(cfg.example_params)
    for key in ("calA", "m1", "m2", "sign1", "sign2", "n", "rng_seed", "h1", "h2"):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    for key in ("calA0", "lower"):
        value = _matrix_arg(getattr(args, key, None), key)
        if value is not None:
            params[key] = value
    cfg.example_params = params

    if args.triple is not None or args.triple_json is not None:
        cfg.triple_doc = _read_triple_doc(args.triple, args.triple_json)
        cfg.example = None
    if args.seed is not None:
        cfg.seed = args.seed
    if args.method is not None:
        cfg.method = args.method
    if args.tol:
        cfg.tolerances = cfg.tolerances.with_overrides(dict(args.tol))
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg.workers = args.workers

    if getattr(args, "xgrid", None) is not None:
        cfg.x_grid = Grid.parse(args.xgrid)
    elif getattr(args, "x", None) is not None:
        cfg.x_grid = Grid.single(args.x)
    if getattr(args, "ygrid", None) is not None:
        cfg.y_grid = Grid.parse(args.ygrid)
    elif getattr(args, "y", None) is not None:
        cfg.y_grid = Grid.single(args.y)
    if getattr(args, "h", None) is not None:
        cfg.h = args.h

    hbar_vf = getattr(args, "hbar_vf", None)
    energy = getattr(args, "energy", None)
    if hbar_vf is not None or energy is not None:
        hbar_vf = cfg.hbar_vf if hbar_vf is None else hbar_vf
        energy = cfg.energy if energy is None else energy
        cfg = RunConfig(**{**cfg.__dict__, "hbar_vf": hbar_vf, "energy": energy})
    return cfg


def _read_triple_doc(path: Optional[Path], inline: Optional[str]) -> Dict[str, Any]:
    try:
        text = path.read_text(encoding="utf-8") if path is not None else inline
    except OSError as e:
        raise ConfigError(f"cannot read triple {path}: {e}")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"triple document is not valid YAML/JSON: {e}")
    try:
        jsonschema.validate(instance=doc, schema=TRIPLE_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"triple document invalid at {where}: {e.message}")
    return doc


def build_triple(cfg: RunConfig) -> ParameterTriple:
    tol = cfg.tolerances
    if cfg.triple_doc is not None:
        return triple_from_document(cfg.triple_doc, tol)
    if cfg.example is None:
        raise ConfigError("no triple given: use --example, --triple, --triple-json or a config file")
    p = cfg.example_params
    if cfg.example == 1:
        return make_example1(
            float(p.get("calA", 1.0)), float(p.get("m1", 1.0)), float(p.get("m2", 1.0)),
            int(p.get("sign1", 1)), int(p.get("sign2", 1)), tol,
        )
    if cfg.example == 2:
        return make_example2(tol)
    explicit = p.get("h1") is not None or p.get("h2") is not None
    if explicit:
        if p.get("h1") is None or p.get("h2") is None:
            raise ConfigError(f"example {cfg.example} needs both h1 and h2")
        h1, h2 = np.asarray(p["h1"], dtype=float), np.asarray(p["h2"], dtype=float)
        if cfg.example == 3:
            calA0 = p.get("calA0")
            calA0 = np.zeros((h1.size, h1.size)) if calA0 is None else np.asarray(calA0, dtype=float)
            return make_example3(calA0, h1, h2, tol)
        return make_example4(h1, h2, p.get("lower"), tol)
    if p.get("rng_seed") is None:
        raise ConfigError(f"example {cfg.example} is randomized: pass --rng-seed (or explicit --h1/--h2)")
    n = int(p.get("n", 3))
    if n < 1:
        raise ConfigError("--n must be at least 1")
    if cfg.example == 3:
        return random_example3(n, int(p["rng_seed"]))
    return random_example4(n, int(p["rng_seed"]))


def parse_h(spec: Any, n: int) -> np.ndarray:
    """e<k> (1-based) | 0 | comma-separated complex | list of numbers or [re, im] pairs."""
    if isinstance(spec, (list, tuple)):
        entries = [complex(*v) if isinstance(v, (list, tuple)) else complex(v) for v in spec]
    else:
        text = str(spec).strip().replace(" ", "")
        if text == "0":
            return np.zeros(n, dtype=complex)
        if text.lower().startswith("e") and text[1:].isdigit():
            k = int(text[1:])
            if not 1 <= k <= n:
                raise ConfigError(f"h={text} outside 1..{n}")
            return np.eye(n, dtype=complex)[:, k - 1]
        try:
            entries = [complex(v) for v in text.split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse h={spec!r}")
    if len(entries) != n:
        raise ConfigError(f"h has {len(entries)} entries, triple has order {n}")
    return np.asarray(entries, dtype=complex)


# -- commands --------------------------------------------------------------------

def cmd_validate(cfg: RunConfig) -> int:
    try:
        t = run_stage("validate_triple", lambda: build_triple(cfg), devlog=DEVLOG)
    except (IdentityViolated, NotHermitian) as e:
        status("❌", str(e))
        return EXIT_FAIL
    tol = cfg.tolerances
    hermitian = float(np.linalg.norm(t.S0 - t.S0.conj().T, 2))
    real = realness_conditions(t, tol)
    print(f"n = {t.n}")
    print(f"✅ identity residual |A S0 - S0 A* - i Pi0 Pi0*| = {t.identity_residual:.3e}")
    print(f"✅ S0 Hermitian (deviation {hermitian:.3e})")
    if t.positive_definite:
        print(f"✅ S0 positive definite (min eigenvalue {t.s0_min_eig:.6g})")
    else:
        print(f"⚠️  S0 not positive definite (min eigenvalue {t.s0_min_eig:.6g}); positivity of S(x) not guaranteed")
    glyph = "✅" if real.is_real_form else "⚠️ "
    print(f"{glyph} realness conditions: {'hold' if real.is_real_form else 'fail'} (max violation {real.max_violation:.3e})")
    halfplane = spectrum_halfplane_check(t, tol)
    if t.positive_definite:
        print(f"{'✅' if halfplane else '❌'} spectrum of A in closed upper half-plane: {halfplane}")
        if not halfplane:
            return EXIT_FAIL
    else:
        print(f"⚠️  spectrum check without S0 > 0 (reported only): {halfplane}")
    return EXIT_OK


def _general_trajectory(t: ParameterTriple, seed: SeedPotential, xs: np.ndarray, cfg: RunConfig, margin: float = 0.0):
    interval = (min(0.0, float(xs[0]) - margin), max(0.0, float(xs[-1]) + margin))
    traj = run_stage(
        "integrate_dressing",
        lambda: integrate_dressing(t, seed, interval, tolerances=cfg.tolerances),
        devlog=DEVLOG,
        context={"seed": str(seed), "interval": list(interval)},
    )
    status("✅", f"integrated {seed} on [{interval[0]:g}, {interval[1]:g}]: {traj.stats.steps} steps, "
                 f"{traj.stats.rejected} rejected, identity drift {traj.max_identity_drift:.2e}")
    return traj


def _potential_rows(t: ParameterTriple, seed: SeedPotential, cfg: RunConfig) -> List[List[float]]:
    grid = cfg.x_grid or Grid.parse(DEFAULT_XGRID)
    rows: List[List[float]] = []
    if seed.is_zero:
        samples = run_stage(
            "sample_profile",
            lambda: sample_profile(t, grid, cfg.method, cfg.tolerances, cfg.workers or default_workers()),
            devlog=DEVLOG,
            context={"grid": str(grid)},
        )
        for s in samples:
            u = s.potential.u_tilde
            rows.append([s.x, u.real, u.imag, s.state.min_eig, s.state.identity_residual])
    else:
        xs = grid.points()
        traj = _general_trajectory(t, seed, xs, cfg)
        for x in (float(v) for v in xs):
            try:
                pot = transformed_potential(traj, seed, x, cfg.tolerances)
                Pi, S = traj.state_at(x)
                S = 0.5 * (S + S.conj().T)
                rows.append([x, pot.u_tilde.real, pot.u_tilde.imag, hermitian_min_eig(S),
                             operator_identity_residual(t.A, S, Pi)])
            except GBDTError as e:
                raise ProfileEvaluationError(x, e) from e
    if cfg.has_physical:
        for row in rows:
            row.append(cfg.energy - cfg.hbar_vf * row[1])
    return rows


def cmd_potential(cfg: RunConfig, out: Optional[Path]) -> int:
    t = build_triple(cfg)
    seed = SeedPotential.parse(cfg.seed)
    rows = _potential_rows(t, seed, cfg)
    header = POTENTIAL_HEADER + (("U",) if cfg.has_physical else ())
    with csv_sink(out) as writer:
        count = write_rows(writer, header, rows)
    status("✅", f"{count} rows written" + (f" to {out}" if out else ""))
    return EXIT_OK


def cmd_solve(cfg: RunConfig, out: Optional[Path]) -> int:
    t = build_triple(cfg)
    seed = SeedPotential.parse(cfg.seed)
    h = parse_h(cfg.h if cfg.h is not None else "e1", t.n)
    xs = (cfg.x_grid or Grid.parse(DEFAULT_XGRID)).points()
    ys = (cfg.y_grid or Grid.parse(DEFAULT_YGRID)).points()
    traj = None if seed.is_zero else _general_trajectory(t, seed, xs, cfg)

    def compute() -> List[List[float]]:
        rows: List[List[float]] = []
        for x in (float(v) for v in xs):
            try:
                state = eval_S(t, x, cfg.method, cfg.tolerances) if traj is None else None
                for y in (float(v) for v in ys):
                    if traj is None:
                        psi = eval_psi(t, x, y, h, tolerances=cfg.tolerances, state=state)
                    else:
                        psi = eval_psi_general(traj, x, y, h, cfg.tolerances)
                    rows.append([x, y, psi[0].real, psi[0].imag, psi[1].real, psi[1].imag])
            except GBDTError as e:
                raise ProfileEvaluationError(x, e) from e
        return rows

    rows = run_stage("solve", compute, devlog=DEVLOG, context={"points": int(xs.size * ys.size)})
    with csv_sink(out) as writer:
        count = write_rows(writer, SOLUTION_HEADER, rows)
    status("✅", f"{count} rows written" + (f" to {out}" if out else ""))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Optional[Path], inject_error: bool) -> int:
    t = build_triple(cfg)
    seed = SeedPotential.parse(cfg.seed)
    h_set = [parse_h(cfg.h, t.n)] if cfg.h is not None else None
    report = run_stage(
        "full_report",
        lambda: full_report(
            t,
            seed,
            cfg.x_grid or Grid.parse(DEFAULT_VERIFY_XGRID),
            cfg.y_grid or Grid.parse(DEFAULT_YGRID),
            h_set,
            cfg.method,
            cfg.tolerances,
            inject_error=inject_error,
        ),
        devlog=DEVLOG,
        context={"seed": str(seed), "inject_error": inject_error},
    )
    emit_json(report.to_document(), out)
    if report.drift is not None:
        status("✅" if report.criteria["identity"].passed else "❌",
               f"identity drift {report.drift:.2e} (limit {cfg.tolerances.drift_report:.0e})")
    for name, c in report.criteria.items():
        if not c.applicable:
            status("⚠️ ", f"{name}: not applicable ({c.value})")
            continue
        value = "n/a" if c.value is None else f"{c.value:.3e}"
        status("✅" if c.passed else "❌", f"{name}: {value} {c.rule} {c.threshold if c.threshold is not None else ''}".rstrip())
    for note in report.notes:
        status("ℹ️ ", note)
    if report.passed:
        status("✅", "verification passed")
        return EXIT_OK
    status("❌", f"verification failed: {', '.join(report.failures())}")
    return EXIT_FAIL


def cmd_example(cfg: RunConfig, out: Optional[Path]) -> int:
    t = build_triple(cfg)
    emit_json(triple_to_document(t), out)
    return EXIT_OK


def dispatch(args: argparse.Namespace) -> int:
    try:
        cfg = resolve_config(args)
    except _INPUT_ERRORS as e:
        status("❌", f"config error: {e}")
        return EXIT_USAGE
    logger.debug("resolved config: %s", cfg)
    try:
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "potential":
            return cmd_potential(cfg, args.out)
        if args.command == "solve":
            return cmd_solve(cfg, args.out)
        if args.command == "verify":
            return cmd_verify(cfg, args.out, args.inject_error)
        return cmd_example(cfg, args.out)
    except _INPUT_ERRORS as e:
        status("❌", f"config error: {e}")
        return EXIT_USAGE
    except ProfileEvaluationError as e:
        status("❌", f"aborted at x={e.x:.6g}: {e.cause}")
        return EXIT_FAIL
    except GBDTError as e:
        status("❌", str(e))
        return EXIT_FAIL


# Values such as -3:3:0.5 or -0.2,0.1 would otherwise be taken for options.
_SIGNED_VALUE_FLAGS = ("--xgrid", "--ygrid", "--x", "--y", "--h", "--h1", "--h2", "--calA", "--energy", "--hbar-vf")


def _glue_signed_values(argv: Sequence[str]) -> List[str]:
    out: List[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _SIGNED_VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and len(argv[i + 1]) > 1 \
                and (argv[i + 1][1].isdigit() or argv[i + 1][1] == "."):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    global DEVLOG
    parser = build_parser()
    raw = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(_glue_signed_values(raw))

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(message)s",
        stream=sys.stderr,
    )
    if args.devlog:
        removed = prune_devlogs()
        DEVLOG = devlog_path()
        log_event(DEVLOG, "cli_start", {"argv": raw, "version": __version__, "pruned": removed})

    code = dispatch(args)
    log_event(DEVLOG, "cli_end", {"command": args.command, "exit_code": code})
    return code


if __name__ == "__main__":
    raise SystemExit(main())
