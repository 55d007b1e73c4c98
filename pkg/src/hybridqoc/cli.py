"""Command-line entry point: ``hybridqoc run | eval | check``.

Exit codes: 0 on converged/budget (and on a passing ``check``), 1 on
configuration errors or failing checks, 2 when a run stalls.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import shutil
import sys
import tempfile
import time
import zlib
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .checks import run_checks
from .optimize import LINE_SEARCHES, METHODS, LineSearchParams, StopRule, run
from .oracle import MeasurementModel, Oracle, OracleConfig
from .pauli import MAX_SPINS, PauliError, SparsePauliState
from .propagation import ControlPulse, read_pulse, write_pulse
from .spin import ConfigError, load_system, system_to_doc

logger = logging.getLogger("hybridqoc")

CONVERGENCE_HEADER = ["iter", "f", "grad_norm", "alpha", "queries_cum"]


def derive_seed(master_seed: int, label: str) -> np.random.SeedSequence:
    """Labelled sub-seed of the single manifest-level seed."""
    return np.random.SeedSequence([master_seed & (2**64 - 1), zlib.crc32(label.encode())])


def oracle_seed(master_seed: int) -> int:
    return int(derive_seed(master_seed, "oracle").generate_state(1, np.uint64)[0])


# -- argument plumbing -----------------------------------------------------------


def _read_json(path: str, field: str) -> Any:
    p = Path(path)
    if not p.exists():
        raise ConfigError(field, f"file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(field, f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def parse_state(spec: str, field: str) -> SparsePauliState:
    """Inline ``"ZZI:1.0,IXX:0.5"`` or a path to a JSON ``[{"label", "coeff"}]`` file."""
    try:
        if spec.endswith(".json") or os.path.sep in spec:
            return SparsePauliState.from_json(_read_json(spec, field))
        return SparsePauliState.parse_inline(spec)
    except PauliError as exc:
        raise ConfigError(field, str(exc)) from None


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError("--random-init", f"expected 'lo,hi', got {text!r}") from None
    if not lo < hi:
        raise ConfigError("--random-init", f"need lo < hi, got {text!r}")
    return lo, hi


def build_manifest(args: argparse.Namespace) -> dict[str, Any]:
    """Validated, JSON-serialisable description of one run or evaluation."""
    system_doc = _read_json(args.system, "--system")
    sys_ = load_system(system_doc, cap=args.max_spins)
    initial = parse_state(args.initial, "--initial")
    target = parse_state(args.target, "--target")

    if args.pulse:
        pulse = read_pulse(args.pulse, tau=args.tau, M=args.slices)
        init = {"kind": "file", "path": str(args.pulse)}
        tau, M = pulse.tau, pulse.M
    else:
        if args.tau is None or args.slices is None:
            raise ConfigError("--tau/--slices", "required unless --pulse is given")
        tau, M = float(args.tau), int(args.slices)
        if args.random_init:
            lo, hi = _parse_range(args.random_init)
            init = {"kind": "random", "seed": args.seed, "amplitude_range": [lo, hi]}
        else:
            init = {"kind": "zeros"}

    if args.model:
        model, seed = MeasurementModel.from_doc(_read_json(args.model, "--model"))
        model_doc = {"kind": model.kind, "sigma": model.sigma, "shots": model.shots, "master_seed": seed}
    else:
        kind = "exact"
        if args.shots is not None:
            kind = "born"
        elif args.noise_sigma is not None:
            kind = "gaussian"
        model = MeasurementModel(kind, args.noise_sigma or 0.0, args.shots or 1)
        model_doc = {"kind": kind, "sigma": model.sigma, "shots": model.shots, "master_seed": args.seed}

    return {
        "version": __version__,
        "system": system_to_doc(sys_),
        "system_path": str(args.system),
        "initial": [{"label": p.letters, "coeff": x} for p, x in initial.items()],
        "target": [{"label": p.letters, "coeff": x} for p, x in target.items()],
        "tau_s": tau,
        "M": M,
        "initial_pulse": init,
        "oracle": args.oracle,
        "model": model_doc,
        "seed": args.seed,
    }


def _oracle_from_manifest(man: dict[str, Any], start_call: int = 0) -> Oracle:
    sys_ = load_system(man["system"])
    initial = SparsePauliState.from_json(man["initial"])
    target = SparsePauliState.from_json(man["target"])
    if initial.n != sys_.n or target.n != sys_.n:
        raise ConfigError("--initial/--target", f"labels must have length n={sys_.n}")
    md = man["model"]
    cfg = OracleConfig(
        sys=sys_,
        rho_i=initial.to_matrix(),
        target=target,
        M=man["M"],
        tau=man["tau_s"],
        model=MeasurementModel(md["kind"], md["sigma"], md["shots"]),
        master_seed=oracle_seed(md["master_seed"]),
        backend=man["oracle"],
    )
    return Oracle(cfg, start_call=start_call)


def _initial_pulse(man: dict[str, Any], pulse_path: str | None) -> ControlPulse:
    init = man["initial_pulse"]
    if init["kind"] == "file":
        return read_pulse(pulse_path or init["path"], tau=man["tau_s"], M=man["M"])
    if init["kind"] == "random":
        lo, hi = init["amplitude_range"]
        rng = np.random.default_rng(derive_seed(init["seed"], "initial-pulse"))
        return ControlPulse.random(man["M"], man["tau_s"], lo, hi, rng)
    return ControlPulse.zeros(man["M"], man["tau_s"])


# -- subcommands -------------------------------------------------------------------


def _convergence_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CONVERGENCE_HEADER)
    for h in history:
        w.writerow([h.iter, repr(h.f), repr(h.grad_norm), repr(h.alpha), h.queries_cum])
    return buf.getvalue()


def _prepare_out(out: Path) -> Path:
    if out.exists():
        if (out / "manifest.json").exists():
            raise ConfigError("--out", f"{out} already holds a run manifest; refusing to overwrite")
        if any(out.iterdir()):
            raise ConfigError("--out", f"{out} exists and is not empty")
    out.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))


def cmd_run(args: argparse.Namespace) -> int:
    man = build_manifest(args)
    stop_doc = {
        "max_iters": args.max_iters,
        "grad_tol": args.grad_tol,
        "target_f": args.target_f,
        "query_budget": args.query_budget,
        "max_evals": args.max_evals,
    }
    try:
        stop = StopRule(**stop_doc)
    except ValueError as exc:
        raise ConfigError("stop", str(exc)) from None
    man.update(method=args.method, line_search=args.line_search, avg_shots_f=args.avg_shots_f, stop=stop_doc)
    out = Path(args.out)
    tmp = _prepare_out(out)
    try:
        (tmp / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
        oracle = _oracle_from_manifest(man)
        pulse0 = _initial_pulse(man, args.pulse)
        params = LineSearchParams(kind=args.line_search, avg_f=args.avg_shots_f)
        t0 = time.perf_counter()
        res = run(oracle, pulse0.flat(), args.method, stop, params)
        wall = time.perf_counter() - t0
        (tmp / "convergence.csv").write_text(_convergence_csv(res.history))
        write_pulse(tmp / "final_pulse.csv", ControlPulse.from_flat(res.u, man["tau_s"]))
        result = {
            "status": res.status,
            "final_f": res.final.f,
            "best_f": res.best_f,
            "iterations": len(res.history),
            "total_queries": oracle.queries_total,
            "total_evaluations": oracle.evaluations,
            "final_call_index": res.final.call_index,
            "wall_time_s": wall,
            "manifest": man,
        }
        (tmp / "result.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
        if out.exists():
            out.rmdir()
        os.rename(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    print(json.dumps({k: result[k] for k in ("status", "final_f", "iterations", "total_queries")}))
    return 2 if res.status == "stalled" else 0


def cmd_eval(args: argparse.Namespace) -> int:
    man = build_manifest(args)
    oracle = _oracle_from_manifest(man, start_call=args.call_index)
    pulse = _initial_pulse(man, args.pulse)
    ans = oracle.query(pulse)
    print(json.dumps({"f": ans.f, "g": ans.g.tolist(), "queries": ans.queries}))
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    if not 1 <= args.n <= args.max_spins:
        raise ConfigError("--n", f"spin count {args.n} outside [1, {args.max_spins}]")
    t0 = time.perf_counter()
    results = run_checks(args.n, args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.seconds:7.3f}s  {r.detail}")
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed in {time.perf_counter() - t0:.2f}s")
    return 0 if ok else 1


# -- parser --------------------------------------------------------------------------


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--system", required=True, help="system config JSON")
    p.add_argument("--initial", required=True, help="initial state: inline 'ZII:1' or JSON file")
    p.add_argument("--target", required=True, help="target state: inline 'ZZZ:1.0' or JSON file")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--pulse", help="pulse CSV (m,ux,uy); tau/M from sidecar JSON or flags")
    src.add_argument("--random-init", metavar="LO,HI", help="uniform random initial amplitudes (rad/s)")
    p.add_argument("--tau", type=float, help="slice length in seconds")
    p.add_argument("--slices", type=int, help="number of slices M")
    p.add_argument("--oracle", choices=("exact", "sampled"), default="exact")
    p.add_argument("--noise-sigma", type=float, help="gaussian std per expectation estimate")
    p.add_argument("--shots", type=int, help="born-rule shots per expectation estimate")
    p.add_argument("--model", help="measurement model JSON (overrides --noise-sigma/--shots/--seed)")
    p.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    p.add_argument("--max-spins", type=int, default=MAX_SPINS, help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridqoc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="optimise a pulse")
    _add_problem_args(p_run)
    p_run.add_argument("--method", choices=METHODS, default="ga")
    p_run.add_argument("--line-search", choices=LINE_SEARCHES, default="backtracking")
    p_run.add_argument("--max-iters", type=int)
    p_run.add_argument("--grad-tol", type=float)
    p_run.add_argument("--target-f", type=float)
    p_run.add_argument("--query-budget", type=int)
    p_run.add_argument("--max-evals", type=int, help="cap on oracle calls")
    p_run.add_argument("--avg-shots-f", type=int, default=1, help="average k fitness estimates in line search")
    p_run.add_argument("--out", required=True, help="output directory (must not hold a prior run)")
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="single oracle call, JSON on stdout")
    _add_problem_args(p_eval)
    p_eval.add_argument("--call-index", type=int, default=0, help="oracle call counter to start from")
    p_eval.set_defaults(func=cmd_eval)

    p_check = sub.add_parser("check", help="run the built-in invariant suite")
    p_check.add_argument("--n", type=int, default=3, help="largest spin count used by the checks")
    p_check.add_argument("--seed", type=int, default=7)
    p_check.add_argument("--max-spins", type=int, default=MAX_SPINS, help=argparse.SUPPRESS)
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for stalled runs.
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, PauliError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
