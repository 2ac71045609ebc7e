"""Command-line front end: solve, verify, oracle, sweep.

Reports are canonical JSON (sorted keys, 17-significant-digit floats, no
timestamps) written atomically, so identical configs and seeds reproduce
byte-identical output. ``verify`` exit codes: 0 all checks passed, 2
stationarity failed, 3 a descent variation was found, 4 another condition
check failed; usage errors exit 64, IO/config errors exit 1.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .el_analysis import (EXIT_CONDITION, EXIT_EL_FAILED, EXIT_MINIMALITY, EXIT_OK,
                          VariationSampler, check_condition_iv,
                          check_sufficient_conditions, gamma_lower_bound,
                          nontriviality_check, verify_el)
from .el_analysis import test_minimality as sample_minimality
from .errors import CVPError, UsageError
from .lagrangian import (DecayProfile, Lagrangian, diagonal_infimum,
                         kernel_from_spec, profile_from_spec)
from .measure import DiscreteMeasure, measure_to_dict
from .pipeline import (ExhaustionRun, RunOptions, ScaledMinimizer,
                       local_mass_bound_check, run_exhaustion, stage_ell)
from .reports import canonical_json, sha256_text, write_csv, write_json
from .simplex_solver import (CompactProblem, CompactSolution, KKTResiduals,
                             SolverOptions, brute_force_minimizer)
from .space import Exhaustion, MetricSpace, build_exhaustion, space_from_dict

VALID_CHECKS = ("el", "minimality", "conditions", "condition_iv",
                "nontriviality", "gamma", "mass_bound")
_DEFAULT_CHECKS = ("el", "minimality", "nontriviality")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to the usage exit code
        raise UsageError(message)


@dataclass
class RunConfig:
    raw: dict
    space: MetricSpace
    kernel: Lagrangian
    profile: DecayProfile | None
    exhaustion: Exhaustion
    options: RunOptions
    seed: int


def _solver_options(payload: dict, seed: int) -> SolverOptions:
    opts = SolverOptions(seed=seed)
    for key in ("tol", "max_iter", "restarts", "oracle_max", "certify"):
        if key in payload:
            setattr(opts, key, type(getattr(opts, key))(payload[key]))
    env = os.environ.get("CVP_THREADS")
    if env:
        try:
            opts.workers = max(1, int(env))
        except ValueError:
            raise UsageError(f"CVP_THREADS must be an integer, got {env!r}") from None
    return opts


def load_config(path: str, seed_override: int | None = None,
                stride_override: int | None = None,
                tol_override: float | None = None) -> RunConfig:
    with open(path) as handle:
        raw = json.load(handle)
    base = os.path.dirname(os.path.abspath(path))
    space_spec = raw.get("space")
    if isinstance(space_spec, str):
        with open(os.path.join(base, space_spec)) as handle:
            space_spec = json.load(handle)
    if not isinstance(space_spec, dict):
        raise UsageError("config needs a 'space' (inline object or file path)")
    space = space_from_dict(space_spec)
    raw = dict(raw)
    raw["space"] = space_spec
    kernel = kernel_from_spec(raw.get("kernel", {}), space)
    profile = None
    if raw.get("profile"):
        profile = profile_from_spec(raw["profile"], c=diagonal_infimum(kernel))
    exh_spec = raw.get("exhaustion", {})
    exhaustion = build_exhaustion(space, str(exh_spec.get("center")),
                                  exh_spec.get("radii", ()))
    seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)
    raw["seed"] = seed
    if stride_override is not None:
        raw["stride"] = int(stride_override)
    solver = _solver_options(raw.get("solver", {}), seed)
    if tol_override is not None:
        solver.tol = float(tol_override)
    window = raw.get("window", {})
    options = RunOptions(solver=solver,
                         stab_tol=float(raw.get("stab_tol", 1e-6)),
                         window_layer=window.get("layer"),
                         profile=profile,
                         eps=window.get("eps"),
                         stride=int(raw.get("stride", 1)))
    return RunConfig(raw=raw, space=space, kernel=kernel, profile=profile,
                     exhaustion=exhaustion, options=options, seed=seed)


def _config_payload(config: RunConfig) -> dict:
    keep = ("space", "kernel", "profile", "exhaustion", "solver", "window",
            "stab_tol", "stride", "seed", "verify")
    return {k: config.raw[k] for k in keep if k in config.raw}


def report_from_run(run: ExhaustionRun, config: RunConfig) -> dict:
    payload = _config_payload(config)
    config_text = canonical_json(payload)
    stages = []
    for s in run.stages:
        sol = s.solution
        stages.append({
            "index": s.stage_index,
            "ids": list(s.stage_ids),
            "lambda": s.scale,
            "s_unscaled": s.s_unscaled,
            "value": sol.value,
            "degenerate": s.degenerate,
            "certified_global": sol.certified_global,
            "kkt": {"on_support_max": sol.kkt.on_support_max,
                    "min_over_k": sol.kkt.min_over_k,
                    "s_param": sol.kkt.s_param},
            "weights": {pid: float(w) for pid, w in zip(sol.ids, sol.weights) if w > 0},
        })
    window = sorted(run.window, key=config.space._at)
    return {
        "tool": {"name": "cvp", "version": __version__},
        "config": payload,
        "config_hash": sha256_text(config_text),
        "stages": stages,
        "window": window,
        "limit": measure_to_dict(run.limit),
        "diagnostics": run.diagnostics,
    }


def cmd_solve(args) -> int:
    config = load_config(args.config, seed_override=args.seed,
                         stride_override=args.stride, tol_override=args.tol)
    run = run_exhaustion(config.space, config.kernel, config.exhaustion,
                         config.options)
    report = report_from_run(run, config)
    out = args.out
    os.makedirs(out, exist_ok=True)
    write_json(os.path.join(out, "run.json"), report)
    for s in run.stages:
        ell = stage_ell(s.measure, config.kernel)
        rows = [(pid, float(ell[i]), s.measure.weight(pid))
                for i, pid in enumerate(config.space.ids)]
        write_csv(os.path.join(out, f"stage_{s.stage_index}.csv"),
                  ["point", "ell", "weight"], rows)
    stabilized = run.diagnostics["stabilized"]
    print(f"solved {len(run.stages)} stages; window {len(run.window)} points; "
          f"stabilized={str(stabilized).lower()}")
    print(f"report written to {os.path.join(out, 'run.json')}")
    return EXIT_OK


def _rebuild_run(report: dict, space: MetricSpace, L: Lagrangian) -> ExhaustionRun:
    stages = []
    for payload in report["stages"]:
        ids = tuple(payload["ids"])
        wmap = payload["weights"]
        weights = np.array([float(wmap.get(p, 0.0)) for p in ids])
        kkt = KKTResiduals(on_support_max=payload["kkt"]["on_support_max"],
                           min_over_k=payload["kkt"]["min_over_k"],
                           s_param=payload["kkt"]["s_param"])
        sol = CompactSolution(ids=ids, weights=weights, value=payload["value"],
                              s_param=payload["s_unscaled"], kkt=kkt,
                              certified_global=payload["certified_global"])
        lam = payload["lambda"]
        measure = DiscreteMeasure(weights={p: lam * float(w) for p, w in wmap.items()},
                                  space_key=space.key)
        stages.append(ScaledMinimizer(stage_index=payload["index"], stage_ids=ids,
                                      measure=measure, scale=lam,
                                      s_unscaled=payload["s_unscaled"], solution=sol,
                                      degenerate=payload["degenerate"]))
    limit = DiscreteMeasure(weights={k: float(v)
                                     for k, v in report["limit"]["weights"].items()},
                            space_key=space.key)
    return ExhaustionRun(stages=tuple(stages), limit=limit,
                         window=frozenset(report["window"]),
                         diagnostics=report["diagnostics"])


def cmd_verify(args) -> int:
    with open(args.run) as handle:
        report = json.load(handle)
    config = report["config"]
    space = space_from_dict(config["space"])
    kernel = kernel_from_spec(config["kernel"], space)
    profile = None
    if config.get("profile"):
        profile = profile_from_spec(config["profile"], c=diagonal_infimum(kernel))
    run = _rebuild_run(report, space, kernel)
    verify_cfg = config.get("verify", {})

    if args.checks:
        checks = tuple(c.strip() for c in args.checks.split(",") if c.strip())
    else:
        checks = tuple(verify_cfg.get("checks", _DEFAULT_CHECKS))
    unknown = [c for c in checks if c not in VALID_CHECKS]
    if unknown:
        raise UsageError(f"unknown checks {unknown}; valid: {', '.join(VALID_CHECKS)}")
    trials = args.trials if args.trials is not None else int(verify_cfg.get("trials", 1000))
    if trials < 1:
        raise UsageError("trials must be a positive integer")
    el_tol = args.tol if args.tol is not None else float(verify_cfg.get("tol", 1e-6))
    eps = args.eps if args.eps is not None else verify_cfg.get(
        "eps", config.get("window", {}).get("eps", 0.5))
    rho = run.stages[-1].measure
    window = sorted(run.window, key=space._at)
    if not window:
        window = sorted(rho.support, key=space._at)

    results: dict[str, dict] = {}
    el_report = None
    for check in checks:
        if check == "el":
            el_report = verify_el(rho, kernel, window, tol=el_tol)
            results["el"] = el_report.to_dict()
        elif check == "minimality":
            sampler = VariationSampler(window=tuple(window), seed=args.seed,
                                       support_cap=int(verify_cfg.get("support_cap", 6)))
            results["minimality"] = sample_minimality(rho, kernel, sampler, trials)
        elif check == "conditions":
            delta_cover = args.delta_cover if args.delta_cover is not None else \
                verify_cfg.get("delta_cover")
            if delta_cover is None:
                raise UsageError("check 'conditions' needs --delta-cover "
                                 "(or verify.delta_cover in the config)")
            results["conditions"] = check_sufficient_conditions(
                kernel, space, float(delta_cover))
            results["conditions"]["passed"] = results["conditions"]["holds"]
        elif check == "condition_iv":
            out = check_condition_iv(rho, kernel, window)
            out["passed"] = bool(out["integrable"])
            results["condition_iv"] = out
        elif check == "nontriviality":
            results["nontriviality"] = nontriviality_check(run, kernel, space)
        elif check == "gamma":
            if profile is None:
                raise UsageError("check 'gamma' needs a profile in the config")
            results["gamma"] = gamma_lower_bound(rho, kernel, space, profile,
                                                 float(eps), window,
                                                 el_report=el_report)
        elif check == "mass_bound":
            radius = verify_cfg.get("mass_radius",
                                    report["diagnostics"]["window_layer"])
            rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
            count = min(len(window), 20)
            probes = [window[i] for i in
                      sorted(rng.choice(len(window), size=count, replace=False))]
            results["mass_bound"] = local_mass_bound_check(
                run.stages[-1], space, kernel, probes, float(radius))

    failed = [name for name, res in results.items() if not res.get("passed", False)]
    if "el" in failed:
        code = EXIT_EL_FAILED
    elif "minimality" in failed:
        code = EXIT_MINIMALITY
    elif failed:
        code = EXIT_CONDITION
    else:
        code = EXIT_OK
    summary = {"checks": results, "failed": failed, "exit_code": code,
               "config_hash": report["config_hash"],
               "tool": {"name": "cvp", "version": __version__}}
    out_path = args.out or os.path.join(os.path.dirname(os.path.abspath(args.run)),
                                        "verify.json")
    write_json(out_path, summary)
    for name in checks:
        status = "passed" if name not in failed else "FAILED"
        print(f"{name}: {status}")
    print(f"verdict written to {out_path}; exit code {code}")
    return code


def cmd_oracle(args) -> int:
    with open(args.matrix) as handle:
        payload = json.load(handle)
    if isinstance(payload, dict):
        payload = payload.get("matrix")
    matrix = np.asarray(payload, dtype=float)
    ids = tuple(f"p{i}" for i in range(matrix.shape[0] if matrix.ndim == 2 else 0))
    problem = CompactProblem(ids=ids, matrix=matrix)
    solution = brute_force_minimizer(problem)
    out = {
        "value": solution.value,
        "s_param": solution.s_param,
        "weights": solution.weight_map(),
        "kkt": {"on_support_max": solution.kkt.on_support_max,
                "min_over_k": solution.kkt.min_over_k,
                "s_param": solution.kkt.s_param},
        "certified_global": solution.certified_global,
    }
    text = canonical_json(out)
    if args.out:
        write_json(args.out, out)
    print(text)
    return EXIT_OK


def _set_path(payload: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = payload
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def cmd_sweep(args) -> int:
    with open(args.config) as handle:
        spec = json.load(handle)
    base = spec.get("base")
    if not isinstance(base, dict):
        raise UsageError("sweep config needs a 'base' run config object")
    grid = spec.get("grid", {})
    keys = sorted(grid)
    combos = list(itertools.product(*(grid[k] for k in keys))) if keys else [()]
    base_dir = os.path.dirname(os.path.abspath(args.config))
    os.makedirs(args.out, exist_ok=True)
    entries = []
    for i, combo in enumerate(combos):
        cfg = json.loads(json.dumps(base))
        for k, v in zip(keys, combo):
            _set_path(cfg, k, v)
        cfg["seed"] = int(cfg.get("seed", 0)) + i
        run_dir = os.path.join(args.out, f"run_{i:03d}")
        cfg_path = os.path.join(run_dir, "config.json")
        os.makedirs(run_dir, exist_ok=True)
        write_json(cfg_path, cfg)
        ns = argparse.Namespace(config=cfg_path, out=run_dir, seed=None,
                                stride=None, tol=None)
        # space file paths in the base config resolve relative to the sweep file
        if isinstance(cfg.get("space"), str):
            cfg["space"] = os.path.join(base_dir, cfg["space"])
            write_json(cfg_path, cfg)
        cmd_solve(ns)
        with open(os.path.join(run_dir, "run.json")) as handle:
            rep = json.load(handle)
        entries.append({"index": i, "overrides": {k: v for k, v in zip(keys, combo)},
                        "dir": f"run_{i:03d}", "seed": cfg["seed"],
                        "config_hash": rep["config_hash"],
                        "stabilized": rep["diagnostics"]["stabilized"]})
    write_json(os.path.join(args.out, "sweep.json"), {"runs": entries})
    print(f"swept {len(entries)} configurations into {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cvp", description=__doc__)
    parser.add_argument("--version", action="version", version=f"cvp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run an exhaustion and write reports")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", required=True)
    p_solve.add_argument("--seed", type=int, default=None)
    p_solve.add_argument("--stride", type=int, default=None)
    p_solve.add_argument("--tol", type=float, default=None)
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="run certification checks on a report")
    p_verify.add_argument("--run", required=True)
    p_verify.add_argument("--checks", default=None,
                          help=f"comma list from: {', '.join(VALID_CHECKS)}")
    p_verify.add_argument("--trials", type=int, default=None)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--tol", type=float, default=None)
    p_verify.add_argument("--eps", type=float, default=None)
    p_verify.add_argument("--delta-cover", dest="delta_cover", type=float, default=None)
    p_verify.add_argument("--out", default=None)
    p_verify.set_defaults(func=cmd_verify)

    p_oracle = sub.add_parser("oracle", help="enumerate the global minimizer of a block")
    p_oracle.add_argument("--matrix", required=True)
    p_oracle.add_argument("--out", default=None)
    p_oracle.set_defaults(func=cmd_oracle)

    p_sweep = sub.add_parser("sweep", help="cartesian product of configs, solved in sequence")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 64
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CVPError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
