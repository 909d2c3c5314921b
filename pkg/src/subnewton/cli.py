"""Command-line driver: train, compare, sweep-inner, diagnose.

Exit codes: 0 success, 1 usage problems (bad flags, bad config file,
invalid parameter combinations), 2 data problems (missing or malformed
input files, label mismatches), 3 numeric failures (non-finite objectives,
degenerate curvature).

Flag values override ``--config`` JSON entries, which override built-in
defaults.  ``SUBNEWTON_THREADS`` caps BLAS/OpenMP parallelism best-effort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .baselines import FistaConfig, SagaConfig, SvrgConfig, fista_solve, prox_svrg_full, saga_solve
from .data import DataError, SparseDataset, add_intercept, generate_synthetic, load_dataset
from .errors import NumericsError
from .inner import InnerConfig
from .newton import OuterConfig, selfconcordance_check, solve
from .objectives import Regularizer, RidgeSplit, SmoothLoss, effective_ridge, full_objective
from .trace import write_summary_json, write_trace_csv

__all__ = ["main"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage problems; the contract here is 1.
    def error(self, message):
        raise UsageError(message)


DEFAULTS: dict = {
    "loss": "logistic",
    "lambda1": 0.0,
    "lambda2": 0.0,
    "gamma": 1e-3,
    "solver": "prox-newton",
    "theta": 0.9,
    "beta": 0.05,
    "lambda_bar": 1.0 / 6.0,
    "inner": "certificate",
    "catalyst": "off",
    "sample_c": 4.0,
    "mix_nu": 0.1,
    "tol": 1e-8,
    "max_outer": 100,
    "seed": 0,
    "step": None,
    "epochs": 50,
    "max_iters": 5000,
    "eval_budget": None,
    "add_intercept": False,
    "data": None,
    "synthetic": None,
    "solvers": "prox-newton,svrg,saga,fista",
    "gap": 1e-6,
    "inners": "1,2,4,6",
    "trials": 1000,
    "radius": 0.3,
    "trace": None,
    "summary": None,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("instance")
    src.add_argument("--data", metavar="PATH", help="LIBSVM file (.gz/.bz2/.xz ok)")
    src.add_argument(
        "--synthetic",
        metavar="SPEC",
        help="e.g. n=2000,d=50,density=0.2,noise=0.05[,seed=N,scale=X]",
    )
    src.add_argument("--add-intercept", action="store_true", default=None)
    prob = p.add_argument_group("objective")
    prob.add_argument("--loss", choices=["logistic", "squared"])
    prob.add_argument("--lambda1", type=float, help="l1 penalty weight")
    prob.add_argument("--lambda2", type=float, help="elastic-net quadratic weight")
    prob.add_argument("--gamma", type=float, help="ridge weight (must stay positive)")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", metavar="PATH", help="JSON with any long-flag defaults")
    p.add_argument("--trace", metavar="PATH", help="write the run trace CSV here")
    p.add_argument("--summary", metavar="PATH", help="write the JSON summary here")


def _add_newton_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("prox-newton")
    g.add_argument("--theta", type=float, help="inner solve quality in (0, 1]")
    g.add_argument("--beta", type=float, help="sampling accuracy budget in (0, 1/3]")
    g.add_argument("--lambda-bar", dest="lambda_bar", type=float, help="phase switch level")
    g.add_argument("--inner", help="'certificate' or a fixed epoch count")
    g.add_argument("--catalyst", choices=["auto", "off"])
    g.add_argument("--sample-c", dest="sample_c", type=float, help="sample size constant")
    g.add_argument("--mix-nu", dest="mix_nu", type=float, help="uniform mixing weight")
    g.add_argument("--tol", type=float, help="stop when decrement^2/(1-beta) <= tol")
    g.add_argument("--max-outer", dest="max_outer", type=int)


def _add_baseline_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("baselines")
    g.add_argument("--step", type=float, help="override the automatic step size")
    g.add_argument("--epochs", type=int, help="SVRG/SAGA epoch count")
    g.add_argument("--max-iters", dest="max_iters", type=int, help="FISTA iteration cap")
    g.add_argument("--eval-budget", dest="eval_budget", type=int)


def build_parser() -> _Parser:
    parser = _Parser(prog="subnewton", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="cmd")

    p_train = sub.add_parser("train", help="run one solver on one instance", parents=[])
    _add_common(p_train)
    p_train.add_argument("--solver", choices=list(bench.SOLVER_NAMES))
    _add_newton_flags(p_train)
    _add_baseline_flags(p_train)

    p_cmp = sub.add_parser("compare", help="run several solvers against a shared optimum")
    _add_common(p_cmp)
    p_cmp.add_argument("--solvers", help="comma list from prox-newton,svrg,saga,fista")
    _add_newton_flags(p_cmp)
    _add_baseline_flags(p_cmp)

    p_sweep = sub.add_parser("sweep-inner", help="vary the fixed inner epoch budget")
    _add_common(p_sweep)
    p_sweep.add_argument("--inners", help="comma list of epoch budgets, e.g. 1,2,4,6")
    p_sweep.add_argument("--gap", type=float, help="objective gap the sweep reports against")
    _add_newton_flags(p_sweep)

    p_diag = sub.add_parser("diagnose", help="instance diagnostics and stability probes")
    _add_common(p_diag)
    p_diag.add_argument("--trials", type=int)
    p_diag.add_argument("--radius", type=float)

    return parser


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            loaded = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(loaded, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(loaded) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return loaded


def _effective(ns: argparse.Namespace) -> dict:
    """CLI > config file > defaults, per key."""
    from_file = _load_config_file(ns.config) if getattr(ns, "config", None) else {}
    eff = dict(DEFAULTS)
    eff.update(from_file)
    for key in DEFAULTS:
        val = getattr(ns, key, None)
        if val is not None:
            eff[key] = val
    return eff


def _parse_synthetic(spec: str, default_seed: int) -> SparseDataset:
    fields: dict[str, str] = {}
    for part in spec.split(","):
        key, sep, val = part.partition("=")
        if not sep:
            raise UsageError(f"bad synthetic field {part!r}; expected key=value")
        fields[key.strip()] = val.strip()
    try:
        n = int(fields.pop("n"))
        d = int(fields.pop("d"))
        density = float(fields.pop("density", "1.0"))
        noise = float(fields.pop("noise", "0.0"))
        seed = int(fields.pop("seed", str(default_seed)))
        scale = float(fields.pop("scale", "1.0"))
    except KeyError as exc:
        raise UsageError(f"synthetic spec needs {exc.args[0]}=") from None
    except ValueError as exc:
        raise UsageError(f"bad synthetic value: {exc}") from None
    if fields:
        raise UsageError(f"unknown synthetic fields: {sorted(fields)}")
    try:
        return generate_synthetic(
            n, d, density=density, label_noise=noise, seed=seed, feature_scale=scale
        )
    except DataError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _build_problem(eff: dict):
    if eff["data"] and eff["synthetic"]:
        raise UsageError("--data and --synthetic are mutually exclusive")
    if eff["data"]:
        data = load_dataset(eff["data"])
    elif eff["synthetic"]:
        data = _parse_synthetic(eff["synthetic"], eff["seed"])
    else:
        raise UsageError("an instance is required: --data PATH or --synthetic SPEC")
    if eff["add_intercept"]:
        data = add_intercept(data)
    loss = SmoothLoss(eff["loss"])
    try:
        loss.check_labels(data.labels)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    lam1 = float(eff["lambda1"])
    lam2 = float(eff["lambda2"])
    try:
        if lam2 > 0:
            reg = Regularizer("elastic-net", lam1=lam1, lam2=lam2)
        elif lam1 > 0:
            reg = Regularizer("l1", lam1=lam1)
        else:
            reg = Regularizer("none")
        ridge = effective_ridge(reg, float(eff["gamma"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return data, loss, reg, ridge


def _inner_config(eff: dict) -> InnerConfig:
    use_catalyst = eff["catalyst"] == "auto"
    val = str(eff["inner"])
    if val == "certificate":
        return InnerConfig(
            mode="certificate",
            epochs=5,
            target_rel=1.0,  # placeholder; solve() recomputes from theta/beta
            step=eff["step"],
            use_catalyst=use_catalyst,
        )
    try:
        count = int(val)
    except ValueError:
        raise UsageError(f"--inner must be 'certificate' or an integer, got {val!r}") from None
    if count < 1:
        raise UsageError("--inner epoch count must be positive")
    return InnerConfig(mode="fixed", epochs=count, step=eff["step"], use_catalyst=use_catalyst)


def _outer_config(eff: dict) -> OuterConfig:
    try:
        return OuterConfig(
            theta=float(eff["theta"]),
            beta=float(eff["beta"]),
            lambda_bar=float(eff["lambda_bar"]),
            eps_tol=float(eff["tol"]),
            max_outer=int(eff["max_outer"]),
            mix_nu=float(eff["mix_nu"]),
            sample_c=float(eff["sample_c"]),
            seed=int(eff["seed"]),
            inner=_inner_config(eff),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config_echo(eff: dict) -> dict:
    return {k: v for k, v in sorted(eff.items()) if v is not None}


def _cmd_train(eff: dict) -> int:
    data, loss, reg, ridge = _build_problem(eff)
    solver = eff["solver"]
    try:
        if solver == "prox-newton":
            w, records = solve(data, loss, reg, ridge, _outer_config(eff))
        elif solver == "fista":
            cfg = FistaConfig(
                step=eff["step"],
                max_iters=int(eff["max_iters"]),
                eval_budget=eff["eval_budget"],
            )
            w, records = fista_solve(data, loss, reg, ridge, cfg)
        elif solver == "svrg":
            cfg = SvrgConfig(
                step=eff["step"],
                epochs=int(eff["epochs"]),
                seed=int(eff["seed"]),
                eval_budget=eff["eval_budget"],
            )
            w, records = prox_svrg_full(data, loss, reg, ridge, cfg)
        elif solver == "saga":
            cfg = SagaConfig(
                step=eff["step"],
                epochs=int(eff["epochs"]),
                seed=int(eff["seed"]),
                eval_budget=eff["eval_budget"],
            )
            w, records = saga_solve(data, loss, reg, ridge, cfg)
        else:
            raise UsageError(f"unknown solver {solver!r}")
    except NumericsError as exc:
        if eff["trace"]:
            write_trace_csv(exc.records, eff["trace"])
        raise
    final = full_objective(data, loss, reg, ridge, w)
    if eff["trace"]:
        write_trace_csv(records, eff["trace"])
    if eff["summary"]:
        write_summary_json(
            bench.run_summary(solver, w, records, final, _config_echo(eff)), eff["summary"]
        )
    last = records[-1] if records else None
    print(
        f"solver={solver} final_objective={final:.12g} "
        f"iterations={len(records)} comp_grad_evals={last.comp_grad_evals if last else 0}"
    )
    return 0


def _cmd_compare(eff: dict) -> int:
    data, loss, reg, ridge = _build_problem(eff)
    names = tuple(s.strip() for s in str(eff["solvers"]).split(",") if s.strip())
    unknown = set(names) - set(bench.SOLVER_NAMES)
    if unknown:
        raise UsageError(f"unknown solvers: {sorted(unknown)}")
    seed = int(eff["seed"])
    budget = eff["eval_budget"]
    result = bench.compare(
        data,
        loss,
        reg,
        ridge,
        solvers=names,
        newton_config=_outer_config(eff),
        svrg_config=SvrgConfig(
            step=eff["step"], epochs=int(eff["epochs"]), seed=seed, eval_budget=budget
        ),
        saga_config=SagaConfig(
            step=eff["step"], epochs=int(eff["epochs"]), seed=seed, eval_budget=budget
        ),
        fista_config=FistaConfig(
            step=eff["step"], max_iters=int(eff["max_iters"]), eval_budget=budget
        ),
    )
    if eff["trace"]:
        bench.write_compare_csv(result, eff["trace"])
    gaps = {}
    for name in names:
        w, recs = result.runs[name]
        final = full_objective(data, loss, reg, ridge, w)
        gaps[name] = final - result.fstar
        evals = recs[-1].comp_grad_evals if recs else 0
        print(f"solver={name} gap={gaps[name]:.6g} comp_grad_evals={evals}")
    if eff["summary"]:
        write_summary_json(
            {
                "fstar": result.fstar,
                "gaps": gaps,
                "solvers": list(names),
                "config": _config_echo(eff),
            },
            eff["summary"],
        )
    return 0


def _cmd_sweep(eff: dict) -> int:
    data, loss, reg, ridge = _build_problem(eff)
    try:
        counts = tuple(int(s) for s in str(eff["inners"]).split(",") if s.strip())
    except ValueError:
        raise UsageError(f"bad --inners list {eff['inners']!r}") from None
    if not counts:
        raise UsageError("--inners needs at least one epoch count")
    result = bench.sweep_inner(data, loss, reg, ridge, counts, _outer_config(eff))
    if eff["trace"]:
        bench.write_sweep_csv(result, eff["trace"])
    gap = float(eff["gap"])
    reached = {}
    for count in counts:
        iters = result.outer_iterations_to_gap(count, gap)
        reached[str(count)] = iters
        print(f"inner={count} outer_iterations_to_gap={'never' if iters is None else iters}")
    if eff["summary"]:
        write_summary_json(
            {
                "fstar": result.fstar,
                "gap": gap,
                "outer_iterations": reached,
                "config": _config_echo(eff),
            },
            eff["summary"],
        )
    return 0


def _cmd_diagnose(eff: dict) -> int:
    data, loss, reg, ridge = _build_problem(eff)
    try:
        report = selfconcordance_check(
            data,
            loss,
            ridge,
            trials=int(eff["trials"]),
            radius=float(eff["radius"]),
            seed=int(eff["seed"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    norms = data.row_norms_sq()
    print(f"instance n={data.n} d={data.d} nnz={data.nnz}")
    print(f"row_norm_max={report.row_norm_max:.6g} scale={report.scale:.6g}")
    print(
        f"stability_trials={report.trials} violations={report.violations} "
        f"(hessian={report.hessian_violations} gradient={report.gradient_violations} "
        f"value={report.value_violations})"
    )
    if eff["summary"]:
        write_summary_json(
            {
                "n": data.n,
                "d": data.d,
                "nnz": data.nnz,
                "row_norm_mean_sq": float(norms.mean()),
                "row_norm_max": report.row_norm_max,
                "scale": report.scale,
                "trials": report.trials,
                "violations": report.violations,
                "hessian_violations": report.hessian_violations,
                "gradient_violations": report.gradient_violations,
                "value_violations": report.value_violations,
                "config": _config_echo(eff),
            },
            eff["summary"],
        )
    return 0


def _cap_threads() -> None:
    raw = os.environ.get("SUBNEWTON_THREADS")
    if not raw:
        return
    try:
        k = max(1, int(raw))
    except ValueError:
        raise UsageError(f"SUBNEWTON_THREADS must be an integer, got {raw!r}") from None
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(var, str(k))
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=k)
    except ImportError:
        pass  # env vars above remain the best effort


_COMMANDS = {
    "train": _cmd_train,
    "compare": _cmd_compare,
    "sweep-inner": _cmd_sweep,
    "diagnose": _cmd_diagnose,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        _cap_threads()
        ns = parser.parse_args(argv)
        if ns.cmd is None:
            parser.print_usage(sys.stderr)
            print("subnewton: a subcommand is required", file=sys.stderr)
            return 1
        eff = _effective(ns)
        return _COMMANDS[ns.cmd](eff)
    except UsageError as exc:
        print(f"subnewton: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"subnewton: data error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"subnewton: numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
