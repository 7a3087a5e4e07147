"""Batch driver: ``hermitelab <subcommand> [--config FILE] [--<param> VALUE ...]``.

Each run writes into ``<output root>/<run name>/``: the resolved config
(``config.json``), a ``result.json`` and subcommand-specific CSV or SVG files.
The output root is ``--output-root``, else ``$HERMITELAB_OUTPUT_ROOT``, else
``./runs``. Exit status: 0 success, 2 invalid configuration, 3 numerical
failure. Outputs of a failed run are removed.

CSV columns:
  scaling.csv   T, var, se, replications     (variance of S_T(1) per horizon)
  averages.csv  replication, average         (hou time averages)
  path.csv      time, value                  (simulate)
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import shutil
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

import numpy as np

from . import combinatorics, constants
from .combinatorics import ContractionIndex, enumerate_indices
from .config import PARAMS, ConfigError, ExperimentConfig, dumps, parse_flag_value
from .functionals import (
    MIN_REPLICATIONS,
    ScanSettings,
    hou_ergodic_average,
    limit_diagnostics,
    scan_scaling,
)
from .hermite import Polynomial, as_fraction, classify_regime, expand
from .power_counting import (
    PowerCountingProblem,
    check_integrability,
    divergence_oracle,
    hls_admissible,
)
from .process import (
    HurstSpec,
    Kernel,
    driven_path,
    hermite_path,
    hou_path,
    moving_average_variance,
    plan_grid,
)
from .svg import loglog_plot

log = logging.getLogger("hermitelab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
ENV_OUTPUT_ROOT = "HERMITELAB_OUTPUT_ROOT"

# A prepared run: returns (artifacts by file name, one-line summary).
Job = Callable[[int], tuple[dict[str, str | bytes], str]]


def _polynomial(value) -> Polynomial:
    if isinstance(value, str):
        return Polynomial.parse(value)
    if isinstance(value, list):
        return Polynomial(value)
    raise ConfigError(f"polynomial must be a list or comma-separated string, got {value!r}")


def _csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in row))
    return "\n".join(lines) + "\n"


def _ordered_map(fn, items, threads: int) -> list:
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(fn, items))


# -- subcommands: each validates eagerly and returns the deferred computation --------

def prepare_simulate(p) -> Job:
    spec = HurstSpec(p.q, p.H)
    if p.format not in ("csv", "binary"):
        raise ConfigError("format must be 'csv' or 'binary'")
    if p.dt <= 0 or p.t_max <= 0 or p.internal_per_step < 1:
        raise ConfigError("need dt > 0, t_max > 0, internal_per_step >= 1")
    n_grid = int(round(p.t_max / p.dt))
    if n_grid < 1 or not math.isclose(n_grid * p.dt, p.t_max, rel_tol=1e-9):
        raise ConfigError("t_max must be a positive multiple of dt")
    kernel = None if p.kernel is None else Kernel.from_spec(p.kernel)

    def job(threads):
        if kernel is None:
            path = hermite_path(spec, n_grid, p.t_max, n_grid * p.internal_per_step, p.seed, p.stream)
            exact = None
        else:
            b = 1 if spec.q == 1 else p.internal_per_step
            plan = plan_grid(kernel, p.t_max, p.dt, b)
            path = driven_path(spec, kernel, plan, p.seed, p.stream)
            exact = moving_average_variance(spec, kernel, p.dt, plan.truncation, b)
        out: dict[str, str | bytes] = {}
        if p.format == "csv":
            out["path.csv"] = _csv(["time", "value"], zip(path.times.tolist(), path.values.tolist()))
        else:
            with tempfile.TemporaryDirectory() as tmp:
                f = Path(tmp) / "path.hlsp"
                path.to_binary(f)
                out["path.hlsp"] = f.read_bytes()
        result = {"header": path.header(), "sample_mean": float(path.values.mean()),
                  "sample_variance": float(path.values.var(ddof=1)), "exact_stationary_variance": exact}
        out["result.json"] = dumps(result)
        return out, f"simulate: {path.values.size} points, dt={p.dt!r}, seed={p.seed}"
    return job


def prepare_scan(p) -> Job:
    spec = HurstSpec(p.q, p.H)
    kernel = Kernel.from_spec(p.kernel)
    P = _polynomial(p.polynomial)
    T_grid = [float(T) for T in p.T_grid]
    if len(T_grid) < 5:
        raise ConfigError("T_grid needs at least 5 horizons")
    ratios = [b / a for a, b in zip(T_grid, T_grid[1:])]
    if T_grid[0] <= 0 or ratios[0] <= 1 or not all(math.isclose(r, ratios[0], rel_tol=1e-9) for r in ratios):
        raise ConfigError("T_grid must be geometric and increasing")
    if p.replications < MIN_REPLICATIONS:
        raise ConfigError(f"replications must be >= {MIN_REPLICATIONS}")
    t_points = tuple(float(t) for t in p.t_points)
    if 1.0 not in t_points or any(not 0 < t <= 1 for t in t_points):
        raise ConfigError("t_points must lie in (0, 1] and include 1")
    classify_regime(spec.q, spec.H, P)

    def job(threads):
        settings = ScanSettings(p.dt, p.internal_per_step, t_points, p.pilot_paths, threads)
        report = scan_scaling(spec, kernel, P, T_grid, p.replications, p.seed, settings)
        diag = limit_diagnostics(report.rescaled(), report.regime, t_points)
        out: dict[str, str | bytes] = {
            "scaling.csv": _csv(["T", "var", "se", "replications"],
                                [(T, float(v), float(s), p.replications)
                                 for T, v, s in zip(report.T_grid, report.var_hat, report.var_se)]),
            "result.json": dumps({"report": report.to_json(), "diagnostics": diag.to_json(),
                                  "agrees_with_prediction": report.agrees()}),
        }
        if p.plot:
            out["scaling.svg"] = loglog_plot(report.T_grid, report.var_hat, report.var_se, report.slope,
                                             report.intercept, report.predicted_slope, report.fit_T,
                                             f"q={spec.q}, H={spec.H}, P={P}")
        summary = (f"scan-scaling: slope={report.slope:.4f} se={report.slope_se:.4f} "
                   f"predicted={report.predicted_slope:.4f} regime={report.regime.family.value}")
        return out, summary
    return job


def prepare_rank(p) -> Job:
    P = _polynomial(p.polynomial)
    variance = as_fraction(p.variance)
    if variance <= 0:
        raise ConfigError("variance must be positive")

    def job(threads):
        e = expand(P, variance)
        return {"result.json": dumps(e.to_json())}, f"rank: {e.rank}"
    return job


def _alpha(p) -> ContractionIndex:
    if p.alpha is None:
        raise ConfigError("alpha (list of alpha_ij in lexicographic pair order) is required")
    return ContractionIndex(p.n, p.q, tuple(int(a) for a in p.alpha))


def prepare_constants(p) -> Job:
    spec = HurstSpec(p.q, p.H)
    kernel = Kernel.from_spec(p.kernel)
    P = _polynomial(p.polynomial)
    q = p.quantity
    if q == "c_Hq":
        def compute():
            return {"closed_form": constants.c_Hq(spec).to_json(),
                    "quadrature": constants.c_Hq_quadrature(spec).to_json()}
    elif q == "K":
        alpha = _alpha(p)

        def compute():
            return constants.K_x_alpha(kernel, alpha, spec, p.method, p.n_samples, p.seed).to_json()
    elif q == "hls":
        alpha = _alpha(p)

        def compute():
            return hls_admissible(p.n, p.q, p.H, alpha).to_json()
    elif q == "limit":
        if spec.q < 2:
            raise ConfigError("limit constants need q >= 2")

        def compute():
            return constants.limit_constants(P, kernel, spec, p.include_beta).to_json()
    elif q == "ma_covariance":
        def compute():
            return constants.ma_covariance(p.H, kernel, p.lag).to_json()
    elif q == "breuer_major":
        def compute():
            return constants.breuer_major_sigma(P, kernel, p.H).to_json()
    elif q == "critical":
        def compute():
            return constants.critical_constant(P, p.rate, p.H).to_json()
    else:
        raise ConfigError(f"unknown quantity {q!r}; choose c_Hq, K, hls, limit, ma_covariance, "
                          "breuer_major or critical")

    def job(threads):
        result = compute()
        value = result.get("value", result.get("K1", result.get("status")))
        if isinstance(value, float):
            value = f"{value:.10g}"
        return {"result.json": dumps(result)}, f"constants {q}: {value}"
    return job


def prepare_power_count(p) -> Job:
    try:
        problem = PowerCountingProblem(p.dimension, p.functionals, p.exponents)
    except (TypeError, ZeroDivisionError) as exc:
        raise ConfigError(f"malformed problem: {exc}") from exc
    if p.oracle and p.dimension > 2:
        raise ConfigError("the divergence oracle handles dimension <= 2 only")

    def job(threads):
        verdict = check_integrability(problem, p.dedupe, p.bounded)
        result = {"problem": problem.to_json(), **verdict.to_json()}
        if p.oracle:
            o = divergence_oracle(problem, p.levels, p.base, p.bounded)
            result["oracle"] = {"verdict": o.verdict.value, "partial_integrals": list(o.partial_integrals),
                                "ratios": list(o.ratios)}
        return {"result.json": dumps(result)}, f"power-count: {verdict.finite.value}"
    return job


def prepare_hou(p) -> Job:
    spec = HurstSpec(p.q, p.H)
    f = _polynomial(p.polynomial)
    if p.rate <= 0 or p.T <= 0 or p.dt <= 0 or p.replications < 2:
        raise ConfigError("need rate, T, dt > 0 and at least 2 replications")
    n_grid = int(round(p.T / p.dt))
    if not math.isclose(n_grid * p.dt, p.T, rel_tol=1e-9):
        raise ConfigError("T must be a multiple of dt")

    def job(threads):
        def one(r):
            U = hou_path(spec, p.rate, n_grid, p.T, p.seed, r, p.internal_per_step)
            return hou_ergodic_average(U, f, p.T)
        avgs = np.array(_ordered_map(one, range(p.replications), threads))
        rho0 = constants.ma_covariance(p.H, Kernel.exponential(p.rate), 0.0).value
        # E f(U_0) from rho(0) alone: exact for Gaussian U (q = 1) or for degree <= 2.
        target = float(f.gaussian_mean(rho0)) if spec.q == 1 or f.degree <= 2 else None
        mean, sd = float(avgs.mean()), float(avgs.std(ddof=1))
        result = {"T": p.T, "replications": p.replications, "mean": mean, "sd": sd,
                  "se": sd / math.sqrt(p.replications), "rho0": rho0, "target": target}
        if target is not None:
            result["deviations"] = {"first_replication": float(avgs[0]) - target, "mean": mean - target}
        out = {"averages.csv": _csv(["replication", "average"], zip(range(p.replications), avgs.tolist())),
               "result.json": dumps(result)}
        return out, f"hou: mean={mean:.6f} sd={sd:.6f} target={target}"
    return job


def prepare_combinatorics(p) -> Job:
    if p.n < 1 or p.q < 1 or p.n * p.q > 16:
        raise ConfigError("need n, q >= 1 and n*q <= 16")
    if p.order is not None and (isinstance(p.order, bool) or not isinstance(p.order, int)):
        raise ConfigError("order must be an integer or null")

    def job(threads):
        indices = enumerate_indices(p.n, p.q, p.order)
        result = {"n": p.n, "q": p.q, "order": p.order, "count": len(indices),
                  "indices": combinatorics.to_json(indices)}
        return {"result.json": dumps(result)}, f"combinatorics: {len(indices)} indices"
    return job


PREPARE = {
    "simulate": prepare_simulate,
    "scan-scaling": prepare_scan,
    "rank": prepare_rank,
    "constants": prepare_constants,
    "power-count": prepare_power_count,
    "hou": prepare_hou,
    "combinatorics": prepare_combinatorics,
}


# -- driver ------------------------------------------------------------------------------

def output_root(flag: str | None) -> Path:
    return Path(flag or os.environ.get(ENV_OUTPUT_ROOT) or "runs")


def _write_atomic(root: Path, name: str, files: dict[str, str | bytes]) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{name}.", dir=root))
    try:
        for fname, content in files.items():
            mode = "wb" if isinstance(content, bytes) else "w"
            with open(tmp / fname, mode) as fh:
                fh.write(content)
        final = root / name
        if final.exists():
            shutil.rmtree(final)
        tmp.rename(final)
        return final
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def run(config: ExperimentConfig, root: Path, threads: int = 1) -> tuple[int, str]:
    """Validate, compute, write. Returns (exit status, one-line summary)."""
    try:
        job = PREPARE[config.subcommand](config.params)
    except (ValueError, TypeError, KeyError) as exc:
        return EXIT_CONFIG, f"{config.subcommand}: invalid configuration: {exc}"
    try:
        files, summary = job(threads)
    except np.linalg.LinAlgError as exc:
        return EXIT_NUMERIC, f"{config.subcommand}: numerical failure: {exc}"
    except (ArithmeticError, RuntimeError) as exc:
        return EXIT_NUMERIC, f"{config.subcommand}: numerical failure: {exc}"
    except ValueError as exc:
        return EXIT_CONFIG, f"{config.subcommand}: invalid configuration: {exc}"
    files = {"config.json": dumps(config.to_json()), **files}
    try:
        where = _write_atomic(root, config.run_name, files)
    except OSError as exc:
        return EXIT_NUMERIC, f"{config.subcommand}: could not write outputs: {exc}"
    return EXIT_OK, f"{summary} -> {where}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hermitelab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, kind in PARAMS.items():
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--name", help="run directory name (default: subcommand plus config digest)")
        sp.add_argument("--output-root", help=f"output root (default: ${ENV_OUTPUT_ROOT} or ./runs)")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads")
        sp.add_argument("-v", "--verbose", action="store_true")
        group = sp.add_argument_group("parameters (JSON values; override the config file)")
        for f in dataclasses.fields(kind):
            group.add_argument("--" + f.name.replace("_", "-"), dest="param_" + f.name,
                               type=parse_flag_value, default=argparse.SUPPRESS, metavar="VALUE")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k[len("param_"):]: v for k, v in vars(args).items() if k.startswith("param_")}
    try:
        if args.config:
            config = ExperimentConfig.load(args.config, overrides, args.subcommand)
        else:
            config = ExperimentConfig.from_dict({}, overrides, args.subcommand)
        if args.name is not None:
            config = ExperimentConfig.from_dict({**config.to_json(), "name": args.name}, None, args.subcommand)
    except ConfigError as exc:
        print(f"{args.subcommand}: invalid configuration: {exc}")
        return EXIT_CONFIG
    if args.threads < 1:
        print(f"{args.subcommand}: invalid configuration: --threads must be >= 1")
        return EXIT_CONFIG
    log.debug("resolved config: %s", config.to_json())
    code, summary = run(config, output_root(args.output_root), args.threads)
    print(summary)
    if code:
        log.error(summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
