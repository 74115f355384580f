"""Command-line entry point: ``nlrm run <config>``, ``nlrm list``, ``nlrm describe <name>``.

A run config is YAML with either an ``experiment`` block (registered name
plus parameter overrides) or a ``study`` block (an inline network or
polynomial, a functional and a trial count).  Exit status: 0 when every
check passes, 1 when a check fails, 2 for an invalid config (nothing is
written), 3 for a numerical failure.
"""

import argparse
import inspect
import os
import re
import sys
from pathlib import Path
from typing import Dict, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, ValidationError, model_validator

from . import serialization
from .concentration import FUNCTIONALS, PROFILE_FAMILIES, fit_profile, get_functional, run_mc
from .exceptions import ConfigurationError, ContractViolation, InsufficientDataError, NumericalError
from .experiments import REGISTRY, get_experiment, run_experiment
from .matrix_core import SamplerSpec, sample
from .ncpoly import evaluate, load_polynomial, polynomial_from_dict
from .network import NetworkConfig, forward, sample_network
from .spectral import conjugate_kernel

OUTPUT_ENV = "NLRM_OUTPUT_DIR"
EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ExperimentBlock(_Strict):
    name: str
    params: Dict[str, object] = Field(default_factory=dict)


class Expectation(_Strict):
    target: float
    rel_tol: Optional[float] = Field(None, gt=0)
    abs_tol: Optional[float] = Field(None, ge=0)

    @model_validator(mode="after")
    def _one_tol(self):
        if self.rel_tol is None and self.abs_tol is None:
            raise ValueError("give rel_tol or abs_tol")
        return self

    def holds(self, value):
        err = abs(value - self.target)
        if self.abs_tol is not None and err <= self.abs_tol:
            return True
        return self.rel_tol is not None and self.target != 0 and err / abs(self.target) <= self.rel_tol


class StudyBlock(_Strict):
    name: str = "study"
    network: Optional[Dict[str, object]] = None
    polynomial: Optional[Union[Dict[str, object], str]] = None  # inline mapping or file path
    n: Optional[PositiveInt] = None  # matrix size for polynomial variables
    variables: Dict[str, object] = Field(default_factory=lambda: {"kind": "gaussian_iid"})
    matrix: Literal["output", "kernel"] = "output"
    functional: str
    trials: int = Field(ge=100)
    center: Literal["median", "mean"] = "median"
    fit: Optional[Literal[tuple(PROFILE_FAMILIES)]] = None
    fit_structure: Dict[str, int] = Field(default_factory=dict)
    expect: Dict[Literal["mean", "median", "variance"], Expectation] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.network is None) == (self.polynomial is None):
            raise ValueError("a study needs exactly one of 'network' or 'polynomial'")
        if self.polynomial is not None and self.n is None:
            raise ValueError("a polynomial study needs the matrix size 'n'")
        if self.functional not in FUNCTIONALS:
            raise ValueError(f"unknown functional {self.functional!r}; expected one of {sorted(FUNCTIONALS)}")
        return self


class RunConfig(_Strict):
    seed: int = Field(0, ge=0, lt=2**63)
    output_dir: Optional[str] = None
    workers: PositiveInt = 1
    emit_plots: bool = False
    experiment: Optional[ExperimentBlock] = None
    study: Optional[StudyBlock] = None

    @model_validator(mode="after")
    def _one_scenario(self):
        if (self.experiment is None) == (self.study is None):
            raise ValueError("a config needs exactly one of 'experiment' or 'study'")
        return self


# -- config loading with line anchors -----------------------------------------------

def _node_line(root, loc):
    """1-based line of the YAML node at pydantic location ``loc`` (best effort)."""
    node, line = root, None
    for key in loc:
        if node is None:
            break
        line = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    nxt, line = v, k.start_mark.line + 1
                    break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            node = None
    if node is not None:
        line = node.start_mark.line + 1
    return line


def _anchored(path, root, loc, msg):
    line = _node_line(root, loc) if root is not None else None
    where = f"{path}:{line}" if line else str(path)
    field_ = ".".join(str(x) for x in loc)
    return f"{where}: {field_ + ': ' if field_ else ''}{msg}"


def _field_loc(message):
    # "widths[1] must be ..." -> ("widths", 1)
    m = re.match(r"(\w+)(?:\[(\d+)\])?", message)
    if not m:
        return ()
    return (m.group(1),) if m.group(2) is None else (m.group(1), int(m.group(2)))


class PreparedRun:
    """A fully validated run: the config plus the objects it describes."""

    def __init__(self, config, path, output_dir, experiment_params=None, draw=None, functional=None):
        self.config = config
        self.path = path
        self.output_dir = output_dir
        self.experiment_params = experiment_params
        self.draw = draw
        self.functional = functional


def _study_draw(study, base_dir):
    if study.network is not None:
        cfg = NetworkConfig.from_dict(study.network)
        if study.matrix == "kernel":
            return lambda rng: conjugate_kernel(forward(sample_network(cfg, rng), cfg))
        return lambda rng: forward(sample_network(cfg, rng), cfg).output
    if isinstance(study.polynomial, str):
        p = Path(study.polynomial)
        poly = load_polynomial(p if p.is_absolute() else base_dir / p)
    else:
        poly = polynomial_from_dict(study.polynomial, base_dir=base_dir)
    spec = SamplerSpec(**study.variables)
    n = study.n

    def draw(rng):
        y = evaluate(poly, [sample(spec, rng.child("X", i), (n, n)) for i in range(poly.n_vars)])
        return conjugate_kernel(y) if study.matrix == "kernel" else y

    if poly.n is not None and poly.n != n:
        raise ConfigurationError(f"polynomial coefficients are {poly.n} x {poly.n} but n = {n}")
    return draw


def prepare(path, output_dir=None):
    """Parse and validate ``path``; raises ConfigurationError with a line-anchored message."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read config: {exc}") from exc
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ConfigurationError(f"{where}: invalid YAML: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}:1: config must be a mapping")
    try:
        config = RunConfig(**data)
    except ValidationError as exc:
        lines = [_anchored(path, root, e["loc"], e["msg"]) for e in exc.errors()]
        raise ConfigurationError("\n".join(lines)) from None
    out = Path(output_dir or config.output_dir or os.environ.get(OUTPUT_ENV) or "results")
    if config.experiment is not None:
        try:
            get_experiment(config.experiment.name)
        except ConfigurationError as exc:
            raise ConfigurationError(_anchored(path, root, ("experiment", "name"), str(exc))) from None
        try:
            params = get_experiment(config.experiment.name).params(**config.experiment.params)
        except ValidationError as exc:
            lines = [_anchored(path, root, ("experiment", "params", *e["loc"]), e["msg"]) for e in exc.errors()]
            raise ConfigurationError("\n".join(lines)) from None
        return PreparedRun(config, path, out, experiment_params=params)
    study = config.study
    try:
        draw = _study_draw(study, path.parent)
    except (ConfigurationError, ContractViolation, TypeError) as exc:
        key = "network" if study.network is not None else "polynomial"
        raise ConfigurationError(_anchored(path, root, ("study", key, *_field_loc(str(exc))), str(exc))) from None
    return PreparedRun(config, path, out, draw=draw, functional=get_functional(study.functional))


# -- execution ------------------------------------------------------------------------

def _emit_experiment(prep, log):
    cfg = prep.config
    res = run_experiment(cfg.experiment.name, prep.experiment_params, cfg.seed, cfg.workers)
    stem = f"{res.experiment}-{res.seed}"
    out = prep.output_dir
    out.mkdir(parents=True, exist_ok=True)
    serialization.write_json(out / res.filename, res.to_dict())
    for name, (columns, rows) in res.tables.items():
        serialization.write_csv(out / f"{stem}-{name}.csv", columns, rows)
    if cfg.emit_plots:
        from .plotting import plot_scaling, plot_tail
        for spec in res.plots:
            target = out / f"{stem}-{spec['name']}.svg"
            if spec["kind"] == "tail":
                plot_tail(target, spec["grid"], title=spec.get("title", ""))
            elif spec["kind"] == "scaling":
                plot_scaling(target, spec["x"], spec["y"], spec.get("slope"), title=spec.get("title", ""),
                             ylabel=spec.get("ylabel", ""))
    for c in res.checks:
        log(f"{'PASS' if c.passed else 'FAIL'} {c.name}: value={c.value} ({c.tolerance})")
    log(f"wrote {out / res.filename}")
    return res.passed


def _emit_study(prep, log):
    cfg, study = prep.config, prep.config.study
    rep = run_mc(prep.draw, prep.functional, study.trials, cfg.seed, cfg.workers, center=study.center)
    fit_info = None
    if study.fit is not None:
        try:
            fit_profile(rep, study.fit, **study.fit_structure)
        except InsufficientDataError as exc:
            fit_info = str(exc)
    checks = []
    values = {"mean": rep.center_mean, "median": rep.center_median, "variance": rep.variance}
    for key, exp in sorted(study.expect.items()):
        ok = exp.holds(values[key])
        checks.append({"name": key, "passed": ok, "value": values[key], "target": exp.target})
        log(f"{'PASS' if ok else 'FAIL'} {key}: value={values[key]} target={exp.target}")
    stem = f"{study.name}-{cfg.seed}"
    out = prep.output_dir
    out.mkdir(parents=True, exist_ok=True)
    record = {"schema_version": serialization.SCHEMA_VERSION, "study": study.name, "seed": cfg.seed,
              "config": study.model_dump(), "report": rep.to_dict(), "fit_error": fit_info, "checks": checks,
              "passed": all(c["passed"] for c in checks)}
    serialization.write_json(out / f"{stem}.json", record)
    rep.write_tail_csv(out / f"{stem}-tail.csv")
    if cfg.emit_plots:
        from .plotting import plot_tail
        plot_tail(out / f"{stem}-tail.svg", np.array(record["report"]["tail_grid"]), title=study.name,
                  profile=rep.fit.profile if rep.fit is not None else None)
    log(f"wrote {out / (stem + '.json')}")
    return record["passed"]


def cmd_run(args, log=print, err=None):
    err = err or (lambda m: print(m, file=sys.stderr))
    try:
        prep = prepare(args.config, args.output_dir)
    except ConfigurationError as exc:
        err(f"invalid config: {exc}")
        return EXIT_CONFIG
    try:
        ok = _emit_experiment(prep, log) if prep.config.experiment is not None else _emit_study(prep, log)
    except NumericalError as exc:
        err(f"numerical failure: {exc} {exc.diagnostics}")
        return EXIT_NUMERICAL
    except ContractViolation as exc:
        err(f"numerical failure (contract): {exc}")
        return EXIT_NUMERICAL
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def list_rows():
    rows = []
    for name, exp in REGISTRY.items():
        defaults = ", ".join(f"{k}={v}" for k, v in exp.defaults().items())
        rows.append((name, exp.anchor, defaults, exp.runtime))
    return rows


def cmd_list(args, log=print):
    rows = list_rows()
    header = ("name", "anchor", "defaults", "runtime")
    widths = [max(len(str(r[i])) for r in rows + [header]) for i in range(2)]
    log(f"{header[0]:<{widths[0]}}  {header[1]:<{widths[1]}}  {header[3]:<8}  {header[2]}")
    for name, anchor, defaults, runtime in rows:
        log(f"{name:<{widths[0]}}  {anchor:<{widths[1]}}  {runtime:<8}  {defaults}")
    return EXIT_OK


def cmd_describe(args, log=print, err=None):
    err = err or (lambda m: print(m, file=sys.stderr))
    try:
        exp = get_experiment(args.experiment)
    except ConfigurationError as exc:
        err(str(exc))
        return EXIT_CONFIG
    log(f"{exp.name}\n  anchor:  {exp.anchor}\n  runtime: {exp.runtime}\n")
    log(inspect.cleandoc(exp.description) + "\n")
    log("default parameters:")
    log(yaml.safe_dump(exp.defaults(), sort_keys=True, default_flow_style=None).rstrip())
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="nlrm", description="Concentration experiments for random networks.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a YAML config")
    run.add_argument("config")
    run.add_argument("--output-dir", default=None, help=f"overrides the config and ${OUTPUT_ENV}")
    sub.add_parser("list", help="list registered experiments")
    desc = sub.add_parser("describe", help="show one experiment")
    desc.add_argument("experiment")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "list":
        return cmd_list(args)
    return cmd_describe(args)


if __name__ == "__main__":
    sys.exit(main())
