"""Experiment configuration, dataset builders, runners and file outputs.

Configs are INI files read with :mod:`configparser`::

    [experiment]
    config_version = 1
    test_function = paper-runge-2d   ; or from-file
    tau_rule = auto                  ; or a positive number
    output_dir = out/erba-r
    emit_plot = true

    [kernel]
    family = matern-c0
    eps = 1.0

    [dataset]
    kind = grid                      ; grid | halton | file
    n_side = 25                      ; grid only
    count = 400                      ; halton only
    path = nodes.csv                 ; file only, columns x1..xd[,f]
    box = -1, 1
    dim = 2

    [eval_grid]
    m_side = 60
    box = -1, 1

    [reduction]
    criterion = residual             ; residual | power
    engine = fast                    ; fast | naive
    rho = 3
    seed = 0
    min_nodes = 7                    ; optional, default 2*rho+1
    workers = 1
    max_steps =                      ; optional cap on scored steps

    [bench]
    n_sides = 15, 18, 21
    repeats = 1
    criteria = residual, power
    engines = fast, naive
    max_steps =

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .interpolation import SampledData, evaluate, fit, power_direct, rmse
from .kernels import RadialKernel
from .reduction import Criterion, Engine, ReductionConfig, default_tolerance, run
from .svg import node_scatter

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
TRACE_COLUMNS = ("step", "n_s", "ell", "j_star", "r_s", "removed_count", "seconds")
BENCH_COLUMNS = ("n_side", "n_points", "criterion", "engine", "median_seconds")


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""


# ---------------------------------------------------------------------------
# test functions and node sets


def _paper_runge(P):
    return 1.0 / (1.0 + (P[:, 0] - 0.5) ** 2 + (P[:, 1] + 0.2) ** 2)


def _franke(P):
    x, y = P[:, 0], P[:, 1]
    return (
        0.75 * np.exp(-((9 * x - 2) ** 2) / 4 - (9 * y - 2) ** 2 / 4)
        + 0.75 * np.exp(-((9 * x + 1) ** 2) / 49 - (9 * y + 1) / 10)
        + 0.5 * np.exp(-((9 * x - 7) ** 2) / 4 - (9 * y - 3) ** 2 / 4)
        - 0.2 * np.exp(-((9 * x - 4) ** 2) - (9 * y - 7) ** 2)
    )


BUILTIN_FUNCTIONS = {
    "paper-runge-2d": _paper_runge,
    "franke-2d": _franke,
    "constant-one": lambda P: np.ones(len(P)),
    "linear-sum": lambda P: P.sum(axis=1),
}


def builtin_function(name: str):
    """Vectorized test function mapping an (m, d) array to m values."""
    try:
        func = BUILTIN_FUNCTIONS[name]
    except KeyError:
        raise ConfigError(
            f"unknown test function {name!r}; choose from {sorted(BUILTIN_FUNCTIONS)}"
        ) from None

    def wrapped(P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if name.endswith("-2d") and P.shape[1] != 2:
            raise ValueError(f"{name} is defined on R^2, got dimension {P.shape[1]}")
        return func(P)

    return wrapped


def _check_box(box):
    a, b = float(box[0]), float(box[1])
    if not (np.isfinite(a) and np.isfinite(b) and a < b):
        raise ValueError(f"degenerate box [{a}, {b}]")
    return a, b


def build_grid(n_side: int, box=(-1.0, 1.0), dim: int = 2) -> np.ndarray:
    """Equispaced tensor grid on ``[a, b]^dim``, last coordinate fastest."""
    if n_side < 2:
        raise ValueError("grid side must be >= 2")
    a, b = _check_box(box)
    axis = np.linspace(a, b, n_side)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def build_halton(count: int, box=(-1.0, 1.0), dim: int = 2) -> np.ndarray:
    """First ``count`` unscrambled Halton points after the origin, scaled to the box."""
    a, b = _check_box(box)
    pts = qmc.Halton(d=dim, scramble=False).random(count + 1)[1:]
    return a + (b - a) * pts


def read_nodes_csv(path):
    """Read ``x1..xd`` and an optional ``f`` column from a headed CSV file."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    xcols = sorted((c for c in rows[0] if c.startswith("x")), key=lambda c: int(c[1:]))
    if not xcols:
        raise ConfigError(f"{path}: no x1..xd columns")
    nodes = np.array([[float(r[c]) for c in xcols] for r in rows])
    values = np.array([float(r["f"]) for r in rows]) if "f" in rows[0] else None
    return nodes, values


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "grid"
    n_side: int | None = 25
    count: int | None = None
    path: Path | None = None
    box: tuple = (-1.0, 1.0)
    dim: int = 2


@dataclass(frozen=True)
class BenchSpec:
    n_sides: tuple = tuple(15 + 3 * k for k in range(8))
    repeats: int = 1
    criteria: tuple = (Criterion.RESIDUAL, Criterion.POWER)
    engines: tuple = (Engine.FAST, Engine.NAIVE)
    max_steps: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: RadialKernel = field(default_factory=RadialKernel)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    test_function: str = "paper-runge-2d"
    eval_side: int = 60
    eval_box: tuple = (-1.0, 1.0)
    criterion: Criterion = Criterion.RESIDUAL
    engine: Engine = Engine.FAST
    rho: int = 3
    seed: int = 0
    min_nodes: int | None = None
    workers: int = 1
    max_steps: int | None = None
    tau_rule: str | float = "auto"
    output_dir: Path = Path("out")
    emit_plot: bool = True
    bench: BenchSpec = field(default_factory=BenchSpec)
    config_version: int = CONFIG_VERSION

    def reduction_config(self, tau: float, **overrides) -> ReductionConfig:
        cfg = ReductionConfig(
            criterion=self.criterion,
            engine=self.engine,
            rho=self.rho,
            tau=tau,
            seed=self.seed,
            min_nodes=self.min_nodes,
            workers=self.workers,
            max_steps=self.max_steps,
        )
        return replace(cfg, **overrides) if overrides else cfg


def _opt_int(section, key):
    raw = section.get(key, fallback="").strip()
    return int(raw) if raw else None


def _floats(raw):
    return tuple(float(v) for v in raw.split(",") if v.strip())


def _names(raw):
    return tuple(v.strip() for v in raw.split(",") if v.strip())


def load_config(path) -> ExperimentConfig:
    """Parse an INI experiment config; raises :class:`ConfigError`."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        if not parser.read(path):
            raise ConfigError(f"cannot read config {path}")
        return _parse(parser, path.parent)
    except ConfigError:
        raise
    except (ValueError, KeyError, configparser.Error) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse(parser, base: Path) -> ExperimentConfig:
    def sec(name):
        return parser[name] if parser.has_section(name) else {}

    exp, ker, ds, ev, red, bn = (
        sec(s) for s in ("experiment", "kernel", "dataset", "eval_grid", "reduction", "bench")
    )
    version = int(exp.get("config_version", CONFIG_VERSION))
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config_version {version}")

    kind = ds.get("kind", "grid").strip()
    if kind not in ("grid", "halton", "file"):
        raise ConfigError(f"unknown dataset kind {kind!r}")
    box = _floats(ds.get("box", "-1, 1"))
    if len(box) != 2 or not box[0] < box[1]:
        raise ConfigError(f"dataset box must be 'a, b' with a < b, got {box}")
    data_path = ds.get("path", "").strip() or None
    dataset = DatasetSpec(
        kind=kind,
        n_side=_opt_int(ds, "n_side") if ds else 25,
        count=_opt_int(ds, "count"),
        path=(base / data_path) if data_path else None,
        box=box,
        dim=int(ds.get("dim", 2)),
    )
    if kind == "grid" and (dataset.n_side is None or dataset.n_side < 2):
        raise ConfigError("grid datasets need n_side >= 2")
    if kind == "halton" and (dataset.count is None or dataset.count < 2):
        raise ConfigError("halton datasets need count >= 2")
    if kind == "file" and dataset.path is None:
        raise ConfigError("file datasets need a path")

    test_function = exp.get("test_function", "paper-runge-2d").strip()
    if test_function == "from-file":
        if kind != "file":
            raise ConfigError("test_function = from-file requires dataset kind = file")
    else:
        builtin_function(test_function)

    eval_box = _floats(ev.get("box", ",".join(map(str, box))))
    if len(eval_box) != 2 or not eval_box[0] < eval_box[1]:
        raise ConfigError(f"eval_grid box must be 'a, b' with a < b, got {eval_box}")
    eval_side = int(ev.get("m_side", 60))
    if eval_side < 2:
        raise ConfigError("eval_grid m_side must be >= 2")

    tau_raw = exp.get("tau_rule", "auto").strip()
    tau_rule = "auto" if tau_raw == "auto" else float(tau_raw)
    if tau_rule != "auto" and not tau_rule > 0:
        raise ConfigError("explicit tau must be positive")
    if tau_rule == "auto" and test_function == "from-file":
        if Criterion(red.get("criterion", "residual").strip()) is Criterion.RESIDUAL:
            raise ConfigError("tau_rule = auto with residual criterion needs a builtin test function")

    bench_kwargs = {}
    if bn:
        if "n_sides" in bn:
            bench_kwargs["n_sides"] = tuple(int(v) for v in _names(bn["n_sides"]))
        if "repeats" in bn:
            bench_kwargs["repeats"] = int(bn["repeats"])
        if "criteria" in bn:
            bench_kwargs["criteria"] = tuple(Criterion(v) for v in _names(bn["criteria"]))
        if "engines" in bn:
            bench_kwargs["engines"] = tuple(Engine(v) for v in _names(bn["engines"]))
        bench_kwargs["max_steps"] = _opt_int(bn, "max_steps")
    bench = BenchSpec(**bench_kwargs)
    if not bench.n_sides or bench.repeats < 1 or min(bench.n_sides) < 2:
        raise ConfigError("bench needs a nonempty n_sides list (each >= 2) and repeats >= 1")

    cfg = ExperimentConfig(
        kernel=RadialKernel(ker.get("family", "matern-c0").strip(), float(ker.get("eps", 1.0))),
        dataset=dataset,
        test_function=test_function,
        eval_side=eval_side,
        eval_box=eval_box,
        criterion=Criterion(red.get("criterion", "residual").strip()),
        engine=Engine(red.get("engine", "fast").strip()),
        rho=int(red.get("rho", 3)),
        seed=int(red.get("seed", 0)),
        min_nodes=_opt_int(red, "min_nodes") if red else None,
        workers=int(red.get("workers", 1)),
        max_steps=_opt_int(red, "max_steps") if red else None,
        tau_rule=tau_rule,
        output_dir=base / exp.get("output_dir", "out").strip(),
        emit_plot=parser.getboolean("experiment", "emit_plot", fallback=True),
        bench=bench,
        config_version=version,
    )
    cfg.reduction_config(1.0)  # validates rho / min_nodes / workers
    return cfg


# ---------------------------------------------------------------------------
# experiment


@dataclass
class Problem:
    """Dataset, evaluation grid and (when known) the truth on that grid."""

    data: SampledData
    eval_points: np.ndarray
    eval_truth: np.ndarray | None


def build_problem(config: ExperimentConfig, n_side: int | None = None) -> Problem:
    ds = config.dataset
    if n_side is not None:
        ds = replace(ds, kind="grid", n_side=n_side)
    file_values = None
    if ds.kind == "grid":
        nodes = build_grid(ds.n_side, ds.box, ds.dim)
    elif ds.kind == "halton":
        nodes = build_halton(ds.count, ds.box, ds.dim)
    else:
        nodes, file_values = read_nodes_csv(ds.path)
    dim = nodes.shape[1]
    eval_points = build_grid(config.eval_side, config.eval_box, dim)
    if config.test_function == "from-file":
        if file_values is None:
            raise ConfigError(f"{ds.path}: from-file needs an 'f' column")
        return Problem(SampledData(nodes, file_values), eval_points, None)
    func = builtin_function(config.test_function)
    values = func(nodes) if file_values is None else file_values
    return Problem(SampledData(nodes, values), eval_points, func(eval_points))


@dataclass
class ExperimentReport:
    initial_size: int
    final_size: int
    e_x: float | None
    e_xs: float | None
    tau: float
    total_seconds: float
    step_seconds: list
    engine: str
    criterion: str
    seed: int
    rho: int
    workers: int
    stop_reason: str
    kernel_family: str
    kernel_eps: float
    regularizations: list

    def to_dict(self) -> dict:
        return asdict(self)


# fields that legitimately differ between identical runs
WALL_CLOCK_FIELDS = ("total_seconds", "step_seconds")


def baseline(config: ExperimentConfig, problem: Problem):
    """Full-set RMSE and tolerance, as used before a reduction run."""
    model = fit(config.kernel, problem.data)
    e_x = None
    if problem.eval_truth is not None:
        e_x = rmse(evaluate(model, problem.eval_points), problem.eval_truth)
    if config.tau_rule != "auto":
        return model, e_x, float(config.tau_rule)
    if config.criterion is Criterion.RESIDUAL:
        tau = default_tolerance(Criterion.RESIDUAL, e_x=e_x)
    else:
        power = power_direct(config.kernel, problem.data.nodes, problem.eval_points)
        tau = default_tolerance(Criterion.POWER, power_values=power, m_side=config.eval_side)
    return model, e_x, tau


def execute(config: ExperimentConfig, problem: Problem | None = None):
    """Run baseline plus reduction without touching the filesystem.

    Returns ``(report, trace, problem)``.
    """
    if problem is None:
        problem = build_problem(config)
    _, e_x, tau = baseline(config, problem)
    trace = run(problem.data, config.kernel, config.reduction_config(tau))
    e_xs = None
    if problem.eval_truth is not None:
        e_xs = rmse(evaluate(trace.final_model, problem.eval_points), problem.eval_truth)
    report = ExperimentReport(
        initial_size=len(problem.data),
        final_size=trace.final_size,
        e_x=e_x,
        e_xs=e_xs,
        tau=tau,
        total_seconds=trace.total_seconds,
        step_seconds=[s.seconds for s in trace.steps],
        engine=config.engine.value,
        criterion=config.criterion.value,
        seed=config.seed,
        rho=config.rho,
        workers=config.workers,
        stop_reason=trace.stop_reason.value,
        kernel_family=config.kernel.family.value,
        kernel_eps=config.kernel.eps,
        regularizations=trace.regularizations,
    )
    return report, trace, problem


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for s in trace.steps:
            w.writerow([s.step, s.n_s, s.ell, s.j_star, _fmt(s.score), len(s.removed), _fmt(s.seconds)])


def trace_rows(trace) -> list:
    """The trace as it appears in its CSV: one tuple per step."""
    return [
        (s.step, s.n_s, s.ell, s.j_star, float(s.score), len(s.removed), float(s.seconds))
        for s in trace.steps
    ]


def read_trace_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [
            (int(r["step"]), int(r["n_s"]), int(r["ell"]), int(r["j_star"]),
             float(r["r_s"]), int(r["removed_count"]), float(r["seconds"]))
            for r in reader
        ]


def write_nodes_csv(data: SampledData, retained, path):
    keep = np.zeros(len(data), dtype=bool)
    keep[np.asarray(retained, dtype=int)] = True
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", *(f"x{k + 1}" for k in range(data.dim)), "f", "status"])
        for i, (x, f) in enumerate(zip(data.nodes, data.values)):
            w.writerow([i, *map(_fmt, x), _fmt(f), "retained" if keep[i] else "removed"])


class _Outputs:
    """Files written in one go; deleted again if any write fails."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.written = []

    def path(self, name):
        p = self.directory / name
        self.written.append(p)
        return p

    def __enter__(self):
        self.directory.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for p in self.written:
                p.unlink(missing_ok=True)
        return False


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=True)
        fh.write("\n")


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run one configured experiment and write its output files.

    Writes ``trace.csv``, ``summary.json``, ``nodes.csv`` and, when
    ``emit_plot`` is set, ``nodes.svg`` into ``config.output_dir``.
    """
    report, trace, problem = execute(config)
    retained = trace.final_indices
    removed = np.setdiff1d(np.arange(len(problem.data)), retained)
    with _Outputs(config.output_dir) as out:
        write_trace_csv(trace, out.path("trace.csv"))
        write_json(report.to_dict(), out.path("summary.json"))
        write_nodes_csv(problem.data, retained, out.path("nodes.csv"))
        if config.emit_plot:
            svg = node_scatter(
                problem.data.nodes[retained], problem.data.nodes[removed], config.dataset.box
            )
            out.path("nodes.svg").write_text(svg)
    log.info(
        "%s/%s: %d -> %d nodes, e_x=%s e_xs=%s, %.2fs",
        report.criterion, report.engine, report.initial_size, report.final_size,
        report.e_x, report.e_xs, report.total_seconds,
    )
    return report


def power_map(config: ExperimentConfig):
    """Power function of the full node set on the evaluation grid."""
    problem = build_problem(config)
    power = power_direct(config.kernel, problem.data.nodes, problem.eval_points)
    with _Outputs(config.output_dir) as out:
        with open(out.path("power_map.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([*(f"x{k + 1}" for k in range(problem.eval_points.shape[1])), "power"])
            for x, p in zip(problem.eval_points, power):
                w.writerow([*map(_fmt, x), _fmt(p)])
    return problem.eval_points, power


# ---------------------------------------------------------------------------
# benchmark


@dataclass
class BenchResult:
    rows: list  # dicts keyed by BENCH_COLUMNS
    slopes: dict  # "criterion/engine" -> log-log slope of time vs node count
    failures: list

    def series(self, criterion, engine):
        sel = [
            r for r in self.rows
            if r["criterion"] == Criterion(criterion).value
            and r["engine"] == Engine(engine).value
            and math.isfinite(r["median_seconds"])
        ]
        return (
            np.array([r["n_points"] for r in sel], dtype=float),
            np.array([r["median_seconds"] for r in sel], dtype=float),
        )


def loglog_slope(x, y) -> float:
    if len(x) < 2:
        return float("nan")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def benchmark(config: ExperimentConfig, write: bool = True) -> BenchResult:
    """Median reduction wall-clock per grid size, criterion and engine.

    Tolerances follow ``config.tau_rule`` and are computed per grid size.
    A failing cell is recorded with ``nan`` time and the sweep continues.
    """
    spec = config.bench
    rows, failures = [], []
    for n_side in spec.n_sides:
        problem = build_problem(config, n_side=n_side)
        for criterion in spec.criteria:
            cfg = replace(config, criterion=criterion)
            try:
                _, _, tau = baseline(cfg, problem)
            except Exception as exc:  # noqa: BLE001 - a failed cell must not abort the sweep
                tau = None
                base_error = exc
            for engine in spec.engines:
                cell = {
                    "n_side": n_side,
                    "n_points": len(problem.data),
                    "criterion": criterion.value,
                    "engine": engine.value,
                    "median_seconds": float("nan"),
                }
                try:
                    if tau is None:
                        raise base_error
                    rcfg = cfg.reduction_config(tau, engine=engine, max_steps=spec.max_steps)
                    times = [
                        run(problem.data, config.kernel, rcfg).total_seconds
                        for _ in range(spec.repeats)
                    ]
                    cell["median_seconds"] = float(np.median(times))
                except Exception as exc:  # noqa: BLE001
                    log.warning("bench cell %s failed: %s", cell, exc)
                    failures.append({**cell, "error": str(exc)})
                rows.append(cell)
                log.info("bench %s", cell)
    result = BenchResult(rows, {}, failures)
    for criterion in spec.criteria:
        for engine in spec.engines:
            x, y = result.series(criterion, engine)
            result.slopes[f"{criterion.value}/{engine.value}"] = loglog_slope(x, y)
    if write:
        with _Outputs(config.output_dir) as out:
            with open(out.path("bench.csv"), "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
                w.writeheader()
                for r in rows:
                    w.writerow({**r, "median_seconds": _fmt(r["median_seconds"])})
            write_json(
                {
                    "slopes": result.slopes,
                    "repeats": spec.repeats,
                    "max_steps": spec.max_steps,
                    "workers": config.workers,
                    "failures": failures,
                },
                out.path("bench_summary.json"),
            )
    return result
