"""Configuration-driven experiment runner.

Usage::

    somlab <experiment> --config FILE [--seed N] [--out DIR] [--dry-run]

The config file is INI text.  Its ``[<experiment>]`` section holds the
scenario keys listed by ``somlab <experiment> --help``; an optional
``[run]`` section holds ``seed``, ``out`` and ``workers``.  Unknown keys
and sections are rejected before anything runs.  A run writes CSV tables
and ``summary.txt`` (with the effective config) into the output
directory.  Exit status: 0 on success, 2 on an invalid config, 1 when the
experiment itself fails (``error.txt`` is written next to the outputs).
"""

import argparse
import configparser
import io
import os
import re
import sys
import time
import traceback
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np
from scipy import integrate

from . import categorical, meanfield, ordering, quantization, stimuli
from .engine import GainSchedule, NetworkState, run, trial_rng, trial_seed
from .reports import format_value, write_table
from .topology import Lattice, Neighborhood

WORKERS_ENV = "SOMLAB_WORKERS"


class ConfigError(ValueError):
    """Invalid configuration; carries one message per offending key."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# -- value parsers ---------------------------------------------------------

def _int(s):
    return int(s)


def _pos_int(s):
    v = int(s)
    if v < 1:
        raise ValueError("must be a positive integer")
    return v


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _float(s):
    return float(s)


def _gain(s):
    v = float(s)
    if not 0.0 <= v < 1.0:
        raise ValueError("must lie in [0, 1[")
    return v


def _pos_float(s):
    v = float(s)
    if v <= 0:
        raise ValueError("must be > 0")
    return v


def _nonneg_float(s):
    v = float(s)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _floats(s):
    return [float(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _gains(s):
    out = _floats(s)
    if not out:
        raise ValueError("empty list")
    for v in out:
        _gain(str(v))
    return out


def _ints(s):
    out = [int(x) for x in s.replace(";", ",").split(",") if x.strip()]
    if not out or min(out) < 1:
        raise ValueError("must be a list of positive integers")
    return out


def _shapes(s):
    out = []
    for tok in s.replace(";", ",").split(","):
        tok = tok.strip()
        if not tok:
            continue
        m = re.fullmatch(r"(\d+)\s*x\s*(\d+)", tok)
        if not m:
            raise ValueError(f"{tok!r} is not of the form N1xN2")
        out.append((int(m.group(1)), int(m.group(2))))
    if not out:
        raise ValueError("empty list")
    return out


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s
    return parse


def _nbhd(s):
    return Neighborhood.from_name(s)


def _schedule(s):
    m = re.fullmatch(r"\s*(\w+)\s*\(([^)]*)\)\s*", s)
    if not m:
        raise ValueError("expected kind(args), e.g. power(1, 100, 1)")
    kind, args = m.group(1), [float(a) for a in m.group(2).split(",") if a.strip()]
    if kind == "constant":
        return GainSchedule.constant(*args)
    if kind == "power":
        return GainSchedule.power(*args)
    if kind == "log":
        return GainSchedule.log(*args)
    if kind == "two_phase":
        eps, switch, *rest = args
        return GainSchedule.two_phase(eps, int(switch), *rest)
    raise ValueError(f"unknown schedule kind {kind!r}")


def _path(s):
    if not Path(s).is_file():
        raise ValueError(f"no such file {s!r}")
    return s


DISTRIBUTIONS = ("uniform", "linear", "truncated-gaussian", "uniform-square")


def make_distribution(name: str):
    if name == "uniform":
        return stimuli.UniformBox(0.0, 1.0)
    if name == "linear":
        return stimuli.linear_density()
    if name == "truncated-gaussian":
        return stimuli.truncated_gaussian()
    if name == "uniform-square":
        return stimuli.UniformBox([0.0, 0.0], [1.0, 1.0])
    raise ValueError(name)


FUNCTIONS: Dict[str, Callable] = {
    "square": lambda x: x ** 2,
    "cube": lambda x: x ** 3,
    "exp": np.exp,
    "cos": lambda x: np.cos(np.pi * x),
    "sqrt": np.sqrt,
}


# -- schemas ---------------------------------------------------------------
# key -> (parser, default text); a default of None makes the key mandatory.

_dist = (_choice(*DISTRIBUTIONS), "uniform")

SCHEMAS: Dict[str, Dict[str, Tuple[Callable, object]]] = {
    "ordering": dict(n=(_pos_int, "10"), lattice=(_choice("string", "grid"), "string"),
                     distribution=_dist, neighborhood=(_nbhd, "step(1)"), eps=(_gain, "0.1"),
                     trials=(_pos_int, "200"), budget=(_pos_int, "1000000"),
                     start=(_choice("random", "ordered"), "random")),
    "exit": dict(n=(_pos_int, "5"), lattice=(_choice("string", "grid"), "string"),
                 distribution=_dist, neighborhood=(_nbhd, "step(1)"), eps=(_gain, "0.1"),
                 trials=(_pos_int, "50"), budget=(_pos_int, "1000000"),
                 start=(_choice("ordered", "equilibrium"), "ordered")),
    "converge": dict(n=(_pos_int, "3"), distribution=_dist, neighborhood=(_nbhd, "step(1)"),
                     gain=(_schedule, "power(1, 100, 1)"), steps=(_pos_int, "1000000"),
                     trials=(_pos_int, "100"), tolerance=(_pos_float, "0.01"),
                     start=(_choice("ordered", "random"), "ordered")),
    "invariant": dict(n=(_pos_int, "3"), distribution=_dist, neighborhood=(_nbhd, "step(1)"),
                      eps=(_gains, "0.1, 0.01"), burn_in=(_nonneg_int, "10000"),
                      horizon=(_nonneg_int, "1000000")),
    "meanfield": dict(n=(_pos_int, "3"), distribution=_dist, neighborhood=(_nbhd, "step(1)"),
                      initial=(_floats, ""), ode_horizon=(_nonneg_float, "20"),
                      tolerance=(_pos_float, "1e-12")),
    "zador": dict(distribution=(_choice(*DISTRIBUTIONS), "linear"), ns=(_ints, "2, 4, 8, 16, 32, 64"),
                  restarts=(_pos_int, "10")),
    "integrate": dict(distribution=_dist, function=(_choice(*FUNCTIONS), "square"),
                      ns=(_ints, "10, 20, 40")),
    "magnification": dict(distribution=(_choice("uniform", "linear", "truncated-gaussian"), "linear"),
                          n=(_pos_int, "20")),
    "dimsel": dict(n=(_pos_int, "3"), distribution=(_choice("uniform", "linear", "truncated-gaussian"), "uniform"),
                   neighborhood=(_nbhd, "step(1)"), sigma=(_nonneg_float, "0.01"),
                   offset=(_float, "0")),
    "grid": dict(shapes=(_shapes, "2x2, 3x3, 4x2"), neighborhood=(_nbhd, "indicator-0")),
    "korresp": dict(table=(_path, None), rows=(_pos_int, "7"), cols=(_pos_int, "7"),
                    neighborhood=(_nbhd, "step(1)"), steps=(_nonneg_int, "20000"),
                    gain=(_schedule, ""), winner=(_choice("block", "full"), "block")),
    "kacm": dict(responses=(_path, None), rows=(_pos_int, "7"), cols=(_pos_int, "7"),
                 neighborhood=(_nbhd, "step(1)"), steps=(_nonneg_int, "20000"),
                 gain=(_schedule, "")),
}

RUN_SCHEMA = dict(seed=(_int, "0"), out=(str, ""), workers=(_pos_int, ""))


def _validate(section: Dict[str, str], schema, where: str, problems: List[str]) -> dict:
    out = {}
    for key in section:
        if key not in schema:
            problems.append(f"[{where}] unknown key {key!r}")
    for key, (parse, default) in schema.items():
        text = section.get(key, default)
        if text is None:
            problems.append(f"[{where}] missing required key {key!r}")
            continue
        if text == "":
            out[key] = None
            continue
        try:
            out[key] = parse(text)
        except (ValueError, TypeError) as exc:
            problems.append(f"[{where}] {key} = {text!r}: {exc}")
    return out


def load_config(experiment: str, text: str):
    """Parse and validate config text; returns ``(params, run_params, echo)``."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"unreadable config: {exc}"]) from None
    problems = [f"unknown section [{s}]" for s in cp.sections() if s not in (experiment, "run")]
    raw = dict(cp[experiment]) if cp.has_section(experiment) else {}
    raw_run = dict(cp["run"]) if cp.has_section("run") else {}
    params = _validate(raw, SCHEMAS[experiment], experiment, problems)
    run_params = _validate(raw_run, RUN_SCHEMA, "run", problems)
    if problems:
        raise ConfigError(problems)
    _cross_checks(experiment, params)
    echo = configparser.ConfigParser(interpolation=None)
    echo[experiment] = {k: raw.get(k, d if d is not None else "") for k, (_, d) in SCHEMAS[experiment].items()}
    echo["run"] = {k: raw_run.get(k, d) for k, (_, d) in RUN_SCHEMA.items()}
    return params, run_params, echo


def _cross_checks(experiment, p):
    problems = []
    dist = p.get("distribution")
    if experiment in ("ordering", "exit"):
        if p["lattice"] == "grid" and dist != "uniform-square":
            problems.append(f"[{experiment}] a grid lattice needs distribution = uniform-square")
        if p["lattice"] == "string" and dist == "uniform-square":
            problems.append(f"[{experiment}] distribution uniform-square needs a grid lattice")
    elif experiment in ("converge", "invariant", "meanfield", "integrate") and dist == "uniform-square":
        problems.append(f"[{experiment}] needs a 1-D distribution")
    if experiment == "ordering" and p.get("eps") == 0.0:
        problems.append("[ordering] eps must be > 0")
    if experiment == "meanfield" and p.get("initial") is not None and len(p["initial"]) != p["n"]:
        problems.append(f"[meanfield] initial has {len(p['initial'])} values for n = {p['n']}")
    if problems:
        raise ConfigError(problems)


# -- experiments -----------------------------------------------------------
# each returns a list of (filename, columns, rows) tables and summary lines

def _lattice(p):
    return Lattice.grid(p["n"], p["n"]) if p["lattice"] == "grid" else Lattice.string(p["n"])


def _equilibrium(n, dist, nbhd):
    mf = meanfield.MeanField(Lattice.string(n), nbhd, dist)
    start = NetworkState.from_values((2 * np.arange(1, n + 1) - 1) / (2.0 * n)
                                     * (dist.upper[0] - dist.lower[0]) + dist.lower[0])
    return meanfield.solve_equilibrium(mf, start)


def _hitting_tables(rep):
    s = rep.summary()
    return ([("trials.csv", ["trial", "seed", "tau"], rep.rows()),
             ("summary.csv", list(s), [s])],
            [f"{k}: {format_value(v)}" for k, v in s.items()])


def exp_ordering(p, seed, workers):
    rep = ordering.hitting_time_experiment(
        _lattice(p), make_distribution(p["distribution"]), p["neighborhood"], p["eps"],
        p["trials"], p["budget"], seed, start=p["start"], workers=workers)
    return _hitting_tables(rep)


def exp_exit(p, seed, workers):
    lattice = _lattice(p)
    dist = make_distribution(p["distribution"])
    start = "ordered"
    if p["start"] == "equilibrium":
        if lattice.kind == "grid-2d":
            axis_nb = Neighborhood.step(len(p["neighborhood"].values) - 1)
            axis = _equilibrium(p["n"], stimuli.UniformBox(0.0, 1.0), axis_nb).state[:, 0]
            start = meanfield.grid_state([axis, axis])
        else:
            start = NetworkState.from_values(_equilibrium(p["n"], dist, p["neighborhood"]).state)
    rep = ordering.exit_time_experiment(lattice, dist, p["neighborhood"], p["eps"], p["trials"],
                                        p["budget"], seed, start=start, workers=workers)
    return _hitting_tables(rep)


def exp_converge(p, seed, workers):
    dist = make_distribution(p["distribution"])
    ref = _equilibrium(p["n"], dist, p["neighborhood"]).state[:, 0]
    lattice = Lattice.string(p["n"])
    rows = []
    for k in range(p["trials"]):
        rng = trial_rng(seed, k)
        st = (NetworkState.ordered if p["start"] == "ordered" else NetworkState.random)(lattice, dist, rng)
        final = run(st, dist, p["gain"], p["neighborhood"], p["steps"], rng).state.weights[:, 0]
        dev = float(np.max(np.abs(final - ref)))
        rows.append(dict(trial=k, seed=trial_seed(seed, k), max_deviation=dev,
                         within=dev <= p["tolerance"],
                         **{f"m{i + 1}": v for i, v in enumerate(final)}))
    cols = ["trial", "seed", "max_deviation", "within"] + [f"m{i + 1}" for i in range(p["n"])]
    hits = sum(r["within"] for r in rows)
    summary = dict(trials=p["trials"], within_tolerance=hits, tolerance=p["tolerance"])
    ref_rows = [dict(unit=i + 1, value=v) for i, v in enumerate(ref)]
    return ([("trials.csv", cols, rows), ("equilibrium.csv", ["unit", "value"], ref_rows),
             ("summary.csv", list(summary), [summary])],
            [f"equilibrium: {' '.join(format_value(v) for v in ref)}",
             f"within {format_value(p['tolerance'])}: {hits} / {p['trials']}"])


def exp_invariant(p, seed, workers):
    dist = make_distribution(p["distribution"])
    ref = _equilibrium(p["n"], dist, p["neighborhood"]).state
    rows = ordering.invariant_concentration_experiment(
        p["eps"], ref, dist, p["neighborhood"], p["burn_in"], p["horizon"], seed)
    out = [dict(eps=r.eps, mean_distance=r.mean_distance, final_distance=r.final_distance) for r in rows]
    return ([("concentration.csv", ["eps", "mean_distance", "final_distance"], out)],
            [f"eps {format_value(r.eps)}: mean distance {format_value(r.mean_distance)}" for r in rows])


def exp_meanfield(p, seed, workers):
    dist = make_distribution(p["distribution"])
    n, nbhd = p["n"], p["neighborhood"]
    mf = meanfield.MeanField(Lattice.string(n), nbhd, dist)
    if p["initial"] is not None:
        start = np.asarray(p["initial"], dtype=float)
    else:
        start = (2 * np.arange(1, n + 1) - 1) / (2.0 * n)
    st = NetworkState.from_values(start)
    tables = []
    if p["ode_horizon"] and p["ode_horizon"] > 0:
        flow = meanfield.ode_flow(mf, st, p["ode_horizon"])
        tables.append(("ode.csv", ["time"] + [f"m{i + 1}" for i in range(n)],
                       [[t] + list(w[:, 0]) for t, w in zip(flow.times, flow.states)]))
        st = NetworkState.from_values(flow.final)
    rep = meanfield.solve_equilibrium(mf, st, tol=p["tolerance"])
    eq_rows = [dict(unit=i + 1, value=v) for i, v in enumerate(rep.state[:, 0])]
    ev_rows = [dict(k=k + 1, real=e.real, imag=e.imag) for k, e in enumerate(rep.eigenvalues)]
    tables += [("equilibrium.csv", ["unit", "value"], eq_rows),
               ("eigenvalues.csv", ["k", "real", "imag"], ev_rows)]
    lines = [f"equilibrium: {' '.join(format_value(v) for v in rep.state[:, 0])}",
             f"residual: {format_value(rep.residual)}",
             f"max real flow eigenvalue: {format_value(rep.max_real_eig)}",
             f"verdict: {rep.verdict}", f"cooperative: {rep.cooperative}"]
    if p["distribution"] == "uniform" and nbhd.is_binary:
        try:
            lin = meanfield.uniform_limit_linear_system(n, nbhd).weights[:, 0]
            lines.append(f"linear-system gap: {format_value(float(np.max(np.abs(lin - rep.state[:, 0]))))}")
        except ValueError as exc:
            lines.append(f"linear system: {exc}")
    return tables, lines


def exp_zador(p, seed, workers):
    dist = make_distribution(p["distribution"])
    rows = quantization.zador_scan(p["ns"], dist, restarts=p["restarts"], rng=np.random.default_rng(seed))
    cols = ["n", "distortion", "scaled_distortion", "f_distance", "label"]
    return [("zador.csv", cols, rows)], [
        f"n={r['n']}: scaled distortion {format_value(r['scaled_distortion'])}" for r in rows]


def exp_integrate(p, seed, workers):
    dist = make_distribution(p["distribution"])
    g = FUNCTIONS[p["function"]]
    lo, hi = dist.lower[0], dist.upper[0]
    exact, _ = integrate.quad(lambda x: float(g(x)) * float(dist.pdf(np.array([x]))), lo, hi,
                              epsabs=1e-14, epsrel=1e-12, limit=200)
    rows = quantization.integration_study(g, exact, p["ns"], dist)
    return ([("integration.csv", ["n", "value", "error", "ratio"], rows)],
            [f"exact: {format_value(exact)}"] +
            [f"n={r['n']}: error {format_value(r['error'])}" for r in rows])


def exp_magnification(p, seed, workers):
    rep = quantization.magnification_experiment(make_distribution(p["distribution"]), p["n"])
    return ([("density.csv", ["x", "spacing_density", "f", "zador_density"], rep.density_rows),
             ("measure.csv", ["atom", "weight"], rep.measure_rows)],
            [f"fitted exponent (descriptive): {format_value(rep.fitted_exponent)}"])


def exp_dimsel(p, seed, workers):
    dist = make_distribution(p["distribution"])
    base = _equilibrium(p["n"], dist, p["neighborhood"]).state
    rep = meanfield.dimension_selection_experiment(base, p["neighborhood"], dist, p["sigma"],
                                                   offset=p["offset"])
    ev_rows = [dict(k=k + 1, real=e.real, imag=e.imag) for k, e in enumerate(rep.eigenvalues)]
    return ([("eigenvalues.csv", ["k", "real", "imag"], ev_rows)],
            [f"residual: {format_value(rep.residual)}",
             f"max real flow eigenvalue: {format_value(rep.max_real_eig)}",
             f"verdict: {rep.verdict}"])


def exp_grid(p, seed, workers):
    rows = meanfield.grid_stability_sweep(p["shapes"], p["neighborhood"])
    return ([("grid.csv", ["n1", "n2", "residual", "max_real_eig", "verdict"], rows)],
            [f"{r['n1']}x{r['n2']}: {r['verdict']}" for r in rows])


def _map_tables(mp):
    return ([("modality_map.csv", ["modality", "question", "unit_row", "unit_col"], mp.rows())],
            ["classes:"] + mp.report_text().splitlines())


def exp_korresp(p, seed, workers):
    table = categorical.read_contingency_csv(p["table"])
    mp = categorical.korresp_run(table, p["steps"], np.random.default_rng(seed),
                                 lattice=Lattice.grid(p["cols"], p["rows"]), schedule=p["gain"],
                                 nbhd=p["neighborhood"], winner=p["winner"])
    return _map_tables(mp)


def exp_kacm(p, seed, workers):
    burt = categorical.read_responses_csv(p["responses"])
    mp = categorical.kacm_run(burt, p["steps"], np.random.default_rng(seed),
                              lattice=Lattice.grid(p["cols"], p["rows"]), schedule=p["gain"],
                              nbhd=p["neighborhood"])
    return _map_tables(mp)


EXPERIMENTS = {
    "ordering": (exp_ordering, "hitting time of the ordered set"),
    "exit": (exp_exit, "exit time from the ordered set"),
    "converge": (exp_converge, "decreasing-gain convergence to the equilibrium"),
    "invariant": (exp_invariant, "constant-gain concentration around the equilibrium"),
    "meanfield": (exp_meanfield, "mean-field equilibrium, spectrum and ODE flow"),
    "zador": (exp_zador, "scaled optimal distortion over n"),
    "integrate": (exp_integrate, "quantization-based numerical integration"),
    "magnification": (exp_magnification, "code-point density of optimal quantizers"),
    "dimsel": (exp_dimsel, "dimension-selection stability"),
    "grid": (exp_grid, "stability of grid equilibria"),
    "korresp": (exp_korresp, "map of a contingency table"),
    "kacm": (exp_kacm, "map of a Burt table"),
}


def run_experiment(experiment: str, params: dict, seed: int, out: Path, workers: int = 1,
                   echo: str = "") -> List[str]:
    """Run one experiment and write its outputs; returns the summary lines."""
    fn = EXPERIMENTS[experiment][0]
    t0 = time.perf_counter()
    tables, lines = fn(params, seed, workers)
    elapsed = time.perf_counter() - t0
    out.mkdir(parents=True, exist_ok=True)
    for name, cols, rows in tables:
        write_table(out / name, cols, rows)
    text = [f"experiment: {experiment}", f"seed: {seed}", f"wall-clock seconds: {elapsed:.3f}", ""]
    text += lines + ["", "config:", echo.rstrip(), ""]
    (out / "summary.txt").write_text("\n".join(text))
    return lines


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="somlab", description="Self-organizing map experiments.")
    sub = ap.add_subparsers(dest="experiment", required=True)
    for name, (_, help_text) in EXPERIMENTS.items():
        keys = ", ".join(f"{k}={d if d else '<none>'}" if d is not None else f"{k} (required)"
                         for k, (_, d) in SCHEMAS[name].items())
        sp = sub.add_parser(name, help=help_text, description=f"{help_text}. Keys of [{name}]: {keys}")
        sp.add_argument("--config", help="INI file with a [%s] section" % name)
        sp.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
        sp.add_argument("--out", help="output directory (overrides [run] out)")
        sp.add_argument("--dry-run", action="store_true", help="validate the config and stop")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    name = args.experiment
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            print(f"somlab: cannot read config: {exc}", file=sys.stderr)
            return 2
    try:
        params, run_params, echo = load_config(name, text)
        env_workers = os.environ.get(WORKERS_ENV)
        workers = run_params.get("workers") or (_pos_int(env_workers) if env_workers else 1)
    except ConfigError as exc:
        print("somlab: invalid config:", file=sys.stderr)
        for prob in exc.problems:
            print(f"  {prob}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"somlab: invalid {WORKERS_ENV}: {exc}", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else run_params["seed"]
    out = Path(args.out or run_params.get("out") or f"somlab-out/{name}")
    echo["run"]["seed"] = str(seed)
    echo["run"]["out"] = str(out)
    echo["run"]["workers"] = str(workers)
    buf = io.StringIO()
    echo.write(buf)
    echo_text = buf.getvalue()
    if args.dry_run:
        print(echo_text, end="")
        return 0
    try:
        lines = run_experiment(name, params, seed, out, workers, echo_text)
    except Exception as exc:  # runtime failure: report and leave a diagnostic
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.txt").write_text(traceback.format_exc())
        print(f"somlab: {name} failed: {exc} (see {out / 'error.txt'})", file=sys.stderr)
        return 1
    print("\n".join(lines))
    print(f"outputs in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
