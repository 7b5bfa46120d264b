"""Command-line front end and the file formats it owns.

Subcommands
-----------
``deconvtest test DATA``
    Run the goodness-of-fit test on a plain-text sample (one observation
    per line; blank lines and ``#`` comments ignored) and emit a JSON
    result document.

``deconvtest coeffs``
    Compute and dump null coefficients for inspection or caching; the
    document round-trips into ``test --coeffs-cache``.

``deconvtest simulate``
    Run the level/power study and write a CSV table plus a JSON twin.

Configuration is a JSON document with optional ``null``, ``test``, and
``sim`` sections; unknown keys are rejected and the fully resolved
configuration is echoed into every output.  Exit codes: 0 success, 2 usage
or configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from .engines import QuadratureError
from .measures import (
    ChiSquared, Distribution, Exponential, Exponential1Ref, Gamma, Geometric,
    GeometricRef, Mixture, PointMass, Poisson, ReferenceMeasure, Uniform01,
    Uniform01Ref,
)
from .nullmodel import NullCoefficients, NullSpec, compute_coefficients
from .orthopoly import BasisInconsistencyError
from .simlab import SCENARIO_NAMES, level_power_table
from .teststat import DataDomainError, TestConfig, TestEngine

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

COEFFS_SCHEMA = "deconvtest-coeffs-v1"
RESULT_SCHEMA = "deconvtest-result-v1"
SIM_SCHEMA = "deconvtest-simulation-v1"

CSV_HEADER = "scenario,n,reps,reject_rate,ci_low,ci_high,seconds"


class ConfigError(ValueError):
    """Malformed configuration document or flag combination."""


class DataFileError(ValueError):
    """Unreadable or unparsable observation file."""


# ---------------------------------------------------------------------------
# Configuration documents
# ---------------------------------------------------------------------------

_DIST_KEYS = {
    "exponential": {"mean"},
    "gamma": {"shape", "scale"},
    "chi_squared": {"df"},
    "poisson": {"mean"},
    "geometric": {"mean"},
    "uniform01": set(),
    "point_mass": {"value"},
    "mixture": {"weight", "a", "b"},
}


def _check_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def build_distribution(doc: dict, where: str = "distribution") -> Distribution:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError(f"{where} must be an object with a 'kind' key")
    kind = doc["kind"]
    if kind not in _DIST_KEYS:
        raise ConfigError(f"unknown distribution kind {kind!r} in {where}")
    _check_keys(doc, _DIST_KEYS[kind] | {"kind"}, where)
    try:
        if kind == "exponential":
            return Exponential(float(doc.get("mean", 1.0)))
        if kind == "gamma":
            return Gamma(float(doc["shape"]), float(doc.get("scale", 1.0)))
        if kind == "chi_squared":
            return ChiSquared(float(doc["df"]))
        if kind == "poisson":
            return Poisson(float(doc.get("mean", 1.0)))
        if kind == "geometric":
            return Geometric(float(doc.get("mean", 1.0)))
        if kind == "uniform01":
            return Uniform01()
        if kind == "point_mass":
            return PointMass(float(doc.get("value", 0.0)))
        return Mixture(float(doc["weight"]),
                       build_distribution(doc["a"], where + ".a"),
                       build_distribution(doc["b"], where + ".b"))
    except KeyError as exc:
        raise ConfigError(f"missing key {exc} for {kind} in {where}") from None
    except ValueError as exc:
        raise ConfigError(f"bad {kind} parameters in {where}: {exc}") from None


def build_reference(doc: dict) -> ReferenceMeasure:
    kind = doc.get("kind", "exponential1")
    if kind == "exponential1":
        _check_keys(doc, {"kind"}, "null.reference")
        return Exponential1Ref()
    if kind == "uniform01":
        _check_keys(doc, {"kind"}, "null.reference")
        return Uniform01Ref()
    if kind == "geometric":
        _check_keys(doc, {"kind", "p"}, "null.reference")
        try:
            return GeometricRef(float(doc.get("p", 0.5)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown reference measure kind {kind!r}")


def build_null(doc: dict) -> NullSpec:
    _check_keys(doc, {"y", "z", "reference", "dependence"}, "null")
    dependence = doc.get("dependence", "independent")
    if dependence != "independent":
        raise ConfigError(
            "configuration files support dependence 'independent' only; "
            "dependent nulls require a joint sampler through the library API")
    try:
        return NullSpec(
            y=build_distribution(doc.get("y", {"kind": "exponential", "mean": 1.0}),
                                 "null.y"),
            z=build_distribution(doc.get("z", {"kind": "chi_squared", "df": 1}),
                                 "null.z"),
            ref=build_reference(doc.get("reference", {"kind": "exponential1"})))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid null specification: {exc}") from None


_TEST_KEYS = {"alpha", "k_max", "calibration", "mc_reps", "mc_seed",
              "eigen_condition_cap", "u_split", "coeff_method", "coeff_tol"}


def build_test_config(doc: dict) -> TestConfig:
    _check_keys(doc, _TEST_KEYS, "test")
    kwargs = dict(doc)
    if "k_max" in kwargs and kwargs["k_max"] != "auto":
        kwargs["k_max"] = int(kwargs["k_max"])
    try:
        return TestConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid test section: {exc}") from None


_SIM_KEYS = {"scenarios", "n", "reps", "master_seed"}
_SIM_DEFAULTS = {"scenarios": list(SCENARIO_NAMES), "n": [50, 100, 500],
                 "reps": 2000, "master_seed": 20260809}


def build_sim_section(doc: dict) -> dict:
    _check_keys(doc, _SIM_KEYS, "sim")
    sim = dict(_SIM_DEFAULTS)
    sim.update(doc)
    for name in sim["scenarios"]:
        if name not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario {name!r} in sim.scenarios")
    if not sim["n"] or any(int(n) < 2 for n in sim["n"]):
        raise ConfigError("sim.n must list sample sizes >= 2")
    if int(sim["reps"]) < 1:
        raise ConfigError("sim.reps must be at least 1")
    return sim


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    _check_keys(doc, {"null", "test", "sim"}, "config")
    return doc


def config_hash(null_config: dict) -> str:
    """Content hash of a resolved null section; guards coefficient caches."""
    canon = json.dumps(null_config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Data files
# ---------------------------------------------------------------------------

def read_data_file(path: str) -> np.ndarray:
    """One numeric observation per line; '#' comments and blanks ignored."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataFileError(f"cannot read data file {path}: {exc}") from None
    values = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise DataFileError(
                f"{path}:{lineno}: cannot parse {line!r} as a number") from None
    if not values:
        raise DataFileError(f"{path}: no observations found")
    return np.asarray(values, dtype=float)


# ---------------------------------------------------------------------------
# Flag plumbing
# ---------------------------------------------------------------------------

def _apply_test_overrides(args, test_doc: dict) -> dict:
    out = dict(test_doc)
    if args.alpha is not None:
        out["alpha"] = args.alpha
    if getattr(args, "kmax", None) is not None:
        out["k_max"] = args.kmax if args.kmax == "auto" else int(args.kmax)
    if args.calibration is not None:
        out["calibration"] = args.calibration
    if getattr(args, "reps", None) is not None and args.command == "test":
        out["mc_reps"] = args.reps
    if args.seed is not None and args.command in ("test", "coeffs"):
        out["mc_seed"] = args.seed
    return out


def _emit(document: dict, out_path: str | None):
    text = json.dumps(document, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _resolved_echo(null: NullSpec, test: TestConfig, sim: dict | None = None) -> dict:
    echo = {"null": null.config(), "test": test.to_dict()}
    if sim is not None:
        echo["sim"] = sim
    return echo


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_test(args) -> int:
    cfg = load_config(args.config)
    null = build_null(cfg.get("null", {}))
    test = build_test_config(_apply_test_overrides(args, cfg.get("test", {})))
    data = read_data_file(args.data)
    if null.ref.discrete and not np.all(null.ref.in_support(data)):
        bad = np.flatnonzero(~null.ref.in_support(data))
        raise DataDomainError(bad.tolist(),
                              "discrete reference requires nonnegative integers")
    coeffs = None
    if args.coeffs_cache:
        coeffs = _load_coeffs_cache(args.coeffs_cache, null)
    engine = TestEngine(null, data.size, test, coeffs)
    result = engine.run(data)
    _emit({
        "schema": RESULT_SCHEMA,
        "result": result.to_dict(),
        "coefficients": {
            "k": engine.coeffs.k,
            "method": engine.coeffs.method,
            "lambda_trace": engine.coeffs.lambda_trace.tolist(),
            "notes": list(engine.coeffs.notes),
            "cache": args.coeffs_cache,
        },
        "config": _resolved_echo(null, test),
        "config_hash": config_hash(null.config()),
    }, args.out)
    return EXIT_OK


def _load_coeffs_cache(path: str, null: NullSpec) -> NullCoefficients:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read coefficient cache {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"coefficient cache {path} is not valid JSON: "
                          f"{exc}") from None
    if doc.get("schema") != COEFFS_SCHEMA:
        raise ConfigError(f"{path} is not a coefficient document")
    expected = config_hash(null.config())
    if doc.get("config_hash") != expected:
        raise ConfigError(
            f"coefficient cache {path} is stale: its null configuration hash "
            f"{doc.get('config_hash')!r} does not match {expected!r};"
            " recompute with 'deconvtest coeffs'")
    return NullCoefficients.from_dict(doc)


def cmd_coeffs(args) -> int:
    cfg = load_config(args.config)
    null = build_null(cfg.get("null", {}))
    test = build_test_config(_apply_test_overrides(args, cfg.get("test", {})))
    if args.kmax is None or args.kmax == "auto":
        raise ConfigError("coeffs requires an explicit --kmax order")
    k = int(args.kmax)
    if k < 1:
        raise ConfigError("--kmax must be at least 1")
    coeffs = compute_coefficients(null, k, method=test.coeff_method,
                                  u_split=test.u_split, tol=test.coeff_tol)
    _emit({
        "schema": COEFFS_SCHEMA,
        "config_hash": config_hash(null.config()),
        "null": null.config(),
        **coeffs.to_dict(),
        "basis": {"definition": null.basis.definition,
                  "gram_residual": null.basis.gram_residual,
                  "notes": list(null.basis.notes)},
    }, args.out)
    return EXIT_OK


def _format_float(x: float) -> str:
    return repr(float(x))


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    test_doc = _apply_test_overrides(args, cfg.get("test", {}))
    test = build_test_config(test_doc)
    sim = build_sim_section(cfg.get("sim", {}))
    if args.scenarios:
        names = [s.strip() for s in args.scenarios.split(",") if s.strip()]
        for name in names:
            if name not in SCENARIO_NAMES:
                raise ConfigError(f"unknown scenario {name!r} in --scenarios")
        sim["scenarios"] = names
    if args.reps is not None:
        if args.reps < 1:
            raise ConfigError("--reps must be at least 1")
        sim["reps"] = args.reps
    if args.seed is not None:
        sim["master_seed"] = args.seed
    if args.n:
        sim["n"] = [int(v) for v in args.n.split(",")]
        if any(v < 2 for v in sim["n"]):
            raise ConfigError("--n entries must be >= 2")

    started = time.perf_counter()
    rows = level_power_table(sim["scenarios"], sim["n"], int(sim["reps"]),
                             test, int(sim["master_seed"]))

    out_csv = Path(args.out or "simulation.csv")
    out_json = out_csv.with_suffix(".json")
    lines = [CSV_HEADER]
    json_rows = []
    timing = {}
    for row in rows:
        # measured wall time goes to the timing map; the tabulated seconds
        # column stays deterministic so equal seeds give equal bytes
        seconds_cell = row.seconds if args.timed_csv else 0.0
        lines.append(",".join([
            row.scenario, str(row.n), str(row.reps),
            _format_float(row.rejection_rate),
            _format_float(row.ci_low), _format_float(row.ci_high),
            f"{seconds_cell:.3f}",
        ]))
        timing[f"{row.scenario}:{row.n}"] = row.seconds
        doc = row.to_dict()
        doc["seconds"] = round(seconds_cell, 3)
        doc.pop("config")
        json_rows.append(doc)
    out_csv.write_text("\n".join(lines) + "\n")
    twin = {
        "schema": SIM_SCHEMA,
        "rows": json_rows,
        "config": {"test": test.to_dict(), "sim": sim},
        "timing_seconds": timing,
        "total_seconds": time.perf_counter() - started,
    }
    out_json.write_text(json.dumps(twin, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(f"wrote {out_csv} and {out_json} ({len(rows)} rows)\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deconvtest",
        description="Goodness-of-fit testing for the signal component of "
                    "an additive convolution with known noise.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output path (default: standard output)")
    common.add_argument("--seed", type=int,
                        help="override the relevant seed (calibration seed "
                             "for 'test', master seed for 'simulate')")
    common.add_argument("--alpha", type=float, help="nominal test level")
    common.add_argument("--kmax",
                        help="number of components ('auto' or an integer)")
    common.add_argument("--calibration", choices=["asymptotic", "mc"],
                        help="critical-value mode")
    common.add_argument("--reps", type=int,
                        help="replication count (calibration reps for 'test', "
                             "study reps for 'simulate')")

    p_test = sub.add_parser("test", parents=[common],
                            help="run the test on a data file")
    p_test.add_argument("data", help="observations, one per line")
    p_test.add_argument("--coeffs-cache",
                        help="coefficient document from 'deconvtest coeffs'")

    sub.add_parser("coeffs", parents=[common],
                   help="compute null coefficients (requires --kmax)")

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="run the level/power study")
    p_sim.add_argument("--scenarios", help="comma-separated scenario names")
    p_sim.add_argument("--n", help="comma-separated sample sizes")
    p_sim.add_argument("--timed-csv", action="store_true",
                       help="write measured wall-clock seconds into the CSV "
                            "(breaks byte-for-byte reproducibility)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"test": cmd_test, "coeffs": cmd_coeffs, "simulate": cmd_simulate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFileError, DataDomainError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (QuadratureError, BasisInconsistencyError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
