"""Command-line front end.

Every subcommand writes CSV (to ``--out`` or stdout) preceded by ``#``
provenance lines carrying the tool version, the SHA-256 of the canonical
effective configuration and the seed. Floats are written with ``repr`` so
output is byte-reproducible. Exit codes: 0 success, 2 a verdict failed,
1 error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from ._validation import check_seed
from .divergence import (
    Alphabet,
    conjugate_divergence,
    divergence,
    mass_infimum_numeric,
    mass_infimum_transform,
    phi_fn,
)
from .empirical import Sample
from .estimation import GeneralizedBootstrapMDE, MdeProblem, mde_fit
from .ldp_lab import (
    DivergenceTail,
    HalfspaceEvent,
    RateEstimate,
    RateExperimentConfig,
    SupNormBall,
    SupNormExterior,
    WholeSimplex,
    bahadur_experiment,
    default_tail_grid,
    matched_tail_experiment,
    neighborhood_experiment,
    rate_fit,
)
from .models import ExpFamilyModel, binomial_model
from .weights import UnsupportedGammaError, certify_sampler, chernoff_numeric

EXIT_OK, EXIT_ERROR, EXIT_VERDICT = 0, 1, 2


class CliError(Exception):
    """A user-facing failure; the message is printed and the exit code is 1."""


# ------------------------------------------------------------ config I/O

def load_schema() -> dict:
    text = resources.files("divboot").joinpath("config_schema.json").read_text()
    return json.loads(text)


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"I/O error: cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config error: {path} is not valid JSON ({exc.msg}, line {exc.lineno})") from exc


def _schema_error(exc: jsonschema.ValidationError, what: str) -> CliError:
    best = jsonschema.exceptions.best_match([exc]) or exc
    where = "/".join(str(p) for p in best.absolute_path) or "<root>"
    return CliError(f"schema error in {what} at {where}: {best.message}")


_EXPERIMENT_DEFS = {"ldp-rate": "ldpRate", "tail-rate": "tailRate",
                    "bahadur": "bahadur", "neighborhood": "neighborhood"}


def validate_config(config: dict) -> dict:
    """Validate against the schema branch named by ``experiment``.

    Validating one branch (rather than the top-level ``oneOf``) makes the
    error point at the offending field.
    """
    if not isinstance(config, dict):
        raise CliError("schema error in config at <root>: a JSON object is required")
    kind = config.get("experiment")
    if kind not in _EXPERIMENT_DEFS:
        raise CliError(f"schema error in config at experiment: {kind!r} is not one of "
                       f"{sorted(_EXPERIMENT_DEFS)}")
    schema = load_schema()
    branch = {"$ref": f"#/$defs/{_EXPERIMENT_DEFS[kind]}", "$defs": schema["$defs"]}
    try:
        jsonschema.validate(config, branch)
    except jsonschema.ValidationError as exc:
        raise _schema_error(exc, "config") from exc
    return config


def validate_model_spec(spec: dict) -> dict:
    schema = load_schema()
    sub = {"$ref": "#/$defs/model", "$defs": schema["$defs"]}
    try:
        jsonschema.validate(spec, sub)
    except jsonschema.ValidationError as exc:
        raise _schema_error(exc, "model") from exc
    return spec


def build_model(spec: dict):
    validate_model_spec(spec)
    if spec["kind"] == "binomial":
        return binomial_model(spec["m"], tuple(spec.get("box", (0.01, 0.99))))
    T = np.asarray(spec["T"], dtype=float)
    return ExpFamilyModel(Alphabet(spec["alphabet"]), T, np.asarray(spec["box"], dtype=float))


def ingest_sample(path: str, alphabet) -> Sample:
    """Read a one-column CSV with header ``symbol``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(f"I/O error: cannot read {path}: {exc.strerror}") from exc
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise CliError(f"data error: {path} is empty")
    if [c.strip() for c in rows[0]] != ["symbol"]:
        raise CliError(f"data error: {path} must have the single header 'symbol'")
    symbols = [r[0].strip() for r in rows[1:]]
    if not symbols:
        raise CliError(f"data error: {path} has no observations")
    alphabet = alphabet if isinstance(alphabet, Alphabet) else Alphabet(alphabet)
    known = set(alphabet.symbols)
    for row, s in enumerate(symbols, start=2):
        if s not in known:
            raise CliError(f"data error: {path} row {row}: unknown symbol {s!r}")
    return Sample.from_symbols(alphabet, symbols)


def _build_event(spec: dict):
    kind = spec["kind"]
    if kind == "whole-simplex":
        return WholeSimplex()
    if kind == "halfspace":
        return HalfspaceEvent(spec["cell"], spec["bound"], spec.get("upper", False))
    if kind == "sup-norm-ball":
        return SupNormBall(np.asarray(spec["center"], float), spec["radius"])
    if kind == "sup-norm-exterior":
        return SupNormExterior(np.asarray(spec["center"], float), spec["radius"])
    return DivergenceTail(spec["gamma"], np.asarray(spec["reference"], float), spec["threshold"])


# ------------------------------------------------------------ CSV output

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


class CsvDocument:
    """Provenance header, then rows; rendered with ``\\n`` line endings."""

    def __init__(self, config: dict, seed):
        self._buf = io.StringIO()
        self._buf.write(f"# divboot {__version__}\n")
        self._buf.write(f"# config_sha256 {config_hash(config)}\n")
        self._buf.write(f"# seed {seed}\n")
        self._writer = csv.writer(self._buf, lineterminator="\n")

    def row(self, *values):
        self._writer.writerow([_fmt(v) for v in values])

    def text(self) -> str:
        return self._buf.getvalue()


def _emit(doc: CsvDocument, out):
    text = doc.text()
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"I/O error: cannot write {out}: {exc.strerror}") from exc


def _rate_rows(doc: CsvDocument, est: RateEstimate):
    doc.row("n", "log_phat", "stderr", "hits")
    for p in est.points:
        doc.row(p.n, p.log_phat, p.stderr, p.hits)
    doc.row("slope", est.slope)
    doc.row("slope_stderr", est.slope_stderr)
    doc.row("theoretical_rate", est.theoretical_rate)
    doc.row("verdict", est.verdict)


# ------------------------------------------------------------ experiments

def _threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        n = args.threads
    else:
        raw = os.environ.get("DIVBOOT_THREADS", "1")
        try:
            n = int(raw)
        except ValueError as exc:
            raise CliError(f"config error: DIVBOOT_THREADS={raw!r} is not an integer") from exc
    if n < 1:
        raise CliError("config error: thread count must be >= 1")
    return n


def _effective(config: dict, args) -> dict:
    config = dict(config)
    if getattr(args, "seed", None) is not None:
        config["seed"] = args.seed
    if getattr(args, "replicas", None) is not None:
        config["replicas"] = args.replicas
    config.setdefault("seed", 0)
    config.setdefault("replicas", 100_000)
    return validate_config(config)


def run_experiment(config: dict, threads: int = 1):
    """Execute a validated config; returns ``(RateEstimate, extra footer rows)``."""
    kind = config["experiment"]
    seed, replicas = config["seed"], config["replicas"]
    footer = []
    if kind == "ldp-rate":
        cfg = RateExperimentConfig(np.asarray(config["base"], float), config["gamma_weights"],
                                   _build_event(config["event"]), tuple(config["n_grid"]),
                                   replicas, seed)
        est = rate_fit(cfg, threads=threads)
    elif kind == "tail-rate":
        grid = config.get("n_grid") or default_tail_grid(config["t"])
        est = matched_tail_experiment(config["gamma_div"], config["gamma_weights"],
                                      np.asarray(config["base"], float), config["t"],
                                      n_grid=grid, replicas=replicas, seed=seed,
                                      threads=threads)
        if "matched" in est.extra:
            footer += [("matched_slope", est.extra["matched"].slope),
                       ("matched_slope_stderr", est.extra["matched"].slope_stderr)]
    elif kind == "bahadur":
        model = build_model(config["model"])
        est = bahadur_experiment(model, np.asarray(config["theta"], float),
                                 np.asarray(config["theta_prime"], float), config["gamma"],
                                 config["n_grid"], replicas, seed,
                                 z_draws=config.get("z_draws", 101), threads=threads)
        comp = est.extra["competitor"]
        footer += [("competitor_slope", comp.slope),
                   ("competitor_slope_stderr", comp.slope_stderr),
                   ("competitor_theoretical_rate", comp.theoretical_rate)]
    else:
        est = neighborhood_experiment(np.asarray(config["p_true"], float),
                                      np.asarray(config["p_model"], float), config["gamma"],
                                      config["eps"], config["n_grid"], replicas, seed,
                                      alpha=config.get("alpha", 0.5),
                                      beta=config.get("beta", 2.0), threads=threads)
        footer += [("bracket_lower", est.bracket[0]), ("bracket_upper", est.bracket[1])]
    return est, footer


def _run_config(args, expected_kind=None) -> int:
    config = _effective(_read_json(args.config), args)
    if expected_kind is not None and config["experiment"] != expected_kind:
        raise CliError(f"config error: {args.config} describes a '{config['experiment']}' "
                       f"experiment, not '{expected_kind}'")
    est, footer = run_experiment(config, _threads(args))
    doc = CsvDocument(config, config["seed"])
    _rate_rows(doc, est)
    for key, value in footer:
        doc.row(key, value)
    _emit(doc, args.out)
    return EXIT_OK if est.passed else EXIT_VERDICT


def cmd_run(args) -> int:
    return _run_config(args)


def _parse_vector(text: str, name: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise CliError(f"argument error: {name} must be comma-separated numbers") from exc


def cmd_divergence(args) -> int:
    q, p = _parse_vector(args.q, "--q"), _parse_vector(args.p, "--p")
    config = {"command": "divergence", "gamma": args.gamma, "q": q.tolist(), "p": p.tolist()}
    d = float(divergence(args.gamma, q, p))
    doc = CsvDocument(config, "none")
    doc.row("quantity", "value")
    doc.row("divergence", d)
    doc.row("conjugate_divergence", float(conjugate_divergence(args.gamma, p, q)))
    doc.row("mass_infimum", float(mass_infimum_transform(args.gamma, d)))
    _emit(doc, args.out)
    return EXIT_OK


def _model_and_sample(args):
    model = build_model(_read_json(args.model))
    return model, ingest_sample(args.data, model.alphabet)


def cmd_estimate(args) -> int:
    model, sample = _model_and_sample(args)
    res = mde_fit(MdeProblem(model, sample.counts / sample.n, args.gamma),
                  n_starts=args.n_starts)
    config = {"command": "estimate", "gamma": args.gamma, "model": _read_json(args.model),
              "counts": sample.counts.tolist(), "n_starts": args.n_starts}
    doc = CsvDocument(config, "none")
    doc.row("quantity", "value")
    for j, v in enumerate(res.theta_hat, start=1):
        doc.row(f"theta_hat_{j}", v)
    doc.row("objective", res.objective_value)
    _emit(doc, args.out)
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    model, sample = _model_and_sample(args)
    seed = 0 if args.seed is None else args.seed
    est = GeneralizedBootstrapMDE(model, args.gamma, args.weight_gamma, args.n_boot, seed,
                                  args.n_starts).fit(sample)
    config = {"command": "bootstrap", "gamma": args.gamma, "weight_gamma": args.weight_gamma,
              "model": _read_json(args.model), "observations": sample.indices.tolist(),
              "n_boot": args.n_boot, "n_starts": args.n_starts, "seed": seed}
    doc = CsvDocument(config, seed)
    d = model.dim
    doc.row("replicate", *[f"theta_{j}" for j in range(1, d + 1)], "objective")
    for b, (th, f) in enumerate(zip(est.thetas_, est.objectives_)):
        doc.row(b, *th, f)
    doc.row("n_skipped", est.n_skipped_)
    if est.thetas_.shape[0]:
        lo, hi = est.interval(0.95)
        for j in range(d):
            doc.row(f"theta_{j + 1}_lower95", lo[j])
            doc.row(f"theta_{j + 1}_upper95", hi[j])
    _emit(doc, args.out)
    return EXIT_OK


def cmd_weights_check(args) -> int:
    seed = 0 if args.seed is None else args.seed
    draws = args.draws
    rows = certify_sampler(args.gamma, draws, seed)
    config = {"command": "weights-check", "gamma": args.gamma, "draws": draws, "seed": seed}
    doc = CsvDocument(config, seed)
    doc.row("statistic", "estimate", "expected", "stderr", "z", "status")
    ok = True
    for r in rows:
        status = "PASS" if abs(r["z"]) <= 3.0 else "FAIL"
        ok &= status == "PASS"
        doc.row(r["statistic"], r["estimate"], r["expected"], r["stderr"], r["z"], status)
    _emit(doc, args.out)
    return EXIT_OK if ok else EXIT_VERDICT


# ------------------------------------------------------------ selftest

SELFTEST_GAMMAS = (-1.0, -0.5, 0.0, 0.25, 0.5, 0.75, 1.0, 2.0)


def selftest_rows(seed: int, replicas: int, threads: int):
    """Invariant suite; yields ``(check, value, tolerance, status)`` tuples."""
    from .rng import stream

    def check(name, value, tol, ok=None):
        ok = value <= tol if ok is None else ok
        return (name, value, tol, "PASS" if ok else "FAIL")

    h = 1e-4
    for g in SELFTEST_GAMMAS:
        f = lambda x: float(phi_fn(g, x))
        d1 = (f(1 + h) - f(1 - h)) / (2 * h)
        d2 = (f(1 + h) - 2 * f(1.0) + f(1 - h)) / h**2
        yield check(f"phi_{g}(1)", abs(f(1.0)), 0.0)
        yield check(f"phi_{g}'(1)", abs(d1), 1e-6)
        yield check(f"phi_{g}''(1)-1", abs(d2 - 1.0), 1e-4)

    rng = stream(seed, "selftest", "pairs")
    P = rng.dirichlet(np.ones(4), size=200) + 1e-3
    P /= P.sum(axis=1, keepdims=True)
    Q = rng.dirichlet(np.ones(4), size=200) + 1e-3
    Q /= Q.sum(axis=1, keepdims=True)
    for g in SELFTEST_GAMMAS:
        gap = max(abs(float(conjugate_divergence(g, p, q)) - float(divergence(g, q, p)))
                  for p, q in zip(P, Q))
        yield check(f"conjugacy_{g}", gap, 1e-12)

    xs = np.linspace(0.2, 3.0, 15)
    for g in SELFTEST_GAMMAS:
        gap = max(abs(chernoff_numeric(g, x) - float(phi_fn(g, x))) for x in xs)
        yield check(f"chernoff_{g}", gap, 1e-6)

    for g in (0.5, 1.0, 0.0, -1.0, 2.0):
        gap = max(abs(mass_infimum_numeric(g, q, p)
                      - float(mass_infimum_transform(g, divergence(g, q, p))))
                  for p, q in zip(P[:20], Q[:20]))
        yield check(f"mass_infimum_{g}", gap, 1e-8)

    for g in SELFTEST_GAMMAS:
        worst = max(abs(r["z"]) for r in certify_sampler(g, 100_000, seed))
        yield check(f"weights_{g}_max_abs_z", worst, 4.0)

    # exponential weights never sum to zero, so every replicate is a hit
    whole = RateExperimentConfig(np.array([0.5, 0.5]), 0.0, WholeSimplex(), (10, 20),
                                 replicas, seed)
    est = rate_fit(whole, threads=threads)
    yield check("whole_simplex_slope", abs(est.slope), 1e-12)

    half = RateExperimentConfig(np.array([0.5, 0.5]), 1.0, HalfspaceEvent(0, 0.6),
                                tuple(range(50, 401, 50)), replicas, seed)
    est = rate_fit(half, threads=threads)
    yield check("halfspace_gamma1_slope_gap", abs(est.slope + est.theoretical_rate),
                max(0.15 * est.theoretical_rate, 2 * est.slope_stderr))


def cmd_selftest(args) -> int:
    seed = 0 if args.seed is None else args.seed
    replicas = 100_000 if args.replicas is None else args.replicas
    config = {"command": "selftest", "seed": seed, "replicas": replicas}
    doc = CsvDocument(config, seed)
    doc.row("check", "value", "tolerance", "status")
    ok = True
    for name, value, tol, status in selftest_rows(seed, replicas, _threads(args)):
        ok &= status == "PASS"
        doc.row(name, value, tol, status)
    doc.row("verdict", "PASS" if ok else "FAIL")
    _emit(doc, args.out)
    return EXIT_OK if ok else EXIT_VERDICT


# ------------------------------------------------------------ parser

def _u64(text: str) -> int:
    try:
        return check_seed(int(text))
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}: {exc}") from exc


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; exit code 2 is reserved for failed verdicts
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="divboot",
        description="Cressie-Read minimum divergence estimation, weighted bootstrap and "
                    "large-deviation rate experiments.")
    parser.add_argument("--version", action="version", version=f"divboot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None)
    common.add_argument("--out", default=None, help="output CSV path (default stdout)")
    mc = _Parser(add_help=False)
    mc.add_argument("--replicas", type=_positive_int, default=None)
    mc.add_argument("--threads", type=_positive_int, default=None,
                    help="worker threads (default $DIVBOOT_THREADS or 1)")

    for name, kind, helptext in (
            ("run", None, "run any experiment config"),
            ("ldp-rate", "ldp-rate", "conditional Sanov rate of an event"),
            ("tail-rate", "tail-rate", "matched/mismatched divergence tail rate"),
            ("bahadur", "bahadur", "Bahadur slope of the divergence test"),
            ("neighborhood", "neighborhood", "rate of a sup-norm neighborhood of P_n")):
        p = sub.add_parser(name, parents=[common, mc], help=helptext)
        p.add_argument("config", help="JSON experiment config")
        p.set_defaults(func=(lambda a, k=kind: _run_config(a, k)))

    p = sub.add_parser("divergence", parents=[common], help="evaluate phi_gamma(Q, P)")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--q", required=True, help="comma-separated vector Q")
    p.add_argument("--p", required=True, help="comma-separated probability vector P")
    p.set_defaults(func=cmd_divergence)

    for name, func in (("estimate", cmd_estimate), ("bootstrap", cmd_bootstrap)):
        p = sub.add_parser(name, parents=[common], help=f"minimum divergence {name}")
        p.add_argument("--gamma", type=float, required=True)
        p.add_argument("--model", required=True, help="JSON model spec")
        p.add_argument("--data", required=True, help="CSV with header 'symbol'")
        p.add_argument("--n-starts", type=_positive_int, default=8 if name == "estimate" else 4)
        if name == "bootstrap":
            p.add_argument("--weight-gamma", type=float, default=None)
            p.add_argument("--n-boot", type=_positive_int, default=200)
        p.set_defaults(func=func)

    p = sub.add_parser("weights-check", parents=[common], help="certify a weight sampler")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--draws", type=_positive_int, default=1_000_000)
    p.set_defaults(func=cmd_weights_check)

    p = sub.add_parser("selftest", parents=[common, mc], help="run the invariant suite")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"divboot: {exc}", file=sys.stderr)
    except UnsupportedGammaError as exc:
        print(f"divboot: unsupported gamma: {exc}", file=sys.stderr)
    except (ValueError, TypeError, RuntimeError) as exc:
        print(f"divboot: error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
