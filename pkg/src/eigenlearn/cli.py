"""Command-line surface: rate-exponent sweeps, Monte Carlo simulations from
config files, covariance-decay computation, and the validation suites.

Outputs are plot-ready CSV plus JSON summaries and a run manifest with
content digests. All numeric text uses the shortest round-trip representation
of the underlying doubles, so identical configs and seeds reproduce
byte-identical CSV output at any worker count.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import os
import sys
from importlib import resources

import numpy as np

from . import __version__, harness, theory, validate
from .harness import DEFAULT_NOISE_SCALES, ExperimentConfig, TruncationPolicy, RateReport
from .spectra import ModelConfig, TRUTH_S_STAR, matern_spectrum, cross_basis_variance

SCHEMA_RATE_CSV = "rate-report-v1"
SCHEMA_RATE_JSON = "rate-summary-v1"
SCHEMA_RATES_SWEEP = "rate-sweep-v1"
SCHEMA_COVDECAY = "covdecay-v1"
SCHEMA_MANIFEST = "run-manifest-v1"

_MATRIX_S_STAR = harness.MATRIX_S_STAR


def _fmt(x) -> str:
    """Shortest round-trip text for one CSV cell."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


class ConfigError(Exception):
    pass


def parse_config_text(text: str, origin: str = "<config>") -> list[tuple[str, dict]]:
    """Parse the flat sectioned key-value format.

    Returns [(section_name, {key: (value_string, line_number)})]. Errors name
    the offending key and line.
    """
    sections: list[tuple[str, dict]] = []
    current: dict | None = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if not name:
                raise ConfigError("%s:%d: empty section name" % (origin, lineno))
            if name in seen:
                raise ConfigError("%s:%d: duplicate section %r" % (origin, lineno, name))
            seen.add(name)
            current = {}
            sections.append((name, current))
            continue
        if "=" not in line:
            raise ConfigError("%s:%d: expected 'key = value', got %r" % (origin, lineno, raw))
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if current is None:
            raise ConfigError("%s:%d: key %r appears before any [section]" % (origin, lineno, key))
        if not key:
            raise ConfigError("%s:%d: empty key" % (origin, lineno))
        if key in current:
            raise ConfigError("%s:%d: duplicate key %r" % (origin, lineno, key))
        current[key] = (value, lineno)
    if not sections:
        raise ConfigError("%s: no experiment sections found" % origin)
    return sections


def _parse_n_grid(value: str, origin: str, lineno: int) -> tuple[int, ...]:
    value = value.strip()
    try:
        if ".." in value:
            span, _, factor = value.partition("x")
            lo_s, _, hi_s = span.partition("..")
            lo, hi = int(lo_s), int(hi_s)
            mult = int(factor) if factor.strip() else 2
            grid = []
            n = lo
            while n <= hi:
                grid.append(n)
                n *= mult
            return tuple(grid)
        return tuple(int(tok) for tok in value.split(","))
    except ValueError:
        raise ConfigError(
            "%s:%d: key 'n_grid': expected 'lo..hi xF' or a comma list, got %r"
            % (origin, lineno, value)
        ) from None


def _parse_j_policy(value: str, origin: str, lineno: int) -> TruncationPolicy:
    kind, _, amount = value.partition(":")
    try:
        return TruncationPolicy(kind.strip(), float(amount))
    except ValueError as exc:
        raise ConfigError("%s:%d: key 'j_policy': %s" % (origin, lineno, exc)) from None


_FLOAT_KEYS = {"alpha", "alpha_prime", "z", "p", "s", "gamma", "tau1", "tau2", "tau3",
               "beta", "fit_drop_fraction", "data_gamma", "a_rate"}
_INT_KEYS = {"replications", "seed", "j_big_factor"}
_STR_KEYS = {"estimator", "truth", "error_kind", "law", "realization"}
_ALL_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS | {"n_grid", "j_policy"}


def experiment_from_section(name: str, entries: dict, origin: str = "<config>",
                            seed_override: int | None = None,
                            fit_drop_override: float | None = None) -> ExperimentConfig:
    """Build a validated ExperimentConfig from one parsed section."""
    vals: dict = {}
    for key, (raw, lineno) in entries.items():
        if key not in _ALL_KEYS:
            raise ConfigError("%s:%d: unknown key %r in section %r" % (origin, lineno, key, name))
        try:
            if key in _FLOAT_KEYS:
                vals[key] = float(raw)
            elif key in _INT_KEYS:
                vals[key] = int(raw)
            elif key == "n_grid":
                vals[key] = _parse_n_grid(raw, origin, lineno)
            elif key == "j_policy":
                vals[key] = _parse_j_policy(raw, origin, lineno)
            else:
                vals[key] = raw
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError("%s:%d: key %r: cannot parse %r" % (origin, lineno, key, raw)) from None

    def need(key):
        if key not in vals:
            raise ConfigError("%s: section %r is missing required key %r" % (origin, name, key))
        return vals[key]

    truth = need("truth")
    estimator = vals.get("estimator", "diagonal")
    alpha = vals.get("alpha", 4.5)
    alpha_prime = vals.get("alpha_prime", alpha)
    gamma = vals.get("gamma", DEFAULT_NOISE_SCALES.get(truth))
    if gamma is None:
        raise ConfigError("%s: section %r: no default noise scale for truth %r; set 'gamma'"
                          % (origin, name, truth))
    s_star_table = TRUTH_S_STAR if estimator == "diagonal" else _MATRIX_S_STAR
    if "p" in vals or "s" in vals:
        if not ("p" in vals and "s" in vals):
            raise ConfigError("%s: section %r: keys 'p' and 's' must be given together"
                              % (origin, name))
        p, s = vals["p"], vals["s"]
        z = vals.get("z")
    else:
        if truth not in s_star_table:
            raise ConfigError("%s: section %r: unknown truth %r" % (origin, name, truth))
        z = vals.get("z", 0.0)
        s = s_star_table[truth]
        p = s + 0.5 + z
    try:
        model = ModelConfig(
            alpha=alpha, alpha_prime=alpha_prime, p=p, s=s, gamma=gamma,
            tau1=vals.get("tau1", 15.0), tau2=vals.get("tau2", 15.0),
            tau3=vals.get("tau3", 1.0), beta=vals.get("beta", 0.0), z=z,
        )
        return ExperimentConfig(
            name=name,
            model=model,
            truth=truth,
            estimator=estimator,
            N_grid=vals.get("n_grid", tuple(2**k for k in range(4, 13))),
            replications=vals.get("replications", 100),
            j_policy=vals.get("j_policy", TruncationPolicy("fixed", 4096)),
            error_kind=vals.get("error_kind", "test_error"),
            seed=seed_override if seed_override is not None else vals.get("seed", 0),
            law=vals.get("law", "gaussian"),
            realization=vals.get("realization", "auto"),
            fit_drop_fraction=(fit_drop_override if fit_drop_override is not None
                               else vals.get("fit_drop_fraction", 0.25)),
            data_gamma=vals.get("data_gamma"),
            a_rate=vals.get("a_rate", -3.0),
            j_big_factor=vals.get("j_big_factor", 4),
        )
    except ValueError as exc:
        raise ConfigError("%s: section %r: %s" % (origin, name, exc)) from None


def resolve_config(spec: str) -> tuple[str, str]:
    """Return (origin, text) for a config path or a shipped config name."""
    if os.path.exists(spec):
        with open(spec, "r", encoding="utf-8") as fh:
            return spec, fh.read()
    base = spec if spec.endswith(".cfg") else spec + ".cfg"
    ref = resources.files("eigenlearn").joinpath("configs").joinpath(base)
    if ref.is_file():
        return "builtin:%s" % base, ref.read_text(encoding="utf-8")
    raise ConfigError("config %r is neither a file nor a shipped config name" % (spec,))


def report_csv_text(report: RateReport) -> str:
    lines = [
        "# schema=%s" % SCHEMA_RATE_CSV,
        "# artifact_version=%s" % __version__,
        "# name=%s estimator=%s error_kind=%s seed=%d"
        % (report.name, report.estimator, report.error_kind, report.seed),
        "# fitted_exponent=%s fit_stderr=%s theory_exponent=%s log_factor=%s"
        % (_fmt(report.fitted_exponent), _fmt(report.fit_stderr),
           _fmt(report.theory_exponent), report.theory_log_factor),
        "N,mean_error,stderr,reps",
    ]
    for st in report.per_N:
        lines.append(",".join([_fmt(st.N), _fmt(st.mean), _fmt(st.stderr), _fmt(st.reps)]))
    return "\n".join(lines) + "\n"


def report_json_dict(report: RateReport) -> dict:
    return {
        "schema": SCHEMA_RATE_JSON,
        "artifact_version": __version__,
        "name": report.name,
        "estimator": report.estimator,
        "error_kind": report.error_kind,
        "seed": report.seed,
        "fitted_exponent": report.fitted_exponent,
        "fit_intercept": report.fit_intercept,
        "fit_stderr": report.fit_stderr,
        "fit_degenerate": report.fit_degenerate,
        "fit_window_N": list(report.fit_window),
        "theory_exponent": report.theory_exponent,
        "theory_log_factor": report.theory_log_factor,
        "theory_dominant_term": report.theory_dominant_term,
        "per_N": [
            {"N": st.N, "J": st.J, "mean_error": st.mean, "stderr": st.stderr,
             "median": st.median, "reps": st.reps, "scale": st.scale}
            for st in report.per_N
        ],
        "config": report.config,
    }


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_manifest(out_dir: str, config_origin: str, config_text: str, seed, paths):
    manifest = {
        "schema": SCHEMA_MANIFEST,
        "artifact_version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": seed,
        "config_origin": config_origin,
        "config_text": config_text,
        "outputs": [{"path": os.path.basename(p), "sha256": _sha256(p)} for p in sorted(paths)],
    }
    path = os.path.join(out_dir, "manifest.json")
    _write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def cmd_simulate(args) -> int:
    try:
        origin, text = resolve_config(args.config)
        sections = parse_config_text(text, origin)
        configs = [
            experiment_from_section(
                name, entries, origin,
                seed_override=args.seed, fit_drop_override=args.fit_drop_fraction,
            )
            for name, entries in sections
        ]
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    written = []
    for cfg in configs:
        report = harness.run_experiment(cfg, workers=args.workers)
        stem = cfg.name.replace("/", "_")
        csv_path = os.path.join(args.out, stem + ".csv")
        json_path = os.path.join(args.out, stem + ".json")
        _write(csv_path, report_csv_text(report))
        _write(json_path, json.dumps(report_json_dict(report), indent=2, sort_keys=True) + "\n")
        written.extend([csv_path, json_path])
        print("%-40s fitted=%.3f theory=%.3f (%s)"
              % (cfg.name, report.fitted_exponent, report.theory_exponent, csv_path))
    _write_manifest(args.out, origin, text, args.seed, written)
    return 0


_SWEEPABLE = ("alpha", "alpha_prime", "z")


def cmd_rates(args) -> int:
    s_star = TRUTH_S_STAR[args.truth]
    values = np.linspace(args.start, args.stop, args.num)
    rows = []
    for v in values:
        alpha, alpha_prime, z = args.alpha, args.alpha_prime, args.z
        if args.sweep == "alpha":
            alpha = float(v)
        elif args.sweep == "alpha_prime":
            alpha_prime = float(v)
        else:
            z = float(v)
        p = s_star + 0.5 + z
        try:
            pred = theory.upper_rate_exponent(alpha, alpha_prime, p, s_star)
            rows.append((float(v), _fmt(pred.exponent), pred.dominant_term,
                         pred.log_factor, "ok"))
        except ValueError:
            rows.append((float(v), "", "", "", "invalid(A5)"))
    lines = [
        "# schema=%s" % SCHEMA_RATES_SWEEP,
        "# artifact_version=%s" % __version__,
        "# truth=%s sweep=%s alpha=%s alpha_prime=%s z=%s"
        % (args.truth, args.sweep, _fmt(args.alpha), _fmt(args.alpha_prime), _fmt(args.z)),
        "%s,exponent,branch,log_factor,status" % args.sweep,
    ]
    for v, expn, branch, logf, status in rows:
        lines.append(",".join([_fmt(v), expn, branch, logf, status]))
    text = "\n".join(lines) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_covdecay(args) -> int:
    K = args.terms
    lam2 = matern_spectrum(args.tau, args.alpha_tilde, K)
    js = np.unique(np.round(np.logspace(
        math.log10(args.j_min), math.log10(args.j_max), args.points)).astype(int))
    theta2 = np.array([cross_basis_variance(lam2, int(j), K) for j in js])
    fit = harness.fit_rate(list(zip(js.astype(float), theta2)))
    lines = [
        "# schema=%s" % SCHEMA_COVDECAY,
        "# artifact_version=%s" % __version__,
        "# alpha_tilde=%s tau=%s terms=%d j_window=[%d,%d]"
        % (_fmt(args.alpha_tilde), _fmt(args.tau), K, args.j_min, args.j_max),
        "# fitted_decay_exponent=%s expected=%s"
        % (_fmt(fit.exponent), _fmt(2.0 * min(args.alpha_tilde, 2.0))),
        "j,theta2",
    ]
    for j, t2 in zip(js, theta2):
        lines.append("%s,%s" % (_fmt(int(j)), _fmt(t2)))
    text = "\n".join(lines) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    print("fitted decay exponent: %.4f (2*min(alpha_tilde, 2) = %.1f)"
          % (fit.exponent, 2.0 * min(args.alpha_tilde, 2.0)), file=sys.stderr)
    return 0


def cmd_validate(args) -> int:
    suite = validate.SUITES[args.suite]
    if args.suite == "identities" and args.inject_fault:
        results = suite(inject_fault=args.inject_fault)
    else:
        results = suite()
    failed = 0
    for res in results:
        print(res.line())
        failed += 0 if res.passed else 1
    print("%s: %d/%d checks passed" % (args.suite, len(results) - failed, len(results)))
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="eigenlearn",
        description="Bayesian operator eigenvalue learning: rates, simulations, diagnostics.",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run Monte Carlo rate experiments from a config")
    sim.add_argument("--config", required=True,
                     help="config file path or shipped config name (e.g. table1_desk)")
    sim.add_argument("--out", default="eigenlearn_runs", help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override every section's seed")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--fit-drop-fraction", type=float, default=None, dest="fit_drop_fraction")
    sim.set_defaults(func=cmd_simulate)

    rates = sub.add_parser("rates", help="closed-form rate-exponent sweeps")
    rates.add_argument("--sweep", choices=_SWEEPABLE, required=True)
    rates.add_argument("--truth", choices=sorted(TRUTH_S_STAR), required=True)
    rates.add_argument("--alpha", type=float, default=4.5)
    rates.add_argument("--alpha-prime", type=float, default=4.5, dest="alpha_prime")
    rates.add_argument("--z", type=float, default=0.0)
    rates.add_argument("--start", type=float, required=True)
    rates.add_argument("--stop", type=float, required=True)
    rates.add_argument("--num", type=int, default=61)
    rates.add_argument("--out", default=None, help="CSV path (default stdout)")
    rates.set_defaults(func=cmd_rates)

    cov = sub.add_parser("covdecay", help="cross-basis covariance decay series")
    cov.add_argument("--alpha-tilde", type=float, required=True, dest="alpha_tilde")
    cov.add_argument("--tau", type=float, default=15.0)
    cov.add_argument("--j-min", type=int, default=2**8, dest="j_min")
    cov.add_argument("--j-max", type=int, default=2**15, dest="j_max")
    cov.add_argument("--terms", type=int, default=2**21)
    cov.add_argument("--points", type=int, default=25)
    cov.add_argument("--out", default=None, help="CSV path (default stdout)")
    cov.set_defaults(func=cmd_covdecay)

    val = sub.add_parser("validate", help="run a property-check suite")
    val.add_argument("--suite", choices=sorted(validate.SUITES), required=True)
    val.add_argument("--inject-fault", default=None, dest="inject_fault",
                     help=argparse.SUPPRESS)
    val.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
