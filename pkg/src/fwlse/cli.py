"""Command-line front end.

Subcommands::

    fwlse fit    data.csv --y Y --x2 X [--x1 A B] [--vcov hc1] ...
    fwlse fwl    data.csv --y Y --x2 X --x1 A [--vcov homo --vcov hc0] ...
    fwlse strata data.csv --y Y --z-col Z --stratum-col S

Exit codes: 0 success, 1 an equivalence verdict failed (``fwl`` only),
2 input or configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from . import fwl, ols, strata, vcov
from .csvtable import CsvTable, parse_csv
from .errors import ConfigError, FwlseError, InputError, NumericalError

EXIT_OK, EXIT_VERDICT, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
VCOV_CHOICES = ("homo", "hc0", "hc1", "hc2", "hc3", "hc4", "cluster", "hac")
INTERCEPT_NAME = "_cons"


@dataclass
class RunConfig:
    subcommand: str
    y: str
    x2: List[str] = field(default_factory=list)
    x1: List[str] = field(default_factory=list)
    intercept: Optional[bool] = None
    vcov: List[str] = field(default_factory=lambda: ["homo"])
    cluster_col: Optional[str] = None
    cluster_correction: str = "none"
    lag: Optional[int] = None
    df_adjust: bool = False
    stata_compat: bool = False
    tol: float = fwl.DEFAULT_TOL
    output: str = "table"
    z_col: Optional[str] = None
    stratum_col: Optional[str] = None

    def __post_init__(self):
        if self.intercept is None:
            self.intercept = self.subcommand != "strata"

    def validate(self, table: CsvTable):
        if self.subcommand not in ("fit", "fwl", "strata"):
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.output not in ("table", "json"):
            raise ConfigError(f"unknown output format {self.output!r}")
        if not self.tol > 0:
            raise ConfigError(f"--tol must be positive, got {self.tol!r}")
        if self.subcommand == "strata":
            for flag, col in (("--z-col", self.z_col), ("--stratum-col", self.stratum_col)):
                if col is None:
                    raise ConfigError(f"strata needs {flag}")
            if self.intercept:
                raise ConfigError(
                    "strata fits one indicator per stratum; --intercept would make "
                    "the design rank deficient"
                )
            used = [self.y, self.z_col, self.stratum_col]
        else:
            if not self.x2:
                raise ConfigError(f"{self.subcommand} needs at least one --x2 column")
            used = [self.y, *self.x1, *self.x2]
            for v in self.vcov:
                if v not in VCOV_CHOICES:
                    raise ConfigError(f"unknown --vcov {v!r}")
            if "cluster" in self.vcov:
                if self.cluster_col is None:
                    raise ConfigError("--vcov cluster needs --cluster-col")
                used.append(self.cluster_col)
            if self.cluster_correction not in [c.value for c in vcov.ClusterCorrection]:
                raise ConfigError(
                    f"unknown --cluster-correction {self.cluster_correction!r}"
                )
            if "hac" in self.vcov and (self.lag is None or self.lag < 0):
                raise ConfigError("--vcov hac needs --lag N with N >= 0")
            if self.x1 and INTERCEPT_NAME in self.x1 and self.intercept:
                raise ConfigError(f"column name {INTERCEPT_NAME!r} is reserved")
        for col in used:
            table.require(col)
        dup = {c for c in used if used.count(c) > 1}
        if dup:
            raise ConfigError(f"column(s) used twice: {', '.join(sorted(dup))}")

    def kinds(self):
        out = []
        for v in self.vcov:
            if v == "homo":
                out.append(vcov.Homoskedastic())
            elif v.startswith("hc"):
                out.append(vcov.HC(int(v[2:])))
            elif v == "cluster":
                out.append(vcov.Cluster(vcov.ClusterCorrection(self.cluster_correction)))
            else:
                out.append(vcov.Hac.bartlett(self.lag, self.df_adjust))
        return out


@dataclass
class RunResult:
    exit_code: int
    stdout: str
    stderr: str = ""


# -- serialization ---------------------------------------------------------


def _num(x):
    return float(x)


def _arr(a):
    return np.asarray(a, dtype=float).tolist()


def _kind_dict(kind):
    if isinstance(kind, vcov.Homoskedastic):
        return {"type": "homoskedastic"}
    if isinstance(kind, vcov.HC):
        return {"type": "hc", "variant": kind.variant}
    if isinstance(kind, vcov.Cluster):
        return {"type": "cluster", "correction": kind.correction.value}
    return {"type": "hac", "weights": list(kind.weights), "df_adjust": kind.df_adjust}


def _estimate_dict(est: vcov.CovEstimate):
    return {
        "label": est.kind.label,
        "kind": _kind_dict(est.kind),
        "matrix": _arr(est.matrix),
        "full_matrix": _arr(est.full_matrix),
        "std_errors": _arr(est.std_errors),
        "negative_diagonal": est.negative_diagonal,
    }


def _fit_dict(f: ols.OlsFit, names):
    return {
        "names": list(names),
        "n": f.n,
        "p": f.p,
        "focal_offset": f.focal_offset,
        "focal_len": f.focal_len,
        "beta": _arr(f.beta),
        "sigma2_hat": _num(f.sigma2_hat),
        "residuals": _arr(f.residuals),
        "leverages": _arr(f.leverages),
        "xtx_inv": _arr(f.xtx_inv),
    }


def _dump(command, config, results, verdicts):
    doc = {
        "command": command,
        "config": asdict(config),
        "results": results,
        "verdicts": verdicts,
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


# -- table rendering -------------------------------------------------------


def fmt(x):
    """Seven significant digits, as in Stata output."""
    return f"{x:.7g}"


def _fmt_diff(x):
    return f"{x:.2e}"


def _table(rows, header):
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    lines = []
    for i, r in enumerate(cells):
        lines.append(
            "  ".join(
                c.ljust(w) if j == 0 else c.rjust(w) for j, (c, w) in enumerate(zip(r, widths))
            ).rstrip()
        )
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return lines


# -- subcommands -----------------------------------------------------------


def _design_spec(config: RunConfig, table: CsvTable):
    n = table.n
    x1_cols = [table.numeric(c) for c in config.x1]
    names = list(config.x1)
    if config.intercept:
        x1_cols.insert(0, np.ones(n))
        names.insert(0, INTERCEPT_NAME)
    x1 = np.column_stack(x1_cols) if x1_cols else np.zeros((n, 0))
    x2 = np.column_stack([table.numeric(c) for c in config.x2])
    clusters = None
    if config.cluster_col is not None and "cluster" in config.vcov:
        clusters = table.labels(config.cluster_col)
    return ols.DesignSpec(
        table.numeric(config.y),
        x1,
        x2,
        cluster_ids=clusters,
        names=names + list(config.x2),
    )


def _run_fit(config, table):
    spec = _design_spec(config, table)
    f = ols.fit(spec)
    ests = [
        vcov.estimate(f, spec.design, k, spec.cluster_ids, spec.time_index)
        for k in config.kinds()
    ]
    if config.output == "json":
        results = {
            "fit": _fit_dict(f, spec.names),
            "estimators": [_estimate_dict(e) for e in ests],
        }
        return RunResult(EXIT_OK, _dump("fit", config, results, {}))

    lines = [
        f"OLS fit of {config.y}: n = {f.n}, p = {f.p}, residual df = {f.df_resid}",
        f"focal block: {', '.join(config.x2)}",
    ]
    for est in ests:
        se = np.sqrt(np.clip(np.diag(est.full_matrix), 0.0, None))
        lines += ["", f"estimator: {est.kind.label}"]
        if est.negative_diagonal:
            lines.append("warning: negative variance on the diagonal (shown as 0)")
        rows = [[nm, fmt(b), fmt(s)] for nm, b, s in zip(spec.names, f.beta, se)]
        lines += _table(rows, ["variable", "coef", "std. err."])
    return RunResult(EXIT_OK, "\n".join(lines) + "\n")


def _run_fwl(config, table):
    spec = _design_spec(config, table)
    report = fwl.covariance_equivalence(
        spec, config.kinds(), tol=config.tol, stata_compat=config.stata_compat
    )
    full, part = report.full_fit, report.partial
    focal = list(config.x2)
    verdicts = {
        "coefficients": "pass" if report.coefficients.passed else "fail",
        "residuals": "pass" if report.residuals.passed else "fail",
    }
    for rec in report.records:
        verdicts[rec.kind.label] = rec.status.value
    code = EXIT_OK if report.passed else EXIT_VERDICT

    if config.output == "json":
        part_names = [f"{c}_res" for c in focal]
        if part.stata_compat:
            part_names.append(INTERCEPT_NAME)
        results = {
            "full": _fit_dict(full, spec.names),
            "partial": _fit_dict(part.fit, part_names),
            "coefficients": asdict(report.coefficients),
            "residuals": asdict(report.residuals),
            "tolerance": report.tolerance,
            "estimators": [
                {
                    "label": rec.kind.label,
                    "kind": _kind_dict(rec.kind),
                    "full": _estimate_dict(rec.full),
                    "partial": _estimate_dict(rec.partial),
                    "scale_full": rec.scale_full,
                    "scale_partial": rec.scale_partial,
                    "max_abs_diff": rec.max_abs_diff,
                    "status": rec.status.value,
                }
                for rec in report.records
            ],
        }
        return RunResult(code, _dump("fwl", config, results, verdicts))

    mode = (
        "stata-compat (intercept in partial fit, df n-L-1)"
        if config.stata_compat
        else "exact (no intercept in partial fit, df n-L)"
    )
    lines = [
        f"full vs partial regression of {config.y}: n = {full.n}, "
        f"K = {spec.K}, L = {spec.L}",
        f"x1: {', '.join(spec.names[: spec.K]) or '(none)'}",
        f"x2: {', '.join(focal)}",
        f"partial mode: {mode}",
        f"tolerance: {config.tol:g}",
        "",
    ]
    rows = [
        [nm, fmt(b), fmt(bt), "", ""]
        for nm, b, bt in zip(focal, full.focal_beta, part.beta)
    ]
    rows.append(["max |diff|", "", "", _fmt_diff(report.coef_max_abs_diff),
                 verdicts["coefficients"]])
    lines += _table(rows, ["coefficient", "full", "partial", "diff", "verdict"])
    lines += ["", f"residuals: max |diff| = {_fmt_diff(report.residual_max_abs_diff)}"
              f"  {verdicts['residuals']}", ""]
    rows = []
    for rec in report.records:
        se_f, se_p = rec.full.std_errors, rec.partial.std_errors
        for j, nm in enumerate(focal):
            tail = [_fmt_diff(rec.max_abs_diff), rec.status.value] if j == 0 else ["", ""]
            label = rec.kind.label if j == 0 else ""
            scale = f"{rec.scale_full:g}/{rec.scale_partial:g}" if j == 0 else ""
            rows.append([label, nm, fmt(se_f[j]), fmt(se_p[j]), scale, *tail])
    lines += _table(
        rows,
        ["estimator", "variable", "se full", "se partial", "scale", "diff", "verdict"],
    )
    lines += ["", f"overall: {'pass' if report.passed else 'FAIL'}"]
    return RunResult(code, "\n".join(lines) + "\n")


def _run_strata(config, table):
    data = strata.StratifiedData(
        table.numeric(config.y),
        table.numeric(config.z_col),
        table.labels(config.stratum_col),
    )
    est = strata.analyze(data, tol=config.tol)
    cc = est.cross_check
    verdicts = {"cross_check": "pass" if cc.passed else "fail"}
    if config.output == "json":
        results = {
            "n": data.n,
            "K": len(est.summaries),
            "tau_ols": est.tau_ols,
            "v0": est.v0,
            "v_homo": est.v_homo,
            "v_ehw": est.v_ehw,
            "conservativeness_gap": est.conservativeness_gap,
            "summaries": [asdict(s) for s in est.summaries],
            "cross_check": {
                "regression": cc.regression._asdict(),
                "tau_diff": cc.tau_diff,
                "v_homo_rel_diff": cc.v_homo_rel_diff,
                "v_ehw_rel_diff": cc.v_ehw_rel_diff,
                "tolerance": cc.tolerance,
            },
        }
        return RunResult(EXIT_OK, _dump("strata", config, results, verdicts))

    lines = [
        f"stratified experiment: y = {config.y}, z = {config.z_col}, "
        f"strata = {config.stratum_col}, n = {data.n}, K = {len(est.summaries)}",
        "",
    ]
    rows = [
        [s.label, s.n_k, s.n_k1, s.n_k0, fmt(s.e_k), fmt(s.omega_k), fmt(s.tau_k),
         fmt(s.V_k), fmt(s.Lambda_k), fmt(s.Delta_k)]
        for s in est.summaries
    ]
    lines += _table(
        rows, ["stratum", "n", "n1", "n0", "e", "omega", "tau", "V", "Lambda", "Delta"]
    )
    lines += [""]
    rows = [
        ["weighted (closed form)", fmt(est.tau_ols), ""],
        ["V0 (design-based)", fmt(est.v0), fmt(np.sqrt(est.v0))],
        ["V homoskedastic", fmt(est.v_homo), fmt(np.sqrt(est.v_homo))],
        ["V EHW", fmt(est.v_ehw), fmt(np.sqrt(est.v_ehw))],
        ["V EHW - V0", fmt(est.conservativeness_gap), ""],
    ]
    lines += _table(rows, ["quantity", "value", "std. err."])
    lines += ["", "regression cross-check:"]
    reg = cc.regression
    rows = [
        ["tau", fmt(reg.tau), _fmt_diff(cc.tau_diff)],
        ["V homoskedastic", fmt(reg.v_homo), _fmt_diff(cc.v_homo_rel_diff)],
        ["V EHW", fmt(reg.v_ehw), _fmt_diff(cc.v_ehw_rel_diff)],
    ]
    lines += _table(rows, ["quantity", "regression", "rel. diff"])
    lines += ["", f"cross-check: {verdicts['cross_check']}"]
    return RunResult(EXIT_OK, "\n".join(lines) + "\n")


_RUNNERS = {"fit": _run_fit, "fwl": _run_fwl, "strata": _run_strata}


def run(config: RunConfig, table: CsvTable) -> RunResult:
    """Execute one subcommand; never raises for package errors."""
    try:
        config.validate(table)
        return _RUNNERS[config.subcommand](config, table)
    except InputError as exc:
        return RunResult(EXIT_INPUT, "", f"error: {exc}\n")
    except NumericalError as exc:
        return RunResult(EXIT_NUMERIC, "", f"error: {type(exc).__name__}: {exc}\n")


# -- argument parsing ------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fwlse",
        description="OLS with robust covariances, full/partial regression checks "
        "and stratified-experiment variance formulas.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("csv", help="input CSV file, or '-' for stdin")
    common.add_argument("--y", required=True, help="response column")
    common.add_argument("--tol", type=float, default=fwl.DEFAULT_TOL)
    common.add_argument("--format", dest="output", choices=("table", "json"),
                        default="table")
    common.add_argument("--output-file", "-o", help="write output here, not stdout")
    common.add_argument("--intercept", action=argparse.BooleanOptionalAction,
                        default=None, help="add a ones column to x1 "
                        "(default: on for fit/fwl, off for strata)")

    reg = argparse.ArgumentParser(add_help=False)
    reg.add_argument("--x1", nargs="*", default=[], help="nuisance columns")
    reg.add_argument("--x2", nargs="+", required=True, help="focal columns")
    reg.add_argument("--vcov", action="append", choices=VCOV_CHOICES,
                     help="covariance estimator; repeat for several (default homo)")
    reg.add_argument("--cluster-col")
    reg.add_argument("--cluster-correction", default="none",
                     choices=[c.value for c in vcov.ClusterCorrection])
    reg.add_argument("--lag", type=int, help="HAC lag (Bartlett weights)")
    reg.add_argument("--df-adjust", action="store_true",
                     help="scale HAC by n/(n-p)")
    reg.add_argument("--stata-compat", action="store_true",
                     help="fwl: include an intercept in the partial fit")

    sub.add_parser("fit", parents=[common, reg], help="full OLS fit")
    sub.add_parser("fwl", parents=[common, reg],
                   help="compare full and partial regressions")
    sp = sub.add_parser("strata", parents=[common], help="stratified experiment")
    sp.add_argument("--z-col", required=True, help="0/1 treatment column")
    sp.add_argument("--stratum-col", required=True)
    return parser


def config_from_args(ns) -> RunConfig:
    kw = dict(
        subcommand=ns.subcommand,
        y=ns.y,
        intercept=ns.intercept,
        tol=ns.tol,
        output=ns.output,
    )
    if ns.subcommand == "strata":
        kw.update(z_col=ns.z_col, stratum_col=ns.stratum_col)
    else:
        kw.update(
            x1=list(ns.x1),
            x2=list(ns.x2),
            vcov=list(ns.vcov or ["homo"]),
            cluster_col=ns.cluster_col,
            cluster_correction=ns.cluster_correction,
            lag=ns.lag,
            df_adjust=ns.df_adjust,
            stata_compat=ns.stata_compat,
        )
    return RunConfig(**kw)


def main(argv=None):
    ns = build_parser().parse_args(argv)
    config = config_from_args(ns)
    try:
        if ns.csv == "-":
            raw = sys.stdin.buffer.read()
        else:
            with open(ns.csv, "rb") as fh:
                raw = fh.read()
        table = parse_csv(raw)
    except OSError as exc:
        print(f"error: cannot read {ns.csv}: {exc.strerror}", file=sys.stderr)
        return EXIT_INPUT
    except FwlseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    result = run(config, table)
    if result.stderr:
        sys.stderr.write(result.stderr)
    if result.stdout:
        if ns.output_file:
            with open(ns.output_file, "w", encoding="utf-8") as fh:
                fh.write(result.stdout)
        else:
            sys.stdout.write(result.stdout)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
