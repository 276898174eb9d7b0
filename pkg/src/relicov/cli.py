"""Command-line front end.

Subcommands: kr20, kr21, anova, efa, covmle, mcmc, bench, cochran.
Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 numerical failure (including non-convergence under --strict).
The default seed can be set through the RELICOV_SEED environment
variable and overridden per run with --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from relicov import __version__
from relicov.anova import oneway_f_test, oneway_quadratic_forms, pairwise_t_test
from relicov.bench import (
    METHOD_ORDER,
    ScenarioConfig,
    build_basis,
    default_sweep,
    generate_scenario,
    ar1_demo_scenario,
    run_sweep,
    save_manifest,
)
from relicov.anova import CochranDecomposition, cochran_empirical_check
from relicov.core import rng_stream, scatter_matrix
from relicov.covstruct import estimate_sigma, reliability_from_components
from relicov.dataio import ingest_csv, load_scenario, save_scenario
from relicov.efa import correlation_matrix, efa_reliability, extract_factors, varimax
from relicov.exceptions import DataValidationError, NumericalError
from relicov.mcmc import LatentThetaModel, chain_summary, metropolis
from relicov.reliability import kr20, kr21
from relicov.report import (
    emit_bench_plot,
    emit_report,
    emit_trace_plot,
    render_text,
    table_to_csv,
    table_to_json,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    env = os.environ.get("RELICOV_SEED")
    try:
        return int(env) if env else 0
    except ValueError:
        raise DataValidationError(f"RELICOV_SEED must be an integer, got {env!r}")


def _common_flags(parser):
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (default: $RELICOV_SEED or 0)")
    parser.add_argument("--out", default=None, help="write the main output to this path instead of stdout")
    parser.add_argument(
        "--format", choices=("text", "json", "csv"), default="json", help="output format"
    )


def _emit(args, payload: dict, text: str | None = None) -> None:
    if args.format == "text" and text is not None:
        rendered = text
    else:
        rendered = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(rendered)
    else:
        sys.stdout.write(rendered)


def _report_dict(report) -> dict:
    return {
        "coefficient": report.coefficient,
        "method": report.method,
        "diagnostics": report.diagnostics,
    }


def _parse_basis_spec(text: str) -> dict:
    kind, _, arg = text.partition(":")
    if kind == "ar1":
        return {"kind": "ar1", "rho": float(arg)}
    if kind == "identity":
        return {"kind": "identity"}
    if kind == "ones":
        return {"kind": "ones"}
    if kind == "signed_ones":
        return {"kind": "signed_ones", "reversed": int(arg)}
    if kind == "file":
        return {"kind": "file", "path": arg}
    raise DataValidationError(
        f"unknown basis spec {text!r} (expected ar1:RHO, identity, ones, "
        "signed_ones:REVERSED, or file:PATH)"
    )


def _cmd_kr(args, which) -> int:
    matrix = ingest_csv(args.data, "items")
    fn = kr20 if which == "kr20" else kr21
    report = fn(matrix, sample_variance=args.sample_variance)
    _emit(args, _report_dict(report), f"{report.method} = {report.coefficient:.6f}\n")
    return EXIT_OK


def _cmd_anova(args) -> int:
    groups = ingest_csv(args.data, "groups")
    table = oneway_f_test(groups)
    payload = {
        "total_ss": table.total_ss,
        "between_ss": table.between_ss,
        "within_ss": table.within_ss,
        "df_between": table.df_between,
        "df_within": table.df_within,
        "bms": table.bms,
        "wms": table.wms,
        "f_stat": table.f_stat,
        "p_value": table.p_value,
    }
    if args.pair:
        i, j = args.pair
        payload["t_test"] = pairwise_t_test(groups, i, j)
    lines = ["Source   SS          df    MS"]
    lines.append(
        f"Between  {table.between_ss:<10.4f}  {table.df_between:<4d}  {table.bms:.4f}"
    )
    lines.append(
        f"Within   {table.within_ss:<10.4f}  {table.df_within:<4d}  {table.wms:.4f}"
    )
    lines.append(f"Total    {table.total_ss:<10.4f}")
    lines.append(f"F = {table.f_stat:.4f}, p = {table.p_value:.6f}")
    if args.pair:
        t = payload["t_test"]
        lines.append(f"t({t['df']}) = {t['t_stat']:.4f}, p = {t['p_value']:.6f}")
    _emit(args, payload, "\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_efa(args) -> int:
    samples = ingest_csv(args.data, "samples")
    corr = correlation_matrix(samples)
    rule = "kaiser" if args.factors == "kaiser" else int(args.factors)
    model = extract_factors(corr, rule)
    if args.rotate == "varimax":
        model = varimax(model)
    payload = {
        "eigenvalues": [float(v) for v in model.eigenvalues],
        "retained": model.m,
        "loadings": [[float(v) for v in row] for row in model.loadings],
        "communalities": [float(v) for v in model.communalities],
        "factor_contributions": [float(v) for v in model.factor_contributions],
        "diagnostics": model.diagnostics,
    }
    lines = [
        "eigenvalues: " + " ".join(f"{v:.4f}" for v in model.eigenvalues),
        f"retained factors: {model.m}",
        "rotated loadings:",
    ]
    for row in model.loadings:
        lines.append("  " + " ".join(f"{v:8.4f}" for v in row))
    if model.m == 1:
        report = efa_reliability(model)
        payload["omega"] = report.coefficient
        lines.append(f"omega = {report.coefficient:.6f}")
    _emit(args, payload, "\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_covmle(args) -> int:
    if args.config:
        cfg = load_scenario(args.config)
        if args.n:
            cfg = ScenarioConfig.from_dict({**cfg.to_dict(), "n": args.n})
        data = generate_scenario(cfg, args.rep)
        scatter, bases, error_index = data.scatter, data.bases, data.error_index
        truth = {"sigma_true": [float(v) for v in cfg.sigma_true], "r_true": data.r_true}
    elif args.data:
        if not args.basis:
            raise DataValidationError("--data requires at least one --basis spec")
        samples = ingest_csv(args.data, "samples")
        scatter = scatter_matrix(samples)
        bases = tuple(build_basis(_parse_basis_spec(b), samples.dim) for b in args.basis)
        error_index = args.error_index if args.error_index is not None else len(bases) - 1
        truth = None
    else:
        raise DataValidationError("covmle needs --data with --basis specs, or --config")
    result = estimate_sigma(scatter, bases, max_iter=args.max_iter, tol=args.tol)
    if args.strict and not result.converged:
        raise NumericalError(
            f"did not converge in {result.iterations} iterations (residual {result.residual:.3e})"
        )
    report = reliability_from_components(result, error_index)
    payload = {
        "sigma_hat": [float(v) for v in result.sigma_hat],
        "iterations": result.iterations,
        "residual": result.residual,
        "converged": result.converged,
        "projected": list(result.projected),
        "step_norms": list(result.history),
        "reliability": report.coefficient,
        "error_index": error_index,
    }
    if truth:
        payload["truth"] = truth
    text = (
        "sigma_hat: "
        + " ".join(f"{v:.6f}" for v in result.sigma_hat)
        + f"\niterations: {result.iterations} (converged: {result.converged})"
        + f"\nreliability = {report.coefficient:.6f}\n"
    )
    _emit(args, payload, text)
    return EXIT_OK


def _cmd_mcmc(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.data:
        samples = ingest_csv(args.data, "samples")
        if samples.dim != 1:
            raise DataValidationError("mcmc expects a single-column CSV")
        observations = samples.rows[:, 0]
    else:
        observations = rng_stream(seed, 1).standard_normal(args.synthetic)
    model = LatentThetaModel(observations=observations, phi_scale=args.phi_scale)
    chain = metropolis(
        model,
        iterations=args.iterations,
        proposal_sd=args.proposal_sd,
        seed=seed,
        init=args.init,
    )
    summary = chain_summary(chain, args.burn_in)
    payload = {
        "iterations": args.iterations,
        "k": model.k,
        "phi_scale": model.phi_scale,
        "proposal_sd": args.proposal_sd,
        "seed": seed,
        "mean": summary.mean,
        "variance": summary.variance,
        "acceptance_rate": summary.acceptance_rate,
        "ess": summary.ess,
        "n_used": summary.n_used,
    }
    if args.samples_out:
        with open(args.samples_out, "w", encoding="utf-8") as fh:
            fh.write("theta\n")
            fh.writelines(f"{v!r}\n" for v in chain.samples)
    if args.plot:
        emit_trace_plot(chain, args.plot)
    text = (
        f"k={model.k} iterations={args.iterations} acceptance={summary.acceptance_rate:.3f}\n"
        f"posterior mean={summary.mean:.6f} variance={summary.variance:.6f} ess={summary.ess}\n"
    )
    _emit(args, payload, text)
    return EXIT_OK


def _cmd_bench(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.config:
        configs = [load_scenario(args.config)]
    elif args.demo:
        configs = [ar1_demo_scenario(seed=seed)]
    else:
        configs = default_sweep(seed=seed)
    if args.replications:
        configs = [
            ScenarioConfig.from_dict({**c.to_dict(), "replications": args.replications})
            for c in configs
        ]
    if args.n:
        configs = [ScenarioConfig.from_dict({**c.to_dict(), "n": args.n}) for c in configs]
    if args.write_config:
        if len(configs) == 1:
            save_scenario(configs[0], args.write_config)
        else:
            with open(args.write_config, "w", encoding="utf-8") as fh:
                json.dump([c.to_dict() for c in configs], fh, indent=2, sort_keys=True)
                fh.write("\n")
        return EXIT_OK
    methods = tuple(args.methods.split(",")) if args.methods else METHOD_ORDER
    table, manifest = run_sweep(
        configs, methods=methods, workers=args.workers, strict=args.strict
    )
    if args.manifest:
        save_manifest(manifest, args.manifest)
    if args.plot:
        emit_bench_plot(table, args.plot)
    if args.format == "text":
        rendered = render_text(table)
    elif args.format == "csv":
        rendered = table_to_csv(table)
    else:
        rendered = table_to_json(table)
    if args.out:
        emit_report(table, args.format, args.out)
    else:
        sys.stdout.write(rendered)
    return EXIT_OK


def _cmd_cochran(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    kind, _, rest = args.design.partition(":")
    if kind == "oneway":
        try:
            k, n0 = (int(v) for v in rest.split(":"))
        except ValueError:
            raise DataValidationError("expected oneway:K:N0")
        decomposition = oneway_quadratic_forms([n0] * k)
    elif kind == "identity":
        try:
            n = int(rest)
        except ValueError:
            raise DataValidationError("expected identity:N")
        decomposition = CochranDecomposition(forms=(np.eye(n),), ranks=(n,), dim=n)
    else:
        raise DataValidationError(f"unknown design {args.design!r}")
    result = cochran_empirical_check(decomposition, args.draws, rng_stream(seed))
    off_diag = result.correlations[~np.eye(len(result.ks_stats), dtype=bool)]
    payload = {
        "ranks": list(decomposition.ranks),
        "complete": result.complete,
        "n_draws": result.n_draws,
        "ks_stats": list(result.ks_stats),
        "ks_pvalues": list(result.ks_pvalues),
        "max_abs_correlation": float(np.abs(off_diag).max()) if off_diag.size else 0.0,
    }
    text_lines = [f"ranks: {list(decomposition.ranks)} complete: {result.complete}"]
    for r, d_stat, p in zip(decomposition.ranks, result.ks_stats, result.ks_pvalues):
        text_lines.append(f"rank {r}: KS D = {d_stat:.5f}, p = {p:.4f}")
    text_lines.append(f"max |off-diagonal correlation| = {payload['max_abs_correlation']:.4f}")
    _emit(args, payload, "\n".join(text_lines) + "\n")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="relicov", description=__doc__)
    parser.add_argument("--version", action="version", version=f"relicov {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("kr20", "kr21"):
        p = sub.add_parser(name, help=f"{name.upper()} coefficient from a binary items CSV")
        _common_flags(p)
        p.add_argument("--data", required=True, help="items-layout CSV (header + 0/1 scores)")
        p.add_argument(
            "--sample-variance",
            action="store_true",
            help="use the n-1 divisor convention instead of the population default",
        )

    p = sub.add_parser("anova", help="one-way ANOVA with F test from a groups CSV")
    _common_flags(p)
    p.add_argument("--data", required=True, help="groups-layout CSV (label,value)")
    p.add_argument("--pair", type=int, nargs=2, metavar=("I", "J"), help="t test for two groups")

    p = sub.add_parser("efa", help="factor extraction, rotation, and omega")
    _common_flags(p)
    p.add_argument("--data", required=True, help="samples-layout CSV")
    p.add_argument("--factors", default="kaiser", help="'kaiser' or an explicit factor count")
    p.add_argument("--rotate", choices=("varimax", "none"), default="varimax")

    p = sub.add_parser("covmle", help="structured-covariance coefficient estimation")
    _common_flags(p)
    p.add_argument("--data", help="samples-layout CSV")
    p.add_argument(
        "--basis",
        action="append",
        default=[],
        help="basis spec (repeatable): ar1:RHO | identity | ones | signed_ones:Q | file:PATH",
    )
    p.add_argument("--config", help="scenario JSON: simulate one replication and fit it")
    p.add_argument("--rep", type=int, default=0, help="replication index with --config")
    p.add_argument("--n", type=int, default=None, help="override scenario sample count")
    p.add_argument("--error-index", type=int, default=None)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--strict", action="store_true", help="non-convergence becomes an error")

    p = sub.add_parser("mcmc", help="latent-parameter Metropolis sampling")
    _common_flags(p)
    p.add_argument("--data", help="single-column samples CSV of observations")
    p.add_argument("--synthetic", type=int, default=100, help="draw K synthetic observations")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--proposal-sd", type=float, default=0.5)
    p.add_argument("--phi-scale", type=float, default=0.1)
    p.add_argument("--init", type=float, default=None, help="fixed start (default: random)")
    p.add_argument("--burn-in", type=int, default=None, help="default: 20%% of the chain")
    p.add_argument("--samples-out", help="write the chain as CSV")
    p.add_argument("--plot", help="write the trace plot image (PNG)")

    p = sub.add_parser("bench", help="Monte-Carlo estimator benchmark")
    _common_flags(p)
    p.add_argument("--config", help="scenario JSON file")
    p.add_argument("--demo", action="store_true", help="run the built-in AR(1) recovery scenario instead")
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--methods", help="comma-separated subset of KR20,EFA,COVMLE")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--manifest", help="write the run manifest JSON here")
    p.add_argument("--plot", help="write a bar summary of the table (PNG)")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--write-config", help="write the selected config(s) as JSON and exit")

    p = sub.add_parser("cochran", help="empirical chi-square decomposition check")
    _common_flags(p)
    p.add_argument("--design", required=True, help="oneway:K:N0 or identity:N")
    p.add_argument("--draws", type=int, default=10_000)

    return parser


_COMMANDS = {
    "kr20": lambda a: _cmd_kr(a, "kr20"),
    "kr21": lambda a: _cmd_kr(a, "kr21"),
    "anova": _cmd_anova,
    "efa": _cmd_efa,
    "covmle": _cmd_covmle,
    "mcmc": _cmd_mcmc,
    "bench": _cmd_bench,
    "cochran": _cmd_cochran,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DataValidationError as exc:
        print(f"relicov: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"relicov: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
