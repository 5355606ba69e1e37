"""Command-line entry point for parabolic-cf."""

import argparse
import logging
import math
import sys
import time
from typing import List, Optional, Tuple

import numpy as np

from src import __version__
from src.config import ConfigManager, RunConfig, configure_logging, parse_int_list
from src.errors import ParabolicCfError, UndeterminedCertificationError
from src.models.cdf_engine import SANDWICH_ALPHA, IteratedCdf, cdf_eval
from src.models.gw_conductance import (
    OffspringDistribution,
    haggstrom_check,
    sample_generation_sizes,
    solve_gw_cdf,
)
from src.models.ifs_core import fixed_point_m, sample_mu, support_type
from src.models.lp_spectra import LIMIT_ALPHA, lp_threshold
from src.models.lyapunov import (
    certify_alpha_c,
    dimension_bound,
    lyapunov_bracket,
    lyapunov_eps,
    lyapunov_mc,
)
from src.utils.formatters import (
    format_certificate,
    format_lp_thresholds,
    format_record_summary,
)
from src.utils.record_utils import ResultRecord, histogram, max_window_mass, save_record
from src.utils.rng import rng_stream

logger = logging.getLogger(__name__)

DEFAULT_CDF_DEPTHS = (1, 2, 4, 8)
DEFAULT_R_LIST = tuple(range(1, 9))
DEFAULT_CONFIG_PATH = "parabolic_cf.json"
ALPHAC_TOL = 1e-5
LP_TOL = 1e-10
GW_TOL = 1e-6
# Atomlessness proxy window.
WINDOW_WIDTH = 1e-3


class ExperimentRunner:
    """Runs one subcommand per method and writes its result record."""

    def __init__(self, config: RunConfig, manager: ConfigManager):
        self.config = config
        self.manager = manager
        self.pending_error: Optional[ParabolicCfError] = None

    def run(self) -> Optional[ResultRecord]:
        handler = getattr(self, "cmd_" + self.config.subcommand.replace("-", "_"))
        started = time.perf_counter()
        record = handler()
        if record is None:
            return None
        record.wall_time = time.perf_counter() - started
        logger.info("%s finished in %.2fs", self.config.subcommand, record.wall_time)
        self.emit(record)
        return record

    def emit(self, record: ResultRecord) -> None:
        """Write the record to --out, or print it; a summary table goes to stdout with --out."""
        text = save_record(record, self.config.out, self.config.format)
        if self.config.out is None:
            sys.stdout.write(text)
        else:
            self.report(format_record_summary(record))

    def report(self, text: str) -> None:
        """Print a human-readable summary; stderr when stdout carries the record."""
        print(text, file=sys.stdout if self.config.out else sys.stderr)

    def _record(self, columns: List[str]) -> ResultRecord:
        return ResultRecord(self.config.subcommand, self.config.parameters(), columns)

    def cmd_lyapunov(self) -> ResultRecord:
        """Certified brackets and Monte Carlo estimates over the alpha grid."""
        cfg = self.config
        columns = ["alpha", "depth", "lambda_lower", "lambda_upper", "mc_estimate", "mc_stderr", "dim_bound"]
        if cfg.eps is not None:
            columns.append("lambda_eps")
        record = self._record(columns)
        for index, alpha in enumerate(cfg.alphas):
            fixed_point_m(alpha)
            lower = upper = dim = None
            if alpha >= SANDWICH_ALPHA:
                bracket = lyapunov_bracket(alpha, cfg.depth, cfg.margin, cfg.threads)
                lower, upper = bracket.lower, bracket.upper
                if bracket.certified_lower > 0:
                    dim = dimension_bound(bracket.certified_lower)
            else:
                logger.warning("alpha=%r < 1/6: brackets are not certified, reporting Monte Carlo only", alpha)
            mean, stderr = lyapunov_mc(alpha, cfg.steps, cfg.trials, rng_stream(cfg.seed, index))
            row = [alpha, cfg.depth, lower, upper, mean, stderr, dim]
            if cfg.eps is not None:
                row.append(lyapunov_eps(alpha, cfg.eps, cfg.depth, cfg.threads))
            record.add_row(*row)
        return record

    def cmd_alphac(self) -> ResultRecord:
        """Certify an interval containing alpha_c."""
        cfg = self.config
        certificate = certify_alpha_c(
            cfg.alpha_lo,
            cfg.alpha_hi,
            max_depth=cfg.max_depth,
            margin=cfg.margin,
            tol=cfg.tol or ALPHAC_TOL,
            decimals=cfg.decimals,
            start_depth=cfg.start_depth,
            depth_step=cfg.depth_step,
            threads=cfg.threads,
        )
        record = self._record(["end", "alpha", "depth", "lambda_lower", "lambda_upper", "status"])
        record.add_row("lo", certificate.alpha_lo, certificate.bracket_lo.depth,
                       certificate.bracket_lo.lower, certificate.bracket_lo.upper, "below")
        record.add_row("hi", certificate.alpha_hi, certificate.bracket_hi.depth,
                       certificate.bracket_hi.lower, certificate.bracket_hi.upper, "above")
        record.notes["depth_used"] = certificate.depth_used
        record.notes["complete"] = certificate.is_complete
        if certificate.undetermined_span is not None:
            record.notes["undetermined_span"] = certificate.undetermined_span
        summary = {
            "alpha_lo": certificate.alpha_lo,
            "alpha_hi": certificate.alpha_hi,
            "depth_used": certificate.depth_used,
            "bracket_lo": (certificate.bracket_lo.lower, certificate.bracket_lo.upper),
            "bracket_hi": (certificate.bracket_hi.lower, certificate.bracket_hi.upper),
            "undetermined_span": certificate.undetermined_span,
        }
        self.report(format_certificate(summary))
        if not certificate.is_complete:
            # Partial certificates are still written before the exit status reports them.
            self.pending_error = UndeterminedCertificationError(
                f"undetermined alphas in {certificate.undetermined_span} at depth {cfg.max_depth}",
                certificate=summary,
            )
        return record

    def cmd_lp(self) -> ResultRecord:
        """L^p exclusion thresholds for each tensor order."""
        cfg = self.config
        record = self._record(["r", "p", "alpha_p", "gamma_at_threshold", "limit_gap"])
        rows = []
        for r in cfg.r_list or DEFAULT_R_LIST:
            result = lp_threshold(r, tol=cfg.tol or LP_TOL, symmetric=not cfg.full_tensor)
            record.add_row(r, str(result.p), result.alpha_p, result.gamma_at_threshold, result.limit_gap)
            rows.append({
                "r": r, "p": result.p, "alpha_p": result.alpha_p,
                "gamma_at_threshold": result.gamma_at_threshold, "limit_gap": result.limit_gap,
            })
        record.notes["limit_alpha"] = LIMIT_ALPHA
        self.report(format_lp_thresholds(rows))
        return record

    def cmd_sample(self) -> ResultRecord:
        """Histogram of draws from mu_alpha with the atomlessness proxy."""
        cfg = self.config
        alpha = cfg.alphas[0]
        m_alpha = fixed_point_m(alpha)
        draws = sample_mu(alpha, cfg.depth, rng_stream(cfg.seed, 0), size=cfg.samples)
        bins = histogram(draws, cfg.bins, 0.0, m_alpha)
        record = self._record(["bin_lo", "bin_hi", "count", "mass"])
        for lo, hi, count, mass in zip(bins["bin_lo"], bins["bin_hi"], bins["count"], bins["mass"]):
            record.add_row(float(lo), float(hi), int(count), float(mass))
        kind, gap = support_type(alpha)
        record.notes["support"] = kind.value
        record.notes["gap"] = gap
        record.notes["max_window_mass"] = max_window_mass(draws, WINDOW_WIDTH)
        record.notes["window_width"] = WINDOW_WIDTH
        return record

    def cmd_cdf(self) -> ResultRecord:
        """Tables of F_n on a uniform grid of [0, M_alpha] for each depth."""
        cfg = self.config
        alpha = cfg.alphas[0]
        points = np.linspace(0.0, fixed_point_m(alpha), cfg.bins + 1)
        record = self._record(["depth", "s", "F"])
        for depth in cfg.depths or DEFAULT_CDF_DEPTHS:
            values = cdf_eval(IteratedCdf.create(alpha, depth), points, cfg.threads)
            for s, value in zip(points, values):
                record.add_row(depth, float(s), float(value))
        return record

    def cmd_gw(self) -> ResultRecord:
        """Solve the conductance c.d.f. and run the continued-fraction check."""
        cfg = self.config
        if cfg.offspring:
            off = OffspringDistribution.from_file(cfg.offspring)
        else:
            off = OffspringDistribution.binary()
        f_gamma, residual = solve_gw_cdf(off, cfg.grid, cfg.tol or GW_TOL, cfg.max_iter)
        step = max(1, cfg.grid // cfg.bins)
        record = self._record(["s", "F"])
        for s, value in zip(f_gamma.grid[::step], f_gamma.values[::step]):
            record.add_row(float(s), float(value))
        record.notes["offspring"] = list(off.probs)
        record.notes["residual"] = residual
        record.notes["median"] = f_gamma.median()
        if off.probs == (0.5, 0.5):
            record.notes["haggstrom_ks"] = haggstrom_check(
                f_gamma, cfg.depth, cfg.samples, rng_stream(cfg.seed, 0)
            )
        resistances = np.array([
            sample_generation_sizes(off, cfg.depth, rng_stream(cfg.seed, 1, trial)).resistance
            for trial in range(cfg.trials)
        ])
        record.notes["shorted_resistance_mean"] = float(np.mean(resistances))
        record.notes["shorted_resistance_stderr"] = (
            float(np.std(resistances, ddof=1) / math.sqrt(cfg.trials)) if cfg.trials > 1 else math.nan
        )
        return record

    def cmd_init_config(self) -> Optional[ResultRecord]:
        """Write the merged settings to a JSON file for later --config use."""
        path = self.config.out or DEFAULT_CONFIG_PATH
        settings = {k: v for k, v in self.manager.all_settings.items() if k != "out"}
        self.manager.save_config(path, settings)
        print(f"Wrote configuration to {path}")
        return None


def _common_arguments() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="JSON file of default settings")
    parent.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    parent.add_argument("--alpha", type=float, help="shift parameter alpha")
    parent.add_argument("--alpha-range", dest="alpha_range", help="alpha grid lo:hi:step")
    parent.add_argument("--depth", type=int, help="word depth n (or truncation depth)")
    parent.add_argument("--max-depth", dest="max_depth", type=int, help="maximal certification depth")
    parent.add_argument("--start-depth", dest="start_depth", type=int, help="first certification depth")
    parent.add_argument("--depth-step", dest="depth_step", type=int, help="certification depth increment")
    parent.add_argument("--margin", type=float, help="rounding margin added to certified brackets")
    parent.add_argument("--decimals", type=int, help="decimal places of the certified alpha_c ends")
    parent.add_argument("--trials", type=int, help="Monte Carlo trials")
    parent.add_argument("--steps", type=int, help="random factors per Monte Carlo trial")
    parent.add_argument("--grid", type=int, help="grid cells of the conductance c.d.f.")
    parent.add_argument("--tol", type=float, help="solver tolerance")
    parent.add_argument("--max-iter", dest="max_iter", type=int, help="maximal solver iterations")
    parent.add_argument("--samples", type=int, help="number of random draws")
    parent.add_argument("--bins", type=int, help="histogram bins or table points")
    parent.add_argument("--seed", type=int, help="64-bit random seed")
    parent.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    parent.add_argument("--out", help="output file (default: stdout)")
    parent.add_argument("--format", choices=["csv", "json"], help="output format")
    return parent


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subparser per subcommand."""
    parent = _common_arguments()
    parser = argparse.ArgumentParser(
        prog="parabolic-cf",
        description="Certified numerics for the random continued fractions generated by T_0 and T_alpha.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    sub.required = True

    lyap = sub.add_parser("lyapunov", parents=[parent], help="Lyapunov brackets and Monte Carlo estimates")
    lyap.add_argument("--eps", type=float, help="also report the eps-norm approximation")
    alphac = sub.add_parser("alphac", parents=[parent], help="certify an interval containing alpha_c")
    alphac.add_argument("--alpha-lo", dest="alpha_lo", type=float, help="left end of the search interval")
    alphac.add_argument("--alpha-hi", dest="alpha_hi", type=float, help="right end of the search interval")
    lp = sub.add_parser("lp", parents=[parent], help="L^p density exclusion thresholds")
    lp.add_argument("--r-list", dest="r_list", help="tensor orders r, e.g. 1,2,4 or 1..16")
    lp.add_argument("--full-tensor", dest="full_tensor", action="store_true",
                    help="use the full 2^r tensor space instead of the symmetric subspace")
    sub.add_parser("sample", parents=[parent], help="histogram of draws from mu_alpha")
    cdf = sub.add_parser("cdf", parents=[parent], help="tables of the iterated c.d.f.s F_n")
    cdf.add_argument("--depths", help="depths n, e.g. 1,2,4,8")
    gw = sub.add_parser("gw", parents=[parent], help="Galton-Watson conductance c.d.f.")
    gw.add_argument("--offspring", help="JSON array of [k, p_k] pairs (default: binary)")
    sub.add_parser("init-config", parents=[parent], help="write the current settings as a config file")
    return parser


def load_run_config(args: argparse.Namespace) -> Tuple[RunConfig, ConfigManager]:
    """Merge flags over the config file over the defaults and validate the result."""
    manager = ConfigManager(args.config)
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("config", "verbose", "subcommand", "depths", "r_list", "full_tensor")
    }
    manager.update(overrides)
    settings = manager.all_settings
    if getattr(args, "depths", None):
        settings["depths"] = tuple(parse_int_list(args.depths))
    if getattr(args, "r_list", None):
        settings["r_list"] = tuple(parse_int_list(args.r_list))
    settings["full_tensor"] = bool(getattr(args, "full_tensor", False))
    return RunConfig.from_settings(args.subcommand, settings), manager


def run(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and return its exit status.

    Raises:
        SystemExit: from argparse on malformed command lines (status 2)
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    config, manager = load_run_config(args)
    runner = ExperimentRunner(config, manager)
    runner.run()
    if runner.pending_error is not None:
        raise runner.pending_error
    return 0


def main():
    """Entry point for the application."""
    try:
        status = run()
    except KeyboardInterrupt:
        print("\nExiting...", file=sys.stderr)
        sys.exit(0)
    except ParabolicCfError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    except Exception as e:
        print(f"Unexpected error: {str(e)}", file=sys.stderr)
        sys.exit(1)
    sys.exit(status)


if __name__ == "__main__":
    main()
