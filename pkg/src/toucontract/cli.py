"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 infeasible construction.
"""

from __future__ import annotations

import argparse
import logging
import sys

from toucontract.errors import ConfigError, DataError, InfeasibleError
from toucontract.experiment import WORKERS_ENV, load_config, run_complete_info, run_incomplete_info

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4

log = logging.getLogger("toucontract")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="toucontract",
        description="Design three-item ToU storage contracts and evaluate them against first-best benchmarks.",
    )
    p.add_argument("--mode", choices=("complete", "incomplete"), default="complete")
    p.add_argument("--config", help="JSON config file; unspecified keys fall back to built-in defaults")
    p.add_argument("--data", help="hourly CSV (timestamp,user_id,load_kwh,solar_kwh); synthetic data if omitted")
    p.add_argument("--out", required=True, help="output directory for report files")
    p.add_argument("--seed", type=int, help="grouping seed (overrides config)")
    p.add_argument("--workers", type=int, help=f"parallel sweep workers (default: ${WORKERS_ENV} or 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
        if args.mode == "complete":
            summary = run_complete_info(config, args.out, args.data, args.seed)
            print(
                f"optimal {summary['optimal_cost']:.6g}  realized {summary['realized_cost']:.6g}  "
                f"ratio {summary['realized_over_optimal']:.12f}  IC {'pass' if summary['ic_passed'] else 'FAIL'}"
            )
        else:
            rows = run_incomplete_info(config, args.out, args.data, args.seed, args.workers)
            for r in rows:
                print(
                    f"solar {r['solar_scale']:<4} theta_bar {r['theta_bar']:<6} "
                    f"kappa {r['kappa_mean']:.5f}±{r['kappa_std']:.5f}  "
                    f"kappa_no {r['kappa_no_mean']:.4f}±{r['kappa_no_std']:.4f}"
                )
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except InfeasibleError as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
