import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from openbook.config import RunConfig, bundled_configs, load_config
from openbook.errors import ConfigError, OpenBookError
from openbook.geometry import build_manifold
from openbook.holomorphic import assemble_page_curve
from openbook.pipeline import run_pipeline, to_json
from openbook.plotting import plot_foliation, plot_profile
from openbook.profiles import build_profile
from openbook.viewer import render_summary

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
VERBS = {
    "verify": "Audit the profile and the stable Hamiltonian structure.",
    "solve": "Integrate the half-cylinders; residuals, asymptotics and energy.",
    "index": "Conley-Zehnder index table and Fredholm index of the page curves.",
    "run": "Full pipeline including the foliation sample.",
    "plot": "Write the profile and foliation SVG plots only.",
}


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Collect ``--set``, ``--grid`` and ``--tol`` into dotted-key overrides."""
    overrides: Dict[str, Any] = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}", fields=[item])
        overrides[key.strip()] = _parse_value(value)
    if args.grid is not None:
        overrides["grid.shs_resolution"] = args.grid
    tolerances = {}
    for item in args.tol or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects NAME=VALUE, got {item!r}", fields=[item])
        tolerances[key.strip()] = _parse_value(value)
    if tolerances:
        overrides["grid.tolerances"] = tolerances
    return overrides


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="openbook",
        description="Build and verify finite energy foliations of planar open books.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, help_text in VERBS.items():
        p = sub.add_parser(verb, help=help_text, description=help_text)
        p.add_argument(
            "--config",
            default="tight-s3-disk",
            help=f"Config file or bundled config name ({', '.join(bundled_configs())})",
        )
        p.add_argument("--output-dir", default=None, help="Run directory (default: <output.directory>/<name>)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override a config key, e.g. epsilon=0.02")
        p.add_argument("--grid", type=int, default=None, help="Override grid.shs_resolution")
        p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="Override an SHS tolerance")
        p.add_argument("--workers", type=int, default=None, help="Worker threads (default: $OPENBOOK_WORKERS or 1)")
        p.add_argument("--format", choices=["tree", "json"], default="tree", help="Output format")
        p.add_argument("--indent", type=int, default=2, help="JSON indent")
        p.add_argument(
            "--log-level",
            default=os.environ.get("OPENBOOK_LOG_LEVEL", "WARNING"),
            choices=["DEBUG", "INFO", "WARNING", "ERROR"],
            help="Logging level (default: $OPENBOOK_LOG_LEVEL or WARNING)",
        )
    return parser


def _plot(config: RunConfig, output_dir: Path) -> List[Path]:
    profile = build_profile(config.profile.params())
    manifold = build_manifold(config.open_book())
    n = config.foliation.n_pages
    integ = config.integrator
    leaves = [
        assemble_page_curve(
            manifold, profile, j / n, 0.0, s_max=integ.s_max, tol=integ.tol, rho_stop=integ.rho_stop
        )
        for j in range(n)
    ]
    output_dir.mkdir(parents=True, exist_ok=True)
    return [
        plot_profile(profile, output_dir / "profile.svg", eps=config.epsilon),
        plot_foliation(leaves, output_dir / "foliation.svg"),
    ]


def main(argv: Optional[List[str]] = None) -> int:
    """Command-line entry point.

    Loads a config, applies overrides, runs the requested verb and prints either
    an ASCII summary tree or the JSON report.

    Args:
        argv (Optional[List[str]]): Argument vector, e.g. ``["verify", "--config", "tight-s3-disk"]``.
            If ``None``, sys.argv is used.

    Returns:
        int: ``0`` if the report passes, ``1`` if a condition fails or the construction
        is impossible, ``2`` for an invalid config.

    Examples:
    - An invalid override is reported with exit code 2
        ```python

        >>> import io, contextlib
        >>> err = io.StringIO()
        >>> with contextlib.redirect_stderr(err):
        ...     rc = main(['verify', '--set', 'profile.delta_prime=0.01'])
        >>> rc, 'delta_prime > delta' in err.getvalue()
        (2, True)

        ```

    See Also:
        run_pipeline: Computes the report printed by this function.
        render_summary: Renders the ASCII tree.
    """
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")

    try:
        config = load_config(args.config)
        overrides = _overrides(args)
        if overrides:
            config = config.with_overrides(overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    output_dir = Path(args.output_dir) if args.output_dir else Path(config.output.directory) / config.name
    try:
        if args.verb == "plot":
            for path in _plot(config, output_dir):
                print(path)
            return EXIT_OK
        report = run_pipeline(config, output_dir, stage=args.verb, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OpenBookError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED

    if args.format == "json":
        print(to_json(report.to_dict(include_timings=True), indent=args.indent), end="")
    else:
        print(render_summary(report.to_dict()))
    return EXIT_OK if report.passed else EXIT_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
