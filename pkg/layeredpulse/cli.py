"""
Command-line entry point running each study as a subcommand.

Exit status is 0 when every check passes, 1 when a check fails (with a
`failures.json` report next to the artifacts) and 2 on a config error.
"""
import argparse, hashlib, json, logging, os, platform, sys
from importlib import metadata

import pandas as pd

from layeredpulse.config import load_config
from layeredpulse.exceptions import ConfigError, ToleranceFailure
from layeredpulse.studies import STUDIES, build_study

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
DEPENDENCIES = ('layeredpulse', 'numpy', 'scipy', 'pandas', 'cerberus')


def _versions():
    versions = {'python': platform.python_version()}
    for name in DEPENDENCIES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = 'unknown'
    return versions


def _write(artifact, folder):
    path = os.path.join(folder, artifact.name)
    if isinstance(artifact.data, pd.DataFrame):
        artifact.data.to_csv(path, index=False, float_format='%.12g')
    else:
        with open(path, 'w') as f:
            json.dump(artifact.data, f, indent=2, sort_keys=True, default=float)
            f.write('\n')
    with open(path, 'rb') as f:
        digest = hashlib.sha256(f.read()).hexdigest()
    logger.info("Wrote %s", path)
    return {'name': artifact.name, 'sha256': digest}


def run_study(name, config):
    """
    Run one study, write its artifacts and manifest under
    `output_dir/name`, and return its `CheckReport`.

    Raises
    ------
    ToleranceFailure
        If any check of the study fails; the artifacts are written first.
    """
    study = build_study(name)
    results = study.analyze(config=config)
    report = study.report(results)
    folder = os.path.join(config.output_dir, name)
    os.makedirs(folder, exist_ok=True)
    written = [_write(a, folder) for a in study.artifacts(results)]
    manifest = {
        'study': name,
        'config': config.to_dict(),
        'config_hash': config.config_hash(),
        'master_seed': config.master_seed,
        'versions': _versions(),
        'artifacts': written,
        'report': report.to_dict(),
    }
    with open(os.path.join(folder, 'manifest.json'), 'w') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write('\n')
    if not report.passed:
        with open(os.path.join(folder, 'failures.json'), 'w') as f:
            json.dump({
                'study': name,
                'failures': [c for c in report.to_dict()['checks'] if not c['passed']],
            }, f, indent=2, sort_keys=True)
            f.write('\n')
        raise ToleranceFailure(report)
    return report


def build_parser():
    parser = argparse.ArgumentParser(
        prog='layeredpulse',
        description="Pulse propagation through randomly layered media with "
                    "long-range correlations.")
    parser.add_argument('-c', '--config', default=None,
                        help="INI or JSON run configuration")
    parser.add_argument('--scenario', default=None,
                        help="Built-in scenario preset applied before the config")
    parser.add_argument('--set', dest='overrides', action='append', default=[],
                        metavar='SECTION.KEY=VALUE', help="Override one config value")
    parser.add_argument('--seed', type=int, default=None, help="Master seed")
    parser.add_argument('--threads', type=int, default=None, help="Worker threads")
    parser.add_argument('--tol-scale', type=float, default=None,
                        help="Factor applied to every tolerance")
    parser.add_argument('--output-dir', default=None, help="Artifact directory")
    parser.add_argument('-v', '--verbose', action='count', default=0)
    parser.add_argument('-q', '--quiet', action='count', default=0)

    sub = parser.add_subparsers(dest='command', required=True)
    for name in STUDIES:
        p = sub.add_parser(name, help=f"Run the {name} study")
        if name == 'mc':
            p.add_argument('--eps', type=float, default=None)
            p.add_argument('--n', type=int, default=None, help="Realizations")
        elif name == 'sde':
            p.add_argument('--n-paths', type=int, default=None)
            p.add_argument('--scheme', choices=['heun', 'midpoint'], default=None)
        elif name == 'travel-time':
            p.add_argument('--n', type=int, default=None, help="Realizations per eps")
    sub.add_parser('all', help="Run every study")
    sub.add_parser('validate', help="Validate the configuration and exit")
    return parser


def _overrides(args):
    overrides = list(args.overrides)
    flags = [
        ('master_seed', args.seed), ('threads', args.threads),
        ('tol_scale', args.tol_scale),
        ('numerics.eps', getattr(args, 'eps', None)),
        ('numerics.n_paths', getattr(args, 'n_paths', None)),
        ('numerics.sde_scheme', getattr(args, 'scheme', None)),
    ]
    n = getattr(args, 'n', None)
    if n is not None:
        flags.append(('numerics.n_real' if args.command == 'mc' else 'numerics.n_travel', n))
    for key, value in flags:
        if value is not None:
            overrides.append(f'{key}={json.dumps(value)}')
    return overrides


def _configure_logging(verbose, quiet):
    level = logging.WARNING - 10 * verbose + 10 * quiet
    logging.basicConfig(
        level=max(logging.DEBUG, min(level, logging.CRITICAL)),
        format='%(asctime)s %(name)s %(levelname)s: %(message)s',
    )
    logging.captureWarnings(True)


def _validate(args):
    """
    Report every violation of the merged config document.
    """
    try:
        config = load_config(args.config, _overrides(args), scenario=args.scenario,
                             output_dir=args.output_dir)
    except ConfigError as e:
        print(json.dumps({'valid': False, 'errors': e.errors or str(e)},
                         indent=2, sort_keys=True, default=str))
        return EXIT_CONFIG
    print(json.dumps({'valid': True, 'config_hash': config.config_hash()}, indent=2))
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    if args.command == 'validate':
        return _validate(args)
    try:
        config = load_config(args.config, _overrides(args), scenario=args.scenario,
                             output_dir=args.output_dir)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_CONFIG

    names = list(STUDIES) if args.command == 'all' else [args.command]
    status = EXIT_OK
    for name in names:
        try:
            report = run_study(name, config)
            logger.info("Study %s passed %d checks", name, len(report.checks))
        except ToleranceFailure as e:
            logger.error("%s", e)
            status = EXIT_FAILED
    return status


if __name__ == '__main__':
    sys.exit(main())
