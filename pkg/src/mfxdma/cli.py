"""Command-line front end.

Subcommands: analyze (full pipeline), qcc, spectrum, surrogate-test
(single stages), synth (oracle series generators).  Exit codes: 0 on
success, 1 on validation/usage errors, 2 when an analysis stage fails
at runtime.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, pipeline, series, stats, synth
from .pipeline import AnalysisBundle, PipelineError, RunConfig
from .surrogate import SurrogateScheme

log = logging.getLogger(__name__)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; the contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


def _parse_schemes(text: str) -> tuple[SurrogateScheme, ...]:
    if text.strip().lower() == "all":
        return tuple(SurrogateScheme)
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            out.append(SurrogateScheme(int(token)) if token.isdigit()
                       else SurrogateScheme[token.upper()])
        except (KeyError, ValueError):
            raise _UsageError(f"unknown scheme {token!r}") from None
    if not out:
        raise _UsageError("empty scheme list")
    return tuple(dict.fromkeys(out))


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise _UsageError(f"expected a boolean, got {text!r}")


_CONFIG_COERCERS = {
    "input_x": str, "input_y": str, "out_dir": str,
    "date_column": str, "value_column": str,
    "master_seed": int, "scale_min": int, "scale_max": int, "n_scales": int,
    "n_surrogates": int, "qcc_m_max": int, "iaaft_max_iter": int,
    "theta": float, "q_min": float, "q_max": float, "q_step": float,
    "significance_level": float,
    "standardize": _parse_bool, "use_profile": _parse_bool,
    "schemes": _parse_schemes,
    "workers": lambda t: None if t.strip().lower() == "none" else int(t),
}


def _load_config_file(path: str) -> dict:
    """Accept JSON or key=value lines; keys mirror the run-config fields."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise _UsageError(f"config file not found: {path}") from None
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise _UsageError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise _UsageError(f"{path}: top-level JSON must be an object")
        items = {k: str(v) if not isinstance(v, (list, tuple)) else
                 ",".join(str(x) for x in v) for k, v in raw.items()}
    else:
        items = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise _UsageError(f"{path} line {lineno}: expected key=value")
            key, _, value = line.partition("=")
            items[key.strip()] = value.strip()
    out = {}
    for key, value in items.items():
        if key not in _CONFIG_COERCERS:
            raise _UsageError(f"{path}: unknown config key {key!r}")
        out[key] = _CONFIG_COERCERS[key](value)
    return out


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--x", metavar="CSV", help="first input series")
    p.add_argument("--y", metavar="CSV", help="second input series")
    p.add_argument("--date-column", default=None)
    p.add_argument("--value-column", default=None)
    p.add_argument("--standardize", action="store_const", const=True,
                   default=None, help="z-score the returns before analysis")


def _add_dma_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=float, default=None,
                   help="window position, 0=backward (default 0)")
    p.add_argument("--q-min", type=float, default=None)
    p.add_argument("--q-max", type=float, default=None)
    p.add_argument("--q-step", type=float, default=None)
    p.add_argument("--scale-min", type=int, default=None)
    p.add_argument("--scale-max", type=int, default=None)
    p.add_argument("--n-scales", type=int, default=None)
    p.add_argument("--no-profile", dest="use_profile", action="store_const",
                   const=False, default=None,
                   help="detrend the raw returns instead of their cumulative sum")


def build_parser() -> _Parser:
    parser = _Parser(prog="mfxdma", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    pa = sub.add_parser("analyze", help="full pipeline on one pair")
    _add_input_flags(pa)
    _add_dma_flags(pa)
    pa.add_argument("--out", default=None, metavar="DIR")
    pa.add_argument("--seed", type=int, default=None)
    pa.add_argument("--config", default=None, metavar="FILE",
                    help="key=value or JSON file overriding defaults")
    pa.add_argument("--surrogates", type=int, default=None,
                    help="ensemble size per scheme (default 1000; 0 skips)")
    pa.add_argument("--schemes", default=None,
                    help="comma list of 1,2,3 or names (default all)")
    pa.add_argument("--level", type=float, default=None)
    pa.add_argument("--qcc-m-max", type=int, default=None)
    pa.add_argument("--iaaft-max-iter", type=int, default=None)
    pa.add_argument("--workers", type=int, default=None)

    pq = sub.add_parser("qcc", help="cross-correlation significance only")
    _add_input_flags(pq)
    pq.add_argument("--out", default=None, metavar="DIR")
    pq.add_argument("--m-max", type=int, default=1000)
    pq.add_argument("--level", type=float, default=0.05)

    ps = sub.add_parser("spectrum", help="scaling analysis only")
    _add_input_flags(ps)
    _add_dma_flags(ps)
    ps.add_argument("--out", default=None, metavar="DIR")
    ps.add_argument("--level", type=float, default=0.05)

    pt = sub.add_parser("surrogate-test", help="surrogate ensembles only")
    _add_input_flags(pt)
    _add_dma_flags(pt)
    pt.add_argument("--out", default=None, metavar="DIR")
    pt.add_argument("--seed", type=int, default=None)
    pt.add_argument("--surrogates", type=int, default=None)
    pt.add_argument("--schemes", default=None)
    pt.add_argument("--level", type=float, default=None)
    pt.add_argument("--iaaft-max-iter", type=int, default=None)
    pt.add_argument("--workers", type=int, default=None)

    pg = sub.add_parser("synth", help="generate oracle series")
    gsub = pg.add_subparsers(dest="generator", metavar="GENERATOR")
    pf = gsub.add_parser("fgn", help="fractional Gaussian noise levels")
    pf.add_argument("--n", type=int, required=True)
    pf.add_argument("--hurst", type=float, required=True)
    pf.add_argument("--seed", type=int, default=None)
    pf.add_argument("--out", required=True)
    pf.add_argument("--scale", type=float, default=0.01,
                    help="return amplitude per step (default 0.01)")
    pf.add_argument("--start-date", default="2000-01-01")
    pc = gsub.add_parser("cascade", help="binomial measure levels")
    pc.add_argument("--levels", type=int, required=True)
    pc.add_argument("--p", type=float, required=True)
    pc.add_argument("--seed", type=int, default=None)
    pc.add_argument("--shuffle", action="store_true")
    pc.add_argument("--out", required=True)
    pc.add_argument("--scale", type=float, default=1.0)
    pc.add_argument("--start-date", default="2000-01-01")
    return parser


def _merged_config(args, need_seed: bool) -> RunConfig:
    overrides: dict = {}
    if getattr(args, "config", None):
        overrides.update(_load_config_file(args.config))
    flag_map = {
        "x": "input_x", "y": "input_y", "out": "out_dir", "seed": "master_seed",
        "surrogates": "n_surrogates", "level": "significance_level",
        "qcc_m_max": "qcc_m_max", "theta": "theta",
        "q_min": "q_min", "q_max": "q_max", "q_step": "q_step",
        "scale_min": "scale_min", "scale_max": "scale_max",
        "n_scales": "n_scales", "use_profile": "use_profile",
        "standardize": "standardize", "date_column": "date_column",
        "value_column": "value_column", "iaaft_max_iter": "iaaft_max_iter",
        "workers": "workers",
    }
    for flag, field in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    if getattr(args, "schemes", None) is not None:
        overrides["schemes"] = _parse_schemes(args.schemes)
    for required in ("input_x", "input_y"):
        if not overrides.get(required):
            raise _UsageError(f"missing input series ({required.replace('input_', '--')})")
    if "master_seed" not in overrides:
        if need_seed and overrides.get("n_surrogates", 1000) > 0:
            raise _UsageError("--seed is required when surrogates are generated")
        overrides["master_seed"] = 0
    valid = {f.name for f in dataclasses.fields(RunConfig)}
    overrides = {k: v for k, v in overrides.items() if k in valid}
    return RunConfig(**overrides)


def _cmd_analyze(args) -> int:
    config = _merged_config(args, need_seed=True)
    bundle = pipeline.run_analysis(config)
    print(f"wrote {config.out_dir} ({bundle.pair_label})")
    return 0 if bundle.complete else 2


def _partial_write(bundle: AnalysisBundle, out_dir: str) -> None:
    out = Path(out_dir)
    pipeline.write_bundle(bundle, out)
    pipeline.emit_plot_data(bundle, out / "figdata")


def _cmd_qcc(args) -> int:
    config = _merged_config(args, need_seed=False)
    pair = pipeline.load_pair(config)
    m_max = min(args.m_max, pair.n - 1)
    report = stats.qcc_test(pair.x.values, pair.y.values,
                            range(1, m_max + 1), args.level)
    n_rej = int(np.sum(report.reject))
    if args.out:
        bundle = AnalysisBundle(config=config,
                                pair_label=f"{pair.x.label}-{pair.y.label}",
                                qcc=report)
        _partial_write(bundle, args.out)
    print(f"qcc: {n_rej}/{report.m_values.size} lag depths significant "
          f"at level {args.level}")
    return 0


def _cmd_spectrum(args) -> int:
    from . import dma as dma_mod, multifractal as mf

    config = _merged_config(args, need_seed=False)
    pair = pipeline.load_pair(config)
    analysis = config.dma_config()
    analysis.validate_for_length(pair.n)
    surface, hurst = dma_mod.analyze_pair(pair.x.values, pair.y.values, analysis)
    spectrum = mf.joint_spectrum(hurst)
    tau_fit = mf.tau_nonlinearity_test(spectrum.q_grid, spectrum.tau,
                                       config.significance_level)
    if args.out:
        bundle = AnalysisBundle(config=config,
                                pair_label=f"{pair.x.label}-{pair.y.label}",
                                surface=surface, hurst=hurst,
                                spectrum=spectrum, tau_fit=tau_fit)
        _partial_write(bundle, args.out)
    print(f"delta_alpha={spectrum.delta_alpha:.4f} "
          f"a2={tau_fit.fit.coefficients[2]:.4f} "
          f"multifractal_flag={tau_fit.multifractal_flag}")
    return 0


def _cmd_surrogate_test(args) -> int:
    from . import dma as dma_mod, multifractal as mf, surrogate as sg

    config = _merged_config(args, need_seed=True)
    pair = pipeline.load_pair(config)
    analysis = config.dma_config()
    analysis.validate_for_length(pair.n)
    _, hurst = dma_mod.analyze_pair(pair.x.values, pair.y.values, analysis)
    spectrum = mf.joint_spectrum(hurst)
    tests = []
    for scheme in config.schemes:
        rep = sg.intrinsic_test(pair, scheme, config.n_surrogates,
                                config.master_seed, analysis,
                                level=config.significance_level,
                                max_iter=config.iaaft_max_iter,
                                workers=config.workers,
                                delta_alpha_original=spectrum.delta_alpha)
        tests.append(rep)
        print(f"scheme {scheme.value} ({scheme.name}): p={rep.p_value:.4f} "
              f"mean={rep.mean_surrogate_width:.4f} n={rep.n_surrogates}")
    if args.out:
        bundle = AnalysisBundle(config=config,
                                pair_label=f"{pair.x.label}-{pair.y.label}",
                                spectrum=spectrum, hurst=hurst,
                                surrogate_tests=tests)
        _partial_write(bundle, args.out)
    return 0


def _write_level_csv(path: str, increments: np.ndarray, scale: float,
                     start_date: str) -> None:
    """Integrate increments into a positive level series and save it.

    The first row is level 1.0; the standard ingestion (log returns)
    recovers scale*increments exactly.
    """
    levels = np.exp(scale * np.cumsum(increments))
    dates = np.datetime64(start_date, "D") + np.arange(levels.size + 1)
    p = Path(path)
    if p.parent != Path(""):
        p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8", newline="") as fh:
        fh.write("date,value\n")
        fh.write(f"{dates[0]},1.0\n")
        for d, v in zip(dates[1:], levels):
            fh.write(f"{d},{float(v)!r}\n")


def _cmd_synth(args) -> int:
    if args.generator == "fgn":
        if args.seed is None:
            raise _UsageError("--seed is required for fgn")
        values = synth.fgn(args.n, args.hurst, args.seed)
    elif args.generator == "cascade":
        if args.shuffle and args.seed is None:
            raise _UsageError("--seed is required with --shuffle")
        spec = synth.CascadeSpec(levels=args.levels, p=args.p,
                                 seed=args.seed or 0, shuffle=args.shuffle)
        values = synth.binomial_cascade(spec)
    else:
        raise _UsageError("choose a generator: fgn or cascade")
    _write_level_csv(args.out, values, args.scale, args.start_date)
    print(f"wrote {args.out} ({values.size + 1} rows)")
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "qcc": _cmd_qcc,
    "spectrum": _cmd_spectrum,
    "surrogate-test": _cmd_surrogate_test,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            stream=sys.stderr,
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except _UsageError:
        return 1
    except (series.SeriesError, PipelineError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:  # runtime failure inside a stage
        log.error("run failed: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
