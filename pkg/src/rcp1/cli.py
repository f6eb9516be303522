"""Command line entry point: ``rcp1 <command> ...``.

Exit codes: 0 ok, 2 usage or domain error, 3 missing artifact,
4 internal invariant breach.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from rcp1 import __version__, artifacts, certificates, conformal, risk, simulate
from rcp1.certificates import Norm, RiskBounds, SmoothingSpec, ThreatModel
from rcp1.errors import DomainError, UnsupportedCertificate
from rcp1.scores import ScoreKind, conformity_scores, load_score_table

DEFAULT_SEED = 0

EXIT_USAGE, EXIT_MISSING, EXIT_INVARIANT = 2, 3, 4


class MissingArtifact(Exception):
    pass


class InvariantBreach(Exception):
    pass


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("RCP1_THREADS", "1")))
    except ValueError:
        return 1


def _add_smoothing_args(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--scheme", choices=[s.value for s in certificates.Scheme],
                   required=required)
    p.add_argument("--sigma", "--scale", "--half-width", dest="param", type=float,
                   help="Gaussian sigma, Laplace scale or uniform half-width")
    p.add_argument("--sigma-matched", action="store_true",
                   help="uniform only: treat --sigma as a standard deviation")
    p.add_argument("--norm", choices=[n.value for n in Norm], default="l2")
    p.add_argument("--r", "--radius", dest="radius", type=float, default=0.0)


def _smoothing(args) -> SmoothingSpec | None:
    if args.scheme is None:
        return None
    if args.param is None:
        raise DomainError("--sigma/--scale/--half-width is required with --scheme")
    if args.sigma_matched:
        if args.scheme != "uniform":
            raise DomainError("--sigma-matched applies to uniform smoothing only")
        return SmoothingSpec.uniform_sigma_matched(args.param)
    return SmoothingSpec(args.scheme, args.param)


def _threat(args) -> ThreatModel:
    return ThreatModel(args.norm, args.radius)


# ---------------------------------------------------------------------------


def cmd_certify(args) -> int:
    if not (0.0 <= args.beta <= 1.0):
        raise DomainError("beta must be in [0,1]")
    smoothing, threat = _smoothing(args), _threat(args)
    cert = certificates.certify(args.beta, smoothing, threat)
    print(f"lower={cert.lower:.12g}")
    print(f"upper={cert.upper:.12g}")
    print(f"vacuous={'true' if cert.vacuous else 'false'}")
    return 0


def _score_kind(args) -> ScoreKind:
    aps_seed = args.aps_seed if args.aps_seed is not None else args.seed
    return ScoreKind(args.score_kind, aps_seed if args.score_kind == "aps" else None)


def cmd_calibrate(args) -> int:
    if not (0.0 < args.alpha < 1.0):
        raise DomainError("alpha must be in (0,1)")
    smoothing = _smoothing(args)
    table = load_score_table(args.scores)
    if table.labels is None:
        raise DomainError("calibration scores need a label column")
    kind = _score_kind(args)
    scored = conformity_scores(table, kind)
    if smoothing is None:
        if args.radius != 0.0:
            raise DomainError("a positive radius needs --scheme")
        result = conformal.calibrate_vanilla(scored, args.alpha, kind)
    else:
        result = conformal.calibrate_rcp1(scored, args.alpha, smoothing, _threat(args), kind)
    if result.adjusted_level < result.nominal_level - 1e-15:
        raise InvariantBreach("adjusted level fell below the nominal level")
    artifacts.write_calibration(result, args.out, {
        "alpha": args.alpha, "seed": args.seed, "source": Path(args.scores).name})
    return 0


def cmd_predict(args) -> int:
    if not Path(args.calibration).exists():
        raise MissingArtifact(f"calibration artifact {args.calibration} not found")
    calib, extra = artifacts.read_calibration(args.calibration)
    table = load_score_table(args.scores)
    scored = conformity_scores(table, calib.score_kind)
    sets = [conformal.predict_set(row, calib, i, table.n_labels)
            for i, row in enumerate(scored.values)]
    provenance = {
        "tool_version": __version__,
        "alpha": extra.get("alpha", calib.alpha),
        "adjusted_level": calib.adjusted_level,
        "threshold": artifacts.VACUOUS if calib.vacuous else calib.threshold_q,
        "scheme": calib.smoothing.scheme.value if calib.smoothing else "none",
        "sigma": calib.smoothing.scale if calib.smoothing else 0.0,
        "norm": calib.threat.norm.value if calib.threat else "none",
        "r": calib.threat.radius if calib.threat else 0.0,
        "seed": extra.get("seed", DEFAULT_SEED),
        "calibration": Path(args.calibration).name,
        "scores": Path(args.scores).name,
    }
    Path(args.out).write_text(artifacts.format_sets(sets, provenance), encoding="utf-8")
    return 0


def _thresholds(text: str) -> list[int]:
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise DomainError(f"thresholds must be comma separated integers, got {text!r}")
    if any(k < 0 for k in out):
        raise DomainError("thresholds must be nonnegative")
    return out


def cmd_evaluate(args) -> int:
    if not Path(args.sets).exists():
        raise MissingArtifact(f"prediction sets {args.sets} not found")
    sets, prov = artifacts.parse_sets(Path(args.sets).read_text(encoding="utf-8"))
    table = load_score_table(args.scores)
    if table.labels is None:
        raise DomainError("evaluation scores need a label column")
    metrics = conformal.evaluate(sets, table.labels, _thresholds(args.thresholds))
    row = {"alpha": prov.get("alpha", ""), "sigma": prov.get("sigma", ""),
           "r": prov.get("r", ""), "seed": prov.get("seed", ""),
           "scheme": prov.get("scheme", ""), "adjusted_level": prov.get("adjusted_level", ""),
           "sets": Path(args.sets).name, "scores": Path(args.scores).name}
    row.update(metrics)
    artifacts.append_metrics(args.out, row)
    return 0


def _load_pixel_dir(score_dir, truth_dir):
    score_dir = Path(score_dir)
    names = sorted(p.name for p in score_dir.glob("*.csv"))
    if not names:
        raise MissingArtifact(f"no *.csv pixel grids in {score_dir}")
    scores = [risk.read_grid(score_dir / n) for n in names]
    truth = None
    if truth_dir is not None:
        truth = []
        for n in names:
            path = Path(truth_dir) / n
            if not path.exists():
                raise MissingArtifact(f"truth grid {path} not found")
            truth.append(risk.read_grid(path) > 0.5)
    return names, scores, truth


def cmd_risk(args) -> int:
    bounds = RiskBounds(0.0, 1.0)
    grid = risk.default_grid(args.grid_size)
    names, scores, truth = _load_pixel_dir(args.cal_scores, args.cal_truth)
    losses = np.vstack([risk.fnr_curve(s, t, grid) for s, t in zip(scores, truth)])
    vanilla = risk.crc_lambda(losses, bounds, args.alpha, grid)
    smoothing = SmoothingSpec.gaussian(args.sigma)
    robust = risk.robust_crc_lambda(losses, bounds, args.alpha, smoothing,
                                    ThreatModel(Norm.L2, args.radius), grid)
    row = {"alpha": args.alpha, "sigma": args.sigma, "r": args.radius, "seed": args.seed,
           "n_cal": len(names), "grid_size": args.grid_size,
           "lambda": vanilla.lam, "lambda_robust": robust.lam,
           "robust_target": robust.target,
           "unsatisfiable": vanilla.unsatisfiable, "unsatisfiable_robust": robust.unsatisfiable}
    if args.test_scores:
        t_names, t_scores, t_truth = _load_pixel_dir(args.test_scores, args.test_truth)
        for tag, cal in (("", vanilla), ("_robust", robust)):
            row[f"mask_prop{tag}"] = float(np.mean([risk.mask_proportion(s, cal.lam)
                                                    for s in t_scores]))
            if t_truth is not None:
                fnr = [risk.fnr_loss(risk.threshold_mask(s, cal.lam), t)
                       for s, t in zip(t_scores, t_truth)]
                row[f"risk{tag}"] = float(np.mean(fnr))
                row[f"risk{tag}_image_sd"] = float(np.std(fnr, ddof=1)) if len(fnr) > 1 else 0.0
        if args.mask_dir:
            out = Path(args.mask_dir)
            out.mkdir(parents=True, exist_ok=True)
            for n, s in zip(t_names, t_scores):
                risk.write_mask(risk.threshold_mask(s, robust.lam), out / n)
    artifacts.append_metrics(args.out, row)
    return 0


def cmd_simulate(args) -> int:
    mapping = {}
    if args.config:
        if not Path(args.config).exists():
            raise MissingArtifact(f"config file {args.config} not found")
        mapping.update(artifacts.parse_kv(Path(args.config).read_text(encoding="utf-8")))
    for key in ("d", "K", "n_cal", "n_test", "alpha", "sigma", "radius", "trials", "seed",
                "sigma_data", "offset_spread"):
        value = getattr(args, key)
        if value is not None:
            mapping[key] = value
    try:
        config = simulate.ExperimentConfig.from_mapping(mapping)
    except ValueError as exc:
        raise DomainError(str(exc)) from None
    metrics = simulate.run_coverage_experiment(config, workers=_threads())
    row = dict(config.as_dict())
    row.update(metrics)
    artifacts.append_metrics(args.out, row)
    print(f"worst_coverage_rcp1={metrics['rcp1_worst_coverage']:.6f} "
          f"(se {metrics['rcp1_worst_coverage_se']:.6f}) "
          f"theory={metrics['theory_bound_rcp1']:.6f}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcp1", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="print certified lower and upper bounds")
    p.add_argument("--beta", type=float, required=True)
    _add_smoothing_args(p, required=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("calibrate", help="calibrate a threshold from a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--score-kind", choices=["tps", "aps", "logit"], default="tps")
    p.add_argument("--aps-seed", type=int)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    _add_smoothing_args(p, required=False)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("predict", help="write one prediction set per test row")
    p.add_argument("--calibration", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="append coverage and size metrics")
    p.add_argument("--sets", required=True)
    p.add_argument("--scores", required=True, help="labelled score file for the test rows")
    p.add_argument("--thresholds", default="1,3,5,10")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("risk", help="conformal risk control on pixel-score grids")
    p.add_argument("--cal-scores", required=True)
    p.add_argument("--cal-truth", required=True)
    p.add_argument("--test-scores")
    p.add_argument("--test-truth")
    p.add_argument("--mask-dir")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--sigma", type=float, default=0.25)
    p.add_argument("--r", "--radius", dest="radius", type=float, default=0.0)
    p.add_argument("--grid-size", type=int, default=512)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("simulate", help="synthetic coverage experiment")
    p.add_argument("--config", help="key=value experiment config")
    for key, typ in (("d", int), ("K", int), ("n_cal", int), ("n_test", int),
                     ("alpha", float), ("sigma", float), ("trials", int), ("seed", int),
                     ("sigma_data", float), ("offset_spread", float)):
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=typ)
    p.add_argument("--r", "--radius", dest="radius", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingArtifact as exc:
        print(f"rcp1: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except FileNotFoundError as exc:
        print(f"rcp1: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except InvariantBreach as exc:
        print(f"rcp1: internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except UnsupportedCertificate as exc:
        print(f"rcp1: unsupported certificate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:  # DomainError, ParseError, LabelError, ShapeError
        print(f"rcp1: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
