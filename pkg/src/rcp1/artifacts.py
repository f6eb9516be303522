"""Plain-text artifacts: calibration files, prediction-set files, metrics CSV.

Calibration files are ``key=value`` lines. Floats are written with ``repr``
so that reading a file back reproduces the exact values. A vacuous
threshold is written as the token ``VACUOUS``.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

from rcp1 import __version__
from rcp1.certificates import SmoothingSpec, ThreatModel
from rcp1.conformal import CalibrationResult, PredictionSet
from rcp1.errors import ParseError
from rcp1.scores import ScoreKind

VACUOUS = "VACUOUS"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_kv(pairs: dict) -> str:
    lines = []
    for key, value in pairs.items():
        if "=" in key or "\n" in key:
            raise ValueError(f"bad key {key!r}")
        lines.append(f"{key}={_fmt(value)}")
    return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for i, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {line!r}", row=i)
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def calibration_to_dict(result: CalibrationResult, extra: dict | None = None) -> dict:
    d = {
        "tool_version": __version__,
        "threshold": VACUOUS if result.vacuous else result.threshold_q,
        "nominal_level": result.nominal_level,
        "adjusted_level": result.adjusted_level,
        "n_calibration": result.n_calibration,
        "vacuous": result.vacuous,
        "scheme": result.smoothing.scheme.value if result.smoothing else "none",
        "scale": result.smoothing.scale if result.smoothing else None,
        "norm": result.threat.norm.value if result.threat else "none",
        "radius": result.threat.radius if result.threat else None,
        "score_kind": result.score_kind.variant.value,
        "aps_seed": result.score_kind.aps_seed,
    }
    for key, value in (extra or {}).items():
        if key in d:
            raise ValueError(f"extra key {key!r} clashes with a calibration field")
        d[key] = value
    return d


_CALIB_KEYS = {"tool_version", "threshold", "nominal_level", "adjusted_level",
               "n_calibration", "vacuous", "scheme", "scale", "norm", "radius",
               "score_kind", "aps_seed"}


def calibration_from_dict(d: dict[str, str]) -> tuple[CalibrationResult, dict[str, str]]:
    try:
        vacuous = {"true": True, "false": False}[d["vacuous"]]
        threshold = -math.inf if d["threshold"] == VACUOUS else float(d["threshold"])
        if (d["threshold"] == VACUOUS) != vacuous:
            raise ParseError("threshold and vacuous flag disagree")
        smoothing = None if d["scheme"] == "none" else SmoothingSpec(d["scheme"], float(d["scale"]))
        threat = None if d["norm"] == "none" else ThreatModel(d["norm"], float(d["radius"]))
        kind = ScoreKind(d["score_kind"], int(d["aps_seed"]) if d.get("aps_seed") else None)
        result = CalibrationResult(
            threshold_q=threshold,
            nominal_level=float(d["nominal_level"]),
            adjusted_level=float(d["adjusted_level"]),
            n_calibration=int(d["n_calibration"]),
            smoothing=smoothing, threat=threat, vacuous=vacuous, score_kind=kind)
    except KeyError as exc:
        raise ParseError(f"calibration file lacks key {exc.args[0]!r}") from None
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"calibration file: {exc}") from None
    extra = {k: v for k, v in d.items() if k not in _CALIB_KEYS}
    return result, extra


def write_calibration(result: CalibrationResult, path, extra: dict | None = None) -> None:
    text = "# rcp1 calibration\n" + format_kv(calibration_to_dict(result, extra))
    Path(path).write_text(text, encoding="utf-8")


def read_calibration(path) -> tuple[CalibrationResult, dict[str, str]]:
    return calibration_from_dict(parse_kv(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# prediction sets: '#key=value' provenance lines, then one line per example


def format_sets(sets: list[PredictionSet], provenance: dict) -> str:
    out = io.StringIO()
    for key, value in provenance.items():
        out.write(f"#{key}={_fmt(value)}\n")
    for s in sets:
        out.write(" ".join(str(y) for y in sorted(s.members)) + "\n")
    return out.getvalue()


def parse_sets(text: str) -> tuple[list[PredictionSet], dict[str, str]]:
    provenance, sets = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            if "=" in line:
                key, value = line[1:].split("=", 1)
                provenance[key] = value
            continue
        try:
            members = frozenset(int(tok) for tok in line.split())
        except ValueError:
            raise ParseError(f"bad set line {line!r}", row=len(sets) + 1) from None
        sets.append(PredictionSet(members, len(sets)))
    return sets, provenance


# ---------------------------------------------------------------------------
# metrics CSV


def append_metrics(path, row: dict) -> None:
    """Append one row; the header is written when the file is new and must
    match otherwise."""
    path = Path(path)
    header = list(row)
    if path.exists() and path.stat().st_size > 0:
        with open(path, newline="", encoding="utf-8") as fh:
            existing = next(csv.reader(fh), [])
        if existing != header:
            raise ParseError(f"{path} has columns {existing}, cannot append {header}")
        mode = "a"
    else:
        mode = "w"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if mode == "w":
            w.writerow(header)
        w.writerow([_fmt(v) for v in row.values()])


def read_metrics(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
