"""Score tables, conformity scores and single-draw noise augmentation.

Scores follow the conformity convention: higher means the label agrees
better with the input, and prediction sets are ``{y : s(x, y) >= q}``.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from rcp1.certificates import SmoothingSpec
from rcp1.errors import LabelError, ParseError


class ScoreVariant(str, enum.Enum):
    TPS = "tps"      # softmax probability of the label
    APS = "aps"      # negated randomized cumulative mass
    LOGIT = "logit"  # raw model output


@dataclass(frozen=True)
class ScoreKind:
    variant: ScoreVariant = ScoreVariant.TPS
    aps_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", ScoreVariant(self.variant))


@dataclass(frozen=True)
class ScoreTable:
    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D matrix")
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            r, c = bad[0]
            raise ValueError(f"non-finite score at row {r}, column {c}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64)
            if labels.shape != (values.shape[0],):
                raise ValueError("need exactly one label per row")
            out = np.flatnonzero((labels < 0) | (labels >= values.shape[1]))
            if out.size:
                raise LabelError(f"label {labels[out[0]]} at row {out[0]} is outside "
                                 f"[0, {values.shape[1]})")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @property
    def n_examples(self) -> int:
        return self.values.shape[0]

    @property
    def n_labels(self) -> int:
        return self.values.shape[1]

    def true_scores(self) -> np.ndarray:
        if self.labels is None:
            raise LabelError("table has no labels")
        return self.values[np.arange(self.n_examples), self.labels]

    def with_values(self, values) -> "ScoreTable":
        return ScoreTable(values, self.labels)

    def subset(self, rows) -> "ScoreTable":
        rows = np.asarray(rows)
        labels = None if self.labels is None else self.labels[rows]
        return ScoreTable(self.values[rows], labels)


# ---------------------------------------------------------------------------
# file I/O


def load_score_table(path, format: str | None = None) -> ScoreTable:
    """Read ``score_0,...,score_{K-1}[,label]`` from a CSV or TSV file."""
    path = Path(path)
    if format is None:
        format = "tsv" if path.suffix.lower() == ".tsv" else "csv"
    delimiter = {"csv": ",", "tsv": "\t"}[format]
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_score_table(fh.read(), delimiter)


def parse_score_table(text: str, delimiter: str = ",") -> ScoreTable:
    rows = [r for r in csv.reader(io.StringIO(text), delimiter=delimiter)
            if r and not (len(r) == 1 and not r[0].strip())]
    if not rows:
        raise ParseError("missing header")
    header = [h.strip() for h in rows[0]]
    has_label = header[-1] == "label"
    score_cols = header[:-1] if has_label else header
    expected = [f"score_{k}" for k in range(len(score_cols))]
    if not score_cols or score_cols != expected:
        raise ParseError(f"header must be score_0..score_K-1[,label], got {header}")
    body = rows[1:]
    if not body:
        raise ParseError("no data rows")
    K = len(score_cols)
    values = np.empty((len(body), K))
    labels = np.empty(len(body), dtype=np.int64) if has_label else None
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", row=i)
        for j in range(K):
            try:
                v = float(row[j])
            except ValueError:
                raise ParseError(f"column {j}: cannot parse {row[j]!r}", row=i) from None
            if not math.isfinite(v):
                raise ValueError(f"row {i}, column {j}: non-finite score {row[j]!r}")
            values[i - 1, j] = v
        if has_label:
            try:
                labels[i - 1] = int(row[K])
            except ValueError:
                raise ParseError(f"label: cannot parse {row[K]!r}", row=i) from None
    return ScoreTable(values, labels)


def format_score_table(table: ScoreTable, delimiter: str = ",") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    header = [f"score_{k}" for k in range(table.n_labels)]
    if table.labels is not None:
        header.append("label")
    w.writerow(header)
    for i in range(table.n_examples):
        row = [repr(float(v)) for v in table.values[i]]
        if table.labels is not None:
            row.append(str(int(table.labels[i])))
        w.writerow(row)
    return buf.getvalue()


def write_score_table(table: ScoreTable, path, format: str = "csv") -> None:
    delimiter = {"csv": ",", "tsv": "\t"}[format]
    Path(path).write_text(format_score_table(table, delimiter), encoding="utf-8")


# ---------------------------------------------------------------------------
# score functions


def softmax_scores(logits: ScoreTable) -> ScoreTable:
    z = logits.values - logits.values.max(axis=1, keepdims=True)
    e = np.exp(z)
    return logits.with_values(e / e.sum(axis=1, keepdims=True))


def _check_probabilities(probs: np.ndarray) -> None:
    if np.any(probs < 0) or np.any(probs > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    off = np.flatnonzero(np.abs(probs.sum(axis=1) - 1.0) > 1e-9)
    if off.size:
        raise ValueError(f"row {off[0]} does not sum to 1")


def aps_from_uniform(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """APS conformity scores for given per-row randomizers ``u``.

    The mass of labels with strictly larger probability is accumulated; ties
    with the label itself are excluded.
    """
    probs = np.asarray(probs, dtype=float)
    above = np.empty_like(probs)
    for i, row in enumerate(probs):
        srt = np.sort(row)
        csum = np.cumsum(srt)
        # number of entries <= row[y]; everything after them is strictly larger
        k = np.searchsorted(srt, row, side="right")
        above[i] = csum[-1] - csum[k - 1]
    return -(probs * np.asarray(u, dtype=float)[:, None] + above)


def aps_scores(probs: ScoreTable, seed: int) -> ScoreTable:
    _check_probabilities(probs.values)
    u = np.random.default_rng(seed).uniform(size=probs.n_examples)
    return probs.with_values(aps_from_uniform(probs.values, u))


def conformity_scores(table: ScoreTable, kind: ScoreKind) -> ScoreTable:
    """Map raw model outputs (logits) to conformity scores of ``kind``."""
    if kind.variant is ScoreVariant.LOGIT:
        return table
    probs = softmax_scores(table)
    if kind.variant is ScoreVariant.TPS:
        return probs
    if kind.aps_seed is None:
        raise ValueError("APS scores need an aps_seed for deterministic replay")
    return aps_scores(probs, kind.aps_seed)


# ---------------------------------------------------------------------------
# noise augmentation


def example_rng(seed: int, index: int) -> np.random.Generator:
    """Noise stream owned by one example. Depends only on (seed, index), so
    reordering or subsetting rows leaves each example's draw unchanged."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, index, 0, 0]))


def augment_once(clean_scores_fn: Callable[[int, np.ndarray], np.ndarray],
                 smoothing: SmoothingSpec, seed: int, n_examples: int, dim: int,
                 labels=None) -> ScoreTable:
    """Score every example on exactly one noisy copy of its input.

    ``clean_scores_fn(i, noise)`` must return the score row of example ``i``
    evaluated at ``x_i + noise``; ``noise`` has shape ``(dim,)``.
    """
    rows = []
    for i in range(n_examples):
        noise = smoothing.sample(example_rng(seed, i), dim)
        try:
            rows.append(np.asarray(clean_scores_fn(i, noise), dtype=float))
        except Exception as exc:
            raise RuntimeError(f"score callback failed on example {i}: {exc}") from exc
    return ScoreTable(np.vstack(rows), labels)


def augment_batch(batch_scores_fn: Callable[[np.ndarray], np.ndarray],
                  smoothing: SmoothingSpec, rng: np.random.Generator,
                  n_examples: int, dim: int, labels=None) -> ScoreTable:
    """Vectorized form of :func:`augment_once` drawing from a single stream.

    ``batch_scores_fn(noise)`` receives an ``(n_examples, dim)`` noise matrix,
    one row per example, and returns the ``(n_examples, K)`` score matrix.
    """
    noise = smoothing.sample(rng, (n_examples, dim))
    return ScoreTable(batch_scores_fn(noise), labels)
