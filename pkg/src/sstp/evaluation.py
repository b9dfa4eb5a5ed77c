"""Training/evaluation harness: minADE, minFDE, miss rate, density strata.

``evaluate`` scores a model over an evaluation set, overall and per density
band; ``run_experiment`` trains paired arms from scratch (the given subset,
a size-matched random subset, optionally the full set) with identical seeded
initialization so differences isolate the data, not the optimizer.

Reports serialize to structured text: one key=value per line, with
``#ARM`` / ``#STRATUM`` / ``#CUMULATIVE`` section markers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, DataFormatError
from .predictor import ModelConfig, ToyPredictorParams, init_params, predict_scene, pretrain
from .rng import STREAM_RANDOM_ARM, make_rng
from .scene_data import Dataset

MR_THRESHOLD = 2.0  # meters; Argoverse-style convention, flagged in reports

# Disjoint bands for partition-style bookkeeping plus the cumulative
# thresholds usually quoted for dense traffic.
DEFAULT_STRATA: tuple[tuple[Optional[int], Optional[int]], ...] = (
    (None, 40), (40, 60), (60, 80), (80, None),
)
DEFAULT_CUMULATIVE: tuple[int, ...] = (40, 60, 80)


def min_ade(modes: np.ndarray, gt: np.ndarray) -> float:
    """Minimum over modes of the mean per-step displacement."""
    modes = np.asarray(modes, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if modes.ndim != 3 or modes.shape[1:] != gt.shape:
        raise ContractError(f"shape mismatch: modes {modes.shape} vs gt {gt.shape}")
    return float(np.linalg.norm(modes - gt[None], axis=2).mean(axis=1).min())


def min_fde(modes: np.ndarray, gt: np.ndarray) -> float:
    """Minimum over modes of the final-step displacement."""
    modes = np.asarray(modes, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if modes.ndim != 3 or modes.shape[1:] != gt.shape:
        raise ContractError(f"shape mismatch: modes {modes.shape} vs gt {gt.shape}")
    return float(np.linalg.norm(modes[:, -1, :] - gt[-1], axis=1).min())


def miss_rate_indicator(modes: np.ndarray, gt: np.ndarray, threshold: float = MR_THRESHOLD) -> int:
    if threshold <= 0:
        raise ContractError(f"threshold must be > 0, got {threshold}")
    return int(min_fde(modes, gt) > threshold)


@dataclass(frozen=True)
class StratumRow:
    lo: Optional[int]  # inclusive; None = open below
    hi: Optional[int]  # exclusive; None = open above
    count: int
    min_ade: float
    min_fde: float
    mr: float


@dataclass(frozen=True)
class CumulativeRow:
    min_density: int
    count: int
    min_ade: float
    min_fde: float
    mr: float


@dataclass(frozen=True)
class TrainingMeta:
    epochs: int = 0
    lr: float = 0.0
    seed: int = 0
    subset_size: int = 0


@dataclass(frozen=True)
class MetricReport:
    min_ade: float
    min_fde: float
    mr: float
    per_stratum: tuple[StratumRow, ...]
    cumulative: tuple[CumulativeRow, ...]
    training_meta: TrainingMeta
    mr_threshold: float = MR_THRESHOLD


def _in_range(d: int, lo: Optional[int], hi: Optional[int]) -> bool:
    return (lo is None or d >= lo) and (hi is None or d < hi)


def _check_disjoint(strata) -> None:
    for i, (lo_a, hi_a) in enumerate(strata):
        for lo_b, hi_b in strata[i + 1:]:
            a_lo = -np.inf if lo_a is None else lo_a
            a_hi = np.inf if hi_a is None else hi_a
            b_lo = -np.inf if lo_b is None else lo_b
            b_hi = np.inf if hi_b is None else hi_b
            if max(a_lo, b_lo) < min(a_hi, b_hi):
                raise ContractError(f"strata overlap: [{lo_a},{hi_a}) and [{lo_b},{hi_b})")


def _aggregate(rows: np.ndarray) -> tuple[float, float, float]:
    # rows: (n, 3) of per-scene (ade, fde, miss)
    return float(rows[:, 0].mean()), float(rows[:, 1].mean()), float(rows[:, 2].mean())


def evaluate(
    params: ToyPredictorParams,
    eval_set: Dataset,
    strata: Sequence[tuple[Optional[int], Optional[int]]] = DEFAULT_STRATA,
    cumulative: Sequence[int] = DEFAULT_CUMULATIVE,
    mr_threshold: float = MR_THRESHOLD,
    training_meta: TrainingMeta = TrainingMeta(),
) -> MetricReport:
    """Score every focal agent; strata must be disjoint, and anything they
    miss lands in an appended catch-all row so counts always partition the
    evaluation set."""
    if len(eval_set) == 0:
        raise ContractError("cannot evaluate on an empty dataset")
    strata = tuple(strata)
    _check_disjoint(strata)

    per_scene = np.empty((len(eval_set), 3))
    densities = np.empty(len(eval_set), dtype=np.int64)
    for i, scene in enumerate(eval_set.scenes):
        out = predict_scene(params, scene)
        gt = scene.focal.future
        ade = min_ade(out.trajectories, gt)
        fde = min_fde(out.trajectories, gt)
        per_scene[i] = (ade, fde, float(fde > mr_threshold))
        densities[i] = scene.density

    overall = _aggregate(per_scene)

    stratum_rows = []
    unmatched = np.ones(len(eval_set), dtype=bool)
    for lo, hi in strata:
        mask = np.array([_in_range(int(d), lo, hi) for d in densities])
        unmatched &= ~mask
        if mask.any():
            a, f, m = _aggregate(per_scene[mask])
            stratum_rows.append(StratumRow(lo, hi, int(mask.sum()), a, f, m))
        else:
            stratum_rows.append(StratumRow(lo, hi, 0, 0.0, 0.0, 0.0))
    if unmatched.any():
        a, f, m = _aggregate(per_scene[unmatched])
        stratum_rows.append(StratumRow(None, None, int(unmatched.sum()), a, f, m))

    cum_rows = []
    for threshold in cumulative:
        mask = densities >= threshold
        if mask.any():
            a, f, m = _aggregate(per_scene[mask])
            cum_rows.append(CumulativeRow(threshold, int(mask.sum()), a, f, m))
        else:
            cum_rows.append(CumulativeRow(threshold, 0, 0.0, 0.0, 0.0))

    return MetricReport(
        overall[0], overall[1], overall[2],
        tuple(stratum_rows), tuple(cum_rows), training_meta, mr_threshold,
    )


@dataclass(frozen=True)
class ExperimentConfig:
    eval_set: Dataset
    model: Optional[ModelConfig] = None  # defaults to the training horizons
    epochs: int = 8
    lr: float = 1e-2
    seed: int = 0
    strata: tuple = DEFAULT_STRATA
    cumulative: tuple = DEFAULT_CUMULATIVE
    mr_threshold: float = MR_THRESHOLD
    include_full_arm: bool = True


@dataclass(frozen=True)
class ExperimentReport:
    arms: tuple[tuple[str, MetricReport], ...]
    seed: int
    mr_threshold: float = MR_THRESHOLD

    def arm(self, name: str) -> MetricReport:
        for arm_name, report in self.arms:
            if arm_name == name:
                return report
        raise KeyError(name)


def _train_arm(model, train_set, config) -> ToyPredictorParams:
    params = init_params(model, config.seed)
    return pretrain(params, train_set, config.epochs, config.lr, config.seed)


def run_experiment(full: Dataset, subset_ids: Sequence[str], config: ExperimentConfig) -> ExperimentReport:
    """Train subset / size-matched-random / (optionally) full arms from the
    same seeded init, then evaluate all on the held-out set."""
    model = config.model or ModelConfig(t_obs=full.t_obs, t_pred=full.t_pred)
    subset = full.subset(subset_ids)

    rng = make_rng(config.seed, STREAM_RANDOM_ARM)
    random_ids = [full.scenes[i].scene_id for i in rng.choice(len(full), size=len(subset), replace=False)]
    random_set = full.subset(random_ids)

    arms = [("subset", subset), ("random", random_set)]
    if config.include_full_arm:
        arms.append(("full", full))

    results = []
    for name, train_set in arms:
        params = _train_arm(model, train_set, config)
        meta = TrainingMeta(config.epochs, config.lr, config.seed, len(train_set))
        results.append(
            (name, evaluate(params, config.eval_set, config.strata,
                            config.cumulative, config.mr_threshold, meta))
        )
    return ExperimentReport(tuple(results), config.seed, config.mr_threshold)


# ---------------------------------------------------------------------------
# report file


def _fmt_bound(v: Optional[int]) -> str:
    return "-" if v is None else str(v)


def _parse_bound(text: str) -> Optional[int]:
    return None if text == "-" else int(text)


def write_report(report: ExperimentReport, path) -> None:
    lines = ["#REPORT v1", f"mr_threshold={report.mr_threshold!r}", f"seed={report.seed}"]
    for name, r in report.arms:
        m = r.training_meta
        lines.append(f"#ARM name={name}")
        lines.append(f"subset_size={m.subset_size}")
        lines.append(f"epochs={m.epochs}")
        lines.append(f"lr={m.lr!r}")
        lines.append(f"train_seed={m.seed}")
        lines.append(f"minADE={r.min_ade!r}")
        lines.append(f"minFDE={r.min_fde!r}")
        lines.append(f"MR={r.mr!r}")
        for s in r.per_stratum:
            lines.append(f"#STRATUM lo={_fmt_bound(s.lo)} hi={_fmt_bound(s.hi)}")
            lines.append(f"count={s.count}")
            lines.append(f"minADE={s.min_ade!r}")
            lines.append(f"minFDE={s.min_fde!r}")
            lines.append(f"MR={s.mr!r}")
        for c in r.cumulative:
            lines.append(f"#CUMULATIVE min_density={c.min_density}")
            lines.append(f"count={c.count}")
            lines.append(f"minADE={c.min_ade!r}")
            lines.append(f"minFDE={c.min_fde!r}")
            lines.append(f"MR={c.mr!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report_table(report: ExperimentReport, path) -> None:
    """Tab-separated rows for external plotting."""
    lines = ["arm\tstratum\tcount\tminADE\tminFDE\tMR"]
    for name, r in report.arms:
        lines.append(f"{name}\toverall\t{sum(s.count for s in r.per_stratum)}\t{r.min_ade!r}\t{r.min_fde!r}\t{r.mr!r}")
        for s in r.per_stratum:
            label = f"[{_fmt_bound(s.lo)},{_fmt_bound(s.hi)})"
            lines.append(f"{name}\t{label}\t{s.count}\t{s.min_ade!r}\t{s.min_fde!r}\t{s.mr!r}")
        for c in r.cumulative:
            lines.append(f"{name}\t>={c.min_density}\t{c.count}\t{c.min_ade!r}\t{c.min_fde!r}\t{c.mr!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


class _LineReader:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    def peek(self):
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def next(self):
        line = self.peek()
        self.pos += 1
        return line

    def take_kv(self, key: str) -> str:
        line = self.next()
        if line is None or not line.startswith(key + "="):
            raise DataFormatError(f"report line {self.pos}: expected {key}=..., got {line!r}")
        return line[len(key) + 1:]


def _read_metrics_block(reader: _LineReader) -> tuple[float, float, float]:
    ade = float(reader.take_kv("minADE"))
    fde = float(reader.take_kv("minFDE"))
    mr = float(reader.take_kv("MR"))
    return ade, fde, mr


def read_report(path) -> ExperimentReport:
    with open(path, "r", encoding="utf-8") as fh:
        reader = _LineReader(fh.read().splitlines())
    if reader.next() != "#REPORT v1":
        raise DataFormatError("line 1: missing '#REPORT v1' header")
    mr_threshold = float(reader.take_kv("mr_threshold"))
    seed = int(reader.take_kv("seed"))
    arms = []
    while reader.peek() is not None:
        header = reader.next()
        if not header.startswith("#ARM name="):
            raise DataFormatError(f"report line {reader.pos}: expected #ARM, got {header!r}")
        name = header[len("#ARM name="):]
        subset_size = int(reader.take_kv("subset_size"))
        epochs = int(reader.take_kv("epochs"))
        lr = float(reader.take_kv("lr"))
        train_seed = int(reader.take_kv("train_seed"))
        ade, fde, mr = _read_metrics_block(reader)
        strata = []
        cumulative = []
        while reader.peek() is not None and reader.peek().startswith("#STRATUM "):
            fields = dict(tok.split("=", 1) for tok in reader.next()[len("#STRATUM "):].split())
            count = int(reader.take_kv("count"))
            s_ade, s_fde, s_mr = _read_metrics_block(reader)
            strata.append(
                StratumRow(_parse_bound(fields["lo"]), _parse_bound(fields["hi"]),
                           count, s_ade, s_fde, s_mr)
            )
        while reader.peek() is not None and reader.peek().startswith("#CUMULATIVE "):
            header = reader.next()
            threshold = int(header[len("#CUMULATIVE min_density="):])
            count = int(reader.take_kv("count"))
            c_ade, c_fde, c_mr = _read_metrics_block(reader)
            cumulative.append(CumulativeRow(threshold, count, c_ade, c_fde, c_mr))
        meta = TrainingMeta(epochs, lr, train_seed, subset_size)
        arms.append((name, MetricReport(ade, fde, mr, tuple(strata), tuple(cumulative),
                                        meta, mr_threshold)))
    return ExperimentReport(tuple(arms), seed, mr_threshold)
