"""Scene/trajectory data model, the scene file format, and a synthetic generator.

A scene is one driving sample: per-agent observed and future tracks plus a
focal agent whose future the predictor scores.  Scene density is the agent
count; the synthetic generator draws it from a two-component head/tail
mixture so that low-density scenes dominate the way they do in real
motion-forecasting corpora.

File format (text, UTF-8)::

    #SCENES v1 t_obs=<int> t_pred=<int>
    scene_id|focal_index|agent0;agent1;...

where each agent is ``x1,y1 x2,y2 ... / xf1,yf1 ...`` (observed points,
slash, future points).  Coordinates are written with ``%.9g``; the generator
and loader only ever hold coordinates at that precision, so save -> load is
lossless and save(load(p)) is byte-identical to the canonical form of p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, DataFormatError, HorizonMismatchError
from .rng import STREAM_SYNTH, make_rng

_HEADER_PREFIX = "#SCENES v1"


def canonical_number(x: float) -> str:
    """Canonical on-disk form of a coordinate: %.9g, round-trip exact."""
    return format(float(x), ".9g")


@dataclass(frozen=True)
class AgentTrack:
    """Observed and future 2-D positions (meters) of one agent."""

    observed: np.ndarray  # (t_obs, 2) float64
    future: np.ndarray  # (t_pred, 2) float64

    def __post_init__(self):
        for name in ("observed", "future"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise ContractError(f"{name} must have shape (T, 2), got {arr.shape}")
            if not np.isfinite(arr).all():
                raise ContractError(f"{name} contains non-finite coordinates")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.observed.shape[0] < 2:
            raise ContractError("observed track needs at least 2 points")
        if self.future.shape[0] < 1:
            raise ContractError("future track needs at least 1 point")


@dataclass(frozen=True)
class Scene:
    """One sample: agent tracks, focal agent index, optional opaque context.

    ``context`` mirrors the map payload real datasets attach to a sample; the
    toy predictor ignores it and it is not persisted by the scene file format.
    """

    scene_id: str
    agents: tuple[AgentTrack, ...]
    focal_index: int = 0
    context: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.agents:
            raise ContractError(f"scene {self.scene_id!r} has no agents")
        if not (0 <= self.focal_index < len(self.agents)):
            raise ContractError(
                f"scene {self.scene_id!r}: focal_index {self.focal_index} "
                f"out of range for {len(self.agents)} agents"
            )
        t_obs = self.agents[0].observed.shape[0]
        t_pred = self.agents[0].future.shape[0]
        for a in self.agents[1:]:
            if a.observed.shape[0] != t_obs or a.future.shape[0] != t_pred:
                raise HorizonMismatchError(
                    f"scene {self.scene_id!r}: agents disagree on horizon lengths"
                )

    @property
    def density(self) -> int:
        """Agent count; the partitioning key."""
        return len(self.agents)

    @property
    def focal(self) -> AgentTrack:
        return self.agents[self.focal_index]


@dataclass(frozen=True)
class Dataset:
    scenes: tuple[Scene, ...]
    t_obs: int
    t_pred: int

    def __post_init__(self):
        object.__setattr__(self, "scenes", tuple(self.scenes))
        if self.t_obs < 2 or self.t_pred < 1:
            raise ContractError(f"invalid horizons t_obs={self.t_obs} t_pred={self.t_pred}")
        seen = set()
        for s in self.scenes:
            if s.scene_id in seen:
                raise DataFormatError(f"duplicate scene_id {s.scene_id!r}")
            seen.add(s.scene_id)
            if s.agents[0].observed.shape[0] != self.t_obs or s.agents[0].future.shape[0] != self.t_pred:
                raise HorizonMismatchError(
                    f"scene {s.scene_id!r} has horizons "
                    f"({s.agents[0].observed.shape[0]}, {s.agents[0].future.shape[0]}), "
                    f"dataset declares ({self.t_obs}, {self.t_pred})"
                )

    def __len__(self) -> int:
        return len(self.scenes)

    def scene_ids(self) -> list[str]:
        return [s.scene_id for s in self.scenes]

    def subset(self, ids: Sequence[str]) -> "Dataset":
        """Scenes with the given ids, in the order given."""
        by_id = {s.scene_id: s for s in self.scenes}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise ContractError(f"unknown scene ids: {missing[:5]}")
        return Dataset(tuple(by_id[i] for i in ids), self.t_obs, self.t_pred)


# ---------------------------------------------------------------------------
# file format


def _format_agent(a: AgentTrack) -> str:
    obs = " ".join(f"{canonical_number(x)},{canonical_number(y)}" for x, y in a.observed)
    fut = " ".join(f"{canonical_number(x)},{canonical_number(y)}" for x, y in a.future)
    return f"{obs} / {fut}"


def save_dataset(ds: Dataset, path) -> None:
    """Write the canonical serialization (``\\n`` endings, %.9g numbers)."""
    lines = [f"{_HEADER_PREFIX} t_obs={ds.t_obs} t_pred={ds.t_pred}"]
    for s in ds.scenes:
        _check_scene_id(s.scene_id)
        lines.append(f"{s.scene_id}|{s.focal_index}|" + ";".join(_format_agent(a) for a in s.agents))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _check_scene_id(scene_id: str) -> None:
    if not scene_id or any(c in scene_id for c in "|;,/ \t\n"):
        raise DataFormatError(f"scene_id {scene_id!r} contains reserved characters")


def _parse_points(text: str, lineno: int, what: str) -> np.ndarray:
    pts = []
    for tok in text.split():
        xy = tok.split(",")
        if len(xy) != 2:
            raise DataFormatError(f"line {lineno}: bad point {tok!r} in {what}")
        try:
            x, y = float(xy[0]), float(xy[1])
        except ValueError:
            raise DataFormatError(f"line {lineno}: non-numeric point {tok!r}") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise DataFormatError(f"line {lineno}: non-finite point {tok!r}")
        pts.append((x, y))
    if not pts:
        raise DataFormatError(f"line {lineno}: empty {what} track")
    return np.array(pts, dtype=np.float64)


def load_dataset(path) -> Dataset:
    """Parse a scene file; errors carry the 1-based line number."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(_HEADER_PREFIX):
        raise DataFormatError("line 1: missing '#SCENES v1' header")
    fields = lines[0][len(_HEADER_PREFIX):].split()
    try:
        kv = dict(f.split("=", 1) for f in fields)
        t_obs, t_pred = int(kv["t_obs"]), int(kv["t_pred"])
    except (ValueError, KeyError):
        raise DataFormatError("line 1: header must carry t_obs=<int> t_pred=<int>") from None

    scenes = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise DataFormatError(f"line {lineno}: blank line")
        parts = line.split("|")
        if len(parts) != 3:
            raise DataFormatError(f"line {lineno}: expected scene_id|focal_index|agents")
        scene_id, focal_text, agents_text = parts
        if scene_id in seen:
            raise DataFormatError(f"line {lineno}: duplicate scene_id {scene_id!r}")
        seen.add(scene_id)
        try:
            focal = int(focal_text)
        except ValueError:
            raise DataFormatError(f"line {lineno}: bad focal_index {focal_text!r}") from None
        agents = []
        for agent_text in agents_text.split(";"):
            halves = agent_text.split("/")
            if len(halves) != 2:
                raise DataFormatError(f"line {lineno}: agent needs one '/' separator")
            obs = _parse_points(halves[0], lineno, "observed")
            fut = _parse_points(halves[1], lineno, "future")
            if obs.shape[0] != t_obs or fut.shape[0] != t_pred:
                raise HorizonMismatchError(
                    f"line {lineno}: agent has ({obs.shape[0]}, {fut.shape[0]}) points, "
                    f"header declares ({t_obs}, {t_pred})"
                )
            agents.append(AgentTrack(obs, fut))
        try:
            scenes.append(Scene(scene_id, tuple(agents), focal))
        except ContractError as e:
            raise DataFormatError(f"line {lineno}: {e}") from None
    return Dataset(tuple(scenes), t_obs, t_pred)


# ---------------------------------------------------------------------------
# synthetic generation


@dataclass(frozen=True)
class MixtureComponent:
    """One half of the density mixture: a density range plus motion statistics.

    Motion statistics are per-component so a config can couple scene density
    with driving regime (e.g. dense scenes move slower and turn more), which
    is what makes the density strata distinguishable to a learned predictor.
    """

    density_lo: int
    density_hi: int  # inclusive
    weight: float
    speed_lo: float = 8.0
    speed_hi: float = 15.0
    turn_prob: float = 0.2
    turn_rate_lo: float = 0.1  # rad/s
    turn_rate_hi: float = 0.5

    def validate(self):
        if not (1 <= self.density_lo <= self.density_hi):
            raise ContractError(f"bad density range [{self.density_lo}, {self.density_hi}]")
        if self.weight < 0:
            raise ContractError("component weight must be >= 0")
        if not (0 <= self.speed_lo <= self.speed_hi):
            raise ContractError("bad speed range")
        if not (0 <= self.turn_prob <= 1):
            raise ContractError("turn_prob must be in [0, 1]")
        if not (0 <= self.turn_rate_lo <= self.turn_rate_hi):
            raise ContractError("bad turn-rate range")


@dataclass(frozen=True)
class SynthConfig:
    num_scenes: int
    t_obs: int = 10
    t_pred: int = 6
    head: MixtureComponent = field(
        default_factory=lambda: MixtureComponent(2, 10, 0.9)
    )
    tail: MixtureComponent = field(
        default_factory=lambda: MixtureComponent(
            40, 80, 0.1, speed_lo=2.0, speed_hi=6.0, turn_prob=0.6,
            turn_rate_lo=0.3, turn_rate_hi=1.0,
        )
    )
    dt: float = 0.1  # seconds per step
    noise_std: float = 0.05  # meters, added per point
    spawn_radius: float = 30.0

    def validate(self):
        if self.num_scenes < 0:
            raise ContractError("num_scenes must be >= 0")
        if self.t_obs < 2 or self.t_pred < 1:
            raise ContractError("need t_obs >= 2 and t_pred >= 1")
        self.head.validate()
        self.tail.validate()
        if self.head.weight + self.tail.weight <= 0:
            raise ContractError("mixture weights must not both be 0")
        if self.dt <= 0 or self.noise_std < 0 or self.spawn_radius <= 0:
            raise ContractError("dt/noise_std/spawn_radius out of range")


def _quantize(points: np.ndarray) -> np.ndarray:
    # Round-trip through %.9g so in-memory values equal their on-disk form.
    return np.char.mod("%.9g", points).astype(np.float64)


def generate_synthetic(config: SynthConfig, seed: int) -> Dataset:
    """Deterministic long-tail dataset: noisy constant-velocity or
    constant-turn-rate agents, density drawn from the head/tail mixture.

    Pure function of (config, seed); the focal agent is always index 0.
    """
    config.validate()
    rng = make_rng(seed, STREAM_SYNTH)
    p_head = config.head.weight / (config.head.weight + config.tail.weight)
    total_steps = config.t_obs + config.t_pred
    scenes = []
    for idx in range(config.num_scenes):
        comp = config.head if rng.random() < p_head else config.tail
        rho = int(rng.integers(comp.density_lo, comp.density_hi + 1))
        start = rng.uniform(-config.spawn_radius, config.spawn_radius, size=(rho, 2))
        heading = rng.uniform(0.0, 2.0 * math.pi, size=rho)
        speed = rng.uniform(comp.speed_lo, comp.speed_hi, size=rho)
        turning = rng.random(rho) < comp.turn_prob
        rate = rng.uniform(comp.turn_rate_lo, comp.turn_rate_hi, size=rho)
        sign = rng.integers(0, 2, size=rho) * 2 - 1
        omega = np.where(turning, rate * sign, 0.0)

        # headings at each step; displacement integrates the unicycle model
        steps = np.arange(total_steps - 1, dtype=np.float64)
        h = heading[:, None] + omega[:, None] * config.dt * steps[None, :]
        disp = (speed * config.dt)[:, None, None] * np.stack([np.cos(h), np.sin(h)], axis=-1)
        pts = np.concatenate(
            [start[:, None, :], start[:, None, :] + np.cumsum(disp, axis=1)], axis=1
        )
        pts += rng.normal(0.0, config.noise_std, size=pts.shape)
        pts = _quantize(pts)

        agents = tuple(
            AgentTrack(pts[a, : config.t_obs], pts[a, config.t_obs:]) for a in range(rho)
        )
        scenes.append(Scene(f"s{idx:06d}", agents, focal_index=0))
    return Dataset(tuple(scenes), config.t_obs, config.t_pred)
