"""Toy multimodal trajectory predictor with closed-form gradients.

Architecture: a two-layer tanh encoder maps the hand-built input features to
a latent vector E; two linear heads decode E into M per-step offset
sequences and M mode logits.  Predicted positions are cumulative sums of the
offsets anchored at the focal agent's last observed position, which makes
the whole model translation-invariant.

The loss is winner-takes-all: mean per-step L2 distance of the best mode
plus cross-entropy of the mode logits against that best mode.  Gradients
with respect to the output, the latent, and every parameter are written out
by hand so that feature extraction and SGD pretraining need no autodiff.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DataFormatError, HorizonMismatchError, NumericsError
from .rng import STREAM_INIT, STREAM_SHUFFLE, make_rng
from .scene_data import Dataset, Scene

EPS_GRAD = 1e-8  # guards the L2-norm gradient singularity at zero residual
DEFAULT_DENSITY_CAP = 100.0

_PARAMS_MAGIC = b"TPRD1"


@dataclass(frozen=True)
class ModelConfig:
    t_obs: int
    t_pred: int
    hidden_dim: int = 64
    latent_dim: int = 32
    num_modes: int = 6
    density_cap: float = DEFAULT_DENSITY_CAP

    @property
    def input_dim(self) -> int:
        return (self.t_obs - 1) * 2 + 2


@dataclass(frozen=True)
class ToyPredictorParams:
    """Weights of encoder and decoder heads.

    ``density_cap`` is featurization configuration, not learned state; the
    params file stores only the matrices, so a loader must supply the same
    cap that was used at training time (the default is fine everywhere).
    """

    W1: np.ndarray  # (hidden, input)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (latent, hidden)
    b2: np.ndarray  # (latent,)
    W_traj: np.ndarray  # (M * t_pred * 2, latent)
    b_traj: np.ndarray  # (M * t_pred * 2,)
    W_logit: np.ndarray  # (M, latent)
    b_logit: np.ndarray  # (M,)
    density_cap: float = DEFAULT_DENSITY_CAP

    def __post_init__(self):
        for name in ("W1", "b1", "W2", "b2", "W_traj", "b_traj", "W_logit", "b_logit"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.isfinite(arr).all():
                raise ContractError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)
        hidden, input_dim = self.W1.shape
        latent = self.W2.shape[0]
        m = self.W_logit.shape[0]
        ok = (
            self.b1.shape == (hidden,)
            and self.W2.shape == (latent, hidden)
            and self.b2.shape == (latent,)
            and self.W_traj.shape[1] == latent
            and self.W_traj.shape[0] % (m * 2) == 0
            and self.b_traj.shape == (self.W_traj.shape[0],)
            and self.W_logit.shape == (m, latent)
            and self.b_logit.shape == (m,)
        )
        if not ok:
            raise ContractError("parameter dimensions are mutually inconsistent")
        if m < 2:
            raise ContractError(f"need at least 2 modes, got {m}")
        if (self.input_dim - 2) % 2 != 0:
            raise ContractError(f"input_dim {self.input_dim} does not match any t_obs")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.W2.shape[0]

    @property
    def num_modes(self) -> int:
        return self.W_logit.shape[0]

    @property
    def t_pred(self) -> int:
        return self.W_traj.shape[0] // (self.num_modes * 2)

    @property
    def t_obs(self) -> int:
        return (self.input_dim - 2) // 2 + 1


@dataclass(frozen=True)
class PredictionOutput:
    trajectories: np.ndarray  # (M, t_pred, 2) absolute positions
    logits: np.ndarray  # (M,)
    latent: np.ndarray  # (latent,)


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    reg: float
    cls: float
    best_mode: int


def init_params(config: ModelConfig, seed: int) -> ToyPredictorParams:
    """Uniform +-1/sqrt(fan_in) init for each layer, weights then bias."""
    rng = make_rng(seed, STREAM_INIT)

    def layer(out_dim, in_dim):
        bound = 1.0 / math.sqrt(in_dim)
        w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        b = rng.uniform(-bound, bound, size=out_dim)
        return w, b

    traj_dim = config.num_modes * config.t_pred * 2
    w1, b1 = layer(config.hidden_dim, config.input_dim)
    w2, b2 = layer(config.latent_dim, config.hidden_dim)
    wt, bt = layer(traj_dim, config.latent_dim)
    wl, bl = layer(config.num_modes, config.latent_dim)
    return ToyPredictorParams(w1, b1, w2, b2, wt, bt, wl, bl, config.density_cap)


def encode_input(
    scene: Scene, t_obs: int, t_pred: int, density_cap: float = DEFAULT_DENSITY_CAP
) -> np.ndarray:
    """Position-invariant featurization of a scene.

    Layout: the focal agent's (t_obs - 1) observed displacement vectors,
    then mean distance from the focal agent to its neighbors at the last
    observed step (0 for single-agent scenes), then density / density_cap.
    """
    focal = scene.focal
    if focal.observed.shape[0] != t_obs or focal.future.shape[0] != t_pred:
        raise HorizonMismatchError(
            f"scene {scene.scene_id!r} horizons "
            f"({focal.observed.shape[0]}, {focal.future.shape[0]}) "
            f"do not match model ({t_obs}, {t_pred})"
        )
    disp = np.diff(focal.observed, axis=0).ravel()
    if scene.density > 1:
        last = focal.observed[-1]
        others = np.array(
            [a.observed[-1] for i, a in enumerate(scene.agents) if i != scene.focal_index]
        )
        neighbor = float(np.linalg.norm(others - last, axis=1).mean())
    else:
        neighbor = 0.0
    return np.concatenate([disp, [neighbor, scene.density / density_cap]])


def forward(
    params: ToyPredictorParams, x: np.ndarray, anchor: np.ndarray | None = None
) -> PredictionOutput:
    """Run the network; ``anchor`` is the position the offsets integrate from."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise ContractError(f"input has shape {x.shape}, model expects ({params.input_dim},)")
    if anchor is None:
        anchor = np.zeros(2)
    h1 = np.tanh(params.W1 @ x + params.b1)
    latent = np.tanh(params.W2 @ h1 + params.b2)
    offsets = (params.W_traj @ latent + params.b_traj).reshape(params.num_modes, params.t_pred, 2)
    traj = np.asarray(anchor, dtype=np.float64) + np.cumsum(offsets, axis=1)
    logits = params.W_logit @ latent + params.b_logit
    return PredictionOutput(traj, logits, latent)


def predict_scene(params: ToyPredictorParams, scene: Scene) -> PredictionOutput:
    x = encode_input(scene, params.t_obs, params.t_pred, params.density_cap)
    return forward(params, x, anchor=scene.focal.observed[-1])


def _mode_distances(trajectories: np.ndarray, ground_truth: np.ndarray) -> np.ndarray:
    """(M,) mean per-step L2 distance of every mode to the ground truth."""
    diffs = trajectories - ground_truth[None, :, :]
    return np.linalg.norm(diffs, axis=2).mean(axis=1)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max()
    return logits - (m + math.log(np.exp(logits - m).sum()))


def loss(output: PredictionOutput, ground_truth: np.ndarray) -> LossBreakdown:
    """Winner-takes-all loss; ties in the argmin go to the lowest mode index."""
    gt = np.asarray(ground_truth, dtype=np.float64)
    if gt.shape != output.trajectories.shape[1:]:
        raise ContractError(
            f"ground truth shape {gt.shape} does not match trajectories "
            f"{output.trajectories.shape[1:]}"
        )
    mean_d = _mode_distances(output.trajectories, gt)
    best = int(np.argmin(mean_d))
    reg = float(mean_d[best])
    cls = float(-_log_softmax(output.logits)[best])
    return LossBreakdown(reg + cls, reg, cls, best)


def grad_wrt_output(
    output: PredictionOutput, ground_truth: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the total loss w.r.t. (trajectories, logits).

    Only the best mode's trajectory carries gradient; the argmin itself is
    treated as constant (winner-takes-all).
    """
    gt = np.asarray(ground_truth, dtype=np.float64)
    mean_d = _mode_distances(output.trajectories, gt)
    best = int(np.argmin(mean_d))
    t_pred = gt.shape[0]

    d_traj = np.zeros_like(output.trajectories)
    resid = output.trajectories[best] - gt
    norms = np.linalg.norm(resid, axis=1)
    d_traj[best] = resid / (t_pred * np.maximum(norms, EPS_GRAD))[:, None]

    p = np.exp(_log_softmax(output.logits))
    d_logits = p.copy()
    d_logits[best] -= 1.0
    return d_traj, d_logits


def _offsets_grad(d_traj: np.ndarray) -> np.ndarray:
    # Positions are cumulative sums of offsets, so the adjoint is a suffix
    # sum over time within each mode.
    return np.flip(np.cumsum(np.flip(d_traj, axis=1), axis=1), axis=1)


def grad_wrt_latent(
    params: ToyPredictorParams, d_traj: np.ndarray, d_logits: np.ndarray
) -> np.ndarray:
    """Pull the output gradient back through the integrator and both heads."""
    d_off = _offsets_grad(d_traj).ravel()
    return params.W_traj.T @ d_off + params.W_logit.T @ d_logits


def pretrain(
    params: ToyPredictorParams,
    dataset: Dataset,
    epochs: int,
    lr: float = 1e-2,
    seed: int = 0,
) -> ToyPredictorParams:
    """Plain per-sample SGD over seeded shuffles; deterministic throughout.

    epochs=0 returns the input params unchanged.  A non-finite loss aborts
    immediately rather than silently training on garbage.
    """
    if epochs < 0:
        raise ContractError(f"epochs must be >= 0, got {epochs}")
    if dataset.t_obs != params.t_obs or dataset.t_pred != params.t_pred:
        raise HorizonMismatchError(
            f"dataset horizons ({dataset.t_obs}, {dataset.t_pred}) do not match "
            f"model ({params.t_obs}, {params.t_pred})"
        )
    if epochs == 0 or len(dataset) == 0:
        return params

    # Featurize once; the encoding does not depend on the weights.
    inputs = [
        encode_input(s, params.t_obs, params.t_pred, params.density_cap)
        for s in dataset.scenes
    ]
    anchors = [s.focal.observed[-1] for s in dataset.scenes]
    gts = [s.focal.future for s in dataset.scenes]

    w = {
        name: np.array(getattr(params, name))
        for name in ("W1", "b1", "W2", "b2", "W_traj", "b_traj", "W_logit", "b_logit")
    }
    m, t_pred = params.num_modes, params.t_pred
    rng = make_rng(seed, STREAM_SHUFFLE)

    # Inlined forward/backward: only the winning mode carries trajectory
    # gradient, so the W_traj update touches just that mode's rows.
    for epoch in range(epochs):
        for i in rng.permutation(len(dataset)):
            x = inputs[i]
            gt = gts[i]
            h1 = np.tanh(w["W1"] @ x + w["b1"])
            latent = np.tanh(w["W2"] @ h1 + w["b2"])
            offsets = (w["W_traj"] @ latent + w["b_traj"]).reshape(m, t_pred, 2)
            traj = anchors[i] + np.cumsum(offsets, axis=1)
            logits = w["W_logit"] @ latent + w["b_logit"]

            diffs = traj - gt[None, :, :]
            norms = np.sqrt(np.einsum("mtc,mtc->mt", diffs, diffs))
            mean_d = norms.mean(axis=1)
            best = int(np.argmin(mean_d))
            mx = logits.max()
            logz = mx + math.log(np.exp(logits - mx).sum())
            total = mean_d[best] + (logz - logits[best])
            if not math.isfinite(total):
                raise NumericsError(
                    f"non-finite loss at epoch {epoch}, scene "
                    f"{dataset.scenes[i].scene_id!r}; learning rate {lr} may be too high"
                )

            d_best = diffs[best] / (t_pred * np.maximum(norms[best], EPS_GRAD))[:, None]
            d_off_best = np.flip(np.cumsum(np.flip(d_best, axis=0), axis=0), axis=0).ravel()
            d_logits = np.exp(logits - logz)
            d_logits[best] -= 1.0

            rows = slice(best * t_pred * 2, (best + 1) * t_pred * 2)
            d_latent = w["W_traj"][rows].T @ d_off_best + w["W_logit"].T @ d_logits
            d_z2 = d_latent * (1.0 - latent * latent)
            d_h1 = w["W2"].T @ d_z2
            d_z1 = d_h1 * (1.0 - h1 * h1)

            w["W_traj"][rows] -= lr * np.outer(d_off_best, latent)
            w["b_traj"][rows] -= lr * d_off_best
            w["W_logit"] -= lr * np.outer(d_logits, latent)
            w["b_logit"] -= lr * d_logits
            w["W2"] -= lr * np.outer(d_z2, h1)
            w["b2"] -= lr * d_z2
            w["W1"] -= lr * np.outer(d_z1, x)
            w["b1"] -= lr * d_z1

    return ToyPredictorParams(**w, density_cap=params.density_cap)


# ---------------------------------------------------------------------------
# params file


def write_params(params: ToyPredictorParams, path) -> None:
    header = _PARAMS_MAGIC + struct.pack(
        "<6I",
        params.input_dim,
        params.hidden_dim,
        params.latent_dim,
        params.num_modes,
        params.t_pred,
        0,
    )
    blobs = [
        np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes()
        for name in ("W1", "b1", "W2", "b2", "W_traj", "b_traj", "W_logit", "b_logit")
    ]
    with open(path, "wb") as fh:
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_params(path, density_cap: float = DEFAULT_DENSITY_CAP) -> ToyPredictorParams:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:5] != _PARAMS_MAGIC:
        raise DataFormatError(f"bad params magic {raw[:5]!r}, expected {_PARAMS_MAGIC!r}")
    if len(raw) < 5 + 24:
        raise DataFormatError("truncated params header")
    input_dim, hidden, latent, m, t_pred, reserved = struct.unpack_from("<6I", raw, 5)
    if reserved != 0:
        raise DataFormatError(f"reserved header field must be 0, got {reserved}")
    traj_dim = m * t_pred * 2
    shapes = [
        (hidden, input_dim), (hidden,),
        (latent, hidden), (latent,),
        (traj_dim, latent), (traj_dim,),
        (m, latent), (m,),
    ]
    offset = 5 + 24
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise DataFormatError("truncated params file")
        arrays.append(np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape))
        offset += nbytes
    if offset != len(raw):
        raise DataFormatError(f"{len(raw) - offset} trailing bytes in params file")
    return ToyPredictorParams(*arrays, density_cap=density_cap)
