"""Risk model: pillar-feature trunk plus one of three decoder heads.

head kinds
----------
sparta       predicts a full per-bin Fourier coefficient table from features
             alone; the angle enters only when the returned function is
             evaluated.
angle_input  embeds the raw angle and concatenates it with the features to
             predict the concentrations for that one angle.
angle_free   ignores the angle entirely.

Training minimizes squared earth mover's distance between the induced
categorical distribution and the target, with analytic gradients and plain
seeded mini-batch descent (no adaptive moments), so identical inputs give
bit-identical parameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DimensionError,
    FormatError,
    HeadContractError,
    TrainingDiverged,
    UnderdeterminedFit,
)
from .features import FEATURE_DIM, GRID_DIM, NUM_CHANNELS, FeatureGrid
from .fourier import (
    AngleLike,
    FourierRiskFunction,
    as_radians,
    eval_concentrations_array,
    fourier_basis_many,
    softplus,
    ConcentrationVector,
    DEFAULT_POSITIVITY_FLOOR,
)
from .network import (
    DenseNetwork,
    build_network,
    network_from_dict,
    network_to_dict,
    stable_sigmoid,
)
from .riskdist import (
    BinGeometry,
    DEFAULT_GEOMETRY,
    RiskDistribution,
    distribution_from_dict,
    distribution_to_dict,
    emd2_cdf,
)

TRUNK_HIDDEN = 512
TRUNK_OUT = 256

# uniform init keeps relu activation variance roughly constant at sqrt(6)/sqrt(fan_in)
DEFAULT_WEIGHT_INIT_SCALE = math.sqrt(6.0)
SPARTA_HEAD_HIDDEN = 512
ANGLE_EMBED_HIDDEN = 16
ANGLE_EMBED_DIM = 32
ANGLE_DECODER_HIDDEN = 64
ANGLE_FREE_HIDDEN = (128, 64)

HEAD_KINDS = ("sparta", "angle_input", "angle_free")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    weight_init_scale: float = DEFAULT_WEIGHT_INIT_SCALE

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class DatasetItem:
    grid: FeatureGrid
    phi: float
    target: RiskDistribution

    def __post_init__(self):
        self.phi = as_radians(self.phi)


@dataclass
class Dataset:
    items: List[DatasetItem]

    def __post_init__(self):
        if not self.items:
            raise ValueError("dataset must be nonempty")
        geo = self.items[0].target.geometry
        if any(it.target.geometry != geo for it in self.items):
            raise DimensionError("all dataset targets must share bin geometry")

    @property
    def geometry(self) -> BinGeometry:
        return self.items[0].target.geometry

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class SpartaModel:
    head_kind: str
    trunk: DenseNetwork
    head: DenseNetwork
    angle_embed: Optional[DenseNetwork]
    bins: int
    max_frequency: int
    geometry: BinGeometry
    positivity_floor: float = DEFAULT_POSITIVITY_FLOOR

    def __post_init__(self):
        if self.head_kind not in HEAD_KINDS:
            raise ValueError(f"unknown head kind {self.head_kind!r}")
        expected = self.bins * (2 * self.max_frequency + 1) if self.head_kind == "sparta" else self.bins
        if self.head.output_dim != expected:
            raise DimensionError(
                f"{self.head_kind} head must output {expected}, got {self.head.output_dim}"
            )
        if (self.angle_embed is not None) != (self.head_kind == "angle_input"):
            raise DimensionError("angle embedding exists iff head_kind is angle_input")

    def copy(self) -> "SpartaModel":
        return SpartaModel(
            head_kind=self.head_kind,
            trunk=self.trunk.copy(),
            head=self.head.copy(),
            angle_embed=self.angle_embed.copy() if self.angle_embed else None,
            bins=self.bins,
            max_frequency=self.max_frequency,
            geometry=self.geometry,
            positivity_floor=self.positivity_floor,
        )


def build_model(
    head_kind: str,
    bins: int = 8,
    max_frequency: int = 3,
    geometry: BinGeometry = DEFAULT_GEOMETRY,
    positivity_floor: float = DEFAULT_POSITIVITY_FLOOR,
    seed: int = 0,
    weight_init_scale: float = DEFAULT_WEIGHT_INIT_SCALE,
) -> SpartaModel:
    """Seeded model: trunk is always FEATURE_DIM -> 512 -> 256 with relu."""
    rng = np.random.default_rng(seed)
    trunk = build_network(
        [FEATURE_DIM, TRUNK_HIDDEN, TRUNK_OUT], ["relu", "relu"], rng, weight_init_scale
    )
    angle_embed = None
    if head_kind == "sparta":
        head = build_network(
            [TRUNK_OUT, SPARTA_HEAD_HIDDEN, bins * (2 * max_frequency + 1)],
            ["relu", "identity"],
            rng,
            weight_init_scale,
        )
    elif head_kind == "angle_input":
        angle_embed = build_network(
            [1, ANGLE_EMBED_HIDDEN, ANGLE_EMBED_DIM], ["relu", "identity"], rng, weight_init_scale
        )
        head = build_network(
            [TRUNK_OUT + ANGLE_EMBED_DIM, ANGLE_DECODER_HIDDEN, bins],
            ["relu", "identity"],
            rng,
            weight_init_scale,
        )
    elif head_kind == "angle_free":
        head = build_network(
            [TRUNK_OUT, ANGLE_FREE_HIDDEN[0], ANGLE_FREE_HIDDEN[1], bins],
            ["relu", "relu", "identity"],
            rng,
            weight_init_scale,
        )
    else:
        raise ValueError(f"unknown head kind {head_kind!r}")
    return SpartaModel(
        head_kind=head_kind,
        trunk=trunk,
        head=head,
        angle_embed=angle_embed,
        bins=bins,
        max_frequency=max_frequency,
        geometry=geometry,
        positivity_floor=positivity_floor,
    )


def forward(m: SpartaModel, g: FeatureGrid, phi: Optional[AngleLike] = None):
    """Model output for one feature grid.

    sparta returns a FourierRiskFunction (no angle allowed here: the angle
    is an argument of the returned function, not of the network).  The other
    heads return a ConcentrationVector; angle_input requires phi and
    angle_free forbids it.
    """
    x = g.flat()
    feat = m.trunk.forward(x)
    if m.head_kind == "sparta":
        if phi is not None:
            raise HeadContractError("sparta head takes no angle; evaluate the returned function instead")
        out = m.head.forward(feat)
        matrix = out.reshape(m.bins, 2 * m.max_frequency + 1)
        return FourierRiskFunction.from_matrix(matrix, positivity_floor=m.positivity_floor)
    if m.head_kind == "angle_input":
        if phi is None:
            raise HeadContractError("angle_input head requires an angle")
        emb = m.angle_embed.forward(np.array([as_radians(phi)]))
        raw = m.head.forward(np.concatenate([feat, emb]))
    else:
        if phi is not None:
            raise HeadContractError("angle_free head takes no angle")
        raw = m.head.forward(feat)
    gamma = softplus(raw) + m.positivity_floor
    return ConcentrationVector(gamma=tuple(gamma))


def predict_probs(m: SpartaModel, g: FeatureGrid, phi: AngleLike) -> np.ndarray:
    """Normalized categorical probabilities at one angle, any head."""
    if m.head_kind == "sparta":
        f = forward(m, g)
        gamma = eval_concentrations_array(f, phi)
    elif m.head_kind == "angle_input":
        gamma = forward(m, g, phi).as_array()
    else:
        gamma = forward(m, g).as_array()
    return gamma / gamma.sum()


# ---------------------------------------------------------------------------
# batched loss / gradients


def _forward_batch(m: SpartaModel, X: np.ndarray, phis: np.ndarray):
    """Probabilities for a batch plus every intermediate needed for backprop."""
    feat, trunk_cache = m.trunk.forward_cached(X)
    ctx = {"trunk_cache": trunk_cache}
    if m.head_kind == "sparta":
        out, head_cache = m.head.forward_cached(feat)
        basis = fourier_basis_many(phis, m.max_frequency)
        coeffs = out.reshape(-1, m.bins, 2 * m.max_frequency + 1)
        z = np.einsum("nbk,nk->nb", coeffs, basis)
        ctx.update(head_cache=head_cache, basis=basis)
    elif m.head_kind == "angle_input":
        emb, embed_cache = m.angle_embed.forward_cached(phis[:, None])
        merged = np.concatenate([feat, emb], axis=1)
        z, head_cache = m.head.forward_cached(merged)
        ctx.update(head_cache=head_cache, embed_cache=embed_cache)
    else:
        z, head_cache = m.head.forward_cached(feat)
        ctx.update(head_cache=head_cache)
    gamma = softplus(z) + m.positivity_floor
    s = gamma.sum(axis=1, keepdims=True)
    probs = gamma / s
    ctx.update(z=z, gamma=gamma, s=s, probs=probs)
    return probs, ctx


def _batch_emd2(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    d = np.cumsum(probs - targets, axis=1)
    return np.sum(d * d, axis=1)


def _batch_emd2_grad(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    d = np.cumsum(probs - targets, axis=1)
    return 2.0 * np.cumsum(d[:, ::-1], axis=1)[:, ::-1]


@dataclass
class ModelGrads:
    """Gradients matching SpartaModel parameters, one (dW, db) per layer."""

    trunk: list
    head: list
    angle_embed: Optional[list] = None


def _backward_batch(m: SpartaModel, ctx: dict, targets: np.ndarray) -> ModelGrads:
    """Gradient of mean EMD^2 over the batch w.r.t. every parameter."""
    n = targets.shape[0]
    probs, gamma, s, z = ctx["probs"], ctx["gamma"], ctx["s"], ctx["z"]
    dp = _batch_emd2_grad(probs, targets) / n
    dgamma = (dp - np.sum(dp * probs, axis=1, keepdims=True)) / s
    dz = dgamma * stable_sigmoid(z)
    if m.head_kind == "sparta":
        dcoeffs = np.einsum("nb,nk->nbk", dz, ctx["basis"])
        dout = dcoeffs.reshape(n, -1)
        dfeat, head_grads = m.head.backward(ctx["head_cache"], dout)
        embed_grads = None
    elif m.head_kind == "angle_input":
        dmerged, head_grads = m.head.backward(ctx["head_cache"], dz)
        dfeat = dmerged[:, :TRUNK_OUT]
        demb = dmerged[:, TRUNK_OUT:]
        _, embed_grads = m.angle_embed.backward(ctx["embed_cache"], demb)
    else:
        dfeat, head_grads = m.head.backward(ctx["head_cache"], dz)
        embed_grads = None
    _, trunk_grads = m.trunk.backward(ctx["trunk_cache"], dfeat)
    return ModelGrads(trunk=trunk_grads, head=head_grads, angle_embed=embed_grads)


def _dataset_arrays(dataset: Dataset):
    X = np.stack([it.grid.flat() for it in dataset.items])
    phis = np.array([it.phi for it in dataset.items])
    T = np.stack([it.target.as_array() for it in dataset.items])
    return X, phis, T


def loss(m: SpartaModel, item: DatasetItem) -> float:
    """EMD^2 between the model's distribution and the item's target."""
    if item.target.geometry != m.geometry:
        raise DimensionError("item geometry does not match model geometry")
    p = predict_probs(m, item.grid, item.phi)
    return emd2_cdf(p, item.target.as_array())


def backward(m: SpartaModel, item: DatasetItem) -> ModelGrads:
    """Analytic gradient of loss(m, item) for every weight and bias."""
    if item.target.geometry != m.geometry:
        raise DimensionError("item geometry does not match model geometry")
    X = item.grid.flat()[None, :]
    phis = np.array([item.phi])
    _, ctx = _forward_batch(m, X, phis)
    return _backward_batch(m, ctx, item.target.as_array()[None, :])


def mean_loss(m: SpartaModel, dataset: Dataset) -> float:
    X, phis, T = _dataset_arrays(dataset)
    probs, _ = _forward_batch(m, X, phis)
    return float(np.mean(_batch_emd2(probs, T)))


@dataclass
class TrainResult:
    model: SpartaModel
    train_loss: List[float]
    heldout_loss: Optional[List[float]] = None


def train(
    m: SpartaModel,
    dataset: Dataset,
    cfg: TrainConfig,
    heldout: Optional[Dataset] = None,
) -> TrainResult:
    """Seeded mini-batch gradient descent; the input model is left untouched."""
    if dataset.geometry != m.geometry:
        raise DimensionError("dataset geometry does not match model geometry")
    model = m.copy()
    X, phis, T = _dataset_arrays(dataset)
    rng = np.random.default_rng(cfg.seed)
    train_trace: List[float] = []
    heldout_trace: List[float] = [] if heldout is not None else None
    for _ in range(cfg.epochs):
        perm = rng.permutation(len(dataset))
        for start in range(0, len(dataset), cfg.batch_size):
            sel = perm[start : start + cfg.batch_size]
            _, ctx = _forward_batch(model, X[sel], phis[sel])
            grads = _backward_batch(model, ctx, T[sel])
            model.trunk.apply_gradients(grads.trunk, cfg.learning_rate)
            model.head.apply_gradients(grads.head, cfg.learning_rate)
            if grads.angle_embed is not None:
                model.angle_embed.apply_gradients(grads.angle_embed, cfg.learning_rate)
        probs, _ = _forward_batch(model, X, phis)
        epoch_loss = float(np.mean(_batch_emd2(probs, T)))
        if not math.isfinite(epoch_loss):
            raise TrainingDiverged(f"loss became {epoch_loss} after epoch {len(train_trace) + 1}")
        train_trace.append(epoch_loss)
        if heldout is not None:
            heldout_trace.append(mean_loss(model, heldout))
    return TrainResult(model=model, train_loss=train_trace, heldout_loss=heldout_trace)


# ---------------------------------------------------------------------------
# direct per-patch fitting


def _softplus_inverse(y: np.ndarray) -> np.ndarray:
    return np.log(np.expm1(y))


def fit_patch_direct(
    samples: Sequence[Tuple[AngleLike, RiskDistribution]],
    n: int,
    B: int,
    cfg: TrainConfig,
    return_trace: bool = False,
):
    """Fit a Fourier risk function straight to (angle, distribution) samples.

    Coefficients start at the least-squares solve of the pre-activation
    values implied by the targets, then full-batch gradient descent on the
    B * (2n + 1) coefficients polishes the mean EMD^2 to the sampled
    distributions.  Nothing is randomized, so the result is deterministic.
    """
    if not samples:
        raise UnderdeterminedFit("no samples")
    phis = np.array([as_radians(phi) for phi, _ in samples])
    targets = np.stack([d.as_array() for _, d in samples])
    if targets.shape[1] != B:
        raise DimensionError(f"targets have {targets.shape[1]} bins, expected {B}")
    if len(np.unique(phis)) < 2 * n + 1:
        raise UnderdeterminedFit(
            f"need >= {2 * n + 1} distinct angles for max_frequency {n}, "
            f"got {len(np.unique(phis))}"
        )
    basis = fourier_basis_many(phis, n)
    floor = DEFAULT_POSITIVITY_FLOOR
    # warm start: invert normalize/softplus at a neutral total concentration,
    # clamp empty bins, and solve the linear system in pre-activation space
    scale = B * math.log(2.0)
    z_target = _softplus_inverse(np.clip(targets * scale, 1e-4, None))
    z_target = np.clip(z_target, -9.0, None)
    coeffs = np.linalg.lstsq(basis, z_target, rcond=None)[0].T
    count = len(samples)
    trace: List[float] = []
    for _ in range(cfg.epochs):
        z = basis @ coeffs.T
        gamma = softplus(z) + floor
        s = gamma.sum(axis=1, keepdims=True)
        probs = gamma / s
        dp = _batch_emd2_grad(probs, targets) / count
        dgamma = (dp - np.sum(dp * probs, axis=1, keepdims=True)) / s
        dz = dgamma * stable_sigmoid(z)
        coeffs -= cfg.learning_rate * (dz.T @ basis)
        if return_trace:
            trace.append(float(np.mean(_batch_emd2(probs, targets))))
    fn = FourierRiskFunction.from_matrix(coeffs, positivity_floor=floor)
    if return_trace:
        return fn, trace
    return fn


# ---------------------------------------------------------------------------
# serialization


def model_to_dict(m: SpartaModel) -> dict:
    data = {
        "version": 1,
        "head_kind": m.head_kind,
        "bins": m.bins,
        "max_frequency": m.max_frequency,
        "geometry": {"num_bins": m.geometry.num_bins, "lower": m.geometry.lower, "upper": m.geometry.upper},
        "positivity_floor": m.positivity_floor,
        "trunk": network_to_dict(m.trunk),
        "head": network_to_dict(m.head),
    }
    if m.angle_embed is not None:
        data["angle_embed"] = network_to_dict(m.angle_embed)
    return data


def model_from_dict(data: dict) -> SpartaModel:
    try:
        if data["version"] != 1:
            raise FormatError(f"unsupported checkpoint version {data['version']!r}")
        geo = data["geometry"]
        return SpartaModel(
            head_kind=data["head_kind"],
            trunk=network_from_dict(data["trunk"]),
            head=network_from_dict(data["head"]),
            angle_embed=network_from_dict(data["angle_embed"]) if "angle_embed" in data else None,
            bins=data["bins"],
            max_frequency=data["max_frequency"],
            geometry=BinGeometry(num_bins=geo["num_bins"], lower=geo["lower"], upper=geo["upper"]),
            positivity_floor=data["positivity_floor"],
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed checkpoint payload: {exc}") from exc


def save_model(m: SpartaModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(m), fh)


def load_model(path) -> SpartaModel:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"not a checkpoint file: {exc}") from exc
    return model_from_dict(data)


def dataset_to_jsonl(dataset: Dataset, path) -> None:
    with open(path, "w") as fh:
        for it in dataset.items:
            fh.write(
                json.dumps(
                    {
                        "grid": [float(v) for v in it.grid.flat()],
                        "phi": it.phi,
                        "target": distribution_to_dict(it.target),
                    }
                )
            )
            fh.write("\n")


def dataset_from_jsonl(path) -> Dataset:
    items = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                grid = FeatureGrid(
                    cells=np.asarray(rec["grid"], dtype=float).reshape(GRID_DIM, GRID_DIM, NUM_CHANNELS)
                )
                items.append(
                    DatasetItem(
                        grid=grid, phi=rec["phi"], target=distribution_from_dict(rec["target"])
                    )
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise FormatError(f"bad dataset line {line_no}: {exc}") from exc
    if not items:
        raise FormatError("dataset file holds no items")
    return Dataset(items=items)
