"""Feature extractor / classifier / discriminator MLPs and the teacher and student nets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

ACTIVATIONS = {"relu": ad.relu, "tanh": ad.tanh}
FINAL_ACTIVATIONS = ("none", "sigmoid")
VARIANTS = ("DANN", "CDAN")


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int
    activation: str = "relu"
    final_activation: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(int(d) <= 0 for d in dims):
            raise ValueError(f"MlpSpec dims must be positive, got {dims}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {sorted(ACTIVATIONS)}, got {self.activation!r}")
        if self.final_activation not in FINAL_ACTIVATIONS:
            raise ValueError(f"final_activation must be one of {FINAL_ACTIVATIONS}, got {self.final_activation!r}")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)


class Mlp:
    """Stack of affine layers; ``spec.activation`` between layers, ``final_activation`` at the end."""

    def __init__(self, spec: MlpSpec, rng: np.random.Generator):
        self.spec = spec
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for fan_in, fan_out in zip(spec.dims[:-1], spec.dims[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(Tensor(rng.uniform(-bound, bound, (fan_in, fan_out)), requires_grad=True))
            self.biases.append(Tensor(np.zeros(fan_out), requires_grad=True))

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ValueError(f"expected input of shape (b, {self.spec.input_dim}), got {x.shape}")
        act = ACTIVATIONS[self.spec.activation]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = ad.add(ad.matmul(x, w), b)
            if i < last:
                x = act(x)
        if self.spec.final_activation == "sigmoid":
            x = ad.sigmoid(x)
        return x

    def parameters(self) -> list[Tensor]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


@dataclass(frozen=True)
class Architecture:
    """Widths for the desk-scale F / G / D networks."""

    feature_hidden: tuple[int, ...] = (64,)
    feature_dim: int = 32
    classifier_hidden: tuple[int, ...] = ()
    disc_hidden: tuple[int, ...] = (32,)
    # bounded features: with relu, F can grow its features without limit while
    # ascending the domain loss, and a constant-rate run blows up
    activation: str = "tanh"

    def __post_init__(self):
        for name in ("feature_hidden", "classifier_hidden", "disc_hidden"):
            dims = tuple(int(d) for d in getattr(self, name))
            if any(d <= 0 for d in dims):
                raise ValueError(f"{name} widths must be positive, got {dims}")
            object.__setattr__(self, name, dims)
        if self.feature_dim <= 0:
            raise ValueError(f"feature_dim must be positive, got {self.feature_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {sorted(ACTIVATIONS)}, got {self.activation!r}")

    def feature_spec(self, input_dim: int) -> MlpSpec:
        return MlpSpec(input_dim, self.feature_hidden, self.feature_dim, self.activation)

    def classifier_spec(self, num_classes: int) -> MlpSpec:
        return MlpSpec(self.feature_dim, self.classifier_hidden, num_classes, self.activation)

    def disc_spec(self, disc_input: int) -> MlpSpec:
        # D ends in a logit; the sigmoid is applied by the loss (or TeacherOutputs)
        return MlpSpec(disc_input, self.disc_hidden, 1, self.activation, "none")


@dataclass
class TeacherNet:
    F1: Mlp
    G1: Mlp
    D1: Mlp
    variant: str

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        d_f, k = self.F1.spec.output_dim, self.G1.spec.output_dim
        want = d_f if self.variant == "DANN" else d_f * k
        if self.D1.spec.input_dim != want:
            raise ValueError(f"{self.variant} discriminator needs input width {want}, got {self.D1.spec.input_dim}")

    @property
    def num_classes(self) -> int:
        return self.G1.spec.output_dim

    def parameters(self) -> list[Tensor]:
        return self.F1.parameters() + self.G1.parameters() + self.D1.parameters()

    def named_parameters(self) -> dict[str, Tensor]:
        return _named({"F1": self.F1, "G1": self.G1, "D1": self.D1})


@dataclass
class StudentNet:
    F2: Mlp
    G2: Mlp

    def parameters(self) -> list[Tensor]:
        return self.F2.parameters() + self.G2.parameters()

    def named_parameters(self) -> dict[str, Tensor]:
        return _named({"F2": self.F2, "G2": self.G2})


def _named(nets: dict[str, Mlp]) -> dict[str, Tensor]:
    out = {}
    for name, net in nets.items():
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            out[f"{name}.{i}.weight"] = w
            out[f"{name}.{i}.bias"] = b
    return out


def build_teacher(input_dim: int, num_classes: int, variant: str, arch: Architecture,
                  rng: np.random.Generator) -> TeacherNet:
    disc_in = arch.feature_dim if variant == "DANN" else arch.feature_dim * num_classes
    F1 = Mlp(arch.feature_spec(input_dim), rng)
    G1 = Mlp(arch.classifier_spec(num_classes), rng)
    D1 = Mlp(arch.disc_spec(disc_in), rng)
    return TeacherNet(F1, G1, D1, variant)


def build_student(input_dim: int, num_classes: int, arch: Architecture,
                  rng: np.random.Generator) -> StudentNet:
    return StudentNet(Mlp(arch.feature_spec(input_dim), rng), Mlp(arch.classifier_spec(num_classes), rng))


def multilinear(f: Tensor, g: Tensor) -> Tensor:
    """Row-wise flattened outer product: row i is ``f_i (x) g_i`` of width d_f*K."""
    if f.data.ndim != 2 or g.data.ndim != 2 or f.shape[0] != g.shape[0]:
        raise ValueError(f"multilinear: incompatible shapes {f.shape} and {g.shape}")
    F, G = f.data, g.data
    b, d_f = F.shape
    k = G.shape[1]
    out = (F[:, :, None] * G[:, None, :]).reshape(b, d_f * k)

    def bw(up):
        up = up.reshape(b, d_f, k)
        return (np.einsum("bij,bj->bi", up, G) if f.requires_grad else None,
                np.einsum("bij,bi->bj", up, F) if g.requires_grad else None)

    return ad.make_node(out, (f, g), bw, "multilinear")


class TeacherOutputs(NamedTuple):
    source_logits: Tensor
    target_logits: Tensor
    source_domain_logits: Tensor
    target_domain_logits: Tensor

    @property
    def source_domain(self) -> Tensor:
        """Discriminator probability of "source" on the source batch."""
        return ad.sigmoid(self.source_domain_logits)

    @property
    def target_domain(self) -> Tensor:
        return ad.sigmoid(self.target_domain_logits)


def _domain_logits(net: TeacherNet, f: Tensor, logits: Tensor, grl_coeff: float) -> Tensor:
    h = f if net.variant == "DANN" else multilinear(f, ad.softmax(logits))
    d = net.D1(ad.grl(h, grl_coeff))
    return ad.reshape(d, (d.shape[0],))


def teacher_forward(net: TeacherNet, xs: Tensor, xt: Tensor, grl_coeff: float = 1.0) -> TeacherOutputs:
    """Classifier logits for both domains and discriminator logits behind a GRL.

    Domain scores are ``D1(grl(f))`` for DANN and ``D1(grl(f (x) softmax(logits)))``
    for CDAN; gradients flow through both factors of the multilinear map.
    """
    fs, ft = net.F1(xs), net.F1(xt)
    ls, lt = net.G1(fs), net.G1(ft)
    return TeacherOutputs(ls, lt, _domain_logits(net, fs, ls, grl_coeff), _domain_logits(net, ft, lt, grl_coeff))


def student_forward(net: StudentNet, xt: Tensor) -> Tensor:
    return net.G2(net.F2(xt))


class PseudoLabel(NamedTuple):
    label: int
    confidence: float


def predict_arrays(logits) -> tuple[np.ndarray, np.ndarray]:
    """(argmax class, max softmax prob) per row; ``np.argmax`` keeps the lowest index on ties."""
    z = logits.data if isinstance(logits, Tensor) else np.asarray(logits, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] < 2:
        raise ValueError(f"predict expects b x K logits with K >= 2, got {z.shape}")
    probs = ad._row_softmax(z)
    labels = probs.argmax(axis=1)
    return labels, probs[np.arange(len(z)), labels]


def predict(logits) -> list[PseudoLabel]:
    labels, conf = predict_arrays(logits)
    return [PseudoLabel(int(y), float(p)) for y, p in zip(labels, conf)]
