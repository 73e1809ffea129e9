"""Joint teacher/student training loop with SGD + momentum + weight decay."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .competition import REASONS, Reason, Schedule, compete_arrays, reason_fractions, threshold
from .data import BatchSampler, Domain, derive_seed, generate, rng_stream, with_seed
from .harness.config import ExperimentConfig
from .losses import (LossWeights, domain_loss_from_logits, reported_objective,
                     source_cls_loss, student_loss, total_loss)
from .networks import (StudentNet, TeacherNet, build_student, build_teacher, predict_arrays,
                       student_forward, teacher_forward)

# The loss weight lambda already scales the domain term for both players, so
# the reversal layer itself only flips the sign.
GRL_COEFF = 1.0

METRIC_COLUMNS = (
    "step", "threshold", "teacher_loss", "student_loss", "teacher_acc", "student_acc",
    "pl_teacher_acc", "pl_student_acc", "pl_winner_acc",
    "frac_teacher_over_threshold", "frac_teacher_higher_conf", "frac_student_wins",
)
_FRAC_COLUMNS = dict(zip(REASONS, METRIC_COLUMNS[-3:]))


class TrainingDiverged(FloatingPointError):
    pass


class SGD:
    """Momentum SGD with L2 weight decay folded into the velocity.

    ``v <- momentum * v + grad + weight_decay * param``; ``param <- param - lr * v``.
    Each param group carries its own learning rate.
    """

    def __init__(self, groups: list[tuple[list[Tensor], float]], momentum: float = 0.95,
                 weight_decay: float = 0.0005):
        if not 0 <= momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        if weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {weight_decay}")
        self.groups = [(list(params), float(lr)) for params, lr in groups]
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {id(p): np.zeros_like(p.data) for params, _ in self.groups for p in params}

    @property
    def params(self) -> list[Tensor]:
        return [p for params, _ in self.groups for p in params]

    def step(self, lr_factor: float = 1.0) -> None:
        for params, lr in self.groups:
            for p in params:
                sgd_update(p, self.velocity[id(p)], lr * lr_factor, self.momentum, self.weight_decay)

    def zero_grad(self) -> None:
        ad.zero_grad(self.params)


def sgd_update(p: Tensor, v: np.ndarray, lr: float, momentum: float, weight_decay: float) -> None:
    v *= momentum
    v += p.grad
    if weight_decay:
        v += weight_decay * p.data
    p.data -= lr * v


@dataclass
class TrainState:
    teacher: TeacherNet
    student: StudentNet | None
    weights: LossWeights
    schedule: Schedule
    teacher_opt: SGD
    student_opt: SGD | None
    step: int = 0
    lr_decay: str = "none"

    def lr_factor(self) -> float:
        if self.lr_decay == "none":
            return 1.0
        p = self.step / self.schedule.total_steps
        return (1.0 + 10.0 * p) ** -0.75

    @property
    def total_steps(self) -> int:
        return self.schedule.total_steps


@dataclass
class StepMetrics:
    step: int
    threshold: float
    teacher_cls_loss: float
    domain_loss: float
    student_loss: float
    objective: float
    reason_counts: dict[Reason, int] = field(default_factory=dict)
    teacher_mean_conf: float = float("nan")
    student_mean_conf: float = float("nan")
    agreement: float = float("nan")


def _check_finite(**components) -> None:
    for name, t in components.items():
        if t is not None and not np.isfinite(t.data).all():
            raise TrainingDiverged(f"non-finite {name} ({t.item()!r})")


def train_step(state: TrainState, source_batch, target_batch) -> StepMetrics:
    """One iteration of the joint loop on a (source, target) minibatch pair.

    The teacher's pseudo-labels come from the same forward pass that feeds its
    loss, i.e. from its parameters before this step's update.
    """
    _, xs_np, ys = source_batch
    _, xt_np, _ = target_batch
    if ys is None:
        raise ValueError("source batch must carry labels")
    for name, x in (("source batch", xs_np), ("target batch", xt_np)):
        if not np.isfinite(x).all():
            raise ValueError(f"non-finite values in the {name}")
    xs, xt = Tensor(xs_np), Tensor(xt_np)

    out = teacher_forward(state.teacher, xs, xt, GRL_COEFF)
    lg1 = source_cls_loss(out.source_logits, ys)
    ld1 = domain_loss_from_logits(out.source_domain_logits, out.target_domain_logits)
    y1, p1 = predict_arrays(out.target_logits)

    tp = threshold(state.step, state.schedule)
    lg2 = None
    stats: dict = {"teacher_mean_conf": float(p1.mean())}
    if state.student is not None:
        logits2 = student_forward(state.student, xt)
        y2, p2 = predict_arrays(logits2)
        chosen, reason = compete_arrays(y1, p1, y2, p2, tp)
        lg2 = student_loss(logits2, chosen)
        counts = np.bincount(reason, minlength=len(REASONS))
        stats.update(reason_counts={r: int(c) for r, c in zip(REASONS, counts)},
                     student_mean_conf=float(p2.mean()), agreement=float(np.mean(y1 == y2)))

    _check_finite(teacher_classification_loss=lg1, teacher_domain_loss=ld1, student_loss=lg2)
    loss = total_loss(lg1, ld1, lg2, state.weights)
    try:
        ad.backward(loss)
    except FloatingPointError as exc:
        raise TrainingDiverged(f"non-finite gradient at step {state.step}: {exc}") from None

    factor = state.lr_factor()
    state.teacher_opt.step(factor)
    state.teacher_opt.zero_grad()
    if state.student_opt is not None:
        state.student_opt.step(factor)
        state.student_opt.zero_grad()
    _check_params(state)

    metrics = StepMetrics(
        step=state.step, threshold=tp, teacher_cls_loss=lg1.item(), domain_loss=ld1.item(),
        student_loss=float("nan") if lg2 is None else lg2.item(),
        objective=reported_objective(lg1.item(), ld1.item(), None if lg2 is None else lg2.item(), state.weights),
        **stats,
    )
    state.step += 1
    return metrics


def _check_params(state: TrainState) -> None:
    nets = {"teacher": state.teacher}
    if state.student is not None:
        nets["student"] = state.student
    for label, net in nets.items():
        for name, p in net.named_parameters().items():
            if not np.isfinite(p.data).all():
                raise TrainingDiverged(f"{label} parameter {name} became non-finite at step {state.step}")


def evaluate(state: TrainState, source: Domain, target: Domain) -> dict:
    """Metrics row on the full labeled source/target sets at the current step.

    This is the only place target labels are read.
    """
    w = state.weights
    nan = float("nan")
    row = dict.fromkeys(METRIC_COLUMNS, nan)
    tp = threshold(state.step, state.schedule)
    with ad.no_grad():
        out = teacher_forward(state.teacher, Tensor(source.xs), Tensor(target.xs), GRL_COEFF)
        lg1 = source_cls_loss(out.source_logits, source.ys).item()
        ld1 = domain_loss_from_logits(out.source_domain_logits, out.target_domain_logits).item()
        y1, p1 = predict_arrays(out.target_logits)
        teacher_acc = float(np.mean(y1 == target.ys))
        row.update(step=state.step, threshold=tp, teacher_loss=reported_objective(lg1, ld1, None, w),
                   teacher_acc=teacher_acc, pl_teacher_acc=teacher_acc)
        if state.student is not None:
            logits2 = student_forward(state.student, Tensor(target.xs))
            y2, p2 = predict_arrays(logits2)
            chosen, reason = compete_arrays(y1, p1, y2, p2, tp)
            student_acc = float(np.mean(y2 == target.ys))
            row.update(student_loss=student_loss(logits2, chosen).item(), student_acc=student_acc,
                       pl_student_acc=student_acc, pl_winner_acc=float(np.mean(chosen == target.ys)))
            for r, frac in reason_fractions(reason).items():
                row[_FRAC_COLUMNS[r]] = float(frac)
    return row


@dataclass
class RunResult:
    config: ExperimentConfig
    history: list[dict]
    final_teacher_acc: float
    final_student_acc: float
    wallclock_s: float
    final_params: dict[str, np.ndarray]
    dataset_seed: int

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.history], dtype=np.float64)


def build_state(config: ExperimentConfig, input_dim: int, num_classes: int) -> TrainState:
    seed = config.seed
    teacher = build_teacher(input_dim, num_classes, config.variant, config.architecture,
                            rng_stream(seed, "init-teacher"))
    opt = config.optimizer
    backbone_lr = opt.lr * opt.backbone_lr_scale
    teacher_opt = SGD([(teacher.F1.parameters(), backbone_lr),
                       (teacher.G1.parameters() + teacher.D1.parameters(), opt.lr)],
                      opt.momentum, opt.weight_decay)
    student = student_opt = None
    if config.student:
        student = build_student(input_dim, num_classes, config.architecture, rng_stream(seed, "init-student"))
        student_opt = SGD([(student.F2.parameters(), backbone_lr), (student.G2.parameters(), opt.lr)],
                          opt.momentum, opt.weight_decay)
    schedule = Schedule(config.delta, max(config.total_steps, 1))
    return TrainState(teacher, student, config.weights, schedule, teacher_opt, student_opt,
                      lr_decay=opt.lr_decay)


def resolve_dataset(config: ExperimentConfig):
    spec = config.dataset
    if spec.seed is None:
        spec = with_seed(spec, derive_seed(config.seed, "generation"))
    return spec


def run(config: ExperimentConfig,
        callback: Callable[[TrainState, StepMetrics], None] | None = None) -> RunResult:
    """Train for ``config.total_steps`` steps, evaluating every ``eval_interval`` steps.

    A row is logged at step 0, at every multiple of ``eval_interval`` and at
    the final step.  ``callback(state, metrics)`` runs after every step.
    """
    t0 = time.perf_counter()
    spec = resolve_dataset(config)
    source, target = generate(spec)
    num_classes = spec.classes
    state = build_state(config, source.dim, num_classes)

    src_sampler = BatchSampler(source, config.batch_source, rng_stream(config.seed, "source-sampling"))
    tgt_sampler = BatchSampler(target.unlabeled(), config.batch_target, rng_stream(config.seed, "target-sampling"))

    history = [evaluate(state, source, target)]
    for _ in range(config.total_steps):
        metrics = train_step(state, src_sampler.next_batch(), tgt_sampler.next_batch())
        if callback is not None:
            callback(state, metrics)
        if state.step % config.eval_interval == 0 or state.step == config.total_steps:
            history.append(evaluate(state, source, target))

    params = {f"teacher.{k}": v.data.copy() for k, v in state.teacher.named_parameters().items()}
    if state.student is not None:
        params.update({f"student.{k}": v.data.copy() for k, v in state.student.named_parameters().items()})
    last = history[-1]
    return RunResult(config, history, last["teacher_acc"], last["student_acc"],
                     time.perf_counter() - t0, params, spec.seed)
