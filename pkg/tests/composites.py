"""Gradient checks of the full training objectives against finite differences.

Everything upstream of the reversal layer (F1, G1, and the student) is
checked against the objective as written, ``lg1 - lam*ld1 + beta*lg2``.  The
discriminator sits downstream of the reversal, so its gradient is checked
against the surrogate ``lg1 + lam*ld1 + beta*lg2`` that it actually descends.
"""

import numpy as np

from gradcheck import numerical_grad, relative_error
from tsc_uda import autodiff as ad
from tsc_uda.autodiff import Tensor
from tsc_uda.competition import compete_arrays
from tsc_uda.data import rng_stream
from tsc_uda.losses import (LossWeights, domain_loss_from_logits, reported_objective, source_cls_loss,
                            student_loss, total_loss)
from tsc_uda.networks import (Architecture, build_student, build_teacher, predict_arrays, student_forward,
                              teacher_forward)
from tsc_uda.trainer import GRL_COEFF

# small but not trivial: every layer type is present
ARCH = dict(feature_hidden=(6,), feature_dim=4, classifier_hidden=(), disc_hidden=(5,))


def setup(objective: str, variant: str = "DANN", activation: str = "tanh", seed: int = 0, k: int = 3):
    """Random nets and a 4-sample batch for ``objective`` in {"teacher", "student", "overall"}."""
    rng = rng_stream(seed, "composite")
    arch = Architecture(activation=activation, **ARCH)
    teacher = build_teacher(2, k, variant, arch, rng) if objective != "student" else None
    student = build_student(2, k, arch, rng) if objective != "teacher" else None
    xs, xt = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    ys = rng.integers(0, k, size=4)
    weights = LossWeights(lam=1.0, beta=0.3)
    labels = None
    if student is not None:
        # pseudo-labels are constants of the step: pick them once, from a real competition
        y2, p2 = predict_arrays(student_forward(student, Tensor(xt)))
        if teacher is not None:
            y1, p1 = predict_arrays(teacher_forward(teacher, Tensor(xs), Tensor(xt)).target_logits)
        else:
            y1, p1 = rng.integers(0, k, size=4), rng.uniform(0.3, 1.0, size=4)
        labels, _ = compete_arrays(y1, p1, y2, p2, 0.7)
    return teacher, student, xs, ys, xt, labels, weights


def _parts(teacher, student, xs, ys, xt, labels):
    lg1 = ld1 = lg2 = None
    if teacher is not None:
        out = teacher_forward(teacher, Tensor(xs), Tensor(xt), GRL_COEFF)
        lg1 = source_cls_loss(out.source_logits, ys)
        ld1 = domain_loss_from_logits(out.source_domain_logits, out.target_domain_logits)
    if student is not None:
        lg2 = student_loss(student_forward(student, Tensor(xt)), labels)
    return lg1, ld1, lg2


def _objective_and_surrogate(parts, w):
    lg1, ld1, lg2 = parts
    if lg1 is None:
        # the student objective alone, beta * lg2
        s = ad.scale(lg2, w.beta)
        return s.item(), s
    value = reported_objective(lg1.item(), ld1.item(), None if lg2 is None else lg2.item(), w)
    return value, total_loss(lg1, ld1, lg2, w)


def check(objective: str, **kw) -> dict[str, float]:
    """Max relative error per named parameter; the caller asserts the tolerance."""
    teacher, student, xs, ys, xt, labels, w = setup(objective, **kw)
    named = {}
    if teacher is not None:
        named.update({f"teacher.{n}": p for n, p in teacher.named_parameters().items()})
    if student is not None:
        named.update({f"student.{n}": p for n, p in student.named_parameters().items()})
    params = list(named.values())
    for p in params:
        p.requires_grad = True

    ad.zero_grad(params)
    _, surrogate = _objective_and_surrogate(_parts(teacher, student, xs, ys, xt, labels), w)
    ad.backward(surrogate)

    def reported():
        return _objective_and_surrogate(_parts(teacher, student, xs, ys, xt, labels), w)[0]

    def descended():
        return _objective_and_surrogate(_parts(teacher, student, xs, ys, xt, labels), w)[1].item()

    errors = {}
    for name, p in named.items():
        fn = descended if ".D1." in name else reported
        errors[name] = float(relative_error(p.grad, numerical_grad(fn, p.data)).max())
    return errors
