import math

import numpy as np
import pytest
import torch

from neuralpolar.errors import ConfigurationError, DomainError
from neuralpolar.losses import (
    LossConfig,
    SchedulerConfig,
    bce_loss,
    block_loss,
    cosine_warm_restart_lr,
    total_loss,
)


def block_loss_oracle(logits, targets, eps=1e-10):
    # independent route: per-block product of probabilities in plain python
    out = 0.0
    for row_l, row_t in zip(logits, targets):
        prod = 1.0
        for l, t in zip(row_l, row_t):
            p1 = 1.0 / (1.0 + math.exp(-float(l)))
            prod *= p1 if t == 1 else (1.0 - p1)
        out += -math.log(prod + eps)
    return out / len(logits)


def test_bce_zero_logits_is_ln2():
    logits = torch.zeros(4, 3)
    targets = torch.randint(0, 2, (4, 3))
    assert float(bce_loss(logits, targets)) == pytest.approx(math.log(2), abs=1e-7)


def test_bce_confident_correct():
    targets = torch.tensor([[1, 0, 1]])
    logits = torch.tensor([[30.0, -30.0, 30.0]])
    assert float(bce_loss(logits, targets)) < 1e-9


def test_bce_hand_example():
    logits = torch.tensor([[1.0, -1.0]])
    targets = torch.tensor([[1.0, 0.0]])
    expected = -math.log(1.0 / (1.0 + math.exp(-1.0)))
    assert float(bce_loss(logits, targets)) == pytest.approx(expected, abs=1e-6)
    assert expected == pytest.approx(0.3133, abs=1e-4)


def test_block_loss_examples():
    one = LossConfig()
    l = block_loss(torch.tensor([[30.0]]), torch.tensor([[1.0]]), one)
    assert float(l) == pytest.approx(0.0, abs=1e-8)
    l = block_loss(torch.tensor([[0.0]]), torch.tensor([[1.0]]), one)
    assert float(l) == pytest.approx(math.log(2), abs=1e-6)
    # both bits at probability 0.9 -> -log(0.81 + eps)
    logit = math.log(0.9 / 0.1)
    l = block_loss(torch.tensor([[logit, logit]]), torch.tensor([[1.0, 1.0]]), one)
    assert float(l) == pytest.approx(-math.log(0.81), abs=1e-6)
    assert -math.log(0.81) == pytest.approx(0.2107, abs=1e-4)


def test_block_loss_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        b = rng.integers(1, 9)
        k = rng.integers(1, 9)
        logits = rng.normal(0, 3, size=(b, k))
        targets = rng.integers(0, 2, size=(b, k))
        val = float(block_loss(torch.tensor(logits), torch.tensor(targets.astype(float))))
        assert val == pytest.approx(block_loss_oracle(logits, targets), abs=1e-9)


def test_total_is_exact_sum():
    rng = np.random.default_rng(1)
    logits = torch.tensor(rng.normal(0, 2, size=(6, 5)))
    targets = torch.tensor(rng.integers(0, 2, size=(6, 5)).astype(float))
    total = float(total_loss(logits, targets))
    parts = float(bce_loss(logits, targets)) + float(block_loss(logits, targets))
    assert total == pytest.approx(parts, abs=1e-12)


def test_total_zero_logits_single_bit():
    val = float(total_loss(torch.zeros(1, 1), torch.ones(1, 1)))
    assert val == pytest.approx(2 * math.log(2), abs=1e-6)


def test_losses_batch_permutation_invariant():
    rng = np.random.default_rng(2)
    logits = torch.tensor(rng.normal(0, 2, size=(10, 4)))
    targets = torch.tensor(rng.integers(0, 2, size=(10, 4)).astype(float))
    perm = torch.randperm(10, generator=torch.Generator().manual_seed(3))
    for fn in (bce_loss, lambda l, t: block_loss(l, t), lambda l, t: total_loss(l, t)):
        assert float(fn(logits, targets)) == pytest.approx(
            float(fn(logits[perm], targets[perm])), abs=1e-12)


def test_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(4)
    logits = torch.tensor(rng.normal(0, 1.5, size=(3, 4)), requires_grad=True)
    targets = torch.tensor(rng.integers(0, 2, size=(3, 4)).astype(float))
    loss = total_loss(logits, targets)
    loss.backward()
    eps = 1e-6
    for i in range(3):
        for j in range(4):
            with torch.no_grad():
                orig = float(logits[i, j])
                logits[i, j] = orig + eps
                up = float(total_loss(logits, targets))
                logits[i, j] = orig - eps
                down = float(total_loss(logits, targets))
                logits[i, j] = orig
            fd = (up - down) / (2 * eps)
            an = float(logits.grad[i, j])
            assert abs(fd - an) / max(abs(fd), abs(an), 1e-8) < 1e-4


def test_shape_mismatch_raises():
    with pytest.raises(DomainError):
        bce_loss(torch.zeros(2, 3), torch.zeros(3, 2))
    with pytest.raises(DomainError):
        block_loss(torch.zeros(2, 3), torch.zeros(2, 4))


def test_loss_config_validation():
    with pytest.raises(ConfigurationError):
        LossConfig(epsilon=0.0)


# --- scheduler ---------------------------------------------------------------


def test_schedule_starts_at_maximum():
    sched = SchedulerConfig(t0=50, tmult=2, min_lr=1e-5)
    assert cosine_warm_restart_lr(0, 1e-3, sched) == pytest.approx(1e-3)


def test_schedule_minimum_at_period_end():
    sched = SchedulerConfig(t0=50, tmult=2, min_lr=1e-5)
    assert cosine_warm_restart_lr(50, 1e-3, sched) == pytest.approx(1e-5)


def test_schedule_monotone_within_period():
    sched = SchedulerConfig(t0=40, tmult=3, min_lr=1e-6)
    rates = [cosine_warm_restart_lr(s, 1e-3, sched) for s in range(41)]
    assert all(a > b for a, b in zip(rates, rates[1:]))


def test_schedule_restarts_and_grows_periods():
    sched = SchedulerConfig(t0=10, tmult=2, min_lr=1e-6)
    # after the first period ends at 10, the next period spans 20 steps
    assert cosine_warm_restart_lr(11, 1e-3, sched) > cosine_warm_restart_lr(10, 1e-3, sched)
    assert cosine_warm_restart_lr(30, 1e-3, sched) == pytest.approx(1e-6)
    with pytest.raises(DomainError):
        cosine_warm_restart_lr(-1, 1e-3, sched)
