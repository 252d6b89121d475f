import numpy as np
import pytest
import torch

from neuralpolar.attention import (
    AttentionBlock,
    AttentionDecoderKernel,
    AttentionDecoderPositionNet,
    scaled_dot_attention,
)
from neuralpolar.errors import ConfigurationError, DomainError


def test_single_token_attention_is_value():
    q = torch.randn(1, 8)
    k = torch.randn(1, 8)
    v = torch.randn(1, 8)
    assert torch.allclose(scaled_dot_attention(q, k, v), v)


def test_zero_query_gives_uniform_weights():
    t = 6
    k = torch.randn(t, 4)
    v = torch.randn(t, 4)
    out = scaled_dot_attention(torch.zeros(t, 4), k, v)
    expected = v.mean(dim=0).expand(t, 4)
    assert torch.allclose(out, expected, atol=1e-6)


def test_attention_rows_sum_to_one():
    torch.manual_seed(0)
    q, k = torch.randn(2, 9, 16), torch.randn(2, 9, 16)
    scores = torch.softmax(q @ k.transpose(-2, -1) / 4.0, dim=-1)
    assert torch.allclose(scores.sum(dim=-1), torch.ones(2, 9), atol=1e-6)


def test_attention_rejects_empty_sequence():
    with pytest.raises(DomainError):
        scaled_dot_attention(torch.zeros(0, 4), torch.zeros(0, 4), torch.zeros(0, 4))


def test_multi_head_shape_preserved():
    blk = AttentionBlock(hidden=128, heads=4, d_k=32)
    x = torch.randn(10, 128)
    assert blk.multi_head(x).shape == (10, 128)
    batched = torch.randn(3, 7, 128)
    assert blk.multi_head(batched).shape == (3, 7, 128)


def test_multi_head_equal_tokens_equal_outputs():
    torch.manual_seed(1)
    blk = AttentionBlock(hidden=16, heads=4, d_k=4)
    row = torch.randn(1, 16)
    x = row.expand(5, 16)
    out = blk.multi_head(x)
    assert torch.allclose(out, out[0].expand(5, 16), atol=1e-6)


def test_multi_head_zero_projections():
    blk = AttentionBlock(hidden=16, heads=4, d_k=4)
    with torch.no_grad():
        for p in (blk.q_proj.weight, blk.k_proj.weight, blk.v_proj.weight, blk.out_proj.weight):
            p.zero_()
    assert torch.equal(blk.multi_head(torch.randn(4, 16)), torch.zeros(4, 16))


def test_multi_head_width_mismatch():
    blk = AttentionBlock(hidden=16, heads=4, d_k=4)
    with pytest.raises(ConfigurationError):
        blk.multi_head(torch.randn(4, 8))


def test_attention_params_invariant():
    with pytest.raises(ConfigurationError):
        AttentionBlock(hidden=128, heads=4, d_k=16)


def test_sa_block_residual_only_is_layer_norm():
    torch.manual_seed(2)
    blk = AttentionBlock(hidden=16, heads=4, d_k=4)
    blk.eval()
    with torch.no_grad():
        for p in (blk.q_proj.weight, blk.k_proj.weight, blk.v_proj.weight, blk.out_proj.weight):
            p.zero_()
    x = torch.randn(5, 16)
    assert torch.allclose(blk(x), blk.layer_norm(x), atol=1e-7)


def test_sa_block_pre_gain_normalization():
    torch.manual_seed(3)
    blk = AttentionBlock(hidden=64, heads=4, d_k=16)
    blk.eval()
    x = torch.randn(9, 64) * 3 + 1
    out = blk(x)  # gain 1, bias 0 at init, so output is the pre-gain values
    assert out.mean(dim=-1).abs().max() < 1e-5
    assert (out.var(dim=-1, unbiased=False) - 1).abs().max() < 1e-4


def test_sa_block_shape_preserved_various_lengths():
    blk = AttentionBlock(hidden=32, heads=4, d_k=8)
    blk.eval()
    for t in (1, 4, 20):
        x = torch.randn(t, 32)
        assert blk(x).shape == (t, 32)


def test_sa_block_training_dropout_reproducible():
    torch.manual_seed(4)
    blk = AttentionBlock(hidden=16, heads=4, d_k=4, dropout_rate=0.5)
    blk.train()
    x = torch.randn(6, 16)
    blk.dropout_generator = torch.Generator().manual_seed(11)
    a = blk(x)
    blk.dropout_generator = torch.Generator().manual_seed(11)
    b = blk(x)
    assert torch.equal(a, b)
    blk.dropout_generator = torch.Generator().manual_seed(12)
    c = blk(x)
    assert not torch.equal(a, c)


def test_sa_block_eval_mode_ignores_dropout():
    torch.manual_seed(5)
    blk = AttentionBlock(hidden=16, heads=4, d_k=4, dropout_rate=0.9)
    blk.eval()
    x = torch.randn(6, 16)
    assert torch.equal(blk(x), blk(x))


def test_position_net_zero_weights_gives_zero_logit_and_bit_zero():
    net = AttentionDecoderPositionNet(4, 2, hidden=16, heads=4, d_k=4)
    with torch.no_grad():
        for p in net.parameters():
            p.zero_()
    net.eval()
    logit = net(torch.randn(5, 6))
    assert torch.equal(logit, torch.zeros(5))
    # tie rule: logit >= 0 decodes to bit 0
    assert ((logit < 0).long() == 0).all()


def test_position_net_j_zero_consumes_only_channel_llrs():
    net = AttentionDecoderPositionNet(4, 0, hidden=16, heads=4, d_k=4)
    assert net.in_features == 4
    out = net(torch.randn(3, 4))
    assert out.shape == (3,)


def test_position_net_gradients_match_finite_differences():
    torch.manual_seed(6)
    net = AttentionDecoderPositionNet(4, 1, hidden=8, heads=2, d_k=4).double()
    net.eval()
    z = torch.randn(3, 5, dtype=torch.float64)
    logit = net(z).sum()
    logit.backward()
    for name, p in net.named_parameters():
        grad = p.grad.clone()
        flat = p.data.view(-1)
        idxs = range(0, flat.numel(), max(1, flat.numel() // 7))
        for i in idxs:
            eps = 1e-6
            orig = float(flat[i])
            with torch.no_grad():
                flat[i] = orig + eps
                up = net(z).sum().item()
                flat[i] = orig - eps
                down = net(z).sum().item()
                flat[i] = orig
            fd = (up - down) / (2 * eps)
            an = float(grad.view(-1)[i])
            denom = max(abs(fd), abs(an), 1e-8)
            assert abs(fd - an) / denom < 1e-4, f"{name}[{i}]: fd={fd} an={an}"


def test_eval_determinism_bit_identical():
    torch.manual_seed(7)
    kern = AttentionDecoderKernel(4, hidden=16, heads=4, d_k=4)
    kern.eval()
    soft = torch.randn(8, 4)
    prefix = torch.randn(8, 2)
    a = kern.position_forward(2, soft, prefix)
    b = kern.position_forward(2, soft, prefix)
    assert torch.equal(a, b)
