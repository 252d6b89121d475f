import numpy as np
import pytest
import torch

from neuralpolar.errors import ConfigurationError, DomainError
from neuralpolar.kernels import EncoderKernel, MlpDecoderKernel
from neuralpolar.polar import build_info_set, polar_kernel_matrix
from neuralpolar.trees import NeuralCodec, decode_tree, encode_tree, message_to_tree_input


def zero_params(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()


def test_encoder_kernel_zero_weights_alpha_off():
    kern = EncoderKernel(4, hidden=8, alpha=0.0)
    zero_params(kern)
    y = torch.randn(5, 4)
    assert torch.equal(kern(y), torch.zeros(5, 4))


def test_encoder_kernel_zero_weights_residual_only():
    kern = EncoderKernel(4, hidden=8, alpha=1.0)
    zero_params(kern)
    y = torch.randn(5, 4, dtype=torch.float64)
    kern.double()
    g = torch.from_numpy(polar_kernel_matrix(4).astype(np.float64))
    assert torch.allclose(kern(y), y @ g)


def test_encoder_kernel_output_length():
    for ell in (2, 4, 16):
        kern = EncoderKernel(ell, hidden=8)
        out = kern(torch.randn(3, ell))
        assert out.shape == (3, ell)


def test_encoder_kernel_shape_mismatch():
    kern = EncoderKernel(4, hidden=8)
    with pytest.raises(ConfigurationError):
        kern(torch.randn(3, 5))


def test_encoder_kernel_jacobian_at_zero_weights_is_polar_matrix():
    # finite differences of the residual-only kernel; row convention means
    # d out_i / d y_j = G[j, i]
    ell = 4
    kern = EncoderKernel(ell, hidden=8, alpha=1.0).double()
    zero_params(kern)
    g = polar_kernel_matrix(ell).astype(float)
    y0 = torch.randn(1, ell, dtype=torch.float64)
    eps = 1e-6
    jac = np.zeros((ell, ell))
    with torch.no_grad():
        for j in range(ell):
            plus = y0.clone()
            plus[0, j] += eps
            minus = y0.clone()
            minus[0, j] -= eps
            jac[:, j] = ((kern(plus) - kern(minus)) / (2 * eps))[0].numpy()
    np.testing.assert_allclose(jac, g.T, rtol=1e-4, atol=1e-7)


def test_mlp_decoder_kernel_shapes():
    kern = MlpDecoderKernel(4, hidden=16)
    soft = torch.randn(7, 4)
    for j in range(4):
        logit = kern.position_forward(j, soft, torch.randn(7, j))
        assert logit.shape == (7,)
    with pytest.raises(ConfigurationError):
        kern.position_forward(1, soft, torch.randn(7, 3))


# --- tree-level behaviour ---------------------------------------------------


@pytest.fixture(scope="module")
def tiny_config():
    return build_info_set(16, 7, 4, -2.0)


def fresh_codec(cfg, arch="attention", seed=0):
    torch.manual_seed(seed)
    return NeuralCodec(cfg, decoder_arch=arch, enc_hidden=8, dec_hidden=16, heads=4, d_k=4)


def test_tree_node_counts(tiny_config):
    codec = fresh_codec(tiny_config)
    # stage 0: n/ell nodes, stage 1: n/ell^2 nodes
    assert sorted(codec.encoder_nodes.keys()) == ["s0b0", "s0b1", "s0b2", "s0b3", "s1b0"]
    assert sorted(codec.decoder_nodes.keys()) == sorted(codec.encoder_nodes.keys())


def test_residual_only_tree_equals_real_polar_transform(tiny_config):
    codec = fresh_codec(tiny_config)
    zero_params(codec)
    bits = torch.randint(0, 2, (11, 7), generator=torch.Generator().manual_seed(1))
    with torch.no_grad():
        x = codec.encode_raw(bits)
    m = message_to_tree_input(bits, tiny_config)
    g = torch.from_numpy(polar_kernel_matrix(16).astype(np.float32))
    assert torch.allclose(x, m @ g, atol=1e-6)


def test_encode_all_frozen_is_constant():
    cfg = build_info_set(4, 0, 4, 0.0)
    codec = NeuralCodec(cfg, enc_hidden=8, dec_hidden=16, heads=4, d_k=4)
    with torch.no_grad():
        a = codec.encode_raw(torch.zeros(3, 0))
    assert torch.allclose(a, a[0].expand_as(a))


def test_encode_training_mode_unit_power(tiny_config):
    codec = fresh_codec(tiny_config)
    codec.train()
    bits = torch.randint(0, 2, (64, 7), generator=torch.Generator().manual_seed(2))
    x = codec.encode(bits).detach()
    assert abs(float((x**2).mean()) - 1.0) < 1e-6


def test_encode_eval_requires_calibration(tiny_config):
    codec = fresh_codec(tiny_config)
    codec.eval()
    bits = torch.zeros(1, 7, dtype=torch.long)
    with pytest.raises(ConfigurationError):
        codec.encode(bits)
    codec.calibrate_norm(num_samples=256, seed=0)
    x = codec.encode(bits)
    assert x.shape == (1, 16)


def test_decode_shapes_and_frozen_rule(tiny_config):
    codec = fresh_codec(tiny_config)
    codec.eval()
    llr = torch.randn(9, 16, generator=torch.Generator().manual_seed(3)) * 4
    bits, logits = codec.decode(llr)
    assert bits.shape == (9, 7)
    assert logits.shape == (9, 16)
    # frozen positions decode to 0 regardless of input
    full = torch.zeros(9, 16, dtype=torch.long)
    full[:, torch.as_tensor(tiny_config.info_array)] = bits
    assert (full[:, list(tiny_config.frozen_set)] == 0).all()


def test_decode_sign_rule(tiny_config):
    codec = fresh_codec(tiny_config)
    codec.eval()
    llr = torch.randn(30, 16, generator=torch.Generator().manual_seed(4))
    bits, logits = codec.decode(llr)
    info = torch.as_tensor(tiny_config.info_array)
    assert torch.equal(bits, (logits[:, info] < 0).long())


def test_decode_rejects_nan(tiny_config):
    codec = fresh_codec(tiny_config)
    llr = torch.randn(2, 16)
    llr[0, 3] = float("nan")
    with pytest.raises(DomainError):
        codec.decode(llr)


def test_single_kernel_decode_uses_only_channel_llrs():
    cfg = build_info_set(4, 4, 4, 0.0)
    codec = NeuralCodec(cfg, enc_hidden=8, dec_hidden=16, heads=4, d_k=4)
    codec.eval()
    # bit 0's network has input width exactly ell
    assert codec.decoder_nodes["s0b0"].positions[0].in_features == 4
    llr = torch.randn(5, 4)
    bits, _ = codec.decode(llr)
    assert bits.shape == (5, 4)


def test_sequentiality_logits_causal(tiny_config):
    # the logit for bit j may not depend on true values of bits > j
    codec = fresh_codec(tiny_config)
    codec.eval()
    g = torch.Generator().manual_seed(5)
    llr = torch.randn(4, 16, generator=g)
    bits = torch.randint(0, 2, (4, 7), generator=g)
    info = list(tiny_config.info_set)
    for flip_idx in range(1, 7):
        other = bits.clone()
        other[:, flip_idx] ^= 1
        with torch.no_grad():
            _, l1 = codec.decode(llr, teacher_bits=bits)
            _, l2 = codec.decode(llr, teacher_bits=other)
        boundary = info[flip_idx]
        assert torch.allclose(l1[:, :boundary + 1], l2[:, :boundary + 1], atol=1e-7)
        if boundary < 15:
            assert not torch.allclose(l1, l2)  # later logits do react


def test_decode_batch_parallel_consistency(tiny_config):
    codec = fresh_codec(tiny_config)
    codec.eval()
    llr = torch.randn(6, 16, generator=torch.Generator().manual_seed(6))
    with torch.no_grad():
        bits_all, logits_all = codec.decode(llr)
        for i in range(6):
            b, l = codec.decode(llr[i : i + 1])
            assert torch.equal(b, bits_all[i : i + 1])
            assert torch.allclose(l, logits_all[i : i + 1], atol=1e-6)


def test_functional_aliases(tiny_config):
    codec = fresh_codec(tiny_config)
    codec.train()
    bits = torch.randint(0, 2, (8, 7), generator=torch.Generator().manual_seed(7))
    x = encode_tree(bits, codec)
    with torch.no_grad():
        out_bits, _ = decode_tree(torch.randn(8, 16), codec)
    assert x.shape == (8, 16) and out_bits.shape == (8, 7)
