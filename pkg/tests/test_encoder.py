"""Encoder forward/backward: unit norms, dropout semantics, gradient correctness."""

import numpy as np
import pytest

from transcompat.encoder import (
    DegenerateEmbeddingError,
    encode,
    encode_backward,
    encoder_modalities,
    fuse,
    init_encoder_params,
    make_dropout_masks,
)


def fd_gradients(params, modality, features, masks, rate, direction, h=1e-5):
    """Central-difference gradients of L = direction . unit(features)."""
    grads = {}
    for name in [k for k in params if k.startswith(modality + ".")]:
        g = np.zeros_like(params[name])
        flat = params[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = direction @ encode(params, modality, features, masks, rate).units
            flat[i] = orig - h
            down = direction @ encode(params, modality, features, masks, rate).units
            flat[i] = orig
            g.ravel()[i] = (up - down) / (2 * h)
        grads[name] = g
    return grads


class TestInit:
    def test_shapes_and_bounds(self):
        params = init_encoder_params({"visual": 6, "textual": 5}, embed_dim=4, seed=0)
        assert set(params) == {"visual.W0", "visual.b0", "textual.W0", "textual.b0"}
        assert params["visual.W0"].shape == (4, 6)
        assert params["textual.W0"].shape == (4, 5)
        np.testing.assert_array_equal(params["visual.b0"], np.zeros(4))
        assert np.max(np.abs(params["visual.W0"])) <= 1 / np.sqrt(6)
        assert np.max(np.abs(params["textual.W0"])) <= 1 / np.sqrt(5)

    def test_hidden_layer_shapes(self):
        params = init_encoder_params({"visual": 6}, embed_dim=4, hidden_dim=8, seed=0)
        assert params["visual.W0"].shape == (8, 6)
        assert params["visual.W1"].shape == (4, 8)
        assert params["visual.b1"].shape == (4,)
        assert np.max(np.abs(params["visual.W1"])) <= 1 / np.sqrt(8)

    def test_deterministic(self):
        a = init_encoder_params({"visual": 6}, embed_dim=4, seed=3)
        b = init_encoder_params({"visual": 6}, embed_dim=4, seed=3)
        np.testing.assert_array_equal(a["visual.W0"], b["visual.W0"])
        c = init_encoder_params({"visual": 6}, embed_dim=4, seed=4)
        assert np.any(a["visual.W0"] != c["visual.W0"])

    def test_modalities_listing(self):
        params = init_encoder_params({"b": 2, "a": 2}, embed_dim=2, seed=0)
        assert encoder_modalities(params) == ("a", "b")


class TestEncodeForward:
    def test_identity_weights_normalize(self):
        """W = I, b = 0 reduces the encoder to plain l2 normalization."""
        params = {"visual.W0": np.eye(2), "visual.b0": np.zeros(2)}
        out = encode(params, "visual", np.array([3.0, 4.0]))
        np.testing.assert_allclose(out.units, [0.6, 0.8], rtol=0, atol=1e-15)

    def test_unit_norm_random(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            d_in = int(rng.integers(2, 9))
            params = init_encoder_params({"m": d_in}, embed_dim=int(rng.integers(2, 7)), seed=seed)
            f = rng.standard_normal(d_in) * 3
            out = encode(params, "m", f)
            assert abs(np.linalg.norm(out.units) - 1.0) <= 1e-12

    def test_all_dropped_bias_only(self):
        """A full-drop mask leaves z = b, so the output is the normalized bias."""
        params = {"m.W0": np.ones((2, 3)), "m.b0": np.array([0.0, 2.0])}
        out = encode(params, "m", np.ones(3), dropout_masks=np.zeros(3), dropout_rate=0.5)
        np.testing.assert_allclose(out.units, [0.0, 1.0], rtol=0, atol=1e-15)

    def test_all_dropped_zero_bias_degenerate(self):
        params = {"m.W0": np.ones((2, 3)), "m.b0": np.zeros(2)}
        with pytest.raises(DegenerateEmbeddingError, match="norm"):
            encode(params, "m", np.ones(3), dropout_masks=np.zeros(3), dropout_rate=0.5)

    def test_keep_all_mask_matches_no_dropout(self):
        """rate 0 with an all-ones mask is bit-identical to no dropout at all."""
        params = init_encoder_params({"m": 5}, embed_dim=3, seed=1)
        f = np.random.default_rng(1).standard_normal(5)
        plain = encode(params, "m", f)
        masked = encode(params, "m", f, dropout_masks=np.ones(5), dropout_rate=0.0)
        np.testing.assert_array_equal(plain.units, masked.units)

    def test_inverted_dropout_rescales(self):
        """Kept coordinates are scaled by 1/(1-rate)."""
        params = {"m.W0": np.eye(2), "m.b0": np.zeros(2)}
        out = encode(
            params, "m", np.array([1.0, 1.0]),
            dropout_masks=np.array([1.0, 0.0]), dropout_rate=0.5,
        )
        np.testing.assert_allclose(out.units, [1.0, 0.0], rtol=0, atol=1e-15)
        np.testing.assert_allclose(out.cache["f_tilde"], [[2.0, 0.0]])

    def test_mask_shape_mismatch(self):
        params = init_encoder_params({"m": 5}, embed_dim=3, seed=1)
        with pytest.raises(ValueError, match="mask shape"):
            encode(params, "m", np.zeros(5) + 1, dropout_masks=np.ones(4), dropout_rate=0.1)

    def test_batch_matches_singles(self):
        params = init_encoder_params({"m": 6}, embed_dim=4, hidden_dim=5, seed=2)
        rng = np.random.default_rng(2)
        feats = rng.standard_normal((7, 6))
        masks = make_dropout_masks(rng, feats.shape, 0.3)
        batch = encode(params, "m", feats, masks, 0.3)
        for i in range(7):
            # batch GEMM and single-row GEMV may differ in the last ulp
            row = encode(params, "m", feats[i], masks[i], 0.3)
            np.testing.assert_allclose(batch.units[i], row.units, rtol=1e-13, atol=1e-14)

    def test_dropout_mask_rate_bounds(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError, match="rate"):
            make_dropout_masks(rng, (3,), 1.0)
        mask = make_dropout_masks(rng, (1000,), 0.25)
        assert set(np.unique(mask)) <= {0.0, 1.0}
        assert 0.65 < mask.mean() < 0.85


class TestFuse:
    def test_concatenates_in_given_order(self):
        fused = fuse([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
        np.testing.assert_array_equal(fused, [1.0, 0.0, 0.0, 1.0])
        assert abs(np.linalg.norm(fused) - np.sqrt(2)) <= 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            fuse([])


class TestEncodeBackward:
    def test_gradient_tangent_to_sphere(self):
        """L = ||u||^2 / 2 is constant, so all parameter gradients vanish."""
        params = init_encoder_params({"m": 6}, embed_dim=4, seed=5)
        f = np.random.default_rng(5).standard_normal(6)
        out = encode(params, "m", f)
        grads = encode_backward(params, out.cache, out.units)
        for g in grads.values():
            assert np.max(np.abs(g)) <= 1e-12

    def test_matches_finite_differences(self):
        """Analytic gradients agree with central differences across architectures."""
        cases = [
            dict(hidden=None, rate=0.0, seed=0),
            dict(hidden=None, rate=0.4, seed=1),
            dict(hidden=7, rate=0.0, seed=2),
            dict(hidden=7, rate=0.4, seed=3),
            dict(hidden=3, rate=0.2, seed=4),
        ]
        for case in cases:
            rng = np.random.default_rng(case["seed"])
            params = init_encoder_params({"m": 6}, embed_dim=4, hidden_dim=case["hidden"], seed=case["seed"])
            f = rng.standard_normal(6)
            masks = None
            if case["rate"] > 0:
                masks = make_dropout_masks(rng, f.shape, case["rate"])
                if not masks.any():
                    masks[0] = 1.0  # keep at least one input live
            direction = rng.standard_normal(4)
            out = encode(params, "m", f, masks, case["rate"])
            analytic = encode_backward(params, out.cache, direction)
            numeric = fd_gradients(params, "m", f, masks, case["rate"], direction)
            for name in analytic:
                np.testing.assert_allclose(
                    analytic[name], numeric[name], rtol=1e-4, atol=1e-7,
                    err_msg=f"{case} {name}",
                )

    def test_batch_backward_sums_singles(self):
        params = init_encoder_params({"m": 5}, embed_dim=3, hidden_dim=4, seed=6)
        rng = np.random.default_rng(6)
        feats = rng.standard_normal((4, 5))
        grads_u = rng.standard_normal((4, 3))
        batch = encode(params, "m", feats)
        total = encode_backward(params, batch.cache, grads_u)
        summed = {k: np.zeros_like(v) for k, v in total.items()}
        for i in range(4):
            row = encode(params, "m", feats[i])
            for k, g in encode_backward(params, row.cache, grads_u[i]).items():
                summed[k] += g
        for k in total:
            np.testing.assert_allclose(total[k], summed[k], rtol=1e-12, atol=1e-12)

    def test_all_dropped_inputs_zero_weight_gradient(self):
        """With every input dropped, W sees f_tilde = 0: only the bias learns."""
        params = {"m.W0": np.ones((2, 3)), "m.b0": np.array([0.5, 2.0])}
        out = encode(params, "m", np.ones(3), dropout_masks=np.zeros(3), dropout_rate=0.5)
        grads = encode_backward(params, out.cache, np.array([1.0, -1.0]))
        np.testing.assert_array_equal(grads["m.W0"], np.zeros((2, 3)))
        assert np.max(np.abs(grads["m.b0"])) > 0
