import numpy as np
import pytest

import qgen.autodiff as ad
from qgen.autodiff import ParamStore, Tensor, TensorError
from qgen.decoder import (
    DecoderParams,
    attention,
    decode_step,
    init_decoder,
    pairwise_max,
    teacher_forced_unroll,
)

from conftest import assert_grads_match


def _params(rng, word_dim=3, enc_width=8, dec_hidden=4, attn_dim=5, vocab_out=6):
    store = ParamStore()
    return DecoderParams.create(store, word_dim, enc_width, dec_hidden, attn_dim,
                                vocab_out, rng, scale=0.5), store


class TestInitDecoder:
    def test_zero_weight_gives_tanh_bias(self):
        b = np.array([0.3, -0.7])
        s0 = init_decoder(Tensor(np.ones(4)), Tensor(np.zeros((2, 4))), Tensor(b))
        np.testing.assert_allclose(s0.data, np.tanh(b))

    def test_identity_weight(self):
        h = np.array([0.2, -0.5, 1.5])
        s0 = init_decoder(Tensor(h), Tensor(np.eye(3)), Tensor(np.zeros(3)))
        np.testing.assert_allclose(s0.data, np.tanh(h))

    def test_range_is_open_unit_interval(self):
        rng = np.random.default_rng(0)
        s0 = init_decoder(Tensor(rng.normal(size=6) * 10),
                          Tensor(rng.normal(size=(4, 6))), Tensor(rng.normal(size=4)))
        assert (np.abs(s0.data) < 1).all()


class TestAttention:
    def test_equal_scores_give_uniform_and_mean(self):
        rng = np.random.default_rng(1)
        p, _ = _params(rng)
        # zero attention weights make every score equal
        p.w_s, p.w_h, p.v = Tensor(np.zeros((5, 4))), Tensor(np.zeros((5, 8))), Tensor(np.zeros(5))
        enc = Tensor(rng.normal(size=(6, 8)))
        alpha, context, _ = attention(Tensor(rng.normal(size=4)), enc, p)
        np.testing.assert_allclose(alpha.data, np.full(6, 1 / 6))
        np.testing.assert_allclose(context.data, enc.data.mean(axis=0))

    def test_single_source_token(self):
        rng = np.random.default_rng(2)
        p, _ = _params(rng)
        enc = Tensor(rng.normal(size=(1, 8)))
        alpha, context, _ = attention(Tensor(rng.normal(size=4)), enc, p)
        np.testing.assert_allclose(alpha.data, [1.0])
        np.testing.assert_allclose(context.data, enc.data[0])

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(3)
        p, _ = _params(rng)
        s = rng.normal(size=4)
        enc = rng.normal(size=(4, 8))
        alpha, context, scores = attention(Tensor(s), Tensor(enc), p)
        # direct per-position evaluation
        e = np.array([p.v.data @ np.tanh(p.w_s.data @ s + p.w_h.data @ h) for h in enc])
        a = np.exp(e - e.max())
        a = a / a.sum()
        c = (a[:, None] * enc).sum(axis=0)
        np.testing.assert_allclose(scores.data, e, atol=1e-12)
        np.testing.assert_allclose(alpha.data, a, atol=1e-12)
        np.testing.assert_allclose(context.data, c, atol=1e-12)

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(4)
        p, _ = _params(rng)
        for n in (1, 3, 9):
            alpha, _, _ = attention(Tensor(rng.normal(size=4)),
                                    Tensor(rng.normal(size=(n, 8))), p)
            assert alpha.data.sum() == pytest.approx(1.0, abs=1e-9)


class TestMaxout:
    def test_pairwise_max(self):
        out = pairwise_max(Tensor(np.array([3.0, 1.0, 0.0, 2.0])))
        np.testing.assert_array_equal(out.data, [3.0, 2.0])

    def test_odd_width_rejected(self):
        with pytest.raises(TensorError, match="even"):
            pairwise_max(Tensor(np.zeros(5)))

    def test_halves_width(self):
        assert pairwise_max(Tensor(np.zeros(10))).shape == (5,)


class TestDecodeStep:
    def test_zero_output_weights_give_uniform_generation(self):
        rng = np.random.default_rng(5)
        p, _ = _params(rng, vocab_out=6)
        p.w_out = Tensor(np.zeros((6, 4)))
        _, dist = decode_step(Tensor(rng.normal(size=3)), Tensor(np.zeros(8)),
                              Tensor(rng.normal(size=4)), Tensor(rng.normal(size=(5, 8))), p)
        np.testing.assert_allclose(dist.gen.data, np.full(6, 1 / 6))

    def test_mixture_normalizes(self):
        rng = np.random.default_rng(6)
        p, _ = _params(rng)
        state, dist = decode_step(Tensor(rng.normal(size=3)), Tensor(np.zeros(8)),
                                  Tensor(rng.normal(size=4)),
                                  Tensor(rng.normal(size=(5, 8))), p)
        g = dist.gate.item()
        total = (1 - g) * dist.gen.data.sum() + g * dist.copy.data.sum()
        assert total == pytest.approx(1.0, abs=1e-9)
        assert 0.0 < g < 1.0

    def test_copy_gate_saturation_concentrates_on_source(self):
        rng = np.random.default_rng(7)
        p, _ = _params(rng)
        p.b_gate = Tensor(np.asarray(50.0))
        _, dist = decode_step(Tensor(rng.normal(size=3)), Tensor(np.zeros(8)),
                              Tensor(rng.normal(size=4)), Tensor(rng.normal(size=(5, 8))), p)
        g = dist.gate.item()
        assert g > 1 - 1e-9
        assert g * dist.copy.data.sum() == pytest.approx(1.0, abs=1e-9)

    def test_gradients_through_full_step(self):
        rng = np.random.default_rng(8)
        p, store = _params(rng)
        w_prev = rng.normal(size=3)
        enc = rng.normal(size=(4, 8))

        def loss(w):
            state, dist = decode_step(w, Tensor(np.zeros(8)), Tensor(np.ones(4) * 0.1),
                                      Tensor(enc), p)
            return ad.add(ad.sum_(ad.mul(dist.gen, dist.gen)), ad.mul(state.gate, 2.0))

        assert_grads_match(loss, [w_prev], tol=1e-4)


class TestTeacherForcedUnroll:
    def _embed(self, rng):
        table = {t: Tensor(rng.normal(size=3)) for t in ("a", "b", "<SOS>")}
        return (lambda tok: table[tok]), table["<SOS>"]

    def test_step_count_is_question_length_plus_one(self):
        rng = np.random.default_rng(9)
        p, _ = _params(rng)
        embed, sos = self._embed(rng)
        enc = Tensor(rng.normal(size=(4, 8)))
        steps = teacher_forced_unroll(["a", "b", "a"], embed, sos, enc,
                                      Tensor(rng.normal(size=4)), p)
        assert len(steps) == 4

    def test_deterministic_in_eval_mode(self):
        rng = np.random.default_rng(10)
        p, _ = _params(rng)
        embed, sos = self._embed(rng)
        enc = Tensor(rng.normal(size=(4, 8)))
        last = Tensor(rng.normal(size=4))
        s1 = teacher_forced_unroll(["a", "b"], embed, sos, enc, last, p)
        s2 = teacher_forced_unroll(["a", "b"], embed, sos, enc, last, p)
        for (st1, d1), (st2, d2) in zip(s1, s2):
            np.testing.assert_array_equal(d1.gen.data, d2.gen.data)
            np.testing.assert_array_equal(st1.s.data, st2.s.data)

    def test_state_shapes(self):
        rng = np.random.default_rng(11)
        p, _ = _params(rng, dec_hidden=4, enc_width=8, vocab_out=6)
        embed, sos = self._embed(rng)
        enc = Tensor(rng.normal(size=(5, 8)))
        steps = teacher_forced_unroll(["a"], embed, sos, enc, Tensor(rng.normal(size=4)), p)
        for state, dist in steps:
            assert state.s.shape == (4,)
            assert state.c.shape == (8,)
            assert state.maxout.shape == (4,)
            assert state.readout.shape == (8,)
            assert dist.gen.shape == (6,)
            assert dist.copy.shape == (5,)
