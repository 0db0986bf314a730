import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corefgru import ops
from corefgru.cgru import (
    CGRUParams,
    StepInput,
    cell_nodes,
    cell_step,
    cgru_step_nodes,
    compute_alpha,
    direction_plans,
    glorot_uniform,
    gru_cell_step,
    init_cgru_params,
    init_gru_params,
    null_coref_reference,
    register_cell,
    run_bidirectional,
    run_direction,
    run_memory_mode,
    unroll_batched,
    unroll_nodes,
)
from corefgru.coref import NULL, antecedents_from_membership
from corefgru.errors import InvalidShape, OrderViolation, RangeError
from corefgru.tape import Parameters, Tape


def _zero_params(d_in: int, d: int) -> CGRUParams:
    z = np.zeros
    return CGRUParams(
        W_r=z((d_in, d)), W_z=z((d_in, d)), W_h=z((d_in, d)),
        U_r=z((d, d)), U_z=z((d, d)), U_h=z((d, d)),
        b_r=z(d), b_z=z(d), b_h=z(d),
        k1=z(d_in), k2=z(d_in),
    )


class TestAlpha:
    def test_two_key_softmax_value(self):
        # x.k1 = ln 3, x.k2 = 0  ->  alpha = 3/4
        x = np.array([1.0, 0.0])
        k1 = np.array([np.log(3.0), 0.0])
        k2 = np.zeros(2)
        assert np.isclose(compute_alpha(x, k1, k2, True), 0.75)

    def test_absent_antecedent_is_exactly_one(self):
        rng = np.random.default_rng(0)
        x, k1, k2 = rng.standard_normal((3, 4))
        assert compute_alpha(x, k1, k2, False) == 1.0

    def test_alpha_stable_at_extreme_logits(self):
        x = np.array([1000.0])
        a = compute_alpha(x, np.array([1000.0]), np.array([-1000.0]), True)
        assert np.isfinite(a) and 0.0 <= a <= 1.0

    def test_shape_mismatch(self):
        with pytest.raises(InvalidShape):
            compute_alpha(np.ones(2), np.ones(3), np.ones(2), True)

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_alpha_strictly_between_zero_and_one_when_present(self, seed):
        rng = np.random.default_rng(seed)
        x, k1, k2 = rng.standard_normal((3, 5))
        a = compute_alpha(x, k1, k2, True)
        assert 0.0 < a < 1.0


class TestCellStep:
    def test_zero_params_without_antecedent(self):
        # all weights zero: r = z = 1/2, cand = 0, so h = m / 2 and the
        # coreference half of m is zeroed
        d = 6
        params = _zero_params(3, d)
        h_prev = np.array([0.2, -0.4, 0.6, 1.0, -1.0, 0.5])
        out = cell_step(params, StepInput(np.ones(3), h_prev, None))
        expect = 0.5 * np.concatenate([h_prev[:3], np.zeros(3)])
        assert np.array_equal(out, expect)

    def test_zero_params_with_antecedent(self):
        # zero keys give alpha = 1/2, so m mixes both halves at weight 1/2
        d = 4
        params = _zero_params(2, d)
        h_prev = np.array([0.8, 0.4, 9.0, 9.0])
        h_ante = np.array([9.0, 9.0, -0.6, 0.2])
        out = cell_step(params, StepInput(np.ones(2), h_prev, h_ante))
        expect = 0.5 * np.concatenate([0.5 * h_prev[:2], 0.5 * h_ante[2:]])
        assert np.allclose(out, expect, atol=1e-15)

    def test_scalar_arithmetic_oracle_d2(self):
        # d = 2, d_in = 1: every equation reduces to plain float arithmetic
        x = 0.7
        hp = (0.3, -0.2)
        ha = (0.9, 0.5)
        p = CGRUParams(
            W_r=np.array([[0.1, -0.2]]), W_z=np.array([[0.3, 0.05]]),
            W_h=np.array([[-0.4, 0.2]]),
            U_r=np.array([[0.2, 0.0], [0.1, -0.1]]),
            U_z=np.array([[0.0, 0.3], [0.2, 0.1]]),
            U_h=np.array([[0.5, -0.3], [0.0, 0.25]]),
            b_r=np.array([0.01, -0.02]), b_z=np.array([0.03, 0.0]),
            b_h=np.array([0.0, 0.04]),
            k1=np.array([0.6]), k2=np.array([-0.3]),
        )
        e1, e2 = math.exp(x * 0.6), math.exp(x * -0.3)
        alpha = e1 / (e1 + e2)
        m = (alpha * hp[0], (1 - alpha) * ha[1])

        def sig(v):
            return 1.0 / (1.0 + math.exp(-v))

        r = [sig(x * p.W_r[0, j] + m[0] * p.U_r[0, j] + m[1] * p.U_r[1, j] + p.b_r[j]) for j in range(2)]
        z = [sig(x * p.W_z[0, j] + m[0] * p.U_z[0, j] + m[1] * p.U_z[1, j] + p.b_z[j]) for j in range(2)]
        cand = [
            math.tanh(x * p.W_h[0, j] + r[j] * (m[0] * p.U_h[0, j] + m[1] * p.U_h[1, j]) + p.b_h[j])
            for j in range(2)
        ]
        expect = [(1 - z[j]) * m[j] + z[j] * cand[j] for j in range(2)]

        out = cell_step(p, StepInput(np.array([x]), np.array(hp), np.array(ha)))
        assert np.allclose(out, expect, atol=1e-14)

    def test_antecedent_perturbation_reaches_output(self):
        rng = np.random.default_rng(1)
        params = init_cgru_params(rng, 3, 8)
        x = rng.standard_normal(3)
        hp = rng.standard_normal(8)
        ha = rng.standard_normal(8)
        base = cell_step(params, StepInput(x, hp, ha))
        ha2 = ha.copy()
        ha2[6] += 0.5  # second half feeds the blend
        assert not np.allclose(base, cell_step(params, StepInput(x, hp, ha2)))

    def test_first_half_of_antecedent_never_matters(self):
        rng = np.random.default_rng(2)
        params = init_cgru_params(rng, 3, 8)
        x, hp, ha = rng.standard_normal(3), rng.standard_normal(8), rng.standard_normal(8)
        ha2 = ha.copy()
        ha2[:4] = 99.0
        a = cell_step(params, StepInput(x, hp, ha))
        b = cell_step(params, StepInput(x, hp, ha2))
        assert np.array_equal(a, b)

    def test_second_half_of_h_prev_never_matters(self):
        rng = np.random.default_rng(3)
        params = init_cgru_params(rng, 3, 8)
        x, hp, ha = rng.standard_normal(3), rng.standard_normal(8), rng.standard_normal(8)
        hp2 = hp.copy()
        hp2[4:] = -99.0
        assert np.array_equal(
            cell_step(params, StepInput(x, hp, ha)), cell_step(params, StepInput(x, hp2, ha))
        )

    def test_batched_step_matches_per_row(self):
        rng = np.random.default_rng(4)
        params = init_cgru_params(rng, 3, 6)
        xb = rng.standard_normal((5, 3))
        hpb = rng.standard_normal((5, 6))
        hab = rng.standard_normal((5, 6))
        out = cell_step(params, StepInput(xb, hpb, hab))
        for i in range(5):
            row = cell_step(params, StepInput(xb[i], hpb[i], hab[i]))
            assert np.allclose(out[i], row, atol=1e-12)

    def test_gate_block_decomposition(self):
        # U m with m = [a; b] must equal a @ U[:half] + b @ U[half:]
        rng = np.random.default_rng(5)
        d = 8
        u = rng.standard_normal((d, d))
        a, b = rng.standard_normal(d // 2), rng.standard_normal(d // 2)
        m = np.concatenate([a, b])
        assert np.allclose(m @ u, a @ u[: d // 2] + b @ u[d // 2 :])

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_state_stays_in_unit_box(self, seed):
        # |h_prev|, |h_ante| <= 1 implies |h| <= 1: the blend is a convex
        # scaling, the candidate is a tanh, and the update interpolates
        rng = np.random.default_rng(seed)
        params = init_cgru_params(rng, 4, 6)
        x = 3.0 * rng.standard_normal(4)
        hp = rng.uniform(-1, 1, 6)
        ha = rng.uniform(-1, 1, 6)
        out = cell_step(params, StepInput(x, hp, ha))
        assert (np.abs(out) <= 1.0).all()


class TestInit:
    def test_seeded_and_bounded(self):
        a = init_cgru_params(np.random.default_rng(7), 3, 8)
        b = init_cgru_params(np.random.default_rng(7), 3, 8)
        assert np.array_equal(a.W_r, b.W_r) and np.array_equal(a.k2, b.k2)
        s = np.sqrt(6.0 / (3 + 8))
        assert (np.abs(a.W_r) <= s).all()
        assert np.array_equal(a.b_r, np.zeros(8))

    def test_odd_hidden_size_rejected(self):
        with pytest.raises(InvalidShape):
            init_cgru_params(np.random.default_rng(0), 3, 7)

    def test_param_sizes(self):
        c = init_cgru_params(np.random.default_rng(0), 3, 8)
        g = init_gru_params(np.random.default_rng(0), 3, 8)
        assert c.size() - g.size() == 2 * 3  # two key vectors
        assert glorot_uniform(np.random.default_rng(0), (4,)).shape == (4,)


class TestRunModes:
    def _setup(self, seed=0, t=12, c=3, d=8, d_in=3):
        rng = np.random.default_rng(seed)
        params = init_cgru_params(rng, d_in, d)
        membership = rng.integers(-1, c, size=t)
        xs = [rng.standard_normal(d_in) for _ in range(t)]
        return params, membership, xs

    def test_memory_mode_equals_direction_mode_exactly(self):
        for seed in range(10):
            params, membership, xs = self._setup(seed)
            amap = antecedents_from_membership(membership)
            fwd = run_direction(params, xs, amap.forward)
            mem = run_memory_mode(params, xs, membership, "forward")
            assert np.array_equal(fwd, mem)
            bwd = run_direction(params, xs, amap.backward, range(len(xs) - 1, -1, -1))
            mem_b = run_memory_mode(params, xs, membership, "backward")
            assert np.array_equal(bwd, mem_b)

    def test_memory_mode_cluster_out_of_range(self):
        params, membership, xs = self._setup()
        with pytest.raises(RangeError):
            run_memory_mode(params, xs, np.full(len(xs), 5), num_clusters=3)

    def test_all_null_reduces_to_reference_exactly(self):
        params, _, xs = self._setup(seed=42)
        ante = np.full(len(xs), NULL)
        out = run_direction(params, xs, ante)
        ref = null_coref_reference(params, xs)
        assert np.array_equal(out, ref)

    def test_alpha_mode_one_matches_reference_despite_links(self):
        params, membership, xs = self._setup(seed=3)
        amap = antecedents_from_membership(membership)
        out = run_direction(params, xs, amap.forward, alpha_mode="one")
        assert np.array_equal(out, null_coref_reference(params, xs))

    def test_single_key_mode_uses_sigmoid(self):
        rng = np.random.default_rng(9)
        params = init_cgru_params(rng, 2, 4)
        xs = [rng.standard_normal(2), rng.standard_normal(2)]
        out = run_direction(params, xs, np.array([NULL, 0]), alpha_mode="single_key")
        # reproduce step 2 by hand with alpha = sigmoid(x . k1)
        h0 = cell_step(params, StepInput(xs[0], np.zeros(4), None))
        alpha = 1.0 / (1.0 + np.exp(-(xs[1] @ params.k1)))
        m = np.concatenate([alpha * h0[:2], (1 - alpha) * h0[2:]])

        def sig(v):
            return np.where(v >= 0, 1 / (1 + np.exp(-v)), np.exp(v) / (1 + np.exp(v)))

        r = sig(xs[1] @ params.W_r + m @ params.U_r + params.b_r)
        z = sig(xs[1] @ params.W_z + m @ params.U_z + params.b_z)
        cand = np.tanh(xs[1] @ params.W_h + r * (m @ params.U_h) + params.b_h)
        expect = (1 - z) * m + z * cand
        assert np.allclose(out[1], expect, atol=1e-12)

    def test_order_violation(self):
        params, _, xs = self._setup()
        ante = np.full(len(xs), NULL)
        ante[5] = 2
        # processing right-to-left sees token 5 before its antecedent 2
        with pytest.raises(OrderViolation):
            run_direction(params, xs, ante, order=range(len(xs) - 1, -1, -1))

    def test_antecedent_out_of_range_rejected(self):
        params, _, xs = self._setup()
        ante = np.full(len(xs), NULL)
        ante[1] = 50
        with pytest.raises(OrderViolation):
            run_direction(params, xs, ante)

    def test_bidirectional_concatenates_directions(self):
        rng = np.random.default_rng(11)
        fwd_p = init_cgru_params(rng, 3, 6)
        bwd_p = init_cgru_params(rng, 3, 6)
        membership = np.array([0, NULL, 0, 1, 1, 0])
        amap = antecedents_from_membership(membership)
        xs = [rng.standard_normal(3) for _ in range(6)]
        out = run_bidirectional(fwd_p, bwd_p, xs, amap)
        assert out.shape == (6, 12)
        f = run_direction(fwd_p, xs, amap.forward)
        b = run_direction(bwd_p, xs, amap.backward, range(5, -1, -1))
        assert np.array_equal(out[:, :6], f)
        assert np.array_equal(out[:, 6:], b)

    def test_gru_cell_matches_cgru_with_identity_memory(self):
        # a plain GRU step is the same gate math applied to m = h_prev
        rng = np.random.default_rng(13)
        g = init_gru_params(rng, 3, 6)
        x, hp = rng.standard_normal(3), rng.standard_normal(6)
        out = gru_cell_step(g, x, hp)

        def sig(v):
            return np.where(v >= 0, 1 / (1 + np.exp(-v)), np.exp(v) / (1 + np.exp(v)))

        r = sig(x @ g.W_r + hp @ g.U_r + g.b_r)
        z = sig(x @ g.W_z + hp @ g.U_z + g.b_z)
        cand = np.tanh(x @ g.W_h + r * (hp @ g.U_h) + g.b_h)
        assert np.allclose(out, (1 - z) * hp + z * cand, atol=1e-12)


class TestGradientRouting:
    def test_antecedent_path_carries_gradient(self):
        rng = np.random.default_rng(17)
        params = init_cgru_params(rng, 2, 4)
        reg = Parameters()
        register_cell(reg, "cell", params)
        reg.add("h_ante", rng.standard_normal(4))

        def loss_for(mode: str) -> np.ndarray:
            tape = Tape(reg)
            p = cell_nodes(tape, "cell", True)
            out = cgru_step_nodes(
                p, tape.const(rng.standard_normal(2)), tape.const(rng.standard_normal(4)),
                tape.param("h_ante"), 4, alpha_mode=mode,
            )
            reg.zero_grads()
            tape.backward(ops.sum_all(out))
            return reg.grad("h_ante").copy()

        g_two = loss_for("two_key")
        assert np.abs(g_two[2:]).max() > 0  # second half reaches the cell
        assert np.array_equal(g_two[:2], np.zeros(2))  # first half never does
        g_one = loss_for("one")
        assert np.array_equal(g_one, np.zeros(4))  # alpha = 1 cuts the path exactly

    def test_unroll_gradients_flow_to_antecedent_input(self):
        # token 3 links to token 0: x_0 influences h_3 through the jump even
        # though we read only h_3's coref half contribution
        rng = np.random.default_rng(19)
        params = init_cgru_params(rng, 2, 4)
        reg = Parameters()
        register_cell(reg, "cell", params)
        xs = rng.standard_normal((4, 2))
        for i in range(4):
            reg.add(f"x{i}", xs[i])
        ante = np.array([NULL, NULL, NULL, 0])

        def grads(mode):
            tape = Tape(reg)
            p = cell_nodes(tape, "cell", True)
            x_nodes = [tape.param(f"x{i}") for i in range(4)]
            states = unroll_nodes(tape, p, x_nodes, ante, range(4), 4, alpha_mode=mode)
            # read only the coref half of the final state so the sequential
            # path contributes through the gates but the blend's coref lane
            # is isolated in the inputs' influence
            reg.zero_grads()
            tape.backward(ops.sum_all(states[3]))
            return reg.grad("x0").copy()

        assert np.abs(grads("two_key")).max() > 0


class TestBatchedPlans:
    def test_plan_shapes_and_zero_row(self):
        membership = [np.array([0, NULL, 0]), np.array([1, 1, NULL])]
        maps = [antecedents_from_membership(m) for m in membership]
        fwd, bwd = direction_plans(maps, [3, 3], 3, mode="cluster")
        assert fwd.n_rows == 3  # clusters 0 and 1 plus the reserved zero row
        assert fwd.read_slot[0].tolist() == [0, 0, 1]
        assert fwd.write_slot[0].tolist() == [1, 0, 1]
        assert fwd.present[0].tolist() == [0.0, 0.0, 1.0]
        assert bwd.read_slot[0].tolist() == [1, 0, 0]

    def test_position_mode_rows(self):
        membership = [np.array([0, 0, 0])]
        maps = [antecedents_from_membership(m) for m in membership]
        fwd, _ = direction_plans(maps, [3], 3, mode="position")
        assert fwd.n_rows == 4
        assert fwd.read_slot[0].tolist() == [0, 1, 2]
        assert fwd.write_slot[0].tolist() == [1, 2, 3]

    def test_batched_matches_single_with_ragged_padding(self):
        rng = np.random.default_rng(23)
        d_in, d = 3, 6
        params = init_cgru_params(rng, d_in, d)
        lengths = [5, 2, 7]
        t_max = max(lengths)
        memberships = [rng.integers(-1, 2, size=n) for n in lengths]
        maps = [antecedents_from_membership(m) for m in memberships]
        xs = [rng.standard_normal((n, d_in)) for n in lengths]
        x_pad = np.zeros((3, t_max, d_in))
        for i, x in enumerate(xs):
            x_pad[i, : lengths[i]] = x
        reg = Parameters()
        register_cell(reg, "cell", params)
        for plan, direction in zip(direction_plans(maps, lengths, t_max), ("forward", "backward")):
            tape = Tape(reg)
            p = cell_nodes(tape, "cell", True)
            out = unroll_batched(tape, p, tape.const(x_pad), plan, d).data
            for i in range(3):
                n = lengths[i]
                ante = maps[i].forward if direction == "forward" else maps[i].backward
                order = range(n) if direction == "forward" else range(n - 1, -1, -1)
                ref = run_direction(params, list(xs[i]), ante, order)
                assert np.allclose(out[i, :n], ref, atol=1e-12)
