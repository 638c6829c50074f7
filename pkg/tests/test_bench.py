"""Target expressions and synthetic oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from macronas import archspace as sp
from macronas import bench
from macronas.bench.target import Bin, Call, Num, Unary, Var

from helpers import closed_form_spearman


class TestParser:
    def test_parse_shape(self):
        t = bench.parse_target("sqrt(pq) - 2*sqrt(flops)")
        assert isinstance(t, Bin) and t.op == "-"
        idents = set()

        def walk(n):
            if isinstance(n, Var):
                idents.add(n.name)
            elif isinstance(n, Bin):
                walk(n.left)
                walk(n.right)
            elif isinstance(n, (Call, Unary)):
                walk(n.arg if isinstance(n, Call) else n.operand)

        walk(t)
        assert idents == {"pq", "flops"}

    def test_trailing_operator_reports_offset(self):
        with pytest.raises(bench.TargetSyntaxError) as err:
            bench.parse_target("1 + ")
        assert err.value.offset == 4

    def test_power_binds_before_division(self):
        t = bench.parse_target("100^acc/log10(lat)")
        assert isinstance(t, Bin) and t.op == "/"
        assert isinstance(t.left, Bin) and t.left.op == "^"
        assert isinstance(t.right, Call) and t.right.fn == "log10"

    def test_power_right_associative(self):
        t = bench.parse_target("2^3^4")
        assert t == Bin("^", Num(2.0), Bin("^", Num(3.0), Num(4.0)))

    def test_unary_minus_below_power(self):
        # -2^2 must be -(2^2)
        t = bench.parse_target("-2^2")
        assert t == Unary(Bin("^", Num(2.0), Num(2.0)))
        assert bench.eval_target(t, {}) == pytest.approx(-4.0)

    def test_unary_minus_above_multiplication(self):
        t = bench.parse_target("-a*b")
        assert t == Bin("*", Unary(Var("a")), Var("b"))

    def test_unknown_function(self):
        with pytest.raises(bench.TargetSyntaxError):
            bench.parse_target("sin(x)")

    def test_bad_character_offset(self):
        with pytest.raises(bench.TargetSyntaxError) as err:
            bench.parse_target("1 + $")
        assert err.value.offset == 4


def _expr_strategy():
    leaf = st.one_of(
        st.integers(0, 9).map(lambda v: Num(float(v))),
        st.floats(0.1, 10.0).map(Num),
        st.sampled_from(["acc", "lat", "pq", "flops", "x_1"]).map(Var),
    )

    def extend(children):
        return st.one_of(
            st.tuples(st.sampled_from("+-*/^"), children, children).map(
                lambda t: Bin(t[0], t[1], t[2])
            ),
            children.map(Unary),
            st.tuples(st.sampled_from(["sqrt", "log10"]), children).map(
                lambda t: Call(t[0], t[1])
            ),
        )

    return st.recursive(leaf, extend, max_leaves=12)


class TestPrinterRoundTrip:
    @given(_expr_strategy())
    @settings(max_examples=1000, deadline=None)
    def test_parse_print_identity(self, tree):
        assert bench.parse_target(bench.print_target(tree)) == tree

    def test_known_forms(self):
        for text in [
            "sqrt(pq) - 2*sqrt(flops)",
            "100^acc/log10(lat)",
            "acc - lat",
            "-(a + b)*c",
            "2^-3",
        ]:
            t = bench.parse_target(text)
            assert bench.parse_target(bench.print_target(t)) == t


class TestEval:
    def test_pareto_point_targets(self):
        expr = bench.parse_target("sqrt(pq) - 2*sqrt(flops)")
        assert bench.eval_target(expr, {"pq": 37.9, "flops": 175.1}) == pytest.approx(
            -20.31, abs=0.01
        )
        assert bench.eval_target(expr, {"pq": 37.4, "flops": 172.9}) == pytest.approx(
            -20.18, abs=0.01
        )
        assert bench.eval_target(expr, {"pq": 35.7, "flops": 171.3}) == pytest.approx(
            -20.20, abs=0.01
        )

    def test_power_ratio(self):
        expr = bench.parse_target("100^acc/log10(lat)")
        assert bench.eval_target(expr, {"acc": 0.77, "lat": 10.0}) == pytest.approx(
            34.67, abs=0.01
        )

    def test_domain_errors(self):
        cases = [
            ("sqrt(x)", {"x": -1.0}),
            ("log10(x)", {"x": 0.0}),
            ("1/x", {"x": 0.0}),
            ("y + 1", {"x": 1.0}),
            ("x^0.5", {"x": -2.0}),
        ]
        for text, metrics in cases:
            with pytest.raises(bench.TargetEvalError):
                bench.eval_target(bench.parse_target(text), metrics)

    def test_integer_power_of_negative_base(self):
        assert bench.eval_target(bench.parse_target("x^3"), {"x": -2.0}) == pytest.approx(-8.0)

    def test_referential_transparency(self):
        expr = bench.parse_target("sqrt(a)*b - a/b")
        m = {"a": 4.0, "b": 3.0}
        first = bench.eval_target(expr, m)
        for _ in range(5):
            assert bench.eval_target(expr, m) == first


class TestSyntheticOracle:
    def make(self, **kw):
        defaults = dict(space_template="tiny3", relative_noise=0.0, relative_interaction=0.0)
        defaults.update(kw)
        return bench.make_synthetic_space(bench.OracleParams(**defaults), seed=11)

    def test_additivity_without_noise(self):
        spec, oracle = self.make()
        archs = sp.sample_random(spec, 20, seed=0)
        for arch in archs:
            y = oracle.evaluate(arch)["y"]
            total = sum(oracle.true_contribution(sg) for sg in arch.subgraphs(spec))
            assert y == pytest.approx(total + oracle._offset, abs=1e-12)

    def test_same_seed_same_tables(self):
        spec1, o1 = self.make()
        spec2, o2 = self.make()
        assert spec1.fingerprint == spec2.fingerprint
        for u in (1, 2, 3):
            assert o1.stage_truth_table(u) == o2.stage_truth_table(u)

    def test_noise_deterministic_per_arch(self):
        spec, oracle = self.make(relative_noise=0.1)
        archs = sp.sample_random(spec, 10, seed=3)
        a = [oracle.evaluate(x)["y"] for x in archs]
        b = [oracle.evaluate(x)["y"] for x in reversed(archs)]
        assert a == list(reversed(b))

    def test_label_std_within_band(self):
        params = bench.OracleParams(space_template="mbv3_like")
        spec, oracle = bench.make_synthetic_space(params, seed=0)
        archs = sp.sample_random(spec, 1000, seed=1)
        ys = np.array([oracle.evaluate(a)["y"] for a in archs])
        ratio = ys.std() / oracle.contribution_sigma
        assert 0.5 <= ratio <= 2.0

    def test_cost_monotone_in_layer_count(self):
        from scipy import stats

        spec, oracle = self.make()
        archs = sp.sample_random(spec, 100, seed=5)
        costs = np.array([oracle.evaluate(a)["cost"] for a in archs])
        nodes = np.array([a.num_nodes for a in archs], dtype=float)
        rho = stats.spearmanr(costs, nodes).statistic
        assert rho > 0.7

    def test_stage_truth_recoverable_via_single_stage_sweep(self):
        # Vary one stage, freeze the rest: labels must rank exactly like the
        # stage's true contributions when noise and interactions are off.
        spec, oracle = self.make()
        base = [sp.subgraph_from_index(spec, s.u, 0) for s in spec.stages]
        for u in (1, 2, 3):
            labels = []
            truth = []
            for sg in sp.enumerate_stage_subgraphs(spec, u):
                picks = list(base)
                picks[u - 1] = sg
                arch = sp.assemble_arch(spec, picks)
                labels.append(oracle.evaluate(arch)["y"])
                truth.append(oracle.true_contribution(sg))
            assert closed_form_spearman(labels, truth) == pytest.approx(1.0)

    def test_roundtrip_through_dict(self):
        spec, oracle = self.make(relative_noise=0.2)
        clone = bench.SyntheticOracle.from_dict(oracle.to_dict())
        archs = sp.sample_random(spec, 5, seed=8)
        for arch in archs:
            assert clone.evaluate(arch) == oracle.evaluate(arch)

    def test_generic_space_params(self):
        params = bench.OracleParams(
            space_template=None, num_stages=2, vocab_size=3, l_min=1, l_max=2
        )
        spec, oracle = bench.make_synthetic_space(params, seed=4)
        assert len(spec.stages) == 2
        assert sp.count_stage_subgraphs(spec, 1) == 3 + 9

    def test_invalid_params_rejected(self):
        with pytest.raises(sp.SpaceError):
            bench.make_synthetic_space(
                bench.OracleParams(space_template=None, num_stages=0), seed=0
            )
        with pytest.raises(sp.SpaceError):
            bench.make_synthetic_space(bench.OracleParams(relative_noise=-1.0), seed=0)


class TestLabelDataset:
    def test_records_carry_raw_and_derived(self):
        spec, oracle = bench.make_synthetic_space(
            bench.OracleParams(space_template="tiny3"), seed=2
        )
        archs = sp.sample_random(spec, 30, seed=6)
        records = bench.label_dataset(
            oracle, archs, targets={"quality": "y", "tradeoff": "y - cost"}
        )
        assert len(records) == 30
        for r in records:
            assert set(r.metrics) == {"y", "cost", "quality", "tradeoff"}
            assert r.metrics["quality"] == r.metrics["y"]
            assert r.metrics["tradeoff"] == pytest.approx(r.metrics["y"] - r.metrics["cost"])

    def test_relabel_byte_identical(self, tmp_path):
        spec, oracle = bench.make_synthetic_space(
            bench.OracleParams(space_template="tiny3", relative_noise=0.1), seed=2
        )
        archs = sp.sample_random(spec, 25, seed=6)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        sp.write_dataset(p1, bench.label_dataset(oracle, archs, {"t": "y/cost"}))
        sp.write_dataset(p2, bench.label_dataset(oracle, archs, {"t": "y/cost"}))
        assert p1.read_bytes() == p2.read_bytes()

    def test_domain_error_names_architecture(self):
        spec, oracle = bench.make_synthetic_space(
            bench.OracleParams(space_template="tiny3"), seed=2
        )
        archs = sp.sample_random(spec, 3, seed=6)
        with pytest.raises(bench.TargetEvalError) as err:
            bench.label_dataset(oracle, archs, {"bad": "sqrt(y - 1000)"})
        assert archs[0].arch_id in str(err.value)
