"""Search-space counting, enumeration, assembly, sampling, and dataset IO."""

import itertools
import json

import pytest

from macronas import archspace as sp


@pytest.fixture(scope="module")
def mbv3():
    return sp.space_template("mbv3_like")


@pytest.fixture(scope="module")
def unet():
    return sp.space_template("unet_like")


class TestCounting:
    def test_mbv3_stage_count(self, mbv3):
        # 9^2 + 9^3 + 9^4 = 81 + 729 + 6561
        for u in range(1, 6):
            assert sp.count_stage_subgraphs(mbv3, u) == 7371

    def test_single_choice_single_layer(self):
        spec = sp.SearchSpaceSpec(
            name="one",
            stages=(sp.StageSpec(1, 1, 1, ("x",)),),
            schema=sp.FeatureSchema(
                (
                    sp.FeatureCategory("op", "categorical", choices=("x",)),
                    sp.FeatureCategory("stage", "numeric", lo=1.0, hi=2.0),
                    sp.FeatureCategory("layer", "numeric", lo=1.0, hi=2.0),
                )
            ),
            layer_features={"x": {"op": "x"}},
        )
        assert sp.count_stage_subgraphs(spec, 1) == 1
        assert sp.count_space_size(spec) == 1

    def test_merged_final_stage_count(self):
        merged = sp.space_template("pn_like_merged")
        assert sp.count_stage_subgraphs(merged, 5) == 66339  # 9^3 + 9^4 + 9^5

    def test_space_sizes(self, mbv3):
        assert sp.count_space_size(mbv3) == 7371**5
        assert abs(sp.count_space_size(mbv3) / 2.18e19 - 1) < 0.005
        pn = sp.space_template("pn_like")
        assert sp.count_space_size(pn) == 7371**5 * 9
        assert abs(sp.count_space_size(pn) / 1.96e20 - 1) < 0.005

    def test_two_type_stage(self):
        spec = _two_type_space()
        assert sp.count_stage_subgraphs(spec, 1) == 6  # 2 + 4
        assert sp.count_space_size(spec) == 6

    def test_unknown_stage_rejected(self, mbv3):
        with pytest.raises(sp.SpaceError):
            sp.count_stage_subgraphs(mbv3, 9)


def _two_type_space():
    return sp.SearchSpaceSpec(
        name="two",
        stages=(sp.StageSpec(1, 1, 2, ("a", "b")),),
        schema=sp.FeatureSchema(
            (
                sp.FeatureCategory("op", "categorical", choices=("a", "b")),
                sp.FeatureCategory("stage", "numeric", lo=1.0, hi=2.0),
                sp.FeatureCategory("layer", "numeric", lo=1.0, hi=2.0),
            )
        ),
        layer_features={"a": {"op": "a"}, "b": {"op": "b"}},
    )


class TestEnumeration:
    def test_exhaustive_listing_matches_hand_order(self):
        spec = _two_type_space()
        got = [s.types for s in sp.enumerate_stage_subgraphs(spec, 1)]
        assert got == [("a",), ("b",), ("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")]

    def test_enumerate_count_matches_closed_form_all_templates(self):
        for name in ("tiny3", "toy_mirror", "unet_like"):
            spec = sp.space_template(name)
            for stage in spec.stages:
                items = list(sp.enumerate_stage_subgraphs(spec, stage.u))
                assert len(items) == sp.count_stage_subgraphs(spec, stage.u)
                assert len({s.canonical_id for s in items}) == len(items)

    def test_mbv3_stage_enumerates_7371(self, mbv3):
        assert sum(1 for _ in sp.enumerate_stage_subgraphs(mbv3, 1)) == 7371

    def test_single_layer_stage_enumerates_vocab(self):
        pn = sp.space_template("pn_like")
        items = list(sp.enumerate_stage_subgraphs(pn, 6))
        assert len(items) == 9
        assert all(s.num_layers == 1 for s in items)

    def test_cap_enforced(self, mbv3):
        with pytest.raises(sp.EnumerationCapExceeded):
            list(sp.enumerate_stage_subgraphs(mbv3, 1, cap=100))

    def test_index_decode_matches_enumeration(self, mbv3):
        items = list(sp.enumerate_stage_subgraphs(mbv3, 2))
        for k in (0, 1, 80, 81, 6561, 7370):
            assert sp.subgraph_from_index(mbv3, 2, k) == items[k]


class TestAssembly:
    def test_assemble_positions(self, mbv3):
        picks = [sp.subgraph_from_index(mbv3, u, 100 * u) for u in range(1, 6)]
        arch = sp.assemble_arch(mbv3, picks)
        assert arch.num_nodes == sum(p.num_layers for p in picks)
        k = 0
        for u, types in enumerate(arch.stage_types, start=1):
            for layer in range(1, len(types) + 1):
                feats = arch.node_features[k]
                assert feats["stage"] == float(u)
                assert feats["layer"] == float(layer)
                k += 1
        assert arch.edges == tuple((i, i + 1) for i in range(arch.num_nodes - 1))

    def test_roundtrip_decomposition(self, mbv3):
        picks = [sp.subgraph_from_index(mbv3, u, 7 * u) for u in range(1, 6)]
        arch = sp.assemble_arch(mbv3, picks)
        assert list(arch.subgraphs(mbv3)) == picks

    def test_channel_mismatch_rejected(self, unet):
        a = sp.ModuleSubgraph.from_types(unet, 1, ("conv_m1_c128",))
        b = sp.ModuleSubgraph.from_types(unet, 2, ("conv_m2_c256",))
        c = sp.ModuleSubgraph.from_types(unet, 3, ("conv_m1_c128",))
        with pytest.raises(sp.ConstraintViolation) as err:
            sp.assemble_arch(unet, [a, b, c])
        assert "channel_consistency" in err.value.rules

    def test_mirror_mismatch_rejected(self, unet):
        a = sp.ModuleSubgraph.from_types(unet, 1, ("conv_m1_c128",))
        b = sp.ModuleSubgraph.from_types(unet, 2, ("conv_m2_c128",))
        c = sp.ModuleSubgraph.from_types(unet, 3, ("conv_m2_c128",))
        with pytest.raises(sp.ConstraintViolation) as err:
            sp.assemble_arch(unet, [a, b, c])
        assert err.value.rules == ("mirror_multiplier",)

    def test_valid_unet_combo_assembles(self, unet):
        picks = [
            sp.ModuleSubgraph.from_types(unet, 1, ("conv_m1_c128", "attn_m1_c128")),
            sp.ModuleSubgraph.from_types(unet, 2, ("conv_m2_c128",)),
            sp.ModuleSubgraph.from_types(unet, 3, ("attn_m1_c128",)),
        ]
        arch = sp.assemble_arch(unet, picks)
        assert arch.num_nodes == 4

    def test_stage_mismatch_rejected(self, mbv3):
        picks = [sp.subgraph_from_index(mbv3, u, 0) for u in (1, 3, 2, 4, 5)]
        with pytest.raises(sp.SpaceError):
            sp.assemble_arch(mbv3, picks)


class TestHash:
    def test_stable_under_reserialization(self, mbv3):
        arch = sp.sample_random(mbv3, 1, seed=5)[0]
        again = sp.decode_arch(mbv3, json.loads(json.dumps(arch.encode())))
        assert arch.arch_id == again.arch_id

    def test_sensitive_to_any_change(self):
        spec = _two_type_space()
        ids = set()
        for combo in itertools.chain.from_iterable(
            itertools.product(("a", "b"), repeat=l) for l in (1, 2)
        ):
            arch = sp.assemble_arch(spec, [sp.ModuleSubgraph.from_types(spec, 1, combo)])
            ids.add(arch.arch_id)
        assert len(ids) == 6

    def test_no_collisions_across_small_template(self):
        spec = sp.space_template("toy_mirror")
        seen = set()
        count = 0
        for picks in itertools.product(
            *[list(sp.enumerate_stage_subgraphs(spec, s.u)) for s in spec.stages]
        ):
            try:
                arch = sp.assemble_arch(spec, list(picks))
            except sp.ConstraintViolation:
                continue
            seen.add(arch.arch_id)
            count += 1
        assert count == 1440
        assert len(seen) == count


class TestSampling:
    def test_reproducible(self, mbv3):
        a = sp.sample_random(mbv3, 50, seed=123)
        b = sp.sample_random(mbv3, 50, seed=123)
        assert [x.arch_id for x in a] == [x.arch_id for x in b]

    def test_seeds_differ(self, mbv3):
        for s in range(10):
            a = sp.sample_random(mbv3, 5, seed=s)
            b = sp.sample_random(mbv3, 5, seed=1000 + s)
            assert [x.arch_id for x in a] != [x.arch_id for x in b]

    def test_single_choice_space_returns_unique_arch(self):
        spec = sp.SearchSpaceSpec(
            name="only",
            stages=(sp.StageSpec(1, 1, 1, ("x",)),),
            schema=sp.FeatureSchema(
                (
                    sp.FeatureCategory("op", "categorical", choices=("x",)),
                    sp.FeatureCategory("stage", "numeric", lo=1.0, hi=2.0),
                    sp.FeatureCategory("layer", "numeric", lo=1.0, hi=2.0),
                )
            ),
            layer_features={"x": {"op": "x"}},
        )
        (arch,) = sp.sample_random(spec, 1, seed=0)
        assert arch.stage_types == (("x",),)

    def test_samples_satisfy_constraints(self, unet):
        for arch in sp.sample_random(unet, 200, seed=9):
            assert unet.check_constraints(arch.stage_of_node, arch.node_features) == []

    def test_3000_sample_run(self, mbv3):
        archs = sp.sample_random(mbv3, 3000, seed=0)
        assert len(archs) == 3000


class TestSpecFileAndDataset:
    def test_space_spec_roundtrip(self, tmp_path, unet):
        path = tmp_path / "space.json"
        sp.save_space_spec(unet, path)
        loaded = sp.load_space_spec(path)
        assert loaded == unet
        assert loaded.fingerprint == unet.fingerprint

    def test_dataset_roundtrip_bit_exact(self, tmp_path, mbv3):
        archs = sp.sample_random(mbv3, 20, seed=77)
        records = [
            sp.DatasetRecord(a, {"acc": 0.7 + i * 1e-3, "lat": 3.25 / (i + 1)})
            for i, a in enumerate(archs)
        ]
        p1 = tmp_path / "d1.jsonl"
        p2 = tmp_path / "d2.jsonl"
        sp.write_dataset(p1, records)
        loaded = sp.read_dataset(p1, mbv3)
        sp.write_dataset(p2, loaded)
        assert p1.read_bytes() == p2.read_bytes()
        for orig, back in zip(records, loaded):
            assert orig.arch.arch_id == back.arch.arch_id
            assert orig.metrics == back.metrics

    def test_validator_runs_on_read(self, tmp_path, unet):
        bad = {"arch": {"stages": [["conv_m1_c128"], ["conv_m2_c128"], ["conv_m1_c256"]]}, "metrics": {"y": 1.0}}
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(bad) + "\n")
        with pytest.raises(sp.ConstraintViolation):
            sp.read_dataset(path, unet)
