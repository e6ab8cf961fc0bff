from __future__ import annotations

import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from gridreconf import (
    Configuration,
    DatasetSample,
    EmptyProfile,
    LoadProfiles,
    PrecisionRules,
    PromptTemplate,
    TemplateMissingSlot,
    build_dataset,
    extract,
    generate_scenarios,
    is_radial,
    make_sample,
    read_jsonl,
    reduce_precision,
    render_completion,
    render_prompt,
    round_half_away,
    solve,
    unreduced_template,
)
from gridreconf.dataset import split_counts


def sample_for(network, loads=None, sample_id=0):
    return make_sample(network, loads or network.base_loads(), sample_id)


class TestRounding:
    def test_impedance_example(self):
        assert round_half_away(0.000645691, 5) == 0.00065

    def test_voltage_example(self):
        assert round_half_away(0.99456, 4) == 0.9946

    def test_ties_go_away_from_zero(self):
        assert round_half_away(0.00015, 4) == 0.0002
        assert round_half_away(-0.00015, 4) == -0.0002
        assert round_half_away(2.5, 0) == 3.0
        assert round_half_away(-2.5, 0) == -3.0

    @given(st.floats(min_value=-1e6, max_value=1e6), st.integers(0, 8))
    @settings(max_examples=300, deadline=None)
    def test_idempotent(self, value, decimals):
        once = round_half_away(value, decimals)
        assert round_half_away(once, decimals) == once

    def test_reduce_precision_fields(self, ieee33):
        sample = sample_for(ieee33)
        again = reduce_precision(sample)
        assert again == sample
        assert all(
            v == round_half_away(v, 4) for v in sample.updated_node_voltages
        )
        assert sample.existing_system_loss == round_half_away(
            sample.existing_system_loss, 4
        )
        assert all(
            z == round_half_away(z, 5) for z in sample.line_impedances
        )


class TestLoadProfiles:
    def test_global_csv(self, tmp_path):
        path = tmp_path / "profile.csv"
        path.write_text("timestamp,multiplier\n0,0.5\n1,1.5\n", encoding="utf-8")
        profiles = LoadProfiles.from_csv(path)
        assert len(profiles) == 2
        assert profiles.bus_ids is None
        assert profiles.multiplier(0, 7) == 0.5

    def test_per_bus_csv(self, tmp_path):
        path = tmp_path / "profile.csv"
        path.write_text(
            "timestamp,bus_2,bus_3\n0,0.5,2.0\n1,1.0,1.0\n", encoding="utf-8"
        )
        profiles = LoadProfiles.from_csv(path)
        assert profiles.bus_ids == (2, 3)
        assert profiles.multiplier(0, 3) == 2.0
        assert profiles.multiplier(0, 9) == 1.0

    def test_empty_csv_rejected(self, tmp_path):
        path = tmp_path / "profile.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(EmptyProfile):
            LoadProfiles.from_csv(path)


class TestScenarios:
    def test_count_and_determinism(self, ieee33):
        profiles = LoadProfiles(
            timestamps=("a", "b"), rows=((0.5,), (1.5,))
        )
        first = list(generate_scenarios(ieee33, profiles, 20, seed=9))
        second = list(generate_scenarios(ieee33, profiles, 20, seed=9))
        assert len(first) == 20
        assert first == second
        other = list(generate_scenarios(ieee33, profiles, 20, seed=10))
        assert first != other

    def test_unit_profile_reproduces_base_loads(self, ieee33):
        scenarios = list(
            generate_scenarios(ieee33, LoadProfiles.constant(1.0), 3, seed=0)
        )
        assert all(list(s) == ieee33.base_loads() for s in scenarios)

    def test_empty_profile_rejected(self, ieee33):
        empty = LoadProfiles(timestamps=(), rows=())
        with pytest.raises(EmptyProfile):
            next(generate_scenarios(ieee33, empty, 1))

    def test_bad_count_rejected(self, ieee33):
        with pytest.raises(ValueError):
            next(generate_scenarios(ieee33, LoadProfiles.constant(), 0))


class TestMakeSample:
    def test_labels_are_radial_and_no_worse(self, ieee33):
        sample = sample_for(ieee33)
        assert sample.buses == 33
        assert sample.updated_system_loss <= sample.existing_system_loss
        for open_lines in (sample.existing_open_lines, sample.updated_open_lines):
            assert is_radial(
                Configuration(network=ieee33, open_lines=frozenset(open_lines))
            )

    def test_rendered_loss_matches_power_flow_to_four_decimals(self, ieee33):
        sample = sample_for(ieee33)
        res = solve(
            Configuration(
                network=ieee33, open_lines=frozenset(sample.updated_open_lines)
            ),
            sample.system_load,
        )
        assert abs(sample.updated_system_loss - res.total_loss) < 5e-5

    def test_random_networks_keep_invariants(self):
        for seed in range(4):
            rng = random.Random(300 + seed)
            net = oracles.random_radial_network(rng, rng.randint(4, 8), extra_ties=2)
            sample = make_sample(net, net.base_loads(), 0)
            assert sample.updated_system_loss <= sample.existing_system_loss
            assert is_radial(
                Configuration(
                    network=net, open_lines=frozenset(sample.updated_open_lines)
                )
            )


class TestRenderPrompt:
    def test_input_block_serialization(self, ieee33):
        record = render_prompt(sample_for(ieee33))
        user = record.messages[1][1]
        assert "Buses: 33, Lines: [(1,2), (2,3)" in user
        assert "Existing Open Lines: " in user
        assert "Existing System Loss: " in user
        assert "System Load: " in user

    def test_instruction_appears_exactly_once(self, ieee33):
        record = render_prompt(sample_for(ieee33))
        user = record.messages[1][1]
        assert user.count("Find the optimal configuration") == 1

    def test_default_excludes_impedances_and_connectivity(self, ieee33):
        record = render_prompt(sample_for(ieee33))
        user = record.messages[1][1]
        assert "Line Impedances" not in user
        assert "Connectivity" not in user

    def test_all_clauses_present_at_level_four(self, ieee33):
        record = render_prompt(sample_for(ieee33))
        user = record.messages[1][1]
        assert record.augmentation_level == 4
        assert "Use only lines that are provided in the input data" in user
        assert "single connected component" in user
        assert "number of nodes minus one" in user
        assert "keep the existing configuration" in user
        assert "three labeled sections" in user

    def test_level_zero_is_bare_task(self, ieee33):
        template = PromptTemplate(augmentation_level=0)
        record = render_prompt(sample_for(ieee33), template)
        user = record.messages[1][1]
        assert record.augmentation_level == 0
        assert "Use only lines" not in user
        assert "three labeled sections" not in user
        assert "Find the optimal configuration" in user

    def test_missing_slot_rejected(self, ieee33):
        template = PromptTemplate(input_format="Buses: {buses}")
        with pytest.raises(TemplateMissingSlot):
            render_prompt(sample_for(ieee33), template)

    def test_completion_has_three_sections(self, ieee33):
        completion = render_prompt(sample_for(ieee33)).completion
        assert completion.count("Updated open lines:") == 1
        assert completion.count("Updated node voltages:") == 1
        assert completion.count("Updated system loss:") == 1

    def test_empty_open_lines_still_three_sections(self):
        sample = DatasetSample(
            sample_id=0,
            buses=2,
            lines=((1, 2),),
            line_impedances=(0.01,),
            existing_open_lines=(),
            existing_node_voltages=(1.0, 0.99),
            existing_system_loss=0.5,
            system_load=(0j, 0.1 + 0j),
            updated_open_lines=(),
            updated_node_voltages=(1.0, 0.99),
            updated_system_loss=0.5,
        )
        completion = render_completion(sample)
        assert "Updated open lines: ()" in completion
        parsed = extract(completion)
        assert parsed.status == "proper"
        assert parsed.open_lines == ()

    def test_round_trip_recovers_updated_fields(self, ieee33):
        sample = sample_for(ieee33)
        parsed = extract(render_completion(sample))
        assert parsed.status == "proper"
        assert tuple(sorted(parsed.open_lines)) == sample.updated_open_lines
        assert parsed.node_voltages == sample.updated_node_voltages
        assert parsed.system_loss == sample.updated_system_loss

    def test_record_json_round_trip(self, ieee33):
        from gridreconf import PromptRecord

        record = render_prompt(sample_for(ieee33))
        doc = record.to_json_dict()
        assert [m["role"] for m in doc["messages"]] == ["system", "user"]
        assert PromptRecord.from_json_dict(doc) == record


class TestPromptReduction:
    def test_reduced_rendering_shrinks_forty_percent(self, ieee33):
        sample = sample_for(ieee33)
        reduced = render_prompt(sample, PromptTemplate())
        unreduced = render_prompt(sample, unreduced_template())
        reduced_len = len(reduced.messages[1][1])
        unreduced_len = len(unreduced.messages[1][1])
        assert "Existing Connectivity: [[" in unreduced.messages[1][1]
        assert reduced_len <= 0.6 * unreduced_len


class TestSplitCounts:
    def test_exact_thirds(self):
        assert split_counts(17520, (1 / 3, 1 / 3, 1 / 3)) == [5840, 5840, 5840]

    def test_remainder_spread(self):
        counts = split_counts(500, (1 / 3, 1 / 3, 1 / 3))
        assert sum(counts) == 500
        assert max(counts) - min(counts) <= 1

    def test_all_in_train(self):
        assert split_counts(10, (1.0, 0.0, 0.0)) == [10, 0, 0]


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    rng = random.Random(42)
    nets = [
        oracles.random_radial_network(rng, 5, extra_ties=1, name="alpha"),
        oracles.random_radial_network(rng, 6, extra_ties=2, name="beta"),
    ]
    out = tmp_path_factory.mktemp("dataset")
    profiles = LoadProfiles(timestamps=("a", "b"), rows=((0.8,), (1.2,)))
    manifest = build_dataset(nets, profiles, count=9, seed=5, out_dir=out)
    return nets, out, manifest


class TestBuildDataset:
    def test_layout_and_counts(self, built):
        _, out, manifest = built
        for name in ("alpha", "beta"):
            assert (out / name / "train.jsonl").exists()
            assert (out / name / "labels_train.jsonl").exists()
            assert (out / name / "samples.csv").exists()
        assert (out / "combined" / "test.jsonl").exists()
        assert (out / "manifest.json").exists()
        per_net = [
            manifest["files"][f"alpha/{s}.jsonl"]["records"]
            for s in ("train", "val", "test")
        ]
        assert sum(per_net) == 9
        assert manifest["files"]["combined/train.jsonl"]["records"] == sum(
            manifest["files"][f"{n}/train.jsonl"]["records"]
            for n in ("alpha", "beta")
        )

    def test_labels_align_with_records(self, built):
        _, out, _ = built
        records = list(read_jsonl(out / "alpha" / "val.jsonl"))
        labels = list(read_jsonl(out / "alpha" / "labels_val.jsonl"))
        assert [r["meta"]["id"] for r in records] == [l["id"] for l in labels]

    def test_combined_round_robin_alternates(self, built):
        _, out, _ = built
        combined = list(read_jsonl(out / "combined" / "train.jsonl"))
        nets = [r["meta"]["network"] for r in combined]
        # with two networks the head of the stream alternates strictly
        assert nets[:2] == ["alpha", "beta"]
        assert nets[2:4] == ["alpha", "beta"]

    def test_manifest_reproducible(self, built, tmp_path):
        nets, _, manifest = built
        profiles = LoadProfiles(timestamps=("a", "b"), rows=((0.8,), (1.2,)))
        again = build_dataset(nets, profiles, count=9, seed=5, out_dir=tmp_path)
        assert json.dumps(manifest, sort_keys=True) == json.dumps(
            again, sort_keys=True
        )
        assert manifest["template_hash"] == PromptTemplate().fingerprint()

    def test_different_seed_changes_files(self, built, tmp_path):
        nets, _, manifest = built
        profiles = LoadProfiles(timestamps=("a", "b"), rows=((0.8,), (1.2,)))
        other = build_dataset(nets, profiles, count=9, seed=6, out_dir=tmp_path)
        assert manifest["files"] != other["files"]

    def test_bad_splits_rejected(self, built, tmp_path):
        nets, _, _ = built
        with pytest.raises(ValueError, match="sum to 1"):
            build_dataset(
                nets,
                LoadProfiles.constant(),
                count=2,
                seed=0,
                out_dir=tmp_path,
                splits=(0.5, 0.2, 0.2),
            )

    def test_worker_pool_matches_sequential(self, tmp_path):
        rng = random.Random(77)
        net = oracles.random_radial_network(rng, 5, extra_ties=1, name="gamma")
        profiles = LoadProfiles.constant(1.0)
        seq = build_dataset(
            [net], profiles, count=4, seed=1, out_dir=tmp_path / "seq", workers=1
        )
        par = build_dataset(
            [net], profiles, count=4, seed=1, out_dir=tmp_path / "par", workers=2
        )
        assert seq["files"] == par["files"]

    def test_random_interleave_is_seeded_permutation(self, built, tmp_path):
        nets, out, _ = built
        profiles = LoadProfiles(timestamps=("a", "b"), rows=((0.8,), (1.2,)))
        build_dataset(
            nets,
            profiles,
            count=9,
            seed=5,
            out_dir=tmp_path,
            interleave="random",
        )
        rr = [r["meta"]["id"] for r in read_jsonl(out / "combined" / "train.jsonl")]
        rnd = [
            r["meta"]["id"] for r in read_jsonl(tmp_path / "combined" / "train.jsonl")
        ]
        assert sorted(rr) == sorted(rnd)
        assert rr != rnd
