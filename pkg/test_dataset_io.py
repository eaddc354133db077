import json

import numpy as np
import pytest

from morphogrid.core.errors import HomologyError, ParseError, SchemaMismatchError
from morphogrid.models.landmarks import Dataset, LandmarkConfiguration, Provenance, Sample
from morphogrid.services.dataset_io import (
    ingest_file,
    load_dataset,
    merge_datasets,
    parse_csv,
    parse_tps_file,
    read_dataset,
    save_dataset,
    write_dataset,
)

TPS_TWO_RECORDS = """LM=8
0 0
-0.1 0.35
0.15 0.75
0.55 0.95
1.35 1.0
2.0 0.45
1.3 0.15
0.6 0.05
ID=rat_07
LM=8
0 0
-0.12 0.36
0.16 0.8
0.6 1.0
1.4 1.1
2.1 0.5
1.35 0.12
0.62 0.02
ID=rat_150
"""


class TestTpsParsing:
    def test_single_record(self):
        sample = parse_tps_file("LM=3\n0 0\n1 0\n0 1\nID=a\n")
        assert [c.name for c in sample.configurations] == ["a"]
        assert sample.configurations[0].coords.tolist() == [[0, 0], [1, 0], [0, 1]]

    def test_two_records(self):
        sample = parse_tps_file(TPS_TWO_RECORDS, group="rats")
        assert [c.name for c in sample.configurations] == ["rat_07", "rat_150"]
        assert sample.landmark_count == 8
        assert sample.group_names() == ["rats"]

    def test_default_names_and_ignored_keys(self):
        sample = parse_tps_file("LM=3\n0 0\n1 0\n0 1\nIMAGE=skull.jpg\nLM=3\n0 0\n2 0\n0 2\n")
        assert [c.name for c in sample.configurations] == ["specimen1", "specimen2"]

    def test_scale_multiplies_coordinates(self):
        sample = parse_tps_file("LM=3\n0 0\n2 0\n0 4\nSCALE=0.5\n")
        assert sample.configurations[0].coords.tolist() == [[0, 0], [1, 0], [0, 2]]

    def test_bad_coordinate_reports_line(self):
        with pytest.raises(ParseError) as caught:
            parse_tps_file("LM=3\n0 0\n1 x\n0 1\n")
        assert caught.value.line == 3

    def test_inconsistent_landmark_count(self):
        with pytest.raises(ParseError) as caught:
            parse_tps_file("LM=3\n0 0\n1 0\n0 1\nLM=4\n0 0\n1 0\n0 1\n1 1\n")
        assert caught.value.line == 5

    def test_truncated_record(self):
        with pytest.raises(ParseError):
            parse_tps_file("LM=3\n0 0\n1 0\n")

    def test_key_before_record(self):
        with pytest.raises(ParseError) as caught:
            parse_tps_file("ID=a\nLM=3\n0 0\n1 0\n0 1\n")
        assert caught.value.line == 1

    def test_empty_file(self):
        with pytest.raises(ParseError):
            parse_tps_file("\n\n")


class TestCsvParsing:
    def test_wide_form(self):
        header = "id,group," + ",".join(f"x{i},y{i}" for i in range(1, 9))
        rows = [
            "a,young," + ",".join(f"{i},{i * i % 5}" for i in range(8)),
            "b,old," + ",".join(f"{i * 1.1},{i * i % 7}" for i in range(8)),
        ]
        sample = parse_csv("\n".join([header] + rows) + "\n")
        assert len(sample.configurations) == 2
        assert sample.landmark_count == 8
        assert sample.labels == [f"L{i}" for i in range(1, 9)]
        assert sample.group_names() == ["young", "old"]

    def test_long_form(self):
        text = "id,label,x,y,group\n" + "".join(
            f"{name},{label},{x},{y},{group}\n"
            for name, group, shift in (("a", "g1", 0.0), ("b", "g2", 0.5))
            for label, x, y in (("Bas", shift, 0), ("Opi", 1, shift), ("IPS", 0, 1))
        )
        sample = parse_csv(text)
        assert sample.labels == ["Bas", "Opi", "IPS"]
        assert sample.configurations[1].coords.tolist() == [[0.5, 0], [1, 0.5], [0, 1]]
        assert sample.group_of("b") == "g2"

    def test_long_form_label_mismatch(self):
        text = "id,label,x,y\na,p,0,0\na,q,1,0\na,r,0,1\nb,p,0,0\nb,s,1,0\nb,r,0,1\n"
        with pytest.raises(HomologyError):
            parse_csv(text)

    def test_malformed_value_reports_row(self):
        text = "id,x1,y1,x2,y2,x3,y3\na,0,0,1,0,0,1\nb,0,0,oops,0,0,1\n"
        with pytest.raises(ParseError) as caught:
            parse_csv(text)
        assert caught.value.row == 3

    @pytest.mark.parametrize("value", ["nan", "inf"])
    def test_non_finite_values(self, value):
        with pytest.raises(ParseError):
            parse_csv(f"id,x1,y1,x2,y2,x3,y3\na,0,0,1,{value},0,1\n")

    def test_unpaired_columns(self):
        with pytest.raises(SchemaMismatchError):
            parse_csv("id,x1,y1,x2\na,0,0,1\n")


def two_group_dataset():
    p = LandmarkConfiguration.from_array("p", [[0.1, 0.2], [1.0 / 3.0, 0.0], [0.0, 2.0 / 7.0]], labels=["a", "b", "c"])
    q = p.with_coords(p.coords * 1.7 + np.pi, name="q")
    sample = Sample(configurations=[p, q], groups={"p": "first", "q": "second"}, metadata={"note": "test"})
    return Dataset(sample=sample, provenance=Provenance(sources=["unit"], ingested_at="2024-01-01T00:00:00+00:00"))


class TestCanonicalJson:
    def test_round_trip_is_exact(self):
        original = two_group_dataset()
        restored = read_dataset(write_dataset(original))
        assert restored == original
        assert np.array_equal(restored.sample.configurations[1].coords, original.sample.configurations[1].coords)

    def test_save_and_load(self, tmp_path):
        original = two_group_dataset()
        path = save_dataset(original, tmp_path / "nested" / "dataset.json")
        assert load_dataset(path) == original

    def test_round_trip_with_implicit_groups(self):
        p = LandmarkConfiguration.from_array("p", [[0.0, 0.0], [1.0, 0.25], [0.5, 1.0]])
        q = p.with_coords(p.coords[::-1].copy(), name="q")
        original = Dataset(sample=Sample(configurations=[p, q]))
        assert original.sample.groups == {"p": "all", "q": "all"}
        restored = read_dataset(write_dataset(original))
        assert restored == original
        assert restored.sample.metadata == {}

    def test_partial_groups_fill_in(self):
        p = LandmarkConfiguration.from_array("p", [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        q = p.with_coords(p.coords * 2.0, name="q")
        sample = Sample(configurations=[p, q], groups={"q": "old"})
        assert sample.groups == {"p": "all", "q": "old"}
        assert sample.group_names() == ["all", "old"]

    def test_non_finite_text_rejected(self):
        text = write_dataset(two_group_dataset()).replace("0.1", "NaN", 1)
        with pytest.raises(SchemaMismatchError):
            read_dataset(text)

    def test_missing_key_rejected(self):
        document = json.loads(write_dataset(two_group_dataset()))
        del document["landmarks"]
        with pytest.raises(SchemaMismatchError):
            read_dataset(json.dumps(document))

    def test_wrong_version_rejected(self):
        document = json.loads(write_dataset(two_group_dataset()))
        document["schema"] = 99
        with pytest.raises(SchemaMismatchError):
            read_dataset(json.dumps(document))

    def test_landmark_count_mismatch(self):
        document = json.loads(write_dataset(two_group_dataset()))
        document["configurations"][1]["coords"].pop()
        with pytest.raises(HomologyError):
            read_dataset(json.dumps(document))

    def test_broken_json_reports_line(self):
        with pytest.raises(ParseError) as caught:
            read_dataset('{\n "schema": 1,\n oops\n}')
        assert caught.value.line == 3


class TestIngest:
    def test_by_extension(self, tmp_path):
        path = tmp_path / "rats.tps"
        path.write_text(TPS_TWO_RECORDS)
        dataset = ingest_file(path, group="rats")
        assert dataset.provenance.sources == [str(path)]
        assert dataset.provenance.ingested_at.endswith("+00:00")
        assert dataset.sample.group_of("rat_150") == "rats"

    def test_csv_group_override(self, tmp_path):
        path = tmp_path / "tri.csv"
        path.write_text("id,x1,y1,x2,y2,x3,y3\na,0,0,1,0,0,1\n")
        assert ingest_file(path, group="g").sample.group_of("a") == "g"

    def test_unknown_extension(self, tmp_path):
        path = tmp_path / "landmarks.txt"
        path.write_text("")
        with pytest.raises(SchemaMismatchError):
            ingest_file(path)

    def test_merge_keeps_sources_and_groups(self, tmp_path):
        young = tmp_path / "young.csv"
        old = tmp_path / "old.csv"
        young.write_text("id,x1,y1,x2,y2,x3,y3\ny1,0,0,1,0,0,1\n")
        old.write_text("id,x1,y1,x2,y2,x3,y3\no1,0,0,1.2,0,0,1.1\n")
        merged = merge_datasets([ingest_file(young, group="young"), ingest_file(old, group="old")])
        assert [c.name for c in merged.sample.configurations] == ["y1", "o1"]
        assert merged.sample.group_names() == ["young", "old"]
        assert merged.provenance.sources == [str(young), str(old)]

    def test_merge_rejects_mixed_landmark_counts(self, tmp_path):
        three = tmp_path / "three.csv"
        four = tmp_path / "four.csv"
        three.write_text("id,x1,y1,x2,y2,x3,y3\na,0,0,1,0,0,1\n")
        four.write_text("id,x1,y1,x2,y2,x3,y3,x4,y4\nb,0,0,1,0,0,1,1,1\n")
        with pytest.raises(HomologyError):
            merge_datasets([ingest_file(three), ingest_file(four)])
