"""CSV and JSON file formats."""

import json
from pathlib import Path

import pytest

from core.exceptions import ConfigurationError, ParseError
from core.supply import default_category_fits
from models.schemas import (
    Cluster,
    ConstantDemand,
    DayRecord,
    DonorCategory,
    PotModel,
    SimConfig,
    SimSummary,
    SweepRow,
)
from storage.csv_storage import (
    load_daily_values,
    load_day_records,
    load_distance_pairs,
    load_donors,
    save_clusters,
    save_day_records,
    save_distance_matrix,
    save_donors,
    save_qq_pairs,
    save_sweep,
)
from storage.json_storage import load_config, load_fits, save_config, save_fits, save_summary
from utils.digests import file_digest


def _write(path, text: str):
    path.write_text(text, encoding="utf-8")
    return path


class TestDonorsCsv:
    def test_round_trip(self, tmp_path, small_donors):
        path = save_donors(tmp_path / "donors.csv", small_donors)
        assert tuple(load_donors(path)) == small_donors

    def test_optional_fields(self, tmp_path):
        path = _write(tmp_path / "d.csv", "id,name,category,sqft,lat,lon,dist_km\nf1,Farm One,Farm,,,,12.5\n")
        (donor,) = load_donors(path)
        assert donor.category == DonorCategory.FARM
        assert donor.square_footage is None and not donor.has_coordinates
        assert donor.distance_from_warehouse == 12.5

    def test_bad_number_reports_line(self, tmp_path):
        path = _write(tmp_path / "d.csv",
                      "id,name,category,sqft,lat,lon,dist_km\n"
                      "g1,A,grocer,1000,40.0,-105.0,\n"
                      "g2,B,grocer,lots,40.0,-105.0,\n")
        with pytest.raises(ParseError) as info:
            load_donors(path)
        assert info.value.line == 3
        assert f"{path}:3:" in str(info.value)

    def test_unknown_category(self, tmp_path):
        path = _write(tmp_path / "d.csv", "id,name,category,sqft,lat,lon,dist_km\ng1,A,bakery,,,,\n")
        with pytest.raises(ParseError) as info:
            load_donors(path)
        assert info.value.line == 2

    def test_duplicate_id(self, tmp_path):
        path = _write(tmp_path / "d.csv", "id,name,category,sqft,lat,lon,dist_km\ng1,A,grocer,,,,\ng1,B,grocer,,,,\n")
        with pytest.raises(ParseError):
            load_donors(path)

    def test_missing_column(self, tmp_path):
        path = _write(tmp_path / "d.csv", "id,name\ng1,A\n")
        with pytest.raises(ParseError) as info:
            load_donors(path)
        assert info.value.line == 1

    def test_empty_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_donors(_write(tmp_path / "d.csv", ""))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_donors(tmp_path / "nope.csv")


class TestDistancesCsv:
    def test_matrix_round_trip(self, tmp_path, small_matrix):
        pairs = load_distance_pairs(save_distance_matrix(tmp_path / "dist.csv", small_matrix))
        assert len(pairs) == small_matrix.n * (small_matrix.n - 1)
        for (a, b), km in pairs.items():
            assert km == small_matrix.distance(a, b)

    def test_negative_distance(self, tmp_path):
        path = _write(tmp_path / "dist.csv", "from_id,to_id,km\nwarehouse,a,-1\n")
        with pytest.raises(ParseError):
            load_distance_pairs(path)


class TestDailyValuesCsv:
    def test_load(self, tmp_path):
        path = _write(tmp_path / "v.csv", "donor_id,date,lbs\ng1,2013-06-01,0\ng1,2013-06-02,120.5\n")
        frame = load_daily_values(path)
        assert frame["lbs"].tolist() == [0.0, 120.5]

    def test_negative_weight(self, tmp_path):
        path = _write(tmp_path / "v.csv", "donor_id,date,lbs\ng1,2013-06-01,-4\n")
        with pytest.raises(ParseError) as info:
            load_daily_values(path)
        assert info.value.line == 2

    def test_header_only(self, tmp_path):
        with pytest.raises(ParseError):
            load_daily_values(_write(tmp_path / "v.csv", "donor_id,date,lbs\n"))


class TestOutputCsv:
    def test_day_records_full_precision(self, tmp_path):
        records = [
            DayRecord(day=1, total_demand=5454.0, net_demand=5454.0, recovered=1 / 3, cost=12.345678901234567,
                      excess=1 / 3 - 5454.0, warehouse_stock=0.0, underrun=True, optimality_proven=True),
            DayRecord(day=2, total_demand=5454.0, net_demand=0.0, recovered=0.0, cost=0.0, excess=0.0,
                      warehouse_stock=0.1, underrun=False, optimality_proven=False),
        ]
        path = save_day_records(tmp_path / "daily.csv", records)
        assert load_day_records(path) == records
        header = open(path, encoding="utf-8").readline().strip()
        assert header == "day,total_demand,net_demand,recovered,cost_km,excess,warehouse,underrun,optimal"

    def test_clusters(self, tmp_path):
        clusters = [Cluster(member_ids=("a", "b"), cost=15.0), Cluster(member_ids=("c",), cost=10.0)]
        lines = open(save_clusters(tmp_path / "c.csv", clusters), encoding="utf-8").read().splitlines()
        assert lines == ["cluster_index,donor_id,cluster_cost_km", "0,a,15.0", "0,b,15.0", "1,c,10.0"]

    def test_sweep(self, tmp_path):
        rows = [SweepRow(params={"fraction": 0.5, "demand": 100.0}, mean_cost=1.5, mean_excess=2.0,
                         underrun_days=3, mean_recovered=4.0)]
        lines = open(save_sweep(tmp_path / "s.csv", rows), encoding="utf-8").read().splitlines()
        assert lines[0] == "fraction,demand,mean_cost_km,mean_excess_lbs,underrun_days,mean_recovered_lbs"
        assert lines[1] == "0.5,100.0,1.5,2.0,3,4.0"


class TestConfigJson:
    def test_round_trip(self, tmp_path):
        cfg = SimConfig(days=10, epsilon=0.2, demand=ConstantDemand(amount=10260.0), seed=42)
        assert load_config(save_config(tmp_path / "cfg.json", cfg)) == cfg

    def test_out_of_range_epsilon(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"schema_version": 1, "simulation": {"epsilon": 1.5}}))
        with pytest.raises(ConfigurationError) as info:
            load_config(path)
        assert "epsilon" in str(info.value)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"schema_version": 1, "simulation": {"days": 3, "speed": 9}}))
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_wrong_schema_version(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"schema_version": 2, "simulation": {}}))
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_malformed_json(self, tmp_path):
        path = _write(tmp_path / "cfg.json", '{"schema_version": 1,\n  "simulation": }')
        with pytest.raises(ParseError) as info:
            load_config(path)
        assert info.value.line == 2

    def test_shipped_example(self):
        cfg = load_config(Path(__file__).resolve().parent.parent / "data" / "example_config.json")
        assert cfg.demand == ConstantDemand(amount=5454.0)


class TestFitsJson:
    def test_round_trip_with_absent_tail(self, tmp_path):
        fits = default_category_fits()
        categories = dict(fits.categories)
        categories[DonorCategory.FARM] = PotModel(rate=0.0, tail=None)
        fits = fits.model_copy(update={"categories": categories})
        path = save_fits(tmp_path / "fits.json", fits)
        assert json.loads(open(path).read())["categories"]["farm"]["tail"] is None
        assert load_fits(path) == fits


class TestSummaryJson:
    def test_fields(self, tmp_path):
        summary = SimSummary(mean_cost=1.0, mean_excess=2.0, underrun_days=3, total_recovered=4.0, days=5,
                             mean_recovered=0.8, unproven_optimal_days=0, conservation_checks=5)
        data = json.loads(open(save_summary(tmp_path / "s.json", summary, SimConfig())).read())
        assert data["mean_cost_km"] == 1.0
        assert data["underrun_days"] == 3
        assert data["unproven_optimal_days"] == 0
        assert data["config"]["epsilon"] == 0.5


class TestWriters:
    @pytest.mark.parametrize("writer", [save_donors, save_distance_matrix, save_qq_pairs, save_clusters,
                                        save_day_records, save_sweep, file_digest])
    def test_documented(self, writer):
        assert writer.__doc__ and writer.__doc__.strip()

    def test_qq_pairs(self, tmp_path):
        save_qq_pairs(tmp_path / "qq.csv", [(1.5, 2.0), (3.25, 4.0)])
        lines = (tmp_path / "qq.csv").read_text().splitlines()
        assert len(lines) == 3
        assert lines[1:] == ["1.5,2.0", "3.25,4.0"]

    def test_digest_tracks_content(self, tmp_path):
        path = _write(tmp_path / "a.txt", "one")
        first = file_digest(path)
        assert first.startswith("sha256:") and file_digest(path) == first
        _write(path, "two")
        assert file_digest(path) != first
