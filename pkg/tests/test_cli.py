"""Command-line front end: outputs, determinism and exit codes."""

import io
import json
import math
import sys

import pytest

from app import main
from config.settings import EXIT_DATA, EXIT_OK, EXIT_VALIDATION, WAREHOUSE_ID
from models.schemas import ConstantDemand, SimConfig
from storage.csv_storage import load_day_records, save_donors
from storage.json_storage import save_config

SMALL_COUNTS = ["--count", "farm=2", "--count", "grocer=5", "--count", "individual=3",
                "--count", "manufacturer=2"]


def _last_error(capsys) -> str:
    return capsys.readouterr().err.strip().splitlines()[-1]


@pytest.fixture
def donors_csv(tmp_path, small_donors):
    return save_donors(tmp_path / "donors.csv", small_donors)


@pytest.fixture
def config_json(tmp_path):
    cfg = SimConfig(days=20, epsilon=0.5, seed=5, cluster_count=4, demand=ConstantDemand(amount=700.0))
    return save_config(tmp_path / "config.json", cfg)


def _csv_rows(path):
    lines = open(path, encoding="utf-8").read().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


class TestGenSynthetic:
    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            assert main(["gen-synthetic", "--quiet", "--seed", "9", "--out-dir", str(tmp_path / name)]
                        + SMALL_COUNTS) == EXIT_OK
        for output in ("donors.csv", "distances.csv"):
            assert (tmp_path / "a" / output).read_bytes() == (tmp_path / "b" / output).read_bytes()
        rows = _csv_rows(tmp_path / "a" / "donors.csv")
        assert len(rows) == 12
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        assert manifest["seed"] == 9
        assert manifest["outputs"] == ["donors.csv", "distances.csv"]

    def test_distances_cover_warehouse(self, tmp_path):
        main(["gen-synthetic", "--quiet", "--out-dir", str(tmp_path)] + SMALL_COUNTS)
        rows = _csv_rows(tmp_path / "distances.csv")
        assert {r["to_id"] for r in rows if r["from_id"] == WAREHOUSE_ID} == \
            {r["id"] for r in _csv_rows(tmp_path / "donors.csv")}

    def test_no_donors(self, tmp_path, capsys):
        argv = ["gen-synthetic", "--out-dir", str(tmp_path)]
        for category in ("farm", "grocer", "individual", "manufacturer"):
            argv += ["--count", f"{category}=0"]
        assert main(argv) == EXIT_VALIDATION
        assert _last_error(capsys).startswith("cli: ConfigurationError:")

    def test_bad_count(self, tmp_path, capsys):
        assert main(["gen-synthetic", "--out-dir", str(tmp_path), "--count", "bakery=3"]) == EXIT_VALIDATION
        assert _last_error(capsys).startswith("cli: DomainError:")


class TestSimulate:
    def test_byte_identical_reruns(self, tmp_path, donors_csv, config_json):
        for name in ("a", "b"):
            argv = ["simulate", "--quiet", "--donors", donors_csv, "--config", config_json,
                    "--out-dir", str(tmp_path / name)]
            assert main(argv) == EXIT_OK
        assert (tmp_path / "a" / "daily.csv").read_bytes() == (tmp_path / "b" / "daily.csv").read_bytes()

    def test_summary_recomputes_from_daily(self, tmp_path, donors_csv, config_json):
        main(["simulate", "--quiet", "--donors", donors_csv, "--config", config_json, "--out-dir", str(tmp_path)])
        records = load_day_records(tmp_path / "daily.csv")
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["days"] == len(records) == 20
        assert summary["mean_cost_km"] == pytest.approx(math.fsum(r.cost for r in records) / len(records))
        assert summary["underrun_days"] == sum(r.excess < 0 for r in records)
        assert summary["config"]["seed"] == 5

    def test_seed_flag_overrides_config(self, tmp_path, donors_csv, config_json):
        main(["simulate", "--quiet", "--donors", donors_csv, "--config", config_json, "--seed", "77",
              "--out-dir", str(tmp_path)])
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["seed"] == 77
        assert set(manifest["input_digests"]) == {config_json, donors_csv}
        assert all(v.startswith("sha256:") for v in manifest["input_digests"].values())

    def test_invalid_epsilon(self, tmp_path, donors_csv, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema_version": 1, "simulation": {"epsilon": 1.5}}))
        code = main(["simulate", "--donors", donors_csv, "--config", str(path), "--out-dir", str(tmp_path)])
        assert code == EXIT_VALIDATION
        assert _last_error(capsys).startswith("cli: ConfigurationError:")
        assert not (tmp_path / "daily.csv").exists()

    def test_emit_lp(self, tmp_path, donors_csv, config_json):
        assert main(["simulate", "--quiet", "--donors", donors_csv, "--config", config_json, "--emit-lp", "3",
                     "--out-dir", str(tmp_path)]) == EXIT_OK
        text = (tmp_path / "day_3.lp").read_text()
        assert text.startswith("/* daily pickup selection */")
        assert "min: " in text and "c1: " in text
        assert "bin x0 x1 x2 x3;" in text
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert "day_3.lp" in manifest["outputs"]
        assert not (tmp_path / "day_4.lp").exists()

    @pytest.mark.parametrize("day", ["0", "21"])
    def test_emit_lp_day_out_of_range(self, tmp_path, donors_csv, config_json, capsys, day):
        code = main(["simulate", "--donors", donors_csv, "--config", config_json, "--emit-lp", day,
                     "--out-dir", str(tmp_path)])
        assert code == EXIT_VALIDATION
        assert _last_error(capsys).startswith("cli: DomainError:")
        assert not (tmp_path / "daily.csv").exists()

    def test_missing_donors_file(self, tmp_path, capsys):
        code = main(["simulate", "--donors", str(tmp_path / "none.csv"), "--out-dir", str(tmp_path)])
        assert code == EXIT_DATA
        assert "ParseError" in _last_error(capsys)


class TestFit:
    def test_all_zero_values(self, tmp_path):
        values = tmp_path / "values.csv"
        values.write_text("donor_id,date,lbs\n" + "".join(f"g1,2013-06-{d:02d},0\n" for d in range(1, 11)))
        assert main(["fit", "--quiet", "--values", str(values), "--out-dir", str(tmp_path)]) == EXIT_OK
        fits = json.loads((tmp_path / "fits.json").read_text())
        assert fits["overall"]["rate"] == 0.0
        assert fits["overall"]["tail"] is None
        assert not (tmp_path / "qq_overall.csv").exists()

    def test_writes_qq_pairs(self, tmp_path):
        lbs = [0, 12, 0, 40, 7, 0, 95, 3, 22, 0, 61, 15, 0, 8, 30, 0, 140, 5, 19, 0] * 3
        values = tmp_path / "values.csv"
        values.write_text("donor_id,date,lbs\n" + "".join(f"g1,d{i},{v}\n" for i, v in enumerate(lbs)))
        assert main(["fit", "--quiet", "--values", str(values), "--out-dir", str(tmp_path)]) == EXIT_OK
        fits = json.loads((tmp_path / "fits.json").read_text())
        assert fits["overall"]["rate"] == pytest.approx(42 / 60)
        assert len(_csv_rows(tmp_path / "qq_overall.csv")) == 42

    def test_empty_values(self, tmp_path, capsys):
        values = tmp_path / "values.csv"
        values.write_text("donor_id,date,lbs\n")
        assert main(["fit", "--values", str(values), "--out-dir", str(tmp_path)]) == EXIT_DATA
        assert "ParseError" in _last_error(capsys)

    def test_unknown_donor(self, tmp_path, donors_csv, capsys):
        values = tmp_path / "values.csv"
        values.write_text("donor_id,date,lbs\nnobody,2013-06-01,4\n")
        code = main(["fit", "--values", str(values), "--donors", donors_csv, "--out-dir", str(tmp_path)])
        assert code == EXIT_DATA
        assert _last_error(capsys).startswith("cli: ReferentialError:")


class TestCluster:
    def test_single_cluster(self, tmp_path, donors_csv, small_donors):
        assert main(["cluster", "--quiet", "--donors", donors_csv, "--k", "1", "--out-dir", str(tmp_path)]) == EXIT_OK
        rows = _csv_rows(tmp_path / "clusters.csv")
        assert {r["cluster_index"] for r in rows} == {"0"}
        assert sorted(r["donor_id"] for r in rows) == sorted(d.id for d in small_donors)

    def test_default_k(self, tmp_path, donors_csv):
        main(["cluster", "--quiet", "--donors", donors_csv, "--out-dir", str(tmp_path)])
        assert len({r["cluster_index"] for r in _csv_rows(tmp_path / "clusters.csv")}) == 4

    def test_k_out_of_range(self, tmp_path, donors_csv, capsys):
        assert main(["cluster", "--donors", donors_csv, "--k", "40", "--out-dir", str(tmp_path)]) == EXIT_VALIDATION
        assert "DomainError" in _last_error(capsys)

    def test_distances_missing_a_donor(self, tmp_path, donors_csv, small_donors, capsys):
        distances = tmp_path / "distances.csv"
        distances.write_text(f"from_id,to_id,km\n{WAREHOUSE_ID},{small_donors[0].id},3.0\n")
        code = main(["cluster", "--donors", donors_csv, "--distances", str(distances), "--out-dir", str(tmp_path)])
        assert code == EXIT_DATA
        assert "ReferentialError" in _last_error(capsys)

    def test_fill_missing(self, tmp_path, donors_csv, small_donors):
        distances = tmp_path / "distances.csv"
        distances.write_text(f"from_id,to_id,km\n{WAREHOUSE_ID},{small_donors[0].id},3.0\n")
        code = main(["cluster", "--quiet", "--donors", donors_csv, "--distances", str(distances), "--fill-missing",
                     "--out-dir", str(tmp_path)])
        assert code == EXIT_OK


class TestSweep:
    def test_empty_grid(self, tmp_path, donors_csv, config_json, capsys):
        code = main(["sweep", "--donors", donors_csv, "--config", config_json, "--kind", "epsilon", "--grid", ",",
                     "--out-dir", str(tmp_path)])
        assert code == EXIT_VALIDATION
        assert "DomainError" in _last_error(capsys)

    def test_single_cell_matches_simulate(self, tmp_path, donors_csv, config_json):
        main(["simulate", "--quiet", "--donors", donors_csv, "--config", config_json, "--out-dir", str(tmp_path)])
        main(["sweep", "--quiet", "--donors", donors_csv, "--config", config_json, "--kind", "epsilon",
              "--grid", "0.5", "--out-dir", str(tmp_path)])
        summary = json.loads((tmp_path / "summary.json").read_text())
        (row,) = _csv_rows(tmp_path / "sweep_epsilon.csv")
        assert float(row["epsilon"]) == 0.5
        assert float(row["mean_cost_km"]) == summary["mean_cost_km"]
        assert int(row["underrun_days"]) == summary["underrun_days"]

    def test_zero_demand_costs_nothing(self, tmp_path, donors_csv, config_json):
        assert main(["sweep", "--quiet", "--donors", donors_csv, "--config", config_json, "--kind", "demand",
                     "--grid", "0", "--out-dir", str(tmp_path)]) == EXIT_OK
        (row,) = _csv_rows(tmp_path / "sweep_demand.csv")
        assert float(row["mean_cost_km"]) == 0.0

    def test_participation_needs_demand_grid(self, tmp_path, donors_csv, capsys):
        code = main(["sweep", "--donors", donors_csv, "--kind", "participation", "--grid", "0.5,1",
                     "--out-dir", str(tmp_path)])
        assert code == EXIT_VALIDATION
        assert _last_error(capsys).startswith("cli: DomainError:")


class TestWarehouseLocation:
    @pytest.fixture
    def denver_donors(self, tmp_path):
        profile = tmp_path / "profile.json"
        profile.write_text(json.dumps({"warehouse_lat": 39.7, "warehouse_lon": -104.9,
                                       "categories": {"grocer": {"count": 6, "radius_max_km": 10.0}}}))
        assert main(["gen-synthetic", "--quiet", "--profile", str(profile), "--out-dir", str(tmp_path / "gen")]) \
            == EXIT_OK
        return str(tmp_path / "gen" / "donors.csv")

    @staticmethod
    def _disagreements(caplog):
        return [r for r in caplog.records if r.levelname == "WARNING" and "disagrees" in r.getMessage()]

    def test_default_location_warns(self, tmp_path, denver_donors, caplog):
        assert main(["cluster", "--quiet", "--donors", denver_donors, "--k", "2",
                     "--out-dir", str(tmp_path / "out")]) == EXIT_OK
        assert len(self._disagreements(caplog)) == 1

    def test_matching_location_is_quiet(self, tmp_path, denver_donors, caplog):
        assert main(["cluster", "--quiet", "--donors", denver_donors, "--k", "2", "--warehouse", "39.7,-104.9",
                     "--out-dir", str(tmp_path / "out")]) == EXIT_OK
        assert not self._disagreements(caplog)

    @pytest.mark.parametrize("value", ["1", "39.7,-104.9,5", "north,west"])
    def test_malformed_location(self, tmp_path, denver_donors, capsys, value):
        code = main(["cluster", "--donors", denver_donors, "--warehouse", value, "--out-dir", str(tmp_path / "out")])
        assert code == EXIT_VALIDATION
        assert _last_error(capsys).startswith("cli: DomainError:")


class TestRepeatedInvocation:
    def test_logging_follows_current_stderr(self, tmp_path, donors_csv, monkeypatch):
        first = io.StringIO()
        monkeypatch.setattr(sys, "stderr", first)
        assert main(["cluster", "--donors", donors_csv, "--out-dir", str(tmp_path / "a")]) == EXIT_OK
        assert "[cli] Wrote" in first.getvalue()
        first.close()

        second = io.StringIO()
        monkeypatch.setattr(sys, "stderr", second)
        assert main(["cluster", "--donors", donors_csv, "--out-dir", str(tmp_path / "b")]) == EXIT_OK
        assert "[cli] Wrote" in second.getvalue()

    def test_quiet_run_after_closed_stream(self, tmp_path, donors_csv, monkeypatch):
        first = io.StringIO()
        monkeypatch.setattr(sys, "stderr", first)
        main(["cluster", "--quiet", "--donors", donors_csv, "--out-dir", str(tmp_path / "a")])
        first.close()

        second = io.StringIO()
        monkeypatch.setattr(sys, "stderr", second)
        assert main(["cluster", "--donors", donors_csv, "--k", "40", "--out-dir", str(tmp_path / "b")]) \
            == EXIT_VALIDATION
        assert second.getvalue().strip().splitlines()[-1].startswith("cli: DomainError:")
