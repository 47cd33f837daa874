import json

import pandas as pd
import pytest

import app
import utils
from optimizer import NoFeasibleConfigurationError


def _certificate(tmp_path, configuration, name="cert.json"):
    path = tmp_path / name
    utils.save_json(str(path), configuration.to_certificate())
    return str(path)


class TestParsers:
    def test_n_values(self):
        assert app.parse_n_values("3-6,12,5") == [3, 4, 5, 6, 12]
        with pytest.raises(ValueError):
            app.parse_n_values("2-4")

    def test_groups(self):
        assert app.parse_groups("P2, pg") == ["p2", "pg"]
        assert len(app.parse_groups("all")) == 17
        with pytest.raises(ValueError):
            app.parse_groups("p2,p9")

    def test_cells(self):
        assert app.parse_cells("4x2") == (4, 2)
        with pytest.raises(ValueError):
            app.parse_cells("four")


class TestVerify:
    def test_tiling_certificate(self, tmp_path, capsys, hex_tiling):
        assert app.main(["verify", _certificate(tmp_path, hex_tiling)]) == app.EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["feasible"] is True
        assert payload["density"] == pytest.approx(1.0, abs=1e-9)
        assert payload["contacts"] == 3

    def test_overlapping_certificate(self, tmp_path, capsys, hex_tiling):
        shrunk = hex_tiling.with_cell(a=1.7, b=1.7)
        assert app.main(["verify", _certificate(tmp_path, shrunk)]) == app.EXIT_INFEASIBLE
        assert json.loads(capsys.readouterr().out)["feasible"] is False

    def test_search_result_file_accepted(self, tmp_path, capsys, disc_lattice):
        path = tmp_path / "p1_disc.json"
        utils.save_json(str(path), {"certificate": disc_lattice.to_certificate(), "report": {}})
        assert app.main(["verify", str(path), "--mc", "20000", "--seed", "3"]) == app.EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["density_mc"] == pytest.approx(payload["density"], abs=0.02)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\"group\": ")
        assert app.main(["verify", str(path)]) == app.EXIT_USAGE

    def test_missing_file(self, tmp_path):
        assert app.main(["verify", str(tmp_path / "none.json")]) == app.EXIT_USAGE


class TestUsageErrors:
    def test_unknown_group(self, tmp_path):
        assert app.main(["search", "--n", "5", "--group", "p7", "--out", str(tmp_path)]) == app.EXIT_USAGE

    def test_too_few_vertices(self, tmp_path):
        assert app.main(["search", "--n", "2", "--group", "p1", "--out", str(tmp_path)]) == app.EXIT_USAGE

    def test_shape_required(self, tmp_path):
        assert app.main(["search", "--group", "p1", "--out", str(tmp_path)]) == app.EXIT_USAGE

    def test_n_and_disc_exclusive(self):
        with pytest.raises(SystemExit) as info:
            app.main(["search", "--n", "5", "--disc"])
        assert info.value.code == 2

    def test_ratios_need_every_input(self, tmp_path, hex_tiling):
        utils.save_json(str(tmp_path / "p2_6.json"),
                        {"certificate": dict(hex_tiling.to_certificate(), group="p2"),
                         "report": {"density": 0.99999}})
        assert app.main(["ratios", str(tmp_path)]) == app.EXIT_USAGE


def test_render_writes_svg(tmp_path, capsys, square_tiling):
    out = tmp_path / "square.svg"
    code = app.main(["render", _certificate(tmp_path, square_tiling), "--cells", "2x2", "--out", str(out)])
    assert code == app.EXIT_OK
    assert out.read_bytes().startswith(b"<?xml")
    assert capsys.readouterr().out.strip() == str(out)


def test_tiny_search_writes_outputs(tmp_path, capsys):
    code = app.main(["search", "--n", "4", "--group", "p1", "--iters", "30", "--refine-rounds", "0",
                     "--workers", "1", "--out", str(tmp_path)])
    assert code == app.EXIT_OK
    record = utils.load_json(str(tmp_path / "p1_4.json"))
    assert record["certificate"]["group"] == "p1"
    assert record["certificate"]["n"] == 4
    assert record["report"]["feasible"] is True
    assert record["settings"]["max_iterations"] == 30
    trace = (tmp_path / "p1_4_trace.csv").read_text().splitlines()
    assert trace[0] == "round,iteration,best_density,mean_violation,min_concentration,alpha,kl_budget"
    assert "p1 n=4: density" in capsys.readouterr().out
    assert app.main(["verify", str(tmp_path / "p1_4.json")]) == app.EXIT_OK


def test_infeasible_search_exits_without_traceback(tmp_path):
    code = app.main(["search", "--disc", "--group", "p1", "--iters", "2", "--refine-rounds", "0",
                     "--lmin", "0.5", "--lmax", "1.0", "--workers", "1", "--out", str(tmp_path)])
    assert code == app.EXIT_USAGE
    assert not (tmp_path / "p1_disc.json").exists()


@pytest.fixture
def p2_never_feasible(monkeypatch):
    search = app._search_task

    def flaky(task):
        if task[0] == "p2":
            raise NoFeasibleConfigurationError("No feasible configuration for p2")
        return search(task)

    monkeypatch.setattr(app, "_search_task", flaky)


def test_failed_search_keeps_other_results(tmp_path, capsys, caplog, p2_never_feasible):
    code = app.main(["search", "--n", "4", "--groups", "p2,p1", "--iters", "30", "--refine-rounds", "0",
                     "--workers", "1", "--out", str(tmp_path)])
    assert code == app.EXIT_USAGE
    assert (tmp_path / "p1_4.json").exists()
    assert not (tmp_path / "p2_4.json").exists()
    assert "p1 n=4: density" in capsys.readouterr().out
    assert "p2 n=4 failed" in caplog.text


def test_table_marks_failed_cells(tmp_path, p2_never_feasible):
    code = app.main(["table", "--n-values", "4", "--groups", "p1,p2", "--iters", "30", "--refine-rounds", "0",
                     "--workers", "1", "--out", str(tmp_path)])
    assert code == app.EXIT_USAGE
    ranks = pd.read_csv(tmp_path / "rank_table.csv")
    assert list(ranks["group"]) == ["p1", "p2"]
    assert ranks.loc[0, "rank"] == 1
    assert pd.isna(ranks.loc[1, "rank"]) and pd.isna(ranks.loc[1, "density"])
    assert (tmp_path / "density_table.csv").exists()


def test_gamma_range_override(tmp_path):
    code = app.main(["search", "--n", "4", "--group", "p2", "--iters", "20", "--refine-rounds", "0",
                     "--gamma-min", "1.2", "--gamma-max", "1.8", "--workers", "1", "--out", str(tmp_path)])
    assert code == app.EXIT_OK
    record = utils.load_json(str(tmp_path / "p2_4.json"))
    assert record["settings"]["gamma"] == [1.2, 1.8]
    assert 1.2 <= record["certificate"]["gamma_rad"] <= 1.8


def test_inverted_gamma_range_rejected(tmp_path):
    code = app.main(["search", "--n", "4", "--group", "p1", "--gamma-min", "2.0", "--gamma-max", "1.0",
                     "--workers", "1", "--out", str(tmp_path)])
    assert code == app.EXIT_USAGE
