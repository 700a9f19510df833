import json

import pytest

from lfts.cli import EXIT_CAP, EXIT_FAIL, EXIT_INPUT, EXIT_OK, main


@pytest.fixture(autouse=True)
def plain(monkeypatch, tmp_path):
    monkeypatch.setenv("LFTS_COLOR", "0")
    monkeypatch.chdir(tmp_path)


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc), encoding="utf-8")
    return str(path)


class TestCheck:
    def test_shipped_topology(self, capsys):
        assert main(["check", "figure1"]) == EXIT_OK
        assert "Holds" in capsys.readouterr().out

    def test_examples_path_falls_back_to_shipped_copy(self):
        assert main(["check", "examples/figure1.json"]) == EXIT_OK

    def test_single_block_route(self, tmp_path, capsys):
        path = write(tmp_path, "bad.json", {"blocks": ["A", "B"], "routes": {"R": ["A"]}})
        assert main(["check", path]) == EXIT_FAIL
        assert "first(r) ≠ last(r)" in capsys.readouterr().out

    def test_truncated_json(self, tmp_path, capsys):
        path = write(tmp_path, "cut.json", '{"blocks": ["A",\n')
        assert main(["check", path]) == EXIT_INPUT
        err = capsys.readouterr().err
        assert "parse error" in err and "cut.json:2:1" in err

    def test_missing_file(self, capsys):
        assert main(["check", "nowhere.json"]) == EXIT_INPUT
        assert "no such file" in capsys.readouterr().err

    def test_bad_shape(self, tmp_path):
        assert main(["check", write(tmp_path, "shape.json", {"blocks": "AB"})]) == EXIT_INPUT


class TestExplore:
    def test_holds(self, capsys):
        assert main(["explore", "figure1", "scenarios/disjoint", "--depth", "8"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "explore: Holds" in out and "states visited" in out

    def test_layered_absorbs_lost_updates(self, capsys):
        code = main(["explore", "figure1", "scenarios/shared", "--inject", "injection/lost_free", "--depth", "6"])
        assert code == EXIT_OK
        assert "layer 1 (degraded)" in capsys.readouterr().out

    def test_violation_writes_witness(self, tmp_path, capsys):
        code = main(["explore", "figure1", "scenarios/shared", "--inject", "injection/fake_status",
                     "--layered", "off"])
        assert code == EXIT_FAIL
        assert "violated invariant: safety" in capsys.readouterr().out
        witness = (tmp_path / "witness.trace").read_text()
        assert witness.splitlines()[-1].split("\t")[1:3] == ["EI", "fake"]
        assert main(["replay", "figure1", "scenarios/shared", "--inject", "injection/fake_status",
                     "--layered", "off", "--trace", "witness.trace"]) == EXIT_OK
        assert "safety Violated" in capsys.readouterr().out

    def test_json(self, tmp_path, capsys):
        code = main(["explore", "figure1", "scenarios/shared", "--inject", "injection/fake_status",
                     "--layered", "off", "--json", "--out", "v.json", "--witness", "w.trace"])
        assert code == EXIT_FAIL
        doc = json.loads((tmp_path / "v.json").read_text())
        assert doc["status"] == "Violated" and doc["invariant"] == "safety"
        assert doc["witness"][-1]["actor"] == "EI"

    def test_json_to_stdout(self, capsys):
        assert main(["explore", "figure1", "scenarios/disjoint", "--depth", "3", "--json"]) == EXIT_OK
        captured = capsys.readouterr()
        assert json.loads(captured.out)["status"] == "Holds"
        assert "explore: Holds" in captured.err

    def test_cap(self):
        assert main(["explore", "figure1", "scenarios/disjoint", "--cap", "3"]) == EXIT_CAP

    def test_bad_flag_values(self):
        for argv in (["--depth", "-1"], ["--workers", "0"], ["--layered", "maybe"]):
            with pytest.raises(SystemExit) as info:
                main(["explore", "figure1", *argv])
            assert info.value.code == 2

    def test_scenario_errors(self, tmp_path, capsys):
        path = write(tmp_path, "s.json", {"routes": {"t9": ["LABC"]}})
        assert main(["explore", "figure1", path]) == EXIT_INPUT
        assert "unknown train" in capsys.readouterr().err

    def test_keeps_first_free_flag(self, capsys):
        main(["explore", "figure1", "--depth", "3"])
        verbatim = capsys.readouterr().out
        main(["explore", "figure1", "--depth", "3", "--reservation-keeps-first-free"])
        assert verbatim != capsys.readouterr().out


class TestSimulateReplay:
    def test_seeded_output_is_byte_identical(self, tmp_path):
        argv = ["simulate", "figure1", "scenarios/shared", "--inject", "injection/random_lost", "--seed", "4",
                "--steps", "25"]
        assert main([*argv, "--out", "a.trace"]) == EXIT_OK
        assert main([*argv, "--out", "b.trace"]) == EXIT_OK
        a, b = (tmp_path / "a.trace").read_bytes(), (tmp_path / "b.trace").read_bytes()
        assert a == b and a
        assert main(["replay", "figure1", "scenarios/shared", "--inject", "injection/random_lost",
                     "--trace", "a.trace"]) == EXIT_OK

    def test_scenario_schedule(self, capsys):
        assert main(["simulate", "figure1", "scenarios/single"]) == EXIT_OK
        captured = capsys.readouterr()
        assert len(captured.out.splitlines()) == 10
        assert "stopped on schedule" in captured.err

    def test_missing_schedule(self, capsys):
        assert main(["simulate", "figure1", "scenarios/shared"]) == EXIT_INPUT
        assert "no explicit schedule" in capsys.readouterr().err

    def test_tampered_trace(self, tmp_path, capsys):
        main(["simulate", "figure1", "scenarios/single", "--out", "t.trace"])
        lines = (tmp_path / "t.trace").read_text().splitlines()
        lines[1] = lines[1].replace("Applied", "Blocked")
        (tmp_path / "t.trace").write_text("\n".join(lines) + "\n")
        assert main(["replay", "figure1", "scenarios/single", "--trace", "t.trace"]) == EXIT_FAIL
        assert "replay mismatch at step 1" in capsys.readouterr().err

    def test_malformed_trace(self, tmp_path):
        (tmp_path / "m.trace").write_text("0\tnope\n")
        assert main(["replay", "figure1", "scenarios/single", "--trace", "m.trace"]) == EXIT_INPUT


class TestDemo:
    def test_gcd(self, capsys):
        assert main(["demo", "gcd", "12", "8"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "gcd(12, 8) = 4" in out and "compatibility: Holds" in out

    def test_min(self, capsys):
        assert main(["demo", "min", "3", "1", "2"]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "1"

    def test_min_of_nothing(self, capsys):
        assert main(["demo", "min"]) == EXIT_FAIL
        assert "precondition" in capsys.readouterr().err


def test_colour_can_be_forced(monkeypatch, capsys):
    monkeypatch.setenv("LFTS_COLOR", "1")
    main(["check", "figure1"])
    assert "\033[32m" in capsys.readouterr().out
