import json
import subprocess
import sys

import numpy as np
import pytest

from dmsparse import cli, harness
from dmsparse.codec import read_bitstream


@pytest.fixture
def wav(tmp_path):
    path = tmp_path / "a.wav"
    assert cli.main(["synth", "--out", str(path), "--frames", "3", "--seed", "2"]) == 0
    return path


class TestCodecCommands:
    def test_encode_decode(self, wav, tmp_path, capsys):
        out = tmp_path / "a.dmbs"
        assert cli.main(["encode", "--in", str(wav), "--delta", "0.01", "--out", str(out)]) == 0
        bits = read_bitstream(out)
        assert len(bits) == 2880 and bits.delta == 0.01
        assert "mask rate" in capsys.readouterr().out
        assert cli.main(["decode", "--in", str(out), "--out", str(tmp_path / "d.wav")]) == 0
        y, fs = harness.load_wav(tmp_path / "d.wav")
        assert y.size == 2880 and fs == 48000

    def test_adm_encode(self, wav, tmp_path):
        out = tmp_path / "a.dmbs"
        assert cli.main(["encode", "--in", str(wav), "--adm", "--out", str(out)]) == 0
        assert read_bitstream(out).adaptive

    @pytest.mark.parametrize("method", harness.METHODS)
    def test_reconstruct(self, wav, tmp_path, method):
        bits = tmp_path / "a.dmbs"
        cli.main(["encode", "--in", str(wav), "--out", str(bits)])
        rc = cli.main(["reconstruct", "--in", str(bits), "--method", method,
                       "--out", str(tmp_path / "r.wav")])
        assert rc == 0
        y, _ = harness.load_wav(tmp_path / "r.wav")
        x, _ = harness.load_wav(wav)
        assert y.size == x.size


class TestExitCodes:
    def test_missing_input(self, tmp_path, capsys):
        assert cli.main(["encode", "--in", str(tmp_path / "x.wav"), "--out", "o"]) == 3
        assert "input error" in capsys.readouterr().err

    def test_garbage_bitstream(self, tmp_path):
        (tmp_path / "g").write_bytes(b"nonsense")
        assert cli.main(["decode", "--in", str(tmp_path / "g"), "--out", "o.wav"]) == 3

    @pytest.mark.parametrize("argv", [
        ["bogus"],
        ["encode", "--in", "a.wav", "--out", "b", "--delta", "-1"],
        ["sweep", "--deltas", "0.01,x"],
        ["sweep", "--methods", "imat,wiener"],
        ["sweep", "--smooth-len", "3"],
        ["sweep", "--guard", "0.5"],
        ["validate-theory", "--trials", "5"],
        ["validate-theory", "--lam", "4.5"],
        ["synth", "--out", "x.wav", "--k", "480"],
    ])
    def test_usage_errors(self, argv):
        with pytest.raises(SystemExit) as exc:
            cli.main(argv)
        assert exc.value.code == 2

    def test_numeric_failure(self, tmp_path, capsys):
        # lam = 3 is outside (0, 2/p) for every mask rate above 2/3
        rc = cli.main(["sweep", "--synthetic", "2", "--deltas", "0.03", "--methods", "imat",
                       "--lam", "3", "--jobs", "1", "--out", str(tmp_path / "r.csv")])
        assert rc == 0  # per-frame failures are recorded, not fatal
        text = (tmp_path / "r.csv").read_text().splitlines()[1]
        assert text.endswith(",2,2")
        # lam = 1/p kills the mean error in one step, leaving no ratio to fit
        rc = cli.main(["validate-theory", "--trials", "200", "--lam", "2.0"])
        assert rc == 4
        assert "numeric failure" in capsys.readouterr().err


class TestSweep:
    def test_stdout_csv(self, capsys):
        assert cli.main(["sweep", "--synthetic", "3", "--deltas", "0.01", "--methods",
                         "imatdm,lowpass", "--jobs", "1"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("method,delta,p")
        assert [l.split(",")[0] for l in lines[1:]] == ["imatdm", "lowpass"]

    def test_byte_identical(self, tmp_path):
        argv = ["sweep", "--synthetic", "3", "--deltas", "0.005,0.02", "--methods", "imat,omp",
                "--seed", "7", "--jobs", "1", "--out"]
        cli.main(argv + [str(tmp_path / "a.csv")])
        cli.main(argv + [str(tmp_path / "b.csv")])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_directory_output_and_dump(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        assert cli.main(["sweep", "--synthetic", "2", "--deltas", "0.01", "--methods", "lasso",
                         "--format", "json", "--jobs", "1", "--out", str(tmp_path),
                         "--dump-config", str(cfg)]) == 0
        path = capsys.readouterr().out.strip()
        assert path.startswith(str(tmp_path)) and path.endswith(".json")
        assert json.loads(open(path).read())[0]["method"] == "lasso"
        dumped = json.loads(cfg.read_text())
        assert dumped["deltas"] == [0.01] and dumped["command"] == "sweep"

    def test_wav_input(self, wav, capsys):
        assert cli.main(["sweep", "--in", str(wav), "--deltas", "0.01", "--methods", "lowpass",
                         "--jobs", "1"]) == 0
        assert capsys.readouterr().out.splitlines()[1].endswith(",3,0")

    def test_adm_bench(self, capsys):
        assert cli.main(["adm-bench", "--synthetic", "2", "--methods", "imat",
                         "--jobs", "1"]) == 0
        assert capsys.readouterr().out.count("\n") == 2


class TestValidateTheory:
    def test_report(self, capsys):
        assert cli.main(["validate-theory", "--n", "64", "--p", "0.5", "--delta", "0.1",
                         "--trials", "100000", "--seed", "7"]) == 0
        out = capsys.readouterr().out
        rows = {l.split()[0]: l.split() for l in out.splitlines()[1:]}
        assert float(rows["spectrum_variance"][1]) == pytest.approx(0.33)
        for row in rows.values():
            assert float(row[3]) <= 0.03

    def test_csv(self, tmp_path):
        out = tmp_path / "v.csv"
        assert cli.main(["validate-theory", "--trials", "1000", "--ratio-trials", "0",
                         "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 3


class TestHelp:
    @pytest.mark.parametrize("cmd", list(cli.COMMANDS))
    def test_help_shows_defaults(self, cmd, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main([cmd, "--help"])
        assert exc.value.code == 0
        assert "default:" in capsys.readouterr().out

    def test_documented_defaults(self, capsys):
        with pytest.raises(SystemExit):
            cli.main(["sweep", "--help"])
        out = " ".join(capsys.readouterr().out.split())
        for text in ("default: 15.0", "default: 1.0", "default: -0.1", "default: 2"):
            assert text in out
        with pytest.raises(SystemExit):
            cli.main(["adm-bench", "--help"])
        out = " ".join(capsys.readouterr().out.split())
        assert "default: 20.0" in out and "default: 1.5" in out

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "dmsparse", "--help"], capture_output=True,
                           text=True)
        assert r.returncode == 0 and "validate-theory" in r.stdout
