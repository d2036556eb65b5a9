import json

import numpy as np
import pytest

from rtfx.audio_io import WavSpec, read_wav_block, write_wav
from rtfx.cli import main
from rtfx.dsp import AudioBlock
from rtfx.stressmath import closed_form_ir, partial_fractions


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def impulse_wav(path, frames, rate=8000, depth="float32"):
    x = np.zeros((1, frames))
    x[0, 0] = 1.0
    write_wav(path, WavSpec(1, rate, depth), [AudioBlock(x, rate)])
    return str(path)


def test_help(capsys):
    assert main(["--help"]) == 0
    assert "process" in capsys.readouterr().out


def test_process_stress_impulse(tmp_path, files, capsys):
    src = impulse_wav(tmp_path / "in.wav", 400)
    cfg = files("s.cfg", "rate=8000\nstress K=0.8 g=0.7 D=7\n")
    out = str(tmp_path / "out.wav")
    assert main(["process", src, cfg, out, "--bits", "float", "--ir", "50"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 50
    _, block = read_wav_block(out)
    pf = partial_fractions(0.8, 0.7)
    y = block.samples[0]
    expected = np.zeros(400)
    expected[::7] = [closed_form_ir(pf, k) for k in range(len(expected[::7]))]
    np.testing.assert_allclose(y, expected, atol=1e-6)  # float32 storage


def test_process_identity_bit_exact(tmp_path, files):
    x = np.random.default_rng(0).uniform(-1, 1, size=(2, 777)).astype(np.float32)
    src = tmp_path / "in.wav"
    write_wav(src, WavSpec(2, 8000, "float32"), [AudioBlock(x.astype(float), 8000)])
    cfg = files("empty.cfg", "# identity\n")
    out = tmp_path / "out.wav"
    assert main(["process", str(src), cfg, str(out), "--block-frames", "100"]) == 0
    assert out.read_bytes() == src.read_bytes()


def test_process_scheduled(tmp_path, files, capsys):
    src = impulse_wav(tmp_path / "in.wav", 2000)
    cfg = files("c.cfg", "comb g=0.5 R=40\n")
    out = tmp_path / "out.wav"
    assert main(["--rate", "8000", "process", str(src), cfg, str(out), "--mode", "critical",
                 "--pacing", "asap", "--block-frames", "64", "--bits", "float"]) == 0
    rec = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert rec["mode"] == "critical" and rec["blocks_processed"] == 32
    y = read_wav_block(out)[1].samples[0]
    assert y[40] == 1.0 and y[80] == 0.5


def test_process_missing_files(tmp_path, files, capsys):
    src = impulse_wav(tmp_path / "in.wav", 10)
    assert main(["process", src, str(tmp_path / "nope.cfg"), str(tmp_path / "o.wav")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("rtfx: ") and err.count("\n") == 1
    assert main(["process", str(tmp_path / "x.wav"), files("a.cfg", ""), "o.wav"]) == 1


def test_process_rate_mismatch(tmp_path, files):
    src = impulse_wav(tmp_path / "in.wav", 10, rate=8000)
    assert main(["process", src, files("r.cfg", "rate=44100\n"), str(tmp_path / "o.wav")]) == 2


def test_process_bad_wav(tmp_path, files):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"RIFF0000WAVEjunk")
    assert main(["process", str(bad), files("a.cfg", ""), str(tmp_path / "o.wav")]) == 2


def test_analyze_stress(files, capsys):
    cfg = files("s.cfg", "stress K=0.8 g=0.7 D=50000\n")
    assert main(["analyze", cfg]) == 0
    out = capsys.readouterr().out
    assert "alpha = -0.85+0.527j" in out
    assert "A = 0.36757" in out
    assert "published A = 1.36" in out
    assert "NOTE:" in out and "marginal" in out


def test_analyze_json(files, capsys):
    assert main(["analyze", files("e.cfg", "infinite_echo alpha=0.5 R=10\n"), "--json"]) == 0
    rec = json.loads(capsys.readouterr().out)
    node = rec["nodes"][0]
    assert node["classification"] == "stable"
    assert node["reduced_lag_gcd"] == 10
    assert node["poles"][0][2] == pytest.approx(0.5)


def test_analyze_rejects_unit_comb(files, capsys):
    assert main(["analyze", files("c.cfg", "comb g=1.0 R=10\n")]) == 2
    assert "line 1" in capsys.readouterr().err


def test_ir_command(files, capsys):
    assert main(["ir", files("e.cfg", "multi_echo alpha=0.5 R=2 N=3\n"), "--length", "6"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["0\t1.0", "1\t0.0", "2\t0.5", "3\t0.0", "4\t0.25", "5\t0.0"]


def test_bench_small(files, capsys):
    cfg = files("c.cfg", "rate=8000\ncomb g=0.5 R=40\n")
    assert main(["bench", cfg, "--duration", "0.05", "--repetitions", "2", "--load", "0",
                 "--block-frames", "64"]) == 0
    lines = capsys.readouterr().out.splitlines()
    recs = [json.loads(l) for l in lines[:-1]]
    assert [r["repetition"] for r in recs] == [0, 1]
    assert all(r["checksums_equal"] for r in recs)
    assert lines[-1].startswith("verdict:") and "identical" in lines[-1]


def test_bench_usage(capsys):
    assert main(["bench", "--repetitions", "0"]) == 1
    assert main(["bench", "--bogus"]) == 1


def test_cocomo_text(capsys):
    assert main(["cocomo", "16", "--embedded", "--rate", "18000"]) == 0
    out = capsys.readouterr().out
    for s in ("100.287", "10.922", "159.54", "9.18", "198000"):
        assert s in out


def test_cocomo_json_with_actuals(capsys):
    assert main(["cocomo", "16", "--a", "3.6", "--A", "1.2", "--b", "2.5", "--B", "0.32",
                 "--rate", "18000", "--actual-effort", "8", "--actual-tdev", "2", "--json"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["effort_pm"] == "100.287" and rec["cost"] == "198000"
    assert rec["actual"]["cost"] == "36000"
    assert rec["advantage"]["cost"] == 5.5


def test_cocomo_invalid(capsys):
    assert main(["cocomo", "-1"]) == 1
    assert main(["cocomo", "16", "--a", "-3"]) == 1
    assert main(["cocomo", "16", "--rate", "0"]) == 1
