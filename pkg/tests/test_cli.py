import numpy as np
import pytest

from qncsim.cli import main
from qncsim.harness import read_csv
from qncsim.qnc import edge_quantizers, simulate_qnc
from qncsim.transcript import Transcript, decode_report, verify_transcript

from conftest import small_instance


@pytest.fixture
def transcript():
    g, sched, msg = small_instance(4, n=15, edges=45, t_max=6)
    run = simulate_qnc(g, sched, msg.x, edge_quantizers(g, 4, 1.0))
    return Transcript.from_run(run, 4, msg.phi)


def test_transcript_round_trip_is_exact(transcript):
    back = Transcript.from_text(transcript.to_text())
    assert back.to_text() == transcript.to_text()
    assert np.array_equal(back.sched.beta, transcript.sched.beta)


def test_clean_transcript_verifies(transcript):
    checks = verify_transcript(transcript)
    assert len(checks) == 11 and all(ok for _, ok, _ in checks)


def test_tampered_transcript_fails(transcript):
    transcript.y[3, 0] += transcript.y[3, 0] + 0.1
    failed = {name for name, ok, _ in verify_transcript(transcript) if not ok}
    assert "replay" in failed


def test_tampered_coefficients_fail(transcript):
    transcript.sched.alpha[2, 0] = 1.0
    failed = {name for name, ok, _ in verify_transcript(transcript) if not ok}
    assert "coefficient budget" in failed


def test_decode_report_fields(transcript):
    report = dict(line.split(" ", 1) for line in decode_report(transcript).splitlines())
    assert int(report["m"]) == transcript.z_tot.size
    assert len(report["x_hat"].split()) == 15
    assert report["certified"] == "true"


def test_malformed_transcript_rejected():
    with pytest.raises(ValueError, match="lacks sections"):
        Transcript.from_text("[graph]\n2 1 0\n0 1 0 1\n")


def test_cli_transcript_verify_decode(tmp_path, capsys):
    path = tmp_path / "run.txt"
    assert main(["transcript", "--nodes", "12", "--edges", "30", "-L", "3", "-t", "5", "--out", str(path)]) == 0
    assert main(["verify", str(path)]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 11
    assert main(["decode", str(path)]) == 0
    assert "residual_sq" in capsys.readouterr().out


def test_cli_verify_failure_exit_code(tmp_path, transcript, capsys):
    transcript.z_tot[0] += 1.0
    transcript.save(tmp_path / "bad.txt")
    assert main(["verify", str(tmp_path / "bad.txt")]) == 1
    assert "FAIL z_tot from edges" in capsys.readouterr().out


def test_cli_run_and_frontier(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("n_nodes = 12\nedge_counts = 36\nsparsity_ratios = 0.2\nblock_lengths = 2, 3\n"
                   "realizations = 2\nt_max = 4\n")
    out = tmp_path / "r.csv"
    assert main(["run", str(cfg), "--out", str(out), "--seed", "3", "-q"]) == 0
    rows = read_csv(out).rows
    assert len(rows) == 2 * (3 + 1)
    assert main(["frontier", str(out), "--out", str(tmp_path / "f.csv")]) == 0
    assert len(read_csv(tmp_path / "f.csv").rows) <= len(rows)
    assert main(["frontier", str(out)]) == 0
    assert capsys.readouterr().out.splitlines()[-1].count(",") == 7


def test_cli_reports_bad_input(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert "error" in capsys.readouterr().err


def test_forwarding_transcript_layout():
    from qncsim.forward import simulate_forwarding
    from qncsim.graph import shortest_paths_to_gateway
    from qncsim.transcript import forwarding_transcript

    g, _, msg = small_instance(2)
    routes = shortest_paths_to_gateway(g)
    run = simulate_forwarding(g, routes, msg.x, 3, 1.0)
    text = forwarding_transcript(g, routes, msg.x, run)
    sections = [ln for ln in text.splitlines() if ln.startswith("[")]
    assert sections == ["[graph]", "[params]", "[routes]", "[arrival]", "[x]", "[x_hat]"]
    assert f"total_delay {run.total_delay}" in text
    assert len(text.split("[routes]\n")[1].split("[arrival]")[0].splitlines()) == g.n_nodes - 1
