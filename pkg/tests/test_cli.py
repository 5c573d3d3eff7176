import csv
import json

import pytest

from helo import primitives as P
from helo.ckks import scheme as S
from helo.ckks.params import params_for
from helo.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from helo.harness import report


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for key in ("SEED", "OUT", "LABEL", "K", "MATCHES", "USERS", "UPDATES", "PARAMS", "LADDER", "CONFIG"):
        monkeypatch.delenv(f"HELO_{key}", raising=False)


# -- keygen ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def keydir(tmp_path_factory):
    out = tmp_path_factory.mktemp("keys")
    assert main(["keygen", "--out", str(out), "--users", "2", "--seed", "3"]) == EXIT_OK
    return out


def test_keygen_files_deserialize(keydir):
    params = params_for("toy")
    pk = S.deserialize_public_key(params, (keydir / "sp" / "u0000.pk").read_bytes())
    sk = S.deserialize_secret_key(params, (keydir / "kc" / "u0000.sk").read_bytes())
    S.deserialize_switch_key(params, (keydir / "sp" / "u0001.rlk").read_bytes())
    ct = S.encrypt(pk, [1234.5])
    assert abs(S.decrypt(sk, ct)[0] - 1234.5) < 1e-4
    pp = P.CommitParams.from_bytes((keydir / "sp" / "commit_params.bin").read_bytes())
    assert pp.to_bytes() == (keydir / "kc" / "commit_params.bin").read_bytes()


def test_secret_keys_stay_out_of_the_sp_directory(keydir):
    assert list((keydir / "kc").glob("*.sk"))
    assert not list((keydir / "sp").glob("*.sk"))
    assert not (keydir / "sp" / "kc_signing.key").exists()


def test_keygen_reports_sizes_near_prediction(capsys, tmp_path):
    code, out, _ = run(capsys, "keygen", "--out", tmp_path, "--users", 1)
    assert code == EXIT_OK
    for line in out.splitlines()[1:]:
        size, predicted = int(line.split()[-4]), int(line.split()[-1].rstrip(")"))
        assert predicted / 2 <= size <= 2 * predicted


# -- simulate ----------------------------------------------------------------------------

def read_standings(out):
    (path,) = out.glob("standings_*.csv")
    with path.open() as fh:
        return {row["user"]: row for row in csv.DictReader(fh)}


def test_scripted_simulation_matches_oracle(capsys, tmp_path):
    script = tmp_path / "script.json"
    games = [["u0000", "u0001", 1.0], ["u0000", "u0001", 1.0], ["u0000", "u0001", 0.5]]
    script.write_text(json.dumps({"ratings": [1300, 1200], "noise": 0, "matches": games}))
    out = tmp_path / "sim"
    code, _, _ = run(capsys, "simulate", "--users", 2, "-N", 3, "--seed", 8, "--script", script, "--out", out)
    assert code == EXIT_OK
    (sim_file,) = out.glob("simulation_*.json")
    doc = json.loads(sim_file.read_text())
    report.validate(doc, "simulation")
    assert doc["verified"] == 2
    # By hand: E(1300 vs 1200) = 1/(1+10^-0.25) = 0.640065; delta = 32 * (2.5 - 3 * 0.640065) = 18.5538.
    rows = read_standings(out)
    assert float(rows["u0000"]["rating"]) == pytest.approx(1318.5538, abs=1e-3)
    assert float(rows["u0001"]["rating"]) == pytest.approx(1181.4462, abs=1e-3)
    assert rows["u0000"]["cycles"] == rows["u0001"]["cycles"] == "1"


def test_zero_rounds_gives_registration_standings(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--users", 3, "--rounds", 0, "--out", tmp_path)
    assert code == EXIT_OK
    rows = read_standings(tmp_path)
    assert len(rows) == 3 and all(r["cycles"] == "0" for r in rows.values())
    (trace,) = tmp_path.glob("trace_*.json")
    kinds = {e["type"] for e in json.loads(trace.read_text())}
    assert "register" in kinds and "match_report" not in kinds


def test_identical_seeds_give_identical_traces(capsys, tmp_path):
    for d in ("a", "b"):
        assert run(capsys, "simulate", "--users", 4, "--rounds", 1, "--seed", 11, "--out", tmp_path / d)[0] == 0
    (ta,), (tb,) = (tmp_path / "a").glob("trace_*.json"), (tmp_path / "b").glob("trace_*.json")
    assert ta.read_bytes() == tb.read_bytes()
    assert read_standings(tmp_path / "a") == read_standings(tmp_path / "b")


def test_sp_visible_outputs_hold_no_ratings(capsys, tmp_path):
    run(capsys, "simulate", "--users", 4, "--rounds", 1, "--seed", 2, "--out", tmp_path)
    (trace,) = tmp_path.glob("trace_*.json")
    for row in read_standings(tmp_path).values():
        assert f"{float(row['rating']):.2f}" not in trace.read_text()


# -- accuracy and bench ------------------------------------------------------------------

def test_toy_accuracy_exits_zero(capsys, tmp_path):
    code, out, _ = run(capsys, "accuracy", "--updates", 8, "--out", tmp_path)
    assert code == EXIT_OK
    (doc,) = tmp_path.glob("accuracy_*.json")
    report.validate(json.loads(doc.read_text()), "accuracy")
    assert list(tmp_path.glob("precision_*.png")) and list(tmp_path.glob("diffs_*.png"))
    assert "5.569e-04" in out


def test_corrupted_params_file_is_a_usage_error(capsys, tmp_path):
    bad = tmp_path / "params.json"
    bad.write_text("{ this is not json")
    code, _, err = run(capsys, "accuracy", "--updates", 2, "--params", bad, "--out", tmp_path)
    assert code == EXIT_USAGE and "error" in err
    missing = tmp_path / "nowhere.json"
    code, _, err = run(capsys, "simulate", "--params", missing, "--out", tmp_path)
    assert code == EXIT_USAGE and "not readable" in err


def test_bench_writes_reports(capsys, tmp_path):
    code, _, _ = run(capsys, "bench", "--reps", 1, "--out", tmp_path)
    assert code == EXIT_OK
    (doc,) = tmp_path.glob("bench_*.json")
    report.validate(json.loads(doc.read_text()), "bench")
    assert list(tmp_path.glob("sizes_*.csv")) and list(tmp_path.glob("bench_*.png"))


# -- prove and verify --------------------------------------------------------------------

def write_pair(tmp_path, value, low=1000, high=1500):
    stmt, wit = tmp_path / "stmt.json", tmp_path / "wit.json"
    stmt.write_text(json.dumps({"low": low, "high": high, "setup": "audit"}))
    wit.write_text(json.dumps({"value": value, "blind": 987654321}))
    return stmt, wit


def test_prove_then_verify(capsys, tmp_path):
    stmt, wit = write_pair(tmp_path, 1234)
    proof = tmp_path / "p.bin"
    assert run(capsys, "prove", stmt, wit, "-o", proof)[0] == EXIT_OK
    code, out, _ = run(capsys, "verify", f"{proof}.statement.json", proof)
    assert code == EXIT_OK and out.strip() == "1"


def test_boundary_value_is_refused(capsys, tmp_path):
    stmt, wit = write_pair(tmp_path, 1500)
    code, _, err = run(capsys, "prove", stmt, wit, "-o", tmp_path / "p.bin")
    assert code == EXIT_FAIL and "refused" in err
    assert not (tmp_path / "p.bin").exists()


def test_tampered_proof_gives_verdict_zero(capsys, tmp_path):
    stmt, wit = write_pair(tmp_path, 1001)
    proof = tmp_path / "p.bin"
    run(capsys, "prove", stmt, wit, "-o", proof)
    blob = bytearray(proof.read_bytes())
    blob[len(blob) // 2] ^= 0x10
    proof.write_bytes(bytes(blob))
    code, out, _ = run(capsys, "verify", f"{proof}.statement.json", proof)
    assert code == EXIT_FAIL and out.strip() == "0"


def test_usage_errors_exit_two(capsys, tmp_path):
    assert run(capsys)[0] == EXIT_USAGE
    assert run(capsys, "frobnicate")[0] == EXIT_USAGE
    assert run(capsys, "simulate", "-N", 2, "--out", tmp_path)[0] == EXIT_USAGE
    assert run(capsys, "simulate", "--label", "huge", "--out", tmp_path)[0] == EXIT_USAGE
    assert run(capsys, "verify", tmp_path / "missing.json", tmp_path / "p.bin")[0] == EXIT_USAGE


def test_settings_precedence(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 1, "out": str(tmp_path / "from-file")}))
    monkeypatch.setenv("HELO_OUT", str(tmp_path / "from-env"))
    assert run(capsys, "keygen", "--config", cfg, "--users", 1)[0] == EXIT_OK
    assert (tmp_path / "from-env" / "sp").is_dir() and not (tmp_path / "from-file").exists()
    assert run(capsys, "keygen", "--config", cfg, "--users", 1, "--out", tmp_path / "from-flag")[0] == EXIT_OK
    assert (tmp_path / "from-flag" / "sp").is_dir()
    monkeypatch.delenv("HELO_OUT")
    assert run(capsys, "keygen", "--config", cfg, "--users", 1)[0] == EXIT_OK
    assert (tmp_path / "from-file" / "sp").is_dir()


def test_keygen_is_deterministic_under_seed(capsys, tmp_path):
    for d in ("a", "b"):
        run(capsys, "keygen", "--users", 1, "--seed", 5, "--out", tmp_path / d)
    for name in ("sp/u0000.pk", "kc/u0000.sk", "sp/verify_key.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
