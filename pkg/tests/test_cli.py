import csv
import io
import json
import time

import numpy as np
import pytest

from decometry.cli import main
from decometry.qstate import (
    cq_state,
    maximally_coherent,
    maximally_entangled,
    random_bipartite,
    random_density,
    save_state,
)


@pytest.fixture
def plus_file(tmp_path):
    path = tmp_path / "plus.json"
    save_state(path, maximally_coherent(2))
    return path


@pytest.fixture
def bell_file(tmp_path):
    path = tmp_path / "bell.json"
    save_state(path, maximally_entangled(2))
    return path


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_coherence_plus_state(plus_file, capsys):
    assert main(["coherence", str(plus_file), "--p", "0.5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["p,value,divergent,dropped_terms", "0.5,1.3333333333,0,0"]


def test_coherence_divergence_row(plus_file, capsys):
    assert main(["coherence", str(plus_file), "--p", "0", "1"]) == 0
    table = rows(capsys.readouterr().out)
    assert table[1][1:3] == ["inf", "1"]
    assert table[2][1:3] == ["1.0000000000", "0"]


def test_coherence_diagonal_state_gives_zeros(tmp_path, capsys):
    path = tmp_path / "diag.json"
    save_state(path, np.diag([0.2, 0.3, 0.5]).astype(complex))
    assert main(["coherence", str(path), "--p", "0.1,0.5", "0.9"]) == 0
    table = rows(capsys.readouterr().out)[1:]
    assert [r[0] for r in table] == ["0.1", "0.5", "0.9"]
    assert all(float(r[1]) == 0 for r in table)


def test_coherence_basis_file_and_csv_output(plus_file, tmp_path, capsys):
    basis = tmp_path / "h.json"
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    basis.write_text(json.dumps({"re": h.tolist(), "im": np.zeros((2, 2)).tolist()}))
    out = tmp_path / "out.csv"
    assert main(["coherence", str(plus_file), "--p", "0.5", "--basis-file", str(basis),
                 "--csv", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert rows(out.read_text())[1][1] == "0.0000000000"


@pytest.mark.parametrize("content", ["{not json", '{"dim": 2}', '{"dim": 2, "re": [[1, 0], [0, 1]], "im": [[0, 0], [0, 0]]}'])
def test_coherence_invalid_state(tmp_path, capsys, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    assert main(["coherence", str(path), "--p", "0.5"]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("decometry: error[validation]:")


def test_missing_file_and_bad_p(plus_file, tmp_path, capsys):
    assert main(["coherence", str(tmp_path / "missing.json"), "--p", "0.5"]) == 2
    assert main(["coherence", str(plus_file), "--p", "1.5"]) == 2
    assert main(["coherence", str(plus_file), "--p", "abc"]) == 2
    assert capsys.readouterr().err.count("error[validation]") == 3


def test_discord_bell_state(bell_file, tmp_path, capsys):
    sidecar = tmp_path / "basis.json"
    assert main(["discord", str(bell_file), "--p", "0.5", "--starts", "4",
                 "--emit-basis", str(sidecar)]) == 0
    table = rows(capsys.readouterr().out)
    assert table[0] == ["p", "value", "converged", "starts", "best_start"]
    assert abs(float(table[1][1]) - 4 / 3) <= 1e-6
    assert table[1][2:4] == ["1", "5"]
    bases = json.loads(sidecar.read_text())
    assert bases[0]["p"] == 0.5
    U = np.array(bases[0]["basis"]["re"]) + 1j * np.array(bases[0]["basis"]["im"])
    assert np.allclose(U.conj().T @ U, np.eye(2))


def test_discord_cq_state_with_dims_flag(tmp_path, capsys):
    path = tmp_path / "cq.json"
    state = cq_state([0.3, 0.7], np.eye(2), [random_density(2, seed=0), random_density(2, seed=1)])
    save_state(path, state.state)
    assert main(["discord", str(path), "--p", "0.4", "--dims", "2", "2", "--starts", "2"]) == 0
    assert float(rows(capsys.readouterr().out)[1][1]) <= 1e-7


def test_discord_rejects_p_zero_and_missing_dims(bell_file, plus_file, capsys):
    assert main(["discord", str(bell_file), "--p", "0"]) == 2
    assert "p=0 unsupported" in capsys.readouterr().err
    assert main(["discord", str(plus_file), "--p", "0.5"]) == 2
    assert main(["discord", str(plus_file), "--p", "0.5", "--dims", "2", "3"]) == 2


def test_discord_csv_deterministic(tmp_path, monkeypatch):
    path = tmp_path / "state.json"
    save_state(path, random_bipartite(2, 2, seed=3))
    outs = []
    monkeypatch.setenv("DECOMETRY_SEED", "5")
    for k in range(2):
        out = tmp_path / f"o{k}.csv"
        assert main(["discord", str(path), "--p", "0.3", "0.8", "--starts", "2", "--csv", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_bad_seed_environment(bell_file, monkeypatch, capsys):
    monkeypatch.setenv("DECOMETRY_SEED", "x")
    assert main(["discord", str(bell_file), "--p", "0.5", "--starts", "1"]) == 2
    assert "DECOMETRY_SEED" in capsys.readouterr().err


def test_nonconvergence_exit_code(tmp_path, capsys):
    # qutrit A has no grid fallback; one iteration cannot meet the tolerances
    path = tmp_path / "s.json"
    save_state(path, random_bipartite(3, 2, seed=0))
    assert main(["discord", str(path), "--p", "0.3", "--starts", "1", "--max-iters", "1"]) == 3
    captured = capsys.readouterr()
    assert captured.err.startswith("decometry: error[numerical]:")
    assert rows(captured.out)[1][2] == "0"


def test_verify_smoke(capsys):
    assert main(["verify", "--suite", "coherence", "--samples", "5", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "[coherence]" in out and "FAIL" not in out
    assert main(["verify", "--suite", "estimation", "--samples", "2"]) == 0


def test_usage_errors_exit_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code != 0


@pytest.mark.slow
def test_verify_all_smoke_runtime(capsys):
    t0 = time.perf_counter()
    assert main(["verify", "--suite", "all", "--samples", "10"]) == 0
    assert time.perf_counter() - t0 < 60
    assert "FAIL" not in capsys.readouterr().out
