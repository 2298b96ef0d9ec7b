"""End-to-end tests of the command-line entry point."""

import json

import pytest

from crossflux.cli import main

FAST_BRANCHES = """\
[grid]
n = 51

[continuation]
j_list = 1
max_points = 8
stability = false
"""


def write_config(tmp_path, text: str, name: str = "run.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_version_flag(capsys) -> None:
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "crossflux" in capsys.readouterr().out


def test_unknown_command_is_a_usage_error() -> None:
    with pytest.raises(SystemExit) as info:
        main(["plot"])
    assert info.value.code == 2


def test_analyze_on_defaults(tmp_path, capsys) -> None:
    out = tmp_path / "analyze"
    assert main(["analyze", "--out", str(out)]) == 0
    assert capsys.readouterr().out.strip() == str(out)
    modes = json.loads((out / "modes.json").read_text(encoding="utf-8"))
    assert modes["bifurcation_modes"][:3] == [1, 2, 3]
    assert modes["threshold"] == pytest.approx(0.035565, rel=1e-4)
    assert modes["regime"] == "scalar_field"
    assert (out / "config.resolved.ini").is_file()
    metadata = json.loads((out / "metadata.json").read_text(encoding="utf-8"))
    assert metadata["command"] == "analyze"


def test_analyze_is_deterministic(tmp_path) -> None:
    assert main(["analyze", "--out", str(tmp_path / "a")]) == 0
    assert main(["analyze", "--out", str(tmp_path / "b")]) == 0
    first = (tmp_path / "a" / "modes.csv").read_bytes()
    assert first == (tmp_path / "b" / "modes.csv").read_bytes()
    assert first.splitlines()[0] == b"j,lambda_j,in_region,d_star,discrete_d_star,kappa,kappa_star,threshold," \
                                    b"d_star_limit,regime"


def test_analyze_writes_region_map(tmp_path) -> None:
    out = tmp_path / "analyze"
    assert main(["analyze", "--out", str(out)]) == 0
    svg = (out / "regions.svg").read_text(encoding="utf-8")
    # R_1, R_2, R_3, the gamma = A tau* line and the sweep ray
    assert svg.count("<polyline") == 5
    assert svg.count("stroke-dasharray") == 1
    assert svg.rstrip().endswith("<!-- R_j lies right of its line; dashed: gamma = A tau* -->")
    modes = json.loads((out / "modes.json").read_text(encoding="utf-8"))
    assert modes["gamma_threshold"] == pytest.approx(1.0)
    assert modes["ray_regime"] == "scalar_field"


def test_analyze_without_cross_diffusion(tmp_path) -> None:
    config = write_config(tmp_path, "[model]\nalpha = 0\nbeta = 0\n")
    out = tmp_path / "out"
    assert main(["analyze", "--config", config, "--out", str(out)]) == 0
    modes = json.loads((out / "modes.json").read_text(encoding="utf-8"))
    assert modes["bifurcation_modes"] == []
    assert modes["threshold"] == 0.0
    assert modes["regime"] == "logistic"
    assert modes["gamma"] == "0.0"
    assert all(row["d_star_limit"] is None for row in modes["modes"])


def test_bad_config_exits_with_config_error(tmp_path, capsys) -> None:
    config = write_config(tmp_path, "[model]\nd1 = 0.004\nfoo = 1\n")
    assert main(["analyze", "--config", config, "--out", str(tmp_path / "out")]) == 2
    assert f"{config}:3:" in capsys.readouterr().err


def test_missing_config_exits_with_io_error(tmp_path) -> None:
    assert main(["analyze", "--config", str(tmp_path / "absent.ini")]) == 1


def test_bad_thread_count(tmp_path) -> None:
    assert main(["analyze", "--threads", "0", "--out", str(tmp_path)]) == 2


def test_limit_refuses_logistic_regime(tmp_path, capsys) -> None:
    config = write_config(tmp_path, "[model]\ngamma = 0.5\n")
    assert main(["limit", "--config", config, "--out", str(tmp_path / "out")]) == 2
    assert "gamma" in capsys.readouterr().err


def test_branches_then_audit(tmp_path) -> None:
    config = write_config(tmp_path, FAST_BRANCHES)
    out = tmp_path / "out"
    assert main(["branches", "--config", config, "--out", str(out), "--threads", "2"]) == 0
    assert (out / "branches" / "gamma1-upper.csv").is_file()
    assert (out / "branches" / "gamma1-lower.csv").is_file()
    assert (out / "branches" / "gamma1-upper" / "state-0000.csv").is_file()
    assert (out / "bifurcation.svg").read_text(encoding="utf-8").count("<polyline") == 2
    summary = json.loads((out / "branches.json").read_text(encoding="utf-8"))
    assert {b["id"] for b in summary["branches"]} == {"gamma1-upper", "gamma1-lower"}
    assert all(min(b["max_harnack"]) > 1.0 for b in summary["branches"])
    assert main(["verify", "--config", config, "--out", str(out), "--groups", "branch_audit"]) == 0
    assert "0 failed" in (out / "verify.txt").read_text(encoding="utf-8")


def test_compare_converges_along_the_ray(tmp_path) -> None:
    config = write_config(tmp_path, "[grid]\nn = 51\n\n[continuation]\nmax_points = 60\nd2_floor = 0.03\n"
                                    "stability = false\n\n[sweep]\nscales = 1, 5, 25\n")
    out = tmp_path / "out"
    assert main(["compare", "--config", config, "--out", str(out)]) == 0
    summary = json.loads((out / "compare.json").read_text(encoding="utf-8"))
    assert summary["gamma"] == "2.0"
    assert [e["s"] for e in summary["scales"]] == [1.0, 5.0, 25.0]
    assert all("error" not in e for e in summary["scales"])
    assert summary["decreasing"]["1"] == {"hausdorff": True, "onset_gap": True, "max_ratio_defect": True}
    assert summary["scales"][-1]["onset_gap"] < 0.1 * summary["scales"][0]["onset_gap"]
    assert (out / "compare.svg").is_file()
    assert (out / "scale-25" / "flux.json").is_file()


def test_verify_reports_failure_exit_code(tmp_path, capsys) -> None:
    config = write_config(tmp_path, "[verify]\nn = 5\nrandom_states = 1\njacobian_tol = 1e-14\n")
    assert main(["verify", "--config", config, "--out", str(tmp_path / "out"), "--groups", "jacobian"]) == 4
    assert "FAIL" in capsys.readouterr().out


def test_verify_analytic_groups(tmp_path) -> None:
    assert main(["verify", "--out", str(tmp_path), "--groups", "potentials,limit_ray"]) == 0


def test_unknown_check_group_is_a_usage_error(tmp_path) -> None:
    with pytest.raises(SystemExit) as info:
        main(["verify", "--out", str(tmp_path), "--groups", "everything"])
    assert info.value.code == 2


def test_evolve_writes_snapshots(tmp_path) -> None:
    config = write_config(tmp_path, "[grid]\nn = 31\n\n[evolve]\nd2 = 0.05\nt_max = 1\nsnapshot_every = 5\n")
    out = tmp_path / "out"
    assert main(["evolve", "--config", config, "--out", str(out)]) == 0
    summary = json.loads((out / "evolve.json").read_text(encoding="utf-8"))
    assert summary["termination"] == "time_budget"
    assert summary["node_class"] == "constant"
    assert summary["distance_to_gamma1"] is None
    assert (out / "evolve" / "snapshot-0000.csv").is_file()
    assert (out / "evolve" / "distance.csv").is_file()
