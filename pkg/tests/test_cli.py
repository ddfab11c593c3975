"""Command line interface: outputs, exit codes, determinism."""

import json

import pytest

from chorstrand.cli import main
from chorstrand.serialize import bundle_to_text

from conftest import STUCK_AMAP_TEXT, STUCK_CHOR_TEXT, STUCK_PROTO_TEXT


def test_check_ok(bs_chor_path, capsys):
    assert main(["check", bs_chor_path]) == 0
    assert capsys.readouterr().out.strip() == "OK: 3 assumptions hold"


def test_check_reports_violations(tmp_path, capsys):
    bad = tmp_path / "bad.chor"
    bad.write_text("A -> B : x<>. B -> A : x<>. 0\n")
    assert main(["check", str(bad)]) == 1
    assert "duplicate-op-label" in capsys.readouterr().out


def test_parse_error_exits_65(tmp_path, capsys):
    bad = tmp_path / "bad.chor"
    bad.write_text("A -> B x<>. 0\n")
    assert main(["check", str(bad)]) == 65
    assert "error:" in capsys.readouterr().err


def test_missing_file_exits_66(capsys):
    assert main(["lts", "no_such_file.chor"]) == 66
    assert "missing file" in capsys.readouterr().err


def test_usage_error_exits_64(capsys):
    assert main(["enumerate"]) == 64
    assert main(["no-such-command"]) == 64
    capsys.readouterr()


def test_lts_prints_sorted_traces(bs_chor_path, capsys):
    assert main(["lts", bs_chor_path]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3
    assert lines == sorted(lines)
    assert any("C->S:refuse<reason>" in line for line in lines)


def test_abs_writes_bundle_files(bs_chor_path, tmp_path, capsys):
    out = tmp_path / "json"
    assert main(["abs", bs_chor_path, "--json", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "bundles: 3" in stdout
    files = sorted(p.name for p in out.iterdir())
    assert files == ["bundle_0.json", "bundle_1.json", "bundle_2.json"]
    doc = json.loads((out / "bundle_0.json").read_text())
    assert doc["schema"] == 1


def test_abs_output_is_deterministic(bs_chor_path, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["abs", bs_chor_path, "--json", str(a), "--dot", str(a)]) == 0
    assert main(["abs", bs_chor_path, "--json", str(b), "--dot", str(b)]) == 0
    capsys.readouterr()
    for name in ("bundle_0.json", "bundle_2.json", "bundle_1.dot"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_abs_renders_figures(bs_chor_path, tmp_path, capsys):
    out = tmp_path / "png"
    assert main(["abs", bs_chor_path, "--png", str(out)]) == 0
    capsys.readouterr()
    pngs = sorted(out.iterdir())
    assert [p.name for p in pngs] == ["bundle_0.png", "bundle_1.png", "bundle_2.png"]
    for p in pngs:
        assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_enumerate_quiet_network(bs_proto_path, tmp_path, capsys):
    out = tmp_path / "enum"
    rc = main(
        [
            "enumerate",
            "--proto",
            bs_proto_path,
            "--max-instances",
            "1",
            "--adv-steps",
            "0",
            "--json",
            str(out),
        ]
    )
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "bundles: 3" in stdout
    assert "exhausted: no" in stdout
    assert len(list(out.iterdir())) == 3


def test_enumerate_rejects_negative_bounds(bs_proto_path, capsys):
    rc = main(["enumerate", "--proto", bs_proto_path, "--adv-steps", "-1"])
    assert rc == 64
    capsys.readouterr()


def test_deliver_once_ok(bs_proto_path, tmp_path, capsys):
    out = tmp_path / "enum"
    main(["enumerate", "--proto", bs_proto_path, "--json", str(out)])
    capsys.readouterr()
    rc = main(["deliver-once", "--proto", bs_proto_path, "--bundle", str(out / "bundle_0.json")])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "ok" in stdout
    assert "VIOLATION" not in stdout


def test_deliver_once_flags_replay(bs_proto_path, tmp_path, capsys, replay_bundle):
    path = tmp_path / "replay.json"
    path.write_text(bundle_to_text(replay_bundle))
    rc = main(["deliver-once", "--proto", bs_proto_path, "--bundle", str(path)])
    assert rc == 1
    stdout = capsys.readouterr().out
    assert "VIOLATION" in stdout
    assert "Ksc: no instances" in stdout


def test_faithful_pass_writes_report(bs_proto_path, bs_chor_path, bs_amap_path, tmp_path, capsys):
    out = tmp_path / "faith"
    rc = main(
        [
            "faithful",
            "--proto",
            bs_proto_path,
            "--chor",
            bs_chor_path,
            "--amap",
            bs_amap_path,
            "--max-instances",
            "1",
            "--adv-steps",
            "0",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    assert "verdict: PASS" in capsys.readouterr().out
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "PASS"
    csv_lines = (out / "summary.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "clause,index,status,detail"
    assert len(csv_lines) == 7
    figures = sorted(p.name for p in (out / "figures").iterdir())
    assert figures == [
        "env_0.png",
        "env_1.png",
        "env_2.png",
        "witness_env0.png",
        "witness_env1.png",
        "witness_env2.png",
    ]


def test_faithful_fail_exit_code(bs_proto_path, bs_chor_path, bs_amap_path, tmp_path, capsys):
    mutated = tmp_path / "mutant.proto"
    with open(bs_proto_path) as fh:
        mutated.write_text(fh.read().replace("{reply quote}", "{rcpt quote}"))
    rc = main(
        [
            "faithful",
            "--proto",
            str(mutated),
            "--chor",
            bs_chor_path,
            "--amap",
            bs_amap_path,
            "--adv-steps",
            "0",
            "--out",
            str(tmp_path / "out"),
        ]
    )
    assert rc == 1
    assert "verdict: FAIL" in capsys.readouterr().out


def test_faithful_inconclusive_exit_code(tmp_path, capsys):
    proto = tmp_path / "stuck.proto"
    chor = tmp_path / "stuck.chor"
    amap = tmp_path / "stuck.amap"
    proto.write_text(STUCK_PROTO_TEXT)
    chor.write_text(STUCK_CHOR_TEXT)
    amap.write_text(STUCK_AMAP_TEXT)
    rc = main(
        [
            "faithful",
            "--proto",
            str(proto),
            "--chor",
            str(chor),
            "--amap",
            str(amap),
            "--adv-steps",
            "1",
            "--out",
            str(tmp_path / "out"),
        ]
    )
    assert rc == 2
    assert "verdict: INCONCLUSIVE" in capsys.readouterr().out


def test_faithful_report_is_deterministic(bs_proto_path, bs_chor_path, bs_amap_path, tmp_path, capsys):
    outs = []
    for name in ("one", "two"):
        out = tmp_path / name
        main(
            [
                "faithful",
                "--proto",
                bs_proto_path,
                "--chor",
                bs_chor_path,
                "--amap",
                bs_amap_path,
                "--adv-steps",
                "0",
                "--jobs",
                "2" if name == "two" else "1",
                "--out",
                str(out),
            ]
        )
        outs.append(out)
    capsys.readouterr()
    one, two = outs
    assert (one / "report.json").read_bytes() == (two / "report.json").read_bytes()
    assert (one / "summary.csv").read_bytes() == (two / "summary.csv").read_bytes()
