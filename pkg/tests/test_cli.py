"""cli 端到端测试：参数解析、退出码与报告文件"""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from pytest_mock import MockerFixture

from cli.main import main
from cli.verbs import RunConfig, parse_plan, run
from entrolab.core.geometry import Box


@pytest.fixture(autouse=True)
def _no_log_files(mocker: MockerFixture) -> None:
    """避免每个用例都向根 logger 追加文件 handler"""
    mocker.patch("cli.main.add_file_handler")


def _exit_code(argv: list[str]) -> int:
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    return int(excinfo.value.code or 0)


def _report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


class TestArguments:
    """参数解析与 RunConfig 校验"""

    def test_verb_defaults_applied(self, mocker: MockerFixture) -> None:
        run_mock = mocker.patch("cli.main.run", return_value=0)
        assert _exit_code(["appendix-a", "--m-max", "3"]) == 0
        config = run_mock.call_args.args[0]
        assert config.alpha == (0.0, 0.5, 0.9)
        assert config.p == (1.0,)
        assert config.m_max == 3

    def test_ranges_and_lists(self, mocker: MockerFixture) -> None:
        run_mock = mocker.patch("cli.main.run", return_value=0)
        argv = ["seminorm", "--n", "2..5", "--alpha", "0.5,Lip", "--domain", "0,0,2,1"]
        assert _exit_code(argv) == 0
        config = run_mock.call_args.args[0]
        assert config.n_range == (2, 3, 4, 5)
        assert config.alpha == (0.5, "Lip")
        assert config.domain == (0.0, 0.0, 2.0, 1.0)

    def test_unknown_verb(self) -> None:
        assert _exit_code(["spin"]) == 1

    def test_too_few_n_values(self) -> None:
        assert _exit_code(["entropy", "--n", "2..4"]) == 1

    def test_bad_domain(self) -> None:
        assert _exit_code(["seminorm", "--domain", "0,0,1"]) == 1

    def test_non_positive_workers(self) -> None:
        assert _exit_code(["build", "--workers", "0"]) == 1

    def test_hash_ignores_workers(self) -> None:
        a = RunConfig(verb="entropy", workers=1, out="a.json")
        b = RunConfig(verb="entropy", workers=4, out="b.json")
        assert a.config_hash == b.config_hash
        assert a.config_hash != RunConfig(verb="entropy", seed=1).config_hash

    def test_parse_plan(self) -> None:
        plan = parse_plan("grid:8", Box.unit(), 0)
        assert plan.kind == "grid"
        with pytest.raises(ValueError, match="grid:RES"):
            parse_plan("grid:x", Box.unit(), 0)
        with pytest.raises(ValueError, match="未知的采样类型"):
            parse_plan("sobol:8", Box.unit(), 0)


class TestBuild:
    """build 动词"""

    def test_build_writes_map_and_report(self, workdir: Path) -> None:
        assert _exit_code(["build", "--map", '{"kind": "identity"}', "--out", "m.json"]) == 0
        assert _report("m.json") == {"kind": "identity"}
        report = _report("m.report.json")
        assert report["passed"] is True
        assert report["verb"] == "build"
        assert report["result"]["kind"] == "identity"

    def test_build_roundtrip_is_byte_identical(self, workdir: Path) -> None:
        assert _exit_code(["build", "--map", 'horseshoe:{"N": 3}', "--out", "h.json"]) == 0
        assert _exit_code(["build", "--map", "h.json", "--out", "h2.json"]) == 0
        assert (workdir / "h.json").read_bytes() == (workdir / "h2.json").read_bytes()

    def test_bad_map_is_usage_error(self, workdir: Path) -> None:
        assert _exit_code(["build", "--map", "not-a-map"]) == 1


class TestVerbs:
    """小规模参数下的各动词"""

    def test_seminorm_identity(self, workdir: Path) -> None:
        argv = ["seminorm", "--map", "identity", "--plan", "grid:11", "--alpha", "Lip"]
        assert _exit_code(argv) == 0
        report = _report("reports/seminorm.json")
        assert report["result"]["seminorms"][0]["forward"]["value"] == pytest.approx(1.0)
        assert (workdir / "reports" / "seminorm.csv").is_file()

    def test_entropy_identity(self, workdir: Path) -> None:
        argv = ["entropy", "--map", "identity", "--n", "2..5", "--eps", "0.2", "--cloud", "grid:10"]
        assert _exit_code(argv) == 0
        report = _report("reports/entropy.json")
        assert report["result"]["estimate"]["headline"] == 0.0
        assert report["sampling"]["n_range"] == [2, 3, 4, 5]

    def test_certify_horseshoe(self, workdir: Path) -> None:
        argv = ["certify", "--map", 'horseshoe:{"N": 2}', "--resolution", "0.01"]
        assert _exit_code(argv) == 0
        report = _report("reports/certify.json")
        assert len(report["result"]["certificates"]) == 2
        assert (workdir / "reports" / "certify.svg").is_file()

    def test_certify_rotation_fails(self, workdir: Path) -> None:
        argv = ["certify", "--map", 'rotation:{"angle": 1.0}', "--resolution", "0.01"]
        assert _exit_code(argv) == 2
        assert _report("reports/certify.json")["passed"] is False

    def test_no_return_reported(self, workdir: Path) -> None:
        argv = [
            "closing-demo",
            "--map",
            'affine:{"matrix": [[2, 0], [0, 2]]}',
            "--y",
            "0.5,0.5",
            "--out",
            "closing.json",
        ]
        assert _exit_code(argv) == 2
        report = _report("closing.json")
        assert report["error"]["type"] == "NoReturnError"
        assert report["result"] is None

    def test_reports_are_reproducible(self, workdir: Path) -> None:
        config = RunConfig(
            verb="entropy",
            map_spec="rotation",
            n_range=(2, 3, 4, 5),
            eps=(0.1,),
            cloud="grid:12",
            out="a.json",
        )
        assert run(config) == 0
        assert run(RunConfig(**{**config.to_dict(), "out": "b.json", "workers": 3})) == 0
        assert (workdir / "a.json").read_bytes() != b""
        a, b = _report("a.json"), _report("b.json")
        assert a["result"] == b["result"]
        assert a["config_hash"] == b["config_hash"]

    def test_horseshoe_entropy_samples_core(self, workdir: Path) -> None:
        config = RunConfig(
            verb="entropy",
            map_spec='horseshoe:{"N": 2}',
            n_range=(2, 3, 4, 5),
            eps=(0.1,),
            cloud="grid:12",
            out="h.json",
        )
        assert run(config) == 0
        report = _report("h.json")
        assert report["sampling"]["cloud"] == {"kind": "core_lattice", "resolution": 12}
        assert report["result"]["estimate"]["cloud_size"] == 144

    @pytest.mark.slow
    def test_closing_demo(self, workdir: Path) -> None:
        assert _exit_code(["closing-demo", "--map", "golden_twist", "--eta", "0.05"]) == 0
        assert (workdir / "reports" / "closing-demo.svg").is_file()

    @pytest.mark.slow
    def test_horseshoe_demo(self, workdir: Path) -> None:
        argv = ["horseshoe-demo", "--map", 'rational_twist:{"p": 1, "q": 3}', "--enumerate"]
        assert _exit_code(argv) == 0
