import orjson

from subreg_kit.generators.report_generators import (
    CounterexampleGenerator,
    ReportGenerator,
    SampleCsvGenerator,
    TrajectoryCsvGenerator,
)
from subreg_kit.utils.core.config_registry import get_config
from subreg_kit.utils.data.models import CheckResult, Report
from subreg_kit.utils.services.counterexample_service import CounterexampleService
from subreg_kit.utils.services.smsr_service import SmsrService


def make_report():
    return Report(
        "analyze",
        "lq_bound",
        "ocp",
        "1.0.0",
        {"seed": 0},
        [CheckResult("STATIONARITY", "pass", {"norm": 0.0})],
    )


def test_report_written_with_json_mirror(config, tmp_path):
    generator = ReportGenerator(config, tmp_path / "out")
    text_path, json_path = generator.generate(make_report())
    assert text_path.name == "analyze_lq_bound.txt"
    assert "[STATIONARITY]" in text_path.read_text(encoding="utf-8")
    mirror = orjson.loads(json_path.read_bytes())
    assert mirror["checks"][0]["entries"] == {"norm": 0.0}
    assert get_config() is config


def test_csv_report(config, tmp_path):
    main, _ = ReportGenerator(config, tmp_path).generate(make_report(), "csv")
    assert main.read_text(encoding="utf-8") == "check,status,value\nSTATIONARITY,pass,0.0\n"


def test_no_temporary_files_left(config, tmp_path):
    ReportGenerator(config, tmp_path).generate(make_report())
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "analyze_lq_bound.json",
        "analyze_lq_bound.txt",
    ]


def test_run_reports_file_system_errors(config, tmp_path):
    generator = ReportGenerator(config, tmp_path)
    (tmp_path / "analyze_lq_bound.txt").mkdir()
    assert not generator.run(make_report())


def test_sample_csv_is_reproducible(registry, config, tmp_path):
    entry = registry("nlp_eq_quadratic")
    contents = []
    for run in range(2):
        estimate = SmsrService.estimate_kappa(entry.problem, entry.reference, config)
        (path,) = SampleCsvGenerator(config, tmp_path / str(run)).generate("eq", estimate)
        contents.append(path.read_bytes())
    assert contents[0] == contents[1]
    header = contents[0].decode().splitlines()[0].split(",")
    assert header[:3] == ["level", "index", "magnitude"]
    assert {"dist_x", "dist_lam", "dist_y", "ratio"} <= set(header)
    assert len(contents[0].decode().splitlines()) == 1 + 3 * 6


def test_counterexample_csv(registry, config, tmp_path):
    entry = registry("example1", mesh_n=40)
    report = CounterexampleService.example1_counterexample(
        entry.problem, entry.reference, (1, 2), config
    )
    (path,) = CounterexampleGenerator(config, tmp_path).generate("example1", report)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "s,J,closed_form,rel_error,sup_distance"
    assert lines[1].startswith("1,")
    assert len(lines) == 3


def test_trajectory_csv(registry, config, tmp_path):
    entry = registry("lq_bound", mesh_n=4)
    (path,) = TrajectoryCsvGenerator(config, tmp_path).generate("lq_bound", entry.reference)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,x1,u1,p1,lambda1,lambda2"
    assert len(lines) == 6
    assert lines[-1] == "1.0,-2.0,,1.0,,"
