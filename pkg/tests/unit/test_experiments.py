import pytest

from ovavss.config import RunConfig, apply_ablations
from ovavss.core import SUITES, ExperimentRow, ExperimentRunner, all_flag_sets, learning_violations, trend_violations
from ovavss.errors import ConfigurationError


def _row(label: str, **metrics) -> ExperimentRow:
    values = dict(base=0.6, novel=0.3, harmonic=0.4, miou=0.5, gt_mask_accuracy=0.8, novel_localized_accuracy=0.5)
    return ExperimentRow(label=label, seeds=[0, 1, 2], **{**values, **metrics})


def test_every_flag_combination_is_a_valid_config():
    sets = all_flag_sets()
    assert len(sets) == 3 * 2 * 4 * 3 * 2 == len(set(sets))
    for flags in sets:
        cfg = apply_ablations(RunConfig(), list(flags))
        assert cfg.ablation.crop == flags[3].split("=")[1]


def test_suite_flags_are_valid():
    for specs in SUITES.values():
        assert len({s.label for s in specs}) == len(specs)
        for spec in specs:
            apply_ablations(RunConfig(), list(spec.flags))


def test_ordered_means_pass_the_trend_check():
    rows = [_row("full", miou=0.5), _row("fusion=add", miou=0.4), _row("fusion=none", miou=0.4)]
    assert trend_violations("fusion", rows) == []


def test_broken_ordering_is_reported():
    rows = [_row("full", miou=0.3), _row("fusion=add", miou=0.4), _row("fusion=none", miou=0.1)]
    problems = trend_violations("fusion", rows)
    assert len(problems) == 1
    assert "full (0.3000) < fusion=add (0.4000)" in problems[0]


def test_crop_trend_reads_gt_mask_accuracy():
    rows = [
        _row("square_crop", gt_mask_accuracy=0.9, miou=0.1),
        _row("crop_resize", gt_mask_accuracy=0.7, miou=0.9),
        _row("none", gt_mask_accuracy=0.8),
    ]
    assert trend_violations("crop", rows) == ["gt_mask_accuracy: crop_resize (0.7000) < none (0.8000)"]


def test_rows_missing_from_a_run_are_skipped():
    assert trend_violations("prompt", [_row("audiomaskdec"), _row("none", miou=0.9)]) == [
        "miou: audiomaskdec (0.5000) < none (0.9000)"
    ]
    assert trend_violations("prompt", [_row("cross_attn")]) == []


def test_learning_floors():
    assert learning_violations(_row("full"), num_classes=10) == []
    problems = learning_violations(_row("full", base=0.4, novel=0.15, novel_localized_accuracy=0.2), num_classes=10)
    assert len(problems) == 3
    assert problems[0].startswith("Base mIoU")


def test_table_row_is_in_percent():
    row = _row("full").table_row()
    assert (row.label, row.base, row.miou) == ("full", 60.0, 50.0)


def test_runner_needs_a_seed(tmp_path):
    runner = ExperimentRunner(RunConfig(), tmp_path / "data", tmp_path / "runs")
    with pytest.raises(ConfigurationError, match="seed"):
        runner.run(SUITES["fusion"], seeds=[])
