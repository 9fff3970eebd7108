import json

import numpy as np
import openpyxl
import pytest

from classifiers.mlp import MlpLearner
from dga.features import GasRecord, fit_normalizer
from exporters.report_exporter import ReportExporter, Table, report_exporter
from exporters.snapshot_exporter import snapshot_exporter

TABLE = Table(
    title='Accuracy',
    headers=['Session', 'DB1', 'Validation'],
    rows=[['Session 1', 91.25, None], ['Session 2', 7, 88.0]],
)


def test_render_table_aligns_columns():
    text = report_exporter.render_table(TABLE)
    lines = text.split('\n')
    assert lines[0] == 'Accuracy'
    assert lines[1] == 'Session        DB1  Validation'
    assert lines[2] == '---------  -------  ----------'
    assert lines[3] == 'Session 1  91.2500         n/a'
    assert lines[4] == 'Session 2        7     88.0000'


def test_render_text_separates_tables():
    text = ReportExporter(float_format='{:.1f}').render_text([TABLE, TABLE])
    assert text.count('Accuracy\n') == 2
    assert '\n\nAccuracy\n' in text
    assert text.endswith('88.0\n')


def test_json_is_sorted_and_stable(tmp_path):
    path = report_exporter.export_json({'b': 1, 'a': [1.5, None]}, tmp_path / 'r.json')
    assert path.read_text() == '{\n  "a": [\n    1.5,\n    null\n  ],\n  "b": 1\n}\n'


def test_export_report_files(tmp_path):
    paths = report_exporter.export_report(tmp_path / 'out', {'x': 1}, [TABLE], timings={'t': 0.5}, xlsx=True)
    assert [p.name for p in paths] == ['report.json', 'report.txt', 'timings.json', 'report.xlsx']
    assert json.loads((tmp_path / 'out' / 'timings.json').read_text()) == {'t': 0.5}

    wb = openpyxl.load_workbook(tmp_path / 'out' / 'report.xlsx')
    ws = wb['Accuracy']
    assert [c.value for c in ws[1]] == ['Session', 'DB1', 'Validation']
    assert ws['A1'].font.bold
    assert ws['C2'].value == 'n/a'
    assert ws['B2'].value == 91.25


def test_sheet_titles_are_sanitized_and_unique(tmp_path):
    tables = [
        Table('Accuracy (%) after each training session: level1', ['a'], [[1]]),
        Table('Accuracy (%) after each training session: level1', ['a'], [[2]]),
    ]
    path = report_exporter.export_xlsx(tables, tmp_path / 'r.xlsx')
    names = openpyxl.load_workbook(path).sheetnames
    assert len(names) == 2 and len(set(names)) == 2
    assert all(len(n) <= 31 and ':' not in n for n in names)


def records():
    return [GasRecord(*[float(v)] * 9) for v in (1, 2, 3)]


def test_snapshot_rejects_foreign_files(tmp_path):
    path = tmp_path / 'x.json'
    path.write_text('{"format": "something-else"}', encoding='utf-8')
    with pytest.raises(ValueError, match='Not a model snapshot'):
        snapshot_exporter.load(path)
    path.write_text('not json', encoding='utf-8')
    with pytest.raises(ValueError, match='invalid JSON'):
        snapshot_exporter.load(path)
    with pytest.raises(ValueError, match='not found'):
        snapshot_exporter.load(tmp_path / 'missing.json')


def test_snapshot_checks_version_and_feature_order(tmp_path):
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.1, 0.0], [0.9, 1.0]])
    model = MlpLearner(n_hidden=2, max_iterations=10).train(X, np.array([0, 1, 0, 1]), seed=0)
    data = snapshot_exporter.build(model, fit_normalizer(records()))
    assert data['model_kind'] == 'mlp'

    bumped = dict(data, format_version=99)
    with pytest.raises(ValueError, match='version'):
        snapshot_exporter.restore(bumped)
    reordered = dict(data, feature_order=list(reversed(data['feature_order'])))
    with pytest.raises(ValueError, match='feature order'):
        snapshot_exporter.restore(reordered)

    restored, params = snapshot_exporter.restore(data)
    assert params == fit_normalizer(records())
    assert restored.predict(X).tolist() == model.predict(X).tolist()
