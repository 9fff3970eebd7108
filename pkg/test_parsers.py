import pytest

from dga.datagen import default_generator_config, generate_dataset
from dga.features import GasRecord, Level1Label
from parsers.dataset_parser import HEADER, dataset_parser

GAS_VALUES = '1.0,2.0,3.0,4.0,5.0,6.0,7.0,8.0,9.0'


def write_lines(path, *rows):
    path.write_text('\n'.join([','.join(HEADER), *rows]) + '\n', encoding='utf-8')
    return path


def test_dataset_round_trip(tmp_path):
    dataset = generate_dataset(default_generator_config(50, seed=3))
    path = dataset_parser.write_dataset(dataset, tmp_path / 'data' / 'dataset.csv')
    assert dataset_parser.read_dataset(path) == dataset

    again = dataset_parser.write_dataset(dataset_parser.read_dataset(path), tmp_path / 'copy.csv')
    assert again.read_bytes() == path.read_bytes()


def test_read_labeled_rows(tmp_path):
    path = write_lines(
        tmp_path / 'd.csv',
        f'a,,{GAS_VALUES},Normal,',
        f'b,12.5,{GAS_VALUES},Faulty,Thermal',
    )
    normal, faulty = dataset_parser.read_dataset(path)
    assert normal.level1 == Level1Label.NORMAL and normal.level2 is None
    assert normal.record.timestamp is None
    assert faulty.record.timestamp == 12.5
    assert faulty.record.sample_id == 'b'
    assert faulty.level2.value == 'Thermal'


def test_bad_row_reports_its_line(tmp_path):
    path = write_lines(
        tmp_path / 'd.csv',
        f'a,,{GAS_VALUES},Normal,',
        'b,,1.0,x,3.0,4.0,5.0,6.0,7.0,8.0,9.0,Normal,',
    )
    with pytest.raises(ValueError, match='row 3.*c2h6'):
        dataset_parser.read_dataset(path)


def test_negative_concentration_rejected(tmp_path):
    path = write_lines(tmp_path / 'd.csv', 'a,,1.0,2.0,3.0,-4.0,5.0,6.0,7.0,8.0,9.0,Normal,')
    with pytest.raises(ValueError, match='row 2.*c2h2'):
        dataset_parser.read_dataset(path)


def test_unknown_and_inconsistent_labels(tmp_path):
    path = write_lines(tmp_path / 'a.csv', f'a,,{GAS_VALUES},Broken,')
    with pytest.raises(ValueError, match='level-1 label'):
        dataset_parser.read_dataset(path)
    path = write_lines(tmp_path / 'b.csv', f'a,,{GAS_VALUES},Faulty,')
    with pytest.raises(ValueError, match='row 2'):
        dataset_parser.read_dataset(path)


def test_bad_header(tmp_path):
    path = tmp_path / 'd.csv'
    path.write_text('id,ch4\nx,1\n', encoding='utf-8')
    with pytest.raises(ValueError, match='bad header'):
        dataset_parser.read_dataset(path)
    with pytest.raises(ValueError, match='bad header'):
        dataset_parser.read_records(path)


def test_records_without_labels(tmp_path):
    records = [GasRecord(*[float(i)] * 9, sample_id=f's{i}') for i in range(3)]
    path = dataset_parser.write_records(records, tmp_path / 'input.csv')
    assert dataset_parser.read_records(path) == records
