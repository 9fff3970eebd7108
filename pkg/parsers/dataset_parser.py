"""
DGA dataset CSV reading and writing
One row per oil sample: id, timestamp, nine gases in ppm, level-1 and level-2 labels
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Sequence

from dga.features import GAS_FIELDS, GasRecord, LabeledRecord, Level1Label, Level2Label

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ['sample_id', 'timestamp', *GAS_FIELDS]
LABEL_COLUMNS = ['level1_label', 'level2_label']
HEADER = RECORD_COLUMNS + LABEL_COLUMNS


class DatasetParser:
    """Parse and write labeled DGA datasets"""

    def __init__(self, encoding: str = 'utf-8'):
        self.encoding = encoding

    def _format_float(self, value: float) -> str:
        # repr round-trips every float exactly
        return repr(float(value))

    def _parse_float(self, text: str, column: str) -> float:
        try:
            return float(text)
        except ValueError:
            raise ValueError(f"column {column}: {text!r} is not a number")

    def _parse_record(self, row: Dict[str, str]) -> GasRecord:
        timestamp = row.get('timestamp', '').strip()
        return GasRecord(
            **{gas: self._parse_float(row[gas].strip(), gas) for gas in GAS_FIELDS},
            sample_id=row['sample_id'].strip(),
            timestamp=self._parse_float(timestamp, 'timestamp') if timestamp else None,
        )

    def _parse_labels(self, row: Dict[str, str], record: GasRecord) -> LabeledRecord:
        text1 = row['level1_label'].strip()
        text2 = row['level2_label'].strip()
        try:
            level1 = Level1Label(text1)
        except ValueError:
            raise ValueError(f"unknown level-1 label {text1!r}")
        try:
            level2 = Level2Label(text2) if text2 else None
        except ValueError:
            raise ValueError(f"unknown level-2 label {text2!r}")
        return LabeledRecord(record=record, level1=level1, level2=level2)

    def _rows(self, path: Path, required: Sequence[str]):
        """Yield (line number, row) after checking the header"""
        with open(path, 'r', encoding=self.encoding, newline='') as f:
            reader = csv.DictReader(f)
            header = reader.fieldnames or []
            if list(header[:len(required)]) != list(required):
                raise ValueError(f"{path}: bad header {header}, expected {list(required)}")
            for row in reader:
                yield reader.line_num, row

    def read_dataset(self, path: Path) -> List[LabeledRecord]:
        """
        Read a labeled dataset

        Args:
            path: CSV file with the full header

        Returns:
            Labeled records in file order
        """
        records = []
        for line, row in self._rows(Path(path), HEADER):
            try:
                records.append(self._parse_labels(row, self._parse_record(row)))
            except (ValueError, KeyError, TypeError, AttributeError) as e:
                raise ValueError(f"{path}: row {line}: {e}")
        logger.info("Read %d samples from %s", len(records), path)
        return records

    def read_records(self, path: Path) -> List[GasRecord]:
        """Read gas records only; label columns may be absent or empty"""
        records = []
        for line, row in self._rows(Path(path), RECORD_COLUMNS):
            try:
                records.append(self._parse_record(row))
            except (ValueError, KeyError, TypeError, AttributeError) as e:
                raise ValueError(f"{path}: row {line}: {e}")
        return records

    def _record_row(self, record: GasRecord) -> List[str]:
        timestamp = '' if record.timestamp is None else self._format_float(record.timestamp)
        return [record.sample_id, timestamp] + [self._format_float(getattr(record, g)) for g in GAS_FIELDS]

    def write_dataset(self, records: Sequence[LabeledRecord], path: Path) -> Path:
        """
        Write a labeled dataset; identical records give identical bytes

        Returns:
            Path to the written file
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding=self.encoding, newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(HEADER)
            for sample in records:
                level2 = sample.level2.value if sample.level2 is not None else ''
                writer.writerow(self._record_row(sample.record) + [sample.level1.value, level2])
        logger.info("Wrote %d samples to %s", len(records), path)
        return path

    def write_records(self, records: Sequence[GasRecord], path: Path) -> Path:
        """Write unlabeled records (empty label columns)"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding=self.encoding, newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(HEADER)
            for record in records:
                writer.writerow(self._record_row(record) + ['', ''])
        return path


# Global parser instance
dataset_parser = DatasetParser()
