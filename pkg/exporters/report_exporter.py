"""
Experiment report export
Aligned text tables, deterministic JSON, separate timings and optional Excel workbooks
"""

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import openpyxl
from openpyxl.styles import Alignment, Font, PatternFill
from openpyxl.utils import get_column_letter

import config

logger = logging.getLogger(__name__)

UNDEFINED = 'n/a'


@dataclass
class Table:
    """One report table: a title, column headers and rows of cells"""
    title: str
    headers: List[str]
    rows: List[List[Any]] = field(default_factory=list)


class ReportExporter:
    """Export experiment reports to text, JSON and Excel"""

    def __init__(self, float_format: str = '{:.4f}'):
        self.float_format = float_format

    def _cell_text(self, value: Any) -> str:
        if value is None:
            return UNDEFINED
        if isinstance(value, float):
            return self.float_format.format(value)
        return str(value)

    def render_table(self, table: Table) -> str:
        cells = [[self._cell_text(v) for v in row] for row in table.rows]
        widths = [len(h) for h in table.headers]
        for row in cells:
            for i, text in enumerate(row):
                widths[i] = max(widths[i], len(text))

        def line(values: Sequence[str]) -> str:
            return '  '.join(v.rjust(w) if i else v.ljust(w) for i, (v, w) in enumerate(zip(values, widths))).rstrip()

        out = [table.title, line(table.headers), '  '.join('-' * w for w in widths)]
        out.extend(line(row) for row in cells)
        return '\n'.join(out)

    def render_text(self, tables: Sequence[Table]) -> str:
        """All tables separated by blank lines"""
        return '\n\n'.join(self.render_table(t) for t in tables) + '\n'

    def dumps(self, payload: Dict[str, Any]) -> str:
        return json.dumps(payload, sort_keys=True, indent=2) + '\n'

    def export_json(self, payload: Dict[str, Any], output_path: Path) -> Path:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(self.dumps(payload), encoding=config.EXPORT_ENCODING)
        return output_path

    def export_text(self, tables: Sequence[Table], output_path: Path) -> Path:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(self.render_text(tables), encoding=config.EXPORT_ENCODING)
        return output_path

    def export_xlsx(self, tables: Sequence[Table], output_path: Path) -> Path:
        """
        Export tables to an Excel workbook, one sheet per table

        Args:
            tables: Report tables
            output_path: Target .xlsx file

        Returns:
            Path to exported file
        """
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)

        wb = openpyxl.Workbook()
        wb.remove(wb.active)
        used = set()
        for table in tables:
            ws = wb.create_sheet(self._sheet_title(table.title, used))
            self._write_headers(ws, table.headers)
            for r, row in enumerate(table.rows, start=2):
                for c, value in enumerate(row, start=1):
                    ws.cell(r, c, UNDEFINED if value is None else value)
            self._adjust_column_widths(ws, table)

        wb.save(output_path)
        return output_path

    def _sheet_title(self, title: str, used: set) -> str:
        # Excel sheet names: max 31 chars, no []:*?/\
        base = re.sub(r'[\[\]:*?/\\]', ' ', title)[:28].strip() or 'Sheet'
        name, n = base, 1
        while name in used:
            n += 1
            name = f"{base[:25]} ({n})"
        used.add(name)
        return name

    def _write_headers(self, ws, headers: Sequence[str]):
        """Write and style header row"""
        header_font = Font(bold=True, color="FFFFFF")
        header_fill = PatternFill(start_color="366092", end_color="366092", fill_type="solid")
        header_alignment = Alignment(horizontal="center", vertical="center")

        for col, header in enumerate(headers, start=1):
            cell = ws.cell(1, col, header)
            cell.font = header_font
            cell.fill = header_fill
            cell.alignment = header_alignment

    def _adjust_column_widths(self, ws, table: Table):
        """Adjust column widths based on content"""
        for col, header in enumerate(table.headers, start=1):
            longest = max([len(header)] + [len(self._cell_text(row[col - 1])) for row in table.rows])
            ws.column_dimensions[get_column_letter(col)].width = min(max(longest + 2, 10), 60)

    def export_report(self, output_dir: Path, payload: Dict[str, Any], tables: Sequence[Table],
                      timings: Optional[Dict[str, Any]] = None, xlsx: bool = False) -> List[Path]:
        """
        Write report.json, report.txt, timings.json and optionally report.xlsx

        Returns:
            Paths written
        """
        output_dir = Path(output_dir)
        paths = [
            self.export_json(payload, output_dir / 'report.json'),
            self.export_text(tables, output_dir / 'report.txt'),
        ]
        if timings is not None:
            paths.append(self.export_json(timings, output_dir / 'timings.json'))
        if xlsx:
            paths.append(self.export_xlsx(tables, output_dir / 'report.xlsx'))
        logger.info("Report written to %s", output_dir)
        return paths


# Global exporter instance
report_exporter = ReportExporter()
