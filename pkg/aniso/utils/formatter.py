"""Console and file output for reports and summaries."""

import json
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

try:
    import yaml
    YAML_AVAILABLE = True
except ImportError:
    YAML_AVAILABLE = False

try:
    from tabulate import tabulate
    TABULATE_AVAILABLE = True
except ImportError:
    TABULATE_AVAILABLE = False

import numpy as np


class OutputFormatter:
    """Renders rows of results as json, yaml, a table or plain text."""

    SUPPORTED_FORMATS = ['json', 'yaml', 'table', 'plain']

    def __init__(self, format_type: str = 'table', indent: int = 2):
        """Initialize output formatter.

        Args:
            format_type: Output format (json, yaml, table, plain)
            indent: Indentation level for structured formats
        """
        if format_type not in self.SUPPORTED_FORMATS:
            raise ValueError(f"Unsupported format: {format_type}. Supported: {self.SUPPORTED_FORMATS}")
        self.format_type = format_type
        self.indent = indent

    def format_data(self, data: Any, **kwargs) -> str:
        if self.format_type == 'json':
            return self._format_json(data, **kwargs)
        if self.format_type == 'yaml':
            return self._format_yaml(data, **kwargs)
        if self.format_type == 'table':
            return self._format_table(data, **kwargs)
        return self._format_plain(data)

    def _format_json(self, data: Any, **kwargs) -> str:
        return json.dumps(data, indent=self.indent, ensure_ascii=False,
                          default=self._json_serializer, **kwargs)

    def _format_yaml(self, data: Any, **kwargs) -> str:
        if not YAML_AVAILABLE:
            return "YAML formatting requires 'pyyaml' package. Install with: pip install pyyaml"
        return yaml.safe_dump(to_builtin(data), default_flow_style=False,
                              allow_unicode=True, indent=self.indent, **kwargs)

    def _format_table(self, data: Any, **kwargs) -> str:
        if isinstance(data, dict):
            headers = ['Field', 'Value']
            table = [[k, v] for k, v in data.items()]
        elif isinstance(data, list) and data and isinstance(data[0], dict):
            headers = list(data[0].keys())
            table = [[item.get(h, '') for h in headers] for item in data]
        elif isinstance(data, list):
            headers = ['Value']
            table = [[item] for item in data]
        else:
            headers = ['Value']
            table = [[data]]

        if not TABULATE_AVAILABLE:
            lines = ['\t'.join(str(h) for h in headers)]
            lines.extend('\t'.join(_cell(v) for v in row) for row in table)
            return '\n'.join(lines)
        return tabulate([[_cell(v) for v in row] for row in table], headers=headers,
                        tablefmt=kwargs.get('tablefmt', 'grid'), disable_numparse=True)

    def _format_plain(self, data: Any) -> str:
        if isinstance(data, dict):
            return '\n'.join(f"{key}: {_cell(value)}" for key, value in data.items())
        if isinstance(data, list):
            return '\n'.join(str(item) for item in data)
        return str(data)

    def _json_serializer(self, obj: Any) -> Any:
        builtin = to_builtin(obj)
        if builtin is obj:
            return str(obj)
        return builtin

    def print_data(self, data: Any, file=None, **kwargs) -> None:
        print(self.format_data(data, **kwargs), file=file or sys.stdout)

    def save_data(self, data: Any, filepath: Union[str, Path], **kwargs) -> None:
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, 'w', encoding='utf-8', newline='\n') as f:
            f.write(self.format_data(data, **kwargs))
            f.write('\n')


def to_builtin(obj: Any) -> Any:
    """numpy scalars/arrays and Paths to plain Python values."""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    return obj


def _cell(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        if math.isinf(value) or math.isnan(value):
            return str(value)
        return f"{value:.6g}"
    return str(value)


class ColorFormatter:
    """ANSI colors for status lines; disabled when stdout is not a terminal."""

    COLORS = {
        'reset': '\033[0m',
        'bold': '\033[1m',
        'bright_red': '\033[91m',
        'bright_green': '\033[92m',
        'bright_yellow': '\033[93m',
    }

    def __init__(self, enabled: bool = True):
        self.enabled = enabled and hasattr(sys.stdout, 'isatty') and sys.stdout.isatty()

    def colorize(self, text: str, color: str) -> str:
        if not self.enabled or color not in self.COLORS:
            return text
        return f"{self.COLORS[color]}{text}{self.COLORS['reset']}"

    def success(self, text: str) -> str:
        return self.colorize(text, 'bright_green')

    def error(self, text: str) -> str:
        return self.colorize(text, 'bright_red')

    def warning(self, text: str) -> str:
        return self.colorize(text, 'bright_yellow')

    def bold(self, text: str) -> str:
        return self.colorize(text, 'bold')


def format_duration(seconds: float) -> str:
    """Format duration in human-readable format.

    Args:
        seconds: Duration in seconds

    Returns:
        Formatted duration string
    """
    if seconds < 60:
        return f"{seconds:.1f}s"
    if seconds < 3600:
        return f"{int(seconds // 60)}m {int(seconds % 60)}s"
    hours = int(seconds // 3600)
    return f"{hours}h {int((seconds % 3600) // 60)}m {int(seconds % 60)}s"


def best_rows(rows: Sequence[Dict[str, Any]], group: str, key: str,
              minimize: bool = True) -> List[Dict[str, Any]]:
    """Best row per value of ``group`` by ``key``; rows missing the key are skipped.

    Groups come out in order of first appearance, ties keep the earliest row.
    """
    best: Dict[Any, Dict[str, Any]] = {}
    for row in rows:
        value = row.get(key)
        if value is None or (isinstance(value, float) and math.isnan(value)):
            continue
        current = best.get(row[group])
        if current is None or (value < current[key] if minimize else value > current[key]):
            best[row[group]] = row
    return list(best.values())
