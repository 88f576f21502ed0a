"""
Report Module
Plain-text reports, convergence tables and run history for CLI results.
"""

from typing import Dict, List, Union
from datetime import datetime
import json
import os

import pandas as pd

from cyclicity import Certificate

TABLE_COLUMNS = ['degree', 'residual', 'tail_estimate', 'wall_ms']


class ReportBuilder:
    """Builds reports from command results and keeps a run history."""

    def __init__(self):
        self.history = []

    def record(self, command: str, result: Dict) -> Dict:
        """
        Add a command result to the history.

        Args:
            command: CLI command name
            result: Result dictionary as written by the CLI

        Returns:
            History entry
        """
        entry = {
            'timestamp': datetime.now().isoformat(),
            'command': command,
            'result': result
        }
        self.history.append(entry)
        return entry

    @staticmethod
    def convergence_table(source: Union[Certificate, Dict, List[Dict]], timings: bool = False) -> pd.DataFrame:
        """Certificate rows as a DataFrame with columns degree, residual, tail_estimate, wall_ms."""
        if isinstance(source, Certificate):
            rows = source.rows(timings)
        elif isinstance(source, dict):
            rows = source.get('rows', [])
        else:
            rows = source
        return pd.DataFrame(rows, columns=TABLE_COLUMNS)

    def generate_report(self, command: str, result: Dict) -> str:
        """
        Human-readable report for one result.

        Args:
            command: CLI command name
            result: Result dictionary

        Returns:
            Report string
        """
        report = []
        report.append("=" * 60)
        report.append(f"H(b) REPORT: {command.upper()}")
        report.append("=" * 60)
        report.append("")

        if 'rows' in result:
            table = self.convergence_table(result)
            report.append(f"CERTIFICATE ({result.get('kind')}, {result.get('norm')} norm):")
            report.append(f"  Verdict: {result.get('verdict')}")
            if result.get('beta') is not None:
                report.append(f"  Fitted rate: n^-{result['beta']:.3f}")
            if result.get('floor') is not None:
                report.append(f"  Floor: {result['floor']:.6g}")
            report.append(f"  Truncation tail: {result.get('tail_estimate', 0.0):.3e}")
            report.append("")
            report.append(table.to_string(index=False))
        elif 'passes' in result:
            report.append("CONDITIONS:")
            outer = result.get('outer') or {}
            report.append(f"  Outer: {outer.get('outer')} (gap {outer.get('gap')})")
            report.append(f"  Min |f| on boundary set: {result.get('min_abs')}")
            if result.get('multiplier') is not None:
                report.append(f"  g1, g2 bounded: {result['multiplier']}")
            if result.get('condition_c') is not None:
                report.append(f"  Weighted sum: {result.get('condition_c_sum')} (tail {result.get('condition_c_tail')})")
            report.append(f"  Passes: {result['passes']}")
            for note in result.get('notes', []):
                report.append(f"  Note: {note}")
        else:
            report.append("RESULT:")
            for key, value in result.items():
                if isinstance(value, (dict, list)):
                    value = json.dumps(value)[:72]
                report.append(f"  {key}: {value}")

        report.append("")
        report.append("=" * 60)
        return "\n".join(report)

    def save_history(self, file_path: str = "hb_history.json"):
        with open(file_path, 'w') as f:
            json.dump(self.history, f, indent=2)

    def load_history(self, file_path: str = "hb_history.json"):
        if os.path.exists(file_path):
            with open(file_path, 'r') as f:
                self.history = json.load(f)

    def summary(self) -> Dict:
        """Counts per command and per certificate verdict."""
        if not self.history:
            return {}
        commands, verdicts = {}, {}
        for entry in self.history:
            commands[entry['command']] = commands.get(entry['command'], 0) + 1
            v = entry['result'].get('verdict') if isinstance(entry['result'], dict) else None
            if v:
                verdicts[v] = verdicts.get(v, 0) + 1
        return {
            'total_runs': len(self.history),
            'commands': commands,
            'verdicts': verdicts
        }
