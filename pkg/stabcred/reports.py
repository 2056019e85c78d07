"""
Reports emitted by the engines: the simulation report, the Monte Carlo summary file, the line-delimited
event log and their table renderings.

Report objects hold JSON-native data only (Decimals are stored as plain decimal strings), so that
``parse_report(emit_report(r)) == r`` and the table format is a rendering of exactly the numbers the JSON
format carries.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from colorama import Fore, Style

from stabcred import _utils
from stabcred.constants import Pathish

lg = logging.getLogger(__name__)

REPORT_FILE = "report.json"
EVENTS_FILE = "events.jsonl"
SUMMARY_FILE = "monte_carlo.json"


@dataclass
class SimulationReport:
    """
    Result of a simulation run

    :param provenance: tool version, scenario hash, master seed and path index
    :param snapshots: per step ledger, pool, market and vault state
    :param events: the event log
    :param summary: peaks, accrued interest and final state
    """
    provenance: Dict = field(default_factory=dict)
    credit_lines: List[Dict] = field(default_factory=list)
    verdicts: List[Dict] = field(default_factory=list)
    endogenous_yield: List[Dict] = field(default_factory=list)
    risk_register: List[Dict] = field(default_factory=list)
    snapshots: List[Dict] = field(default_factory=list)
    events: List[Dict] = field(default_factory=list)
    summary: Dict = field(default_factory=dict)
    monte_carlo: Optional[Dict] = None

    def to_dict(self) -> Dict:
        res = {
            "provenance": self.provenance,
            "credit_lines": self.credit_lines,
            "verdicts": self.verdicts,
            "endogenous_yield": self.endogenous_yield,
            "risk_register": self.risk_register,
            "snapshots": self.snapshots,
            "events": self.events,
            "summary": self.summary,
        }
        if self.monte_carlo is not None:
            res["monte_carlo"] = self.monte_carlo
        return res

    @staticmethod
    def from_dict(x: Dict) -> "SimulationReport":
        return SimulationReport(
            provenance=x["provenance"],
            credit_lines=x.get("credit_lines", []),
            verdicts=x.get("verdicts", []),
            endogenous_yield=x.get("endogenous_yield", []),
            risk_register=x.get("risk_register", []),
            snapshots=x.get("snapshots", []),
            events=x.get("events", []),
            summary=x.get("summary", {}),
            monte_carlo=x.get("monte_carlo"),
        )


def emit_report(report: SimulationReport, indent: Optional[int] = 2) -> str:
    return _utils.canonical_json(report.to_dict(), indent=indent)


def parse_report(text: str) -> SimulationReport:
    return SimulationReport.from_dict(json.loads(text))


def emit_events(events: Iterable[Dict]) -> str:
    """Line-delimited JSON event log"""
    return "".join(_utils.canonical_json(e) + "\n" for e in events)


def write_artifacts(report: SimulationReport, out_dir: Pathish) -> List[Path]:
    """Write ``report.json`` and ``events.jsonl`` to `out_dir`"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_file = out_dir.joinpath(REPORT_FILE)
    events_file = out_dir.joinpath(EVENTS_FILE)
    report_file.write_text(emit_report(report), encoding="utf-8")
    events_file.write_text(emit_events(report.events), encoding="utf-8")
    lg.info(f"wrote {report_file} and {events_file}")
    return [report_file, events_file]


def write_summary(summary: Dict, out_dir: Pathish) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir.joinpath(SUMMARY_FILE)
    path.write_text(_utils.canonical_json(summary, indent=2), encoding="utf-8")
    lg.info(f"wrote {path}")
    return path


# tables ---------------------------------------------------------------------------------------------------

def flatten(x: Any, prefix: str = "") -> List[List[str]]:
    """Flatten nested JSON-native data into (key, value) rows with dotted keys"""
    x = _utils.jsonable(x)
    rows = []
    if isinstance(x, dict):
        for k, v in x.items():
            rows.extend(flatten(v, f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(x, list) and any(isinstance(v, (dict, list)) for v in x):
        for i, v in enumerate(x):
            rows.extend(flatten(v, f"{prefix}[{i}]"))
    elif isinstance(x, list):
        rows.append([prefix, ", ".join(str(v) for v in x)])
    else:
        rows.append([prefix, _format_value(x)])
    return rows


def _format_value(x: Any) -> str:
    if x is None:
        return "-"
    if isinstance(x, bool):
        return str(x).lower()
    return str(x)


def render_table(x: Any, title: Optional[str] = None, color: bool = True) -> str:
    """Render nested data as a two column key/value table"""
    rows = flatten(x)
    width = max([len(k) for k, _ in rows] + [0]) + 2
    lines = []
    if title is not None:
        lines.append(f"{Style.BRIGHT}{title}{Style.RESET_ALL}" if color else title)
    for k, v in rows:
        if color and v in ("true", "false"):
            v = f"{Fore.GREEN if v == 'true' else Fore.RED}{v}{Fore.RESET}"
        lines.append(f"{k.ljust(width)}{v}")
    return "\n".join(lines)


def render_simulation(report: SimulationReport, color: bool = True) -> str:
    """Table rendering of a simulation report. Snapshots and events are only emitted in JSON."""
    parts = [
        render_table(report.provenance, "provenance", color),
        render_table(report.credit_lines, "credit lines", color),
        render_table(report.summary, "summary", color),
    ]
    if report.endogenous_yield:
        parts.append(render_table(report.endogenous_yield, "endogenous yield", color))
    if report.monte_carlo is not None:
        parts.append(render_table(report.monte_carlo, "monte carlo", color))
    return "\n\n".join(parts)
