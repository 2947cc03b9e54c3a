"""Deterministic report rendering.

Reports are plain text with a stable field order and no wall-clock content,
so two runs with the same seed and config produce byte-identical files.
Floats are rendered with ``repr`` (shortest round-trip form).
"""

from __future__ import annotations

from dataclasses import dataclass, field


def fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


@dataclass
class ScenarioReport:
    name: str
    config_echo: list[tuple[str, str]] = field(default_factory=list)
    assertions: list[tuple[str, bool, str]] = field(default_factory=list)
    metrics: list[tuple[str, str]] = field(default_factory=list)

    def check(self, name: str, ok: bool, detail: str = "") -> bool:
        self.assertions.append((name, bool(ok), detail))
        return bool(ok)

    def metric(self, name: str, value) -> None:
        self.metrics.append((name, fmt(value)))

    @property
    def passed(self) -> bool:
        return all(ok for _name, ok, _detail in self.assertions)

    def to_text(self) -> str:
        lines = [f"report = {self.name}", "", "-- config --"]
        lines += [f"{key} = {value}" for key, value in self.config_echo]
        lines += ["", "-- assertions --"]
        for name, ok, detail in self.assertions:
            status = "PASS" if ok else "FAIL"
            suffix = f" {detail}" if detail else ""
            lines.append(f"{status} {name}{suffix}")
        lines += ["", "-- metrics --"]
        lines += [f"{key} = {value}" for key, value in self.metrics]
        lines += ["", f"result = {'PASS' if self.passed else 'FAIL'}"]
        return "\n".join(lines) + "\n"
