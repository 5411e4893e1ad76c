"""
Verification report data models.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional


class ReportStatus(Enum):
    """Outcome of a relation check."""
    PASS = "pass"
    FAIL = "fail"


@dataclass
class Report:
    """
    Result of verifying one catalog relation over all of its instances.

    The status is PASS exactly when no instance left a nonzero residual.
    ``errata`` lists instances where the printed right-hand side differs from
    the one the engine reproduces.
    """
    relation: str
    instances: int = 0
    failures: int = 0
    first_failure: str = ""
    first_failure_instance: Dict[str, Any] = field(default_factory=dict)
    errata: List[Dict[str, Any]] = field(default_factory=list)

    def __post_init__(self):
        if self.instances < 0:
            raise ValueError("Instance count cannot be negative")

    @property
    def status(self) -> ReportStatus:
        return ReportStatus.PASS if self.failures == 0 else ReportStatus.FAIL

    def is_pass(self) -> bool:
        return self.status == ReportStatus.PASS

    def add_pass(self) -> None:
        self.instances += 1

    def add_failure(self, residual: str, instance: Optional[Dict[str, Any]] = None) -> None:
        """Record a failing instance; only the first residual is kept."""
        self.instances += 1
        self.failures += 1
        if not self.first_failure:
            self.first_failure = residual
            self.first_failure_instance = dict(instance or {})

    def add_erratum(self, instance: Dict[str, Any], printed_residual: str) -> None:
        self.errata.append({"instance": dict(instance), "printed_residual": printed_residual})

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            "relation": self.relation,
            "instances": self.instances,
            "status": self.status.value,
            "first_failure": self.first_failure,
        }
        if self.first_failure_instance:
            result["first_failure_instance"] = self.first_failure_instance
        if self.errata:
            result["errata"] = self.errata
        return result

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Report":
        report = cls(
            relation=data["relation"],
            instances=int(data.get("instances", 0)),
            failures=0 if data.get("status", "pass") == "pass" else 1,
            first_failure=data.get("first_failure", ""),
            first_failure_instance=dict(data.get("first_failure_instance", {})),
        )
        report.errata = list(data.get("errata", []))
        return report


@dataclass
class EscapeReport:
    """
    Terms of a symbolic bracket that fall outside the P/M/D template shapes.
    """
    probe: str
    total_terms: int = 0
    escaping_terms: List[str] = field(default_factory=list)

    @property
    def escapes(self) -> bool:
        return bool(self.escaping_terms)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "probe": self.probe,
            "total_terms": self.total_terms,
            "escaping": len(self.escaping_terms),
            "escaping_terms": list(self.escaping_terms),
        }
