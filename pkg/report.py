"""
Run reports: the machine-readable record of a check, its JSON schema,
and the plain-text rendering printed by the command line
"""
import json
import logging
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError

from checker import Outcome, Verdict
from errors import HyperscopeError
from kripke import Lasso

logger = logging.getLogger(__name__)

NO_WITNESS = "no witness exists"


class ReportError(HyperscopeError):
    pass


class PositionReport(BaseModel):
    state: str
    props: List[str] = Field(default_factory=list)


class WitnessReport(BaseModel):
    """One path of a witness or counterexample, as a stem and a repeated loop"""
    var: str
    stem: List[PositionReport] = Field(default_factory=list)
    loop: List[PositionReport]


class LeafReport(BaseModel):
    formula: str
    verdict: Literal['holds', 'fails', 'unknown']
    engine: str
    elapsed_ms: float = 0.0
    bounds: Optional[List[int]] = None
    note: str = ''
    witnesses: List[WitnessReport] = Field(default_factory=list)


class RunReport(BaseModel):
    verdict: Literal['holds', 'fails', 'unknown']
    engine: str
    formula: str
    elapsed_ms: float = 0.0
    note: str = ''
    witnesses: List[WitnessReport] = Field(default_factory=list)
    leaves: List[LeafReport] = Field(default_factory=list)


def _witnesses(verdict: Verdict) -> List[WitnessReport]:
    if not verdict.witness:
        return []

    def positions(seq):
        return [PositionReport(state=s, props=sorted(v)) for s, v in seq]

    return [WitnessReport(var=var, stem=positions(path.stem), loop=positions(path.loop))
            for var, path in zip(verdict.witness_vars, verdict.witness)]


def _note(verdict: Verdict) -> str:
    if verdict.note:
        return verdict.note
    if verdict.outcome is Outcome.FAILS and not verdict.witness:
        return NO_WITNESS
    return ''


def leaf_report(verdict: Verdict) -> LeafReport:
    return LeafReport(
        formula=verdict.formula,
        verdict=verdict.outcome.value,
        engine=verdict.engine,
        elapsed_ms=round(verdict.elapsed_ms, 3),
        bounds=list(verdict.bounds) if verdict.bounds else None,
        note=_note(verdict),
        witnesses=_witnesses(verdict),
    )


def from_verdict(verdict: Verdict) -> RunReport:
    """Report for a combined specification verdict (or a single leaf verdict)"""
    leaves = verdict.leaves or (verdict,)
    return RunReport(
        verdict=verdict.outcome.value,
        engine=verdict.engine,
        formula=verdict.formula,
        elapsed_ms=round(verdict.elapsed_ms, 3),
        note=_note(verdict),
        witnesses=_witnesses(verdict),
        leaves=[leaf_report(v) for v in leaves],
    )


def json_schema() -> dict:
    return RunReport.model_json_schema()


def to_json(report: RunReport) -> str:
    return report.model_dump_json(indent=2)


def validate_json(text: str) -> RunReport:
    """Parse and validate a JSON report against the schema"""
    try:
        return RunReport.model_validate_json(text)
    except ValidationError as e:
        raise ReportError(f"invalid report: {e.error_count()} error(s): {e.errors()[0]['msg']}") from e


def witness_lasso(witness: WitnessReport) -> Lasso:
    """Rebuild the lasso of a reported path"""
    def positions(seq):
        return tuple((p.state, frozenset(p.props)) for p in seq)
    return Lasso(positions(witness.stem), positions(witness.loop))


def render_human(report: RunReport) -> str:
    lines = [f"verdict: {report.verdict} ({report.engine}, {report.elapsed_ms:.1f} ms)"]
    if report.note:
        lines.append(f"note: {report.note}")
    if len(report.leaves) > 1:
        for i, leaf in enumerate(report.leaves, start=1):
            bounds = f" bounds {leaf.bounds[0]}/{leaf.bounds[1]}" if leaf.bounds else ''
            lines.append(f"  [{i}] {leaf.verdict:<7} {leaf.engine}{bounds}: {leaf.formula}")
    elif report.leaves and report.leaves[0].bounds:
        stem, loop = report.leaves[0].bounds
        lines.append(f"bounds: stem {stem}, loop {loop}")
    for w in report.witnesses:
        lines.append(f"  {w.var}: {str(witness_lasso(w))}")
    return '\n'.join(lines)


def dumps_schema() -> str:
    return json.dumps(json_schema(), indent=2, sort_keys=True)
