"""Reading and writing the Pabulib ``.pb`` format (approval ballots only).

A file has three sections, each introduced by a line holding only its
name: ``META`` (``key;value`` rows), ``PROJECTS`` and ``VOTES`` (each with
a header row).  Fields are ``;``-separated and may be double-quoted.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, Tuple

from .model import (Ballot, Instance, InstanceError, Project, amount_from_decimal,
                    decimal_str)

SECTIONS = ("META", "PROJECTS", "VOTES")


class PabulibParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


@dataclass
class ParseDiagnostics:
    strict: bool = True
    warnings: List[Tuple[int, str]] = field(default_factory=list)

    def warn(self, line: int, message: str) -> None:
        if self.strict:
            raise PabulibParseError(line, message)
        self.warnings.append((line, message))


def parse_instance(text: str, lenient: bool = False) -> Tuple[Instance, ParseDiagnostics]:
    """Parse a document; strict mode turns every anomaly into an error."""
    diag = ParseDiagnostics(strict=not lenient)
    if text.startswith("﻿"):
        text = text[1:]
    rows = _split_sections(text)
    meta = _parse_meta(rows["META"])
    projects, declared_votes = _parse_projects(rows["PROJECTS"])
    known = {p.id: p for p in projects}
    ballots = _parse_votes(rows["VOTES"], known, diag)

    budget_line, budget_text = meta.get("budget", (rows["META"][0], None))
    if budget_text is None:
        raise PabulibParseError(rows["META"][0], "META lacks a 'budget' entry")
    budget = _amount(budget_text, budget_line, "budget")
    vtype_line, vtype = meta.get("vote_type", (0, "approval"))
    if vtype.strip().lower() != "approval":
        diag.warn(vtype_line, f"vote_type {vtype!r} is not 'approval'")

    scores = {p.id: 0 for p in projects}
    for b in ballots:
        for pid in b.approved:
            scores[pid] += 1
    for pid, (line, declared) in declared_votes.items():
        if declared != scores[pid]:
            diag.warn(line, f"project {pid!r} declares {declared} votes but the VOTES section has {scores[pid]}")
    if "num_votes" in meta:
        line, declared = meta["num_votes"]
        if declared.strip().isdigit() and int(declared) != len(ballots):
            diag.warn(line, f"num_votes is {declared} but the VOTES section has {len(ballots)} voters")

    try:
        inst = Instance(projects, ballots, budget, {k: v for k, (_, v) in meta.items()})
    except InstanceError as exc:  # pragma: no cover - the per-row checks catch these first
        raise PabulibParseError(0, str(exc)) from None
    return inst, diag


def load_instance(path, lenient: bool = False) -> Tuple[Instance, ParseDiagnostics]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_instance(fh.read(), lenient=lenient)


def _amount(text: str, line: int, what: str):
    try:
        return amount_from_decimal(text)
    except ValueError:
        raise PabulibParseError(line, f"malformed {what} {text!r}") from None


def _split_sections(text: str) -> dict:
    """Map each section name to ``[header_line_no, (line_no, fields), ...]``."""
    out = {}
    current = None
    expected = iter(SECTIONS)
    lines = text.splitlines()
    reader = csv.reader(lines, delimiter=";", quotechar='"')
    while True:
        try:
            fields = next(reader)
        except StopIteration:
            break
        except csv.Error as exc:
            raise PabulibParseError(reader.line_num, f"malformed row: {exc}") from None
        line = reader.line_num
        if not fields or all(not f.strip() for f in fields):
            continue
        head = fields[0].strip()
        if len(fields) == 1 and head.upper() in SECTIONS:
            name = head.upper()
            if name in out:
                raise PabulibParseError(line, f"section {name} appears twice")
            want = next(expected, None)
            if name != want:
                raise PabulibParseError(line, f"section {name} out of order (expected {want})")
            current = name
            out[name] = [line]
            continue
        if current is None:
            raise PabulibParseError(line, "content before the META section")
        out[current].append((line, [f.strip() for f in fields]))
    for name in SECTIONS:
        if name not in out:
            raise PabulibParseError(len(lines), f"missing section {name}")
    return out


def _parse_meta(rows) -> dict:
    meta = {}
    for line, fields in rows[1:]:
        if len(fields) < 2:
            raise PabulibParseError(line, "META rows must be 'key;value'")
        key, value = fields[0], ";".join(fields[1:])
        if key == "key" and value == "value" and not meta:
            continue
        meta[key] = (line, value)
    return meta


def _header(rows, section: str, required) -> list:
    if len(rows) < 2:
        raise PabulibParseError(rows[0], f"{section} has no header row")
    line, header = rows[1]
    for col in required:
        if col not in header:
            raise PabulibParseError(line, f"{section} header lacks column {col!r}")
    if len(set(header)) != len(header):
        raise PabulibParseError(line, f"{section} header repeats a column")
    return header


def _records(rows, header):
    for line, fields in rows[2:]:
        if len(fields) != len(header):
            raise PabulibParseError(line, f"expected {len(header)} fields, found {len(fields)}")
        yield line, dict(zip(header, fields))


def _parse_projects(rows):
    header = _header(rows, "PROJECTS", ("project_id", "cost"))
    projects, declared, seen = [], {}, set()
    for line, rec in _records(rows, header):
        pid = rec.pop("project_id")
        if not pid:
            raise PabulibParseError(line, "empty project id")
        if pid in seen:
            raise PabulibParseError(line, f"duplicate project id {pid!r}")
        seen.add(pid)
        cost = _amount(rec.pop("cost"), line, "cost")
        if cost <= 0:
            raise PabulibParseError(line, f"project {pid!r} must have a positive cost")
        name = rec.pop("name", None)
        if "votes" in rec and rec["votes"].isdigit():
            declared[pid] = (line, int(rec["votes"]))
        projects.append(Project(pid, cost, name, rec))
    return projects, declared


def _parse_votes(rows, known, diag: ParseDiagnostics):
    if len(rows) == 1:
        return []  # a bare VOTES line: nobody voted
    header = _header(rows, "VOTES", ("voter_id", "vote"))
    ballots, seen = [], set()
    for line, rec in _records(rows, header):
        vid = rec.pop("voter_id")
        if not vid:
            raise PabulibParseError(line, "empty voter id")
        if vid in seen:
            raise PabulibParseError(line, f"duplicate voter id {vid!r}")
        seen.add(vid)
        approved = set()
        for pid in (s.strip() for s in rec.pop("vote").split(",")):
            if not pid:
                continue
            if pid not in known:
                if diag.strict:
                    raise PabulibParseError(line, f"vote references unknown project id {pid!r}")
                diag.warn(line, f"skipping unknown project id {pid!r}")
                continue
            approved.add(pid)
        ballots.append(Ballot(vid, frozenset(approved), rec))
    return ballots


def _row(fields) -> str:
    buf = io.StringIO()
    csv.writer(buf, delimiter=";", lineterminator="\n", quoting=csv.QUOTE_MINIMAL).writerow(fields)
    return buf.getvalue()


def serialize_instance(instance: Instance) -> str:
    """Canonical document: LF line ends, sorted META keys, recomputed counts."""
    scores = instance.scores()
    meta = dict(instance.meta)
    meta["budget"] = decimal_str(instance.budget)
    meta["num_projects"] = str(instance.n_projects)
    meta["num_votes"] = str(instance.n_voters)
    meta.setdefault("vote_type", "approval")
    out = ["META\n", _row(["key", "value"])]
    out += [_row([k, meta[k]]) for k in sorted(meta)]

    has_name = any(p.name is not None for p in instance.projects)
    extra_cols = _columns(p.extra for p in instance.projects)
    out.append("PROJECTS\n")
    out.append(_row(["project_id", "cost"] + (["name"] if has_name else []) + extra_cols))
    for p in instance.projects:
        extra = dict(p.extra)
        if "votes" in extra:
            extra["votes"] = str(scores[p.id])
        row = [p.id, decimal_str(p.cost)] + ([p.name or ""] if has_name else [])
        out.append(_row(row + [extra.get(c, "") for c in extra_cols]))

    vote_cols = _columns(b.extra for b in instance.ballots)
    rank = instance.project_index
    out.append("VOTES\n")
    out.append(_row(["voter_id", "vote"] + vote_cols))
    for b in instance.ballots:
        vote = ",".join(sorted(b.approved, key=rank.__getitem__))
        out.append(_row([b.voter_id, vote] + [b.extra.get(c, "") for c in vote_cols]))
    return "".join(out)


def _columns(extras) -> list:
    cols = {}
    for extra in extras:
        for k in extra:
            cols.setdefault(k, None)
    return list(cols)
