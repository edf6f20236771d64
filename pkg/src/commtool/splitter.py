"""Split an uploaded HTML newsletter into ordered sections and apply edits.

Boundaries are the start offsets of h1-h4 elements, so the concatenation of
section html always reproduces the body content byte for byte. Parsing is
error-recovering (html.parser); real newsletters are messy and are never
rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from html.parser import HTMLParser

from .domain import Section
from .errors import EditError, ValidationError

HEADING_TAGS = {"h1", "h2", "h3", "h4"}

# Sections whose non-heading text is shorter than this are bare titles
# ("TOP NEWS"-style); 20 words keeps one-line blurbs as content.
TITLE_MAX_BODY_WORDS = 20

_BODY_RE = re.compile(r"<body[^>]*>(.*)</body\s*>", re.IGNORECASE | re.DOTALL)


def extract_body(raw_html: str) -> str:
    """Inner <body> content if the upload is a full document, else the input."""
    m = _BODY_RE.search(raw_html)
    return m.group(1) if m else raw_html


class _TextExtractor(HTMLParser):
    """Tag-stripping text extraction; script/style contents are dropped."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.chunks: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in ("script", "style"):
            self._skip_depth += 1

    def handle_endtag(self, tag):
        if tag in ("script", "style") and self._skip_depth:
            self._skip_depth -= 1

    def handle_data(self, data):
        if not self._skip_depth:
            self.chunks.append(data)


def plain_text(html_fragment: str) -> str:
    """Entity-decoded text with tags replaced by whitespace, normalized."""
    p = _TextExtractor()
    p.feed(html_fragment)
    p.close()
    return " ".join(" ".join(p.chunks).split())


def count_words(html_fragment: str) -> int:
    """Maximal non-whitespace runs in the tag-stripped, entity-decoded text."""
    return len(plain_text(html_fragment).split())


class _HeadingScanner(HTMLParser):
    """Records absolute offsets of h1-h4 start tags in the fed text."""

    def __init__(self, line_starts: list[int]) -> None:
        super().__init__(convert_charrefs=True)
        self._line_starts = line_starts
        self.offsets: list[int] = []

    def _abs_pos(self) -> int:
        line, col = self.getpos()
        return self._line_starts[line - 1] + col

    def handle_starttag(self, tag, attrs):
        if tag in HEADING_TAGS:
            self.offsets.append(self._abs_pos())

    def handle_startendtag(self, tag, attrs):
        if tag in HEADING_TAGS:
            self.offsets.append(self._abs_pos())


def _line_starts(text: str) -> list[int]:
    starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            starts.append(i + 1)
    return starts


def _heading_offsets(body: str) -> list[int]:
    scanner = _HeadingScanner(_line_starts(body))
    scanner.feed(body)
    scanner.close()
    return scanner.offsets


class _HeadingTextParser(HTMLParser):
    """Pulls the text of the leading h1-h4 element of a section, if any."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.heading: str | None = None
        self._in_heading: str | None = None
        self._seen_first_tag = False
        self._chunks: list[str] = []

    def handle_starttag(self, tag, attrs):
        if not self._seen_first_tag:
            self._seen_first_tag = True
            if tag in HEADING_TAGS:
                self._in_heading = tag

    def handle_endtag(self, tag):
        if self._in_heading and tag == self._in_heading:
            self.heading = " ".join("".join(self._chunks).split())
            self._in_heading = None

    def handle_data(self, data):
        if not self._seen_first_tag and data.strip():
            self._seen_first_tag = True  # leading text, not a heading section
        elif self._in_heading:
            self._chunks.append(data)


def _leading_heading_text(html: str) -> str:
    p = _HeadingTextParser()
    p.feed(html)
    p.close()
    return p.heading or ""


def _classify(word_count: int, heading_text: str) -> str:
    body_words = word_count - len(heading_text.split())
    return "title" if body_words < TITLE_MAX_BODY_WORDS else "content"


def _build_section(section_id: str, html: str, order: int) -> Section:
    heading = _leading_heading_text(html)
    text = plain_text(html)
    words = len(text.split())
    kind = _classify(words, heading)
    return Section(
        section_id=section_id,
        kind=kind,
        heading_text=heading,
        body_html=html,
        plain_text=text,
        word_count=words,
        survey_enabled=(kind == "content"),
        order=order,
    )


def classify_section(section: Section) -> str:
    """Title iff the non-heading text is under TITLE_MAX_BODY_WORDS words."""
    return _classify(section.word_count, section.heading_text)


def split_html(raw_html: str) -> list[Section]:
    """One section per h1-h4 heading plus a leading section when there is
    pre-heading content; empty input yields an empty list."""
    body = extract_body(raw_html)
    if not body.strip():
        return []
    offsets = _heading_offsets(body)
    slices: list[str] = []
    if not offsets:
        slices.append(body)
    else:
        bounds = list(offsets) + [len(body)]
        heading_slices = [body[bounds[i] : bounds[i + 1]] for i in range(len(offsets))]
        lead = body[: offsets[0]]
        if lead.strip():
            slices.append(lead)
        elif lead:
            # whitespace-only prefix rides along with the first heading so
            # concatenation still reproduces the body
            heading_slices[0] = lead + heading_slices[0]
        slices.extend(heading_slices)
    return [_build_section(f"s{i + 1}", html, i) for i, html in enumerate(slices)]


def render_sections(sections: list[Section]) -> str:
    """Concatenated section html; inverse of split_html on its own output."""
    return "".join(s.body_html for s in sections)


# --- edit operations ------------------------------------------------------


@dataclass(frozen=True)
class EditOp:
    kind: str  # merge | remove | add_boundary | toggle_survey
    section_id: str
    into_id: str | None = None
    char_offset: int | None = None
    on: bool | None = None

    @staticmethod
    def from_dict(d: dict) -> "EditOp":
        kind = d.get("op") or d.get("kind")
        if kind not in ("merge", "remove", "add_boundary", "toggle_survey"):
            raise ValidationError(f"unknown edit op {kind!r}")
        return EditOp(
            kind=kind,
            section_id=str(d.get("section_id", "")),
            into_id=d.get("into_id"),
            char_offset=d.get("char_offset"),
            on=d.get("on"),
        )


def _index_of(sections: list[Section], section_id: str) -> int:
    for i, s in enumerate(sections):
        if s.section_id == section_id:
            return i
    raise EditError(f"unknown section {section_id!r}")


def _next_section_id(sections: list[Section]) -> str:
    top = 0
    for s in sections:
        m = re.fullmatch(r"s(\d+)", s.section_id)
        if m:
            top = max(top, int(m.group(1)))
    return f"s{top + 1}"


def apply_edits(sections: list[Section], ops: list[EditOp]) -> list[Section]:
    """Apply ops in order; word counts and kinds are recomputed, survey flags
    on title sections are forced off."""
    out = list(sections)
    for op in ops:
        idx = _index_of(out, op.section_id)
        if op.kind == "remove":
            del out[idx]
        elif op.kind == "merge":
            if op.into_id is None:
                raise EditError("merge needs into_id")
            into_idx = _index_of(out, op.into_id)
            if abs(into_idx - idx) != 1:
                raise EditError("merge targets must be adjacent")
            first, second = sorted((idx, into_idx))
            merged_html = out[first].body_html + out[second].body_html
            survivor = _build_section(op.into_id, merged_html, out[first].order)
            keep_survey = out[into_idx].survey_enabled and survivor.kind == "content"
            if survivor.survey_enabled != keep_survey:
                survivor = _replace_survey(survivor, keep_survey)
            out[first] = survivor
            del out[second]
        elif op.kind == "add_boundary":
            offset = op.char_offset
            sec = out[idx]
            if offset is None or not (0 < offset < len(sec.body_html)):
                raise EditError("char_offset must fall strictly inside body_html")
            left = _build_section(sec.section_id, sec.body_html[:offset], sec.order)
            right = _build_section(_next_section_id(out), sec.body_html[offset:], sec.order + 1)
            out[idx : idx + 1] = [left, right]
        elif op.kind == "toggle_survey":
            sec = out[idx]
            if op.on and sec.kind != "content":
                raise EditError("surveys can only be enabled on content sections")
            out[idx] = _replace_survey(sec, bool(op.on))
    # renumber order and enforce the title/survey invariant
    final: list[Section] = []
    for i, s in enumerate(out):
        survey = s.survey_enabled and s.kind == "content"
        final.append(
            Section(
                section_id=s.section_id,
                kind=s.kind,
                heading_text=s.heading_text,
                body_html=s.body_html,
                plain_text=s.plain_text,
                word_count=s.word_count,
                survey_enabled=survey,
                order=i,
            )
        )
    return final


def _replace_survey(s: Section, on: bool) -> Section:
    return Section(
        section_id=s.section_id,
        kind=s.kind,
        heading_text=s.heading_text,
        body_html=s.body_html,
        plain_text=s.plain_text,
        word_count=s.word_count,
        survey_enabled=on,
        order=s.order,
    )
