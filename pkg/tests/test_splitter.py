import html as html_mod
import random
import re

import pytest

from commtool.errors import EditError
from commtool.splitter import (
    EditOp,
    apply_edits,
    classify_section,
    count_words,
    render_sections,
    split_html,
)


def oracle_word_count(fragment: str) -> int:
    """Independent of the package: tags -> space, entities decoded, split."""
    return len(html_mod.unescape(re.sub(r"<[^>]*>", " ", fragment)).split())


def words(n, tag="p", prefix="w"):
    return f"<{tag}>" + " ".join(f"{prefix}{i}" for i in range(n)) + f"</{tag}>"


class TestCountWords:
    def test_plain_text(self):
        assert count_words("hello world") == 2

    def test_inline_tags(self):
        assert count_words("<p>one <b>two</b> three</p>") == 3

    def test_empty(self):
        assert count_words("") == 0

    def test_entities_decoded(self):
        assert count_words("fish &amp; chips") == 3

    def test_hyphenated_counts_once(self):
        assert count_words("<p>well-known fact</p>") == 2

    def test_script_contents_ignored(self):
        assert count_words("<script>var a = 1;</script><p>one two</p>") == 2

    def test_matches_strip_oracle_on_random_fragments(self):
        rng = random.Random(11)
        for _ in range(50):
            parts = []
            for _ in range(rng.randrange(1, 8)):
                tag = rng.choice(["p", "div", "li", "span"])
                parts.append(words(rng.randrange(0, 12), tag=tag))
            fragment = "".join(parts)
            assert count_words(fragment) == oracle_word_count(fragment)


class TestSplitHtml:
    def test_empty_input_gives_empty_list(self):
        assert split_html("") == []
        assert split_html("   \n  ") == []

    def test_no_headings_single_section(self):
        html = words(50)
        sections = split_html(html)
        assert len(sections) == 1
        assert sections[0].kind == "content"
        assert sections[0].word_count == 50

    def test_title_and_content_recognition(self):
        html = "<h2>TOP NEWS</h2><h3>An apple a day keeps the doctor away</h3>" + words(40)
        # the h3 heading owns the trailing body; split puts the boundary at each heading
        sections = split_html(html)
        assert [s.kind for s in sections] == ["title", "content"]
        assert sections[0].heading_text == "TOP NEWS"
        assert sections[1].heading_text.startswith("An apple a day")

    def test_three_heading_fixture_word_counts_match_oracle(self):
        pieces = [
            "<h2>Alpha</h2>" + words(25, prefix="a"),
            "<h2>Beta</h2>" + words(31, prefix="b"),
            "<h2>Gamma</h2>" + words(8, prefix="c"),
        ]
        sections = split_html("".join(pieces))
        assert len(sections) == 3
        for section, piece in zip(sections, pieces):
            assert section.word_count == oracle_word_count(piece)

    def test_leading_content_becomes_section(self):
        html = "<p>intro paragraph here</p><h2>Head</h2>" + words(30)
        sections = split_html(html)
        assert len(sections) == 2
        assert sections[0].heading_text == ""
        assert "intro" in sections[0].plain_text

    def test_whitespace_prefix_preserved_in_first_slice(self):
        html = "\n  <h2>Head</h2>" + words(30)
        sections = split_html(html)
        assert len(sections) == 1
        assert render_sections(sections) == html

    def test_concatenation_reproduces_body(self):
        html = "<h1>A</h1><p>x y</p><h3>B</h3><p>z</p>"
        assert render_sections(split_html(html)) == html

    def test_body_extraction_from_full_document(self):
        inner = "<h2>A</h2>" + words(25)
        doc = f"<html><head><title>t</title></head><body>{inner}</body></html>"
        sections = split_html(doc)
        assert render_sections(sections) == inner

    def test_split_is_idempotent(self):
        html = "<p>lead text words</p><h2>One</h2>" + words(22) + "<h4>Two</h4>" + words(5)
        first = split_html(html)
        second = split_html(render_sections(first))
        assert [s.body_html for s in first] == [s.body_html for s in second]
        assert [s.kind for s in first] == [s.kind for s in second]

    def test_section_word_counts_sum_to_body_count(self):
        rng = random.Random(5)
        for _ in range(25):
            parts = []
            if rng.random() < 0.5:
                parts.append(words(rng.randrange(1, 30)))
            for _ in range(rng.randrange(0, 5)):
                level = rng.choice(["h1", "h2", "h3", "h4"])
                parts.append(f"<{level}>Heading {rng.randrange(100)}</{level}>")
                parts.append(words(rng.randrange(0, 40)))
            html = "".join(parts)
            sections = split_html(html)
            assert sum(s.word_count for s in sections) == count_words(html)

    def test_h5_h6_do_not_split(self):
        html = "<h2>One</h2><h5>sub</h5>" + words(30)
        assert len(split_html(html)) == 1

    def test_heading_inside_script_ignored(self):
        html = "<script>document.write('<h2>fake</h2>')</script>" + words(30)
        sections = split_html(html)
        assert len(sections) == 1
        assert sections[0].heading_text == ""

    def test_malformed_html_tolerated(self):
        html = "<h2>Broken<p>no closes" + words(25) + "<h3>Next</h3><p>tail words here"
        sections = split_html(html)
        assert len(sections) == 2
        assert render_sections(sections) == html


class TestClassifySection:
    def test_bare_heading_is_title(self):
        html = "<h2>TOP NEWS</h2>"
        section = split_html(html)[0]
        assert section.kind == "title"
        assert classify_section(section) == "title"

    def test_heading_with_long_body_is_content(self):
        section = split_html("<h2>Head</h2>" + words(150))[0]
        assert section.kind == "content"

    def test_boundary_twenty_body_words_is_content(self):
        section = split_html("<h2>Head</h2>" + words(20))[0]
        assert section.kind == "content"

    def test_nineteen_body_words_is_title(self):
        section = split_html("<h2>Head</h2>" + words(19))[0]
        assert section.kind == "title"


class TestApplyEdits:
    def fixture(self):
        html = (
            "<h2>One</h2>" + words(25, prefix="a")
            + "<h2>Two</h2>" + words(30, prefix="b")
            + "<h2>Three</h2>" + words(35, prefix="c")
        )
        return split_html(html)

    def test_merge_adjacent_word_counts_additive(self):
        sections = self.fixture()
        w1, w2 = sections[0].word_count, sections[1].word_count
        merged = apply_edits(sections, [EditOp(kind="merge", section_id="s2", into_id="s1")])
        assert len(merged) == 2
        assert merged[0].word_count == w1 + w2
        assert merged[0].word_count == count_words(merged[0].body_html)

    def test_merge_non_adjacent_rejected(self):
        with pytest.raises(EditError):
            apply_edits(self.fixture(), [EditOp(kind="merge", section_id="s3", into_id="s1")])

    def test_remove_then_remove_same_id_errors(self):
        sections = self.fixture()
        once = apply_edits(sections, [EditOp(kind="remove", section_id="s2")])
        assert [s.section_id for s in once] == ["s1", "s3"]
        with pytest.raises(EditError):
            apply_edits(sections, [EditOp(kind="remove", section_id="s2"), EditOp(kind="remove", section_id="s2")])

    def test_unknown_id_errors(self):
        with pytest.raises(EditError):
            apply_edits(self.fixture(), [EditOp(kind="remove", section_id="nope")])

    def test_toggle_survey_on_title_errors(self):
        sections = split_html("<h2>Bare</h2><h2>Real</h2>" + words(40))
        assert sections[0].kind == "title"
        with pytest.raises(EditError):
            apply_edits(sections, [EditOp(kind="toggle_survey", section_id="s1", on=True)])

    def test_toggle_survey_off_and_on_content(self):
        sections = self.fixture()
        off = apply_edits(sections, [EditOp(kind="toggle_survey", section_id="s2", on=False)])
        assert not off[1].survey_enabled
        back = apply_edits(off, [EditOp(kind="toggle_survey", section_id="s2", on=True)])
        assert back[1].survey_enabled

    def test_add_boundary_splits_section(self):
        sections = self.fixture()
        target = sections[1]
        offset = len("<h2>Two</h2>")
        out = apply_edits(sections, [EditOp(kind="add_boundary", section_id="s2", char_offset=offset)])
        assert len(out) == 4
        assert out[1].body_html + out[2].body_html == target.body_html

    def test_add_boundary_offset_must_be_inside(self):
        sections = self.fixture()
        for bad in (0, len(sections[0].body_html), -3):
            with pytest.raises(EditError):
                apply_edits(sections, [EditOp(kind="add_boundary", section_id="s1", char_offset=bad)])

    def test_document_order_preserved(self):
        sections = self.fixture()
        out = apply_edits(
            sections,
            [
                EditOp(kind="remove", section_id="s2"),
                EditOp(kind="merge", section_id="s3", into_id="s1"),
            ],
        )
        assert [s.order for s in out] == list(range(len(out)))
        assert render_sections(out).index("One") < render_sections(out).index("Three")
