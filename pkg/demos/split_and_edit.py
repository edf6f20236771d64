"""Walkthrough: split an uploaded newsletter into sections and fix the split.

Run: python demos/split_and_edit.py
"""

from commtool.splitter import EditOp, apply_edits, count_words, split_html

NEWSLETTER = """
<h2>TOP NEWS</h2>
<h3>Benefits enrollment closes Friday</h3>
<p>Open enrollment for next year's benefits closes this Friday at 5 pm.
Log in to the portal to review your selections, compare plan changes, and
confirm dependents. Late changes require a qualifying life event.</p>
<h3>Parking ramp maintenance</h3>
<p>The east ramp is closed next week for resurfacing. Use the north lot;
shuttle service runs every fifteen minutes from 7 am.</p>
<h2>EVENTS</h2>
<h3>Lunch and learn: retirement basics</h3>
<p>Wednesday at noon in the commons. Bring your questions about matching,
vesting, and target-date funds. Lunch is provided for the first forty
attendees, so arrive a few minutes early if you want a seat.</p>
"""


def show(sections, label):
    print(f"\n== {label} ==")
    for s in sections:
        flag = "survey" if s.survey_enabled else "  -   "
        print(f"  {s.section_id:<4} {s.kind:<8} {flag}  {s.word_count:>4}w  {s.heading_text[:40]}")


def main():
    sections = split_html(NEWSLETTER)
    show(sections, "automatic split")
    print(f"\ntotal words: {count_words(NEWSLETTER)}")
    print("sum of sections:", sum(s.word_count for s in sections))

    # The EVENTS title and its single story are really one block: merge them,
    # and drop the survey on the parking note.
    edited = apply_edits(
        sections,
        [
            EditOp(kind="merge", section_id="s5", into_id="s4"),
            EditOp(kind="toggle_survey", section_id="s3", on=False),
        ],
    )
    show(edited, "after edits")


if __name__ == "__main__":
    main()
