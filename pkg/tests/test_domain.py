import random

import pytest

from commtool.domain import (
    Recipient,
    assign_groups,
    mint_token,
    parse_recipients_csv,
    verify_token,
)
from commtool.errors import AuthError, ConfigError, ValidationError

KEY = b"0123456789abcdef0123456789abcdef"


def make_recipients(n):
    return [Recipient(f"r{i}", f"u{i}@example.org") for i in range(n)]


class TestAssignGroups:
    def test_empty_input(self):
        assert assign_groups([], seed=1) == []

    def test_even_split_of_ten(self):
        assigned = assign_groups(make_recipients(10), seed=42)
        groups = [r.group for r in assigned]
        assert groups.count("implicit") == 5
        assert groups.count("explicit") == 5

    def test_sizes_differ_at_most_one(self):
        for n in range(1, 30):
            assigned = assign_groups(make_recipients(n), seed=n)
            implicit = sum(1 for r in assigned if r.group == "implicit")
            assert abs(implicit - (n - implicit)) <= 1

    def test_deterministic(self):
        rs = make_recipients(17)
        a = assign_groups(rs, seed=9)
        b = assign_groups(rs, seed=9)
        assert [r.group for r in a] == [r.group for r in b]

    def test_every_recipient_in_exactly_one_group(self):
        rs = make_recipients(23)
        assigned = assign_groups(rs, seed=3)
        assert {r.recipient_id for r in assigned} == {r.recipient_id for r in rs}
        assert all(r.group in ("implicit", "explicit") for r in assigned)


class TestTokens:
    def test_round_trip(self):
        tok = mint_token("c1", "r1", KEY)
        assert verify_token(tok.token, KEY) == ("c1", "r1")

    def test_short_key_rejected(self):
        with pytest.raises(ConfigError):
            mint_token("c1", "r1", b"short")

    def test_wrong_key_rejected(self):
        tok = mint_token("c1", "r1", KEY)
        with pytest.raises(AuthError):
            verify_token(tok.token, b"x" * 32)

    def test_empty_token_rejected(self):
        with pytest.raises(AuthError):
            verify_token("", KEY)

    def test_single_character_mutations_rejected(self):
        tok = mint_token("camp-7", "rec-21", KEY).token
        alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_."
        rng = random.Random(4)
        for _ in range(10_000):
            pos = rng.randrange(len(tok))
            repl = rng.choice(alphabet)
            while repl == tok[pos]:
                repl = rng.choice(alphabet)
            mutated = tok[:pos] + repl + tok[pos + 1 :]
            try:
                ids = verify_token(mutated, KEY)
            except AuthError:
                continue
            # a decode-level collision would be a MAC break
            raise AssertionError(f"forged token accepted: {mutated!r} -> {ids}")


class TestRecipientsCsv:
    def test_parse_basic(self):
        text = "email,unit,job_category\na@x.org,sales,staff\nb@x.org,eng,manager\n"
        rs = parse_recipients_csv(text)
        assert [r.email_address for r in rs] == ["a@x.org", "b@x.org"]
        assert rs[0].unit == "sales"
        assert rs[1].job_category == "manager"

    def test_empty_text(self):
        assert parse_recipients_csv("") == []

    def test_bad_header(self):
        with pytest.raises(ValidationError):
            parse_recipients_csv("address,unit,job\na@x.org,s,j")

    def test_missing_columns(self):
        with pytest.raises(ValidationError):
            parse_recipients_csv("email,unit,job_category\na@x.org,sales")
