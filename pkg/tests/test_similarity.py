import time

import pytest
from scipy import stats

from reuseguard import similarity
from reuseguard.similarity import (
    CHEAP_HASH_PARAMS,
    DEFAULT_HASH_PARAMS,
    SimilarSet,
    bloom_item,
    build_similar_set,
    generate_honey,
    generate_similar,
    load_similar_set,
    save_similar_set,
)


def test_identity_always_first():
    assert generate_similar("password", 1) == ["password"]
    assert generate_similar("abc123", 5)[0] == "abc123"


def test_cascade_produces_expected_variants():
    out = generate_similar("monkey1", 4)
    assert "monkey2" in out
    assert "Monkey1" in out


def test_cascade_is_deterministic_and_deduplicated():
    a = generate_similar("Summer2023!", 40)
    b = generate_similar("Summer2023!", 40)
    assert a == b
    assert len(a) == len(set(a))
    assert len(a) <= 40


def test_budget_respected():
    for budget in (1, 2, 7, 100):
        out = generate_similar("drowssap9", budget)
        assert len(out) <= budget


def test_cascade_covers_common_reuse_transforms():
    out = generate_similar("hunter2", 30)
    assert "Hunter2" in out     # capitalization
    assert "hunter3" in out     # trailing digit step
    assert "hunter2!" in out    # suffix append
    assert "hunter21" in out or "hunter2123" in out


def test_custom_transform_rules_plug_in():
    reverse = similarity.TransformRule("reverse", lambda pw: [pw[::-1]])
    out = generate_similar("abcdef", 2, rules=(reverse,))
    assert out == ["abcdef", "fedcba"]
    sset = build_similar_set("a@b.com", "abcdef", 0, 2, CHEAP_HASH_PARAMS,
                             rules=(reverse,))
    assert bloom_item("fedcba", "a@b.com", CHEAP_HASH_PARAMS) in sset


def test_honey_empty_for_zero():
    assert generate_honey("whatever", 0, 1) == []


def test_honey_distinct_and_never_real():
    pw = "monkey1"
    honeys = generate_honey(pw, 4, 7)
    assert len(honeys) == 4
    assert len(set(honeys)) == 4
    assert pw not in honeys


def test_honey_deterministic_under_seed():
    assert generate_honey("pass123", 5, 42) == generate_honey("pass123", 5, 42)
    assert generate_honey("pass123", 5, 42) != generate_honey("pass123", 5, 43)


def test_honey_matches_composition_policy():
    pw = "Str0ng-pass7"
    for seed in range(1000):
        for h in generate_honey(pw, 1, seed):
            assert len(h) >= len(pw) - 2


def test_honey_preserves_character_classes():
    honeys = generate_honey("Monkey42!", 20, 3)
    for h in honeys:
        assert len(h) == len("Monkey42!")
        assert h[0].isupper()
        assert h[-3:-1].isdigit()
        assert not h[-1].isalnum()


def test_build_set_per_seed_budget():
    sset = build_similar_set("a@b.com", "monkey1", 4, 25, CHEAP_HASH_PARAMS,
                             rng_seed=1)
    assert sset.per_seed_budget == 5
    assert len(sset.entries) <= 25
    assert sset.d == 4
    assert len(sset.entries) > 20  # digest collisions across seeds are rare


def test_build_set_single_seed():
    sset = build_similar_set("a@b.com", "solo-pass", 0, 1, CHEAP_HASH_PARAMS)
    assert sset.entries == (bloom_item("solo-pass", "a@b.com", CHEAP_HASH_PARAMS),)


def test_build_set_rejects_tiny_capacity():
    with pytest.raises(ValueError):
        build_similar_set("a@b.com", "pw", 4, 4, CHEAP_HASH_PARAMS)


def test_membership_by_digest():
    account = "a@b.com"
    sset = build_similar_set(account, "monkey1", 0, 8, CHEAP_HASH_PARAMS)
    assert bloom_item("Monkey1", account, CHEAP_HASH_PARAMS) in sset
    assert bloom_item("totally-unrelated", account, CHEAP_HASH_PARAMS) not in sset


def test_no_duplicate_digests():
    sset = build_similar_set("a@b.com", "aaa111", 4, 40, CHEAP_HASH_PARAMS,
                             rng_seed=2)
    assert len(sset.entries) == len(set(sset.entries))


def test_interleaving_keeps_every_seed_in_prefix():
    # Truncating to the first d+1 entries must still cover all seeds: the
    # first block holds each seed's own password.
    account = "a@b.com"
    pw = "hunter2"
    d = 4
    sset = build_similar_set(account, pw, d, 25, CHEAP_HASH_PARAMS, rng_seed=9)
    prefix = set(sset.entries[:d + 1])
    assert bloom_item(pw, account, CHEAP_HASH_PARAMS) in prefix
    for honey in generate_honey(pw, d, 9):
        assert bloom_item(honey, account, CHEAP_HASH_PARAMS) in prefix


def test_honey_variant_lengths_indistinguishable():
    real_lengths = []
    honey_lengths = []
    for seed in range(1000):
        pw = ["monkey1", "Passw0rd!", "summer99", "qwerty12"][seed % 4]
        real_lengths.extend(len(v) for v in generate_similar(pw, 5))
        honey = generate_honey(pw, 1, seed)[0]
        honey_lengths.extend(len(v) for v in generate_similar(honey, 5))
    result = stats.ks_2samp(real_lengths, honey_lengths)
    assert result.pvalue > 0.01


def test_digest_is_account_scoped():
    a = bloom_item("pw", "a@b.com", CHEAP_HASH_PARAMS)
    b = bloom_item("pw", "c@d.com", CHEAP_HASH_PARAMS)
    assert a != b
    assert len(a) == len(b) == similarity.DIGEST_BYTES
    assert bloom_item("pw", "a@b.com", CHEAP_HASH_PARAMS) == a


def test_default_hash_cost_is_slow():
    start = time.perf_counter()
    bloom_item("timing-probe", "a@b.com", DEFAULT_HASH_PARAMS)
    elapsed = time.perf_counter() - start
    assert elapsed >= 0.05


def test_store_roundtrip(tmp_path):
    sset = build_similar_set("a@b.com", "monkey1", 2, 12, CHEAP_HASH_PARAMS,
                             rng_seed=5)
    path = tmp_path / "account.simset"
    save_similar_set(sset, str(path))
    loaded = load_similar_set(str(path))
    assert loaded == sset


def test_store_rejects_foreign_file(tmp_path):
    path = tmp_path / "bogus.simset"
    path.write_bytes(b"not a store at all")
    with pytest.raises(ValueError):
        load_similar_set(str(path))


def test_similar_set_is_immutable():
    sset = SimilarSet("a@b.com", (b"\x00" * 32,), 0, 1)
    with pytest.raises(AttributeError):
        sset.entries = ()
