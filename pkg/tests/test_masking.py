from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthmask.features import TokenRecord
from synthmask.masking import (
    EligibilitySet,
    StrategyFilter,
    compute_eligibility,
    derive_seed,
    expand_strategy_sweep,
    mask_count,
    measure_ratios,
    parse_strategy,
    plan_for,
    plan_hybrid,
    plan_mask,
)


def make_token(index, text="word", **flags):
    start = index * 8
    return TokenRecord(index=index, text=text, start=start, end=start + len(text), **flags)


def plain_tokens(n, **flags):
    return [make_token(i, f"w{i}", **flags) for i in range(n)]


class TestEligibility:
    def test_entity_frozen(self):
        tokens = [make_token(0, "fall", is_entity=True), make_token(1, "from")]
        el = compute_eligibility(tokens)
        assert el.frozen == (0,) and el.eligible == (1,)

    def test_privacy_forced(self):
        tokens = [make_token(0, "06/03/2010", is_privacy=True), make_token(1, "seen")]
        el = compute_eligibility(tokens)
        assert el.forced == (0,) and 0 not in el.eligible

    def test_non_private_number_frozen(self):
        tokens = [make_token(0, "6", is_number=True), make_token(1, "feet")]
        el = compute_eligibility(tokens)
        assert el.frozen == (0,)

    def test_private_number_is_forced_not_frozen(self):
        tokens = [make_token(0, "5551234567", is_number=True, is_privacy=True)]
        el = compute_eligibility(tokens)
        assert el.forced == (0,) and el.frozen == ()

    def test_privacy_entity_overlap_preserves_entity(self):
        tokens = [make_token(0, "Leeds", is_privacy=True, is_entity=True)]
        el = compute_eligibility(tokens)
        assert el.frozen == (0,) and el.forced == ()

    def test_partition_is_disjoint_and_total(self):
        tokens = plain_tokens(6)
        tokens[1] = make_token(1, ".", is_punct=True)
        tokens[3] = make_token(3, "___", is_phi_placeholder=True)
        el = compute_eligibility(tokens)
        groups = set(el.eligible) | set(el.forced) | set(el.frozen)
        assert groups == set(range(6))
        assert not (set(el.eligible) & set(el.frozen))
        assert not (set(el.forced) & set(el.frozen))


class TestPlanMask:
    def test_ratio_zero_masks_forced_only(self):
        tokens = plain_tokens(10)
        tokens[2] = make_token(2, "a@b.org", is_privacy=True)
        el = compute_eligibility(tokens)
        plan = plan_mask(tokens, el, StrategyFilter("random"), 0.0, seed=1)
        assert plan.masked == (2,)

    def test_ratio_one_masks_everything_eligible(self):
        tokens = plain_tokens(10)
        el = compute_eligibility(tokens)
        plan = plan_mask(tokens, el, StrategyFilter("random"), 1.0, seed=1)
        assert plan.masked == tuple(range(10))

    def test_rounding_half_up(self):
        # pool of 7 nouns, ratio 0.4 -> floor(2.8 + 0.5) = 3
        tokens = [make_token(i, f"n{i}", pos="NOUN") for i in range(7)]
        el = compute_eligibility(tokens)
        strategy = StrategyFilter("pos", tagset=frozenset({"NOUN", "PROPN"}), tagset_name="noun")
        plan = plan_mask(tokens, el, strategy, 0.4, seed=42)
        assert len(plan.masked) == 3
        again = plan_mask(tokens, el, strategy, 0.4, seed=42)
        assert plan.masked == again.masked

    def test_mask_count_matches_exact_rational_arithmetic(self):
        for pool_size in range(0, 41):
            for tenths in range(0, 11):
                ratio = tenths / 10
                expected = (Fraction(tenths, 10) * pool_size + Fraction(1, 2)).__floor__()
                assert mask_count(ratio, pool_size) == expected

    def test_different_seeds_usually_differ(self):
        tokens = plain_tokens(12)
        el = compute_eligibility(tokens)
        plans = {
            plan_mask(tokens, el, StrategyFilter("random"), 0.5, seed=s).masked
            for s in range(100)
        }
        assert len(plans) >= 95

    def test_nested_prefix_monotonicity(self):
        tokens = plain_tokens(20)
        el = compute_eligibility(tokens)
        previous = set()
        for tenths in range(0, 11):
            plan = plan_mask(tokens, el, StrategyFilter("random"), tenths / 10, seed=7)
            current = set(plan.masked)
            assert previous <= current
            previous = current

    def test_stopword_pool(self):
        tokens = plain_tokens(6)
        tokens[1] = make_token(1, "the", is_stopword=True)
        tokens[4] = make_token(4, "of", is_stopword=True)
        el = compute_eligibility(tokens)
        plan = plan_mask(tokens, el, StrategyFilter("stopwords"), 1.0, seed=0)
        assert plan.masked == (1, 4)

    def test_degenerate_pool_note(self):
        tokens = plain_tokens(3)
        el = compute_eligibility(tokens)
        plan = plan_mask(tokens, el, StrategyFilter("stopwords"), 0.8, seed=0)
        assert plan.masked == ()
        assert plan.note == "degenerate pool"

    def test_invalid_ratio_rejected(self):
        tokens = plain_tokens(3)
        el = compute_eligibility(tokens)
        with pytest.raises(ValueError):
            plan_mask(tokens, el, StrategyFilter("random"), 1.2, seed=0)


class TestHybrid:
    def _pos_tokens(self):
        tokens = []
        for i in range(3):
            tokens.append(make_token(i, f"noun{i}", pos="NOUN"))
        for i in range(3, 5):
            tokens.append(make_token(i, f"verb{i}", pos="VERB"))
        for i in range(5, 9):
            tokens.append(make_token(i, f"stop{i}", is_stopword=True))
        tokens.append(make_token(9, "a@b.org", is_privacy=True))
        return tokens

    def test_single_component_equals_plan_mask(self):
        tokens = self._pos_tokens()
        el = compute_eligibility(tokens)
        single = plan_hybrid(tokens, el, [(StrategyFilter("random"), 0.5)], seed=9)
        direct = plan_mask(tokens, el, StrategyFilter("random"), 0.5, seed=9)
        assert single.masked == direct.masked

    def test_full_union_counts(self):
        tokens = self._pos_tokens()
        el = compute_eligibility(tokens)
        components = [
            (StrategyFilter("pos", tagset=frozenset({"NOUN", "PROPN"}), tagset_name="noun"), 1.0),
            (StrategyFilter("pos", tagset=frozenset({"VERB", "AUX"}), tagset_name="verb"), 1.0),
            (StrategyFilter("stopwords"), 1.0),
        ]
        plan = plan_hybrid(tokens, el, components, seed=3)
        assert len(plan.masked) == 9 + len(el.forced)

    def test_overlap_counted_once(self):
        tokens = self._pos_tokens()
        el = compute_eligibility(tokens)
        plan = plan_hybrid(
            tokens, el, [(StrategyFilter("random"), 1.0), (StrategyFilter("stopwords"), 1.0)], seed=1
        )
        assert len(plan.masked) == len(set(plan.masked))

    def test_strategy_string(self):
        tokens = self._pos_tokens()
        el = compute_eligibility(tokens)
        components = [
            (StrategyFilter("pos", tagset=frozenset({"NOUN", "PROPN"}), tagset_name="noun"), 0.5),
            (StrategyFilter("stopwords"), 0.5),
        ]
        plan = plan_hybrid(tokens, el, components, seed=1)
        assert plan.strategy == "hybrid:(pos:noun:0.5,stopwords:0.5)"
        assert plan.requested_ratio == (0.5, 0.5)


class TestMeasureRatios:
    def test_fixture_arithmetic(self):
        # 100 tokens: 65 eligible, 35 frozen; 13 eligible tokens masked
        tokens = plain_tokens(65) + [
            make_token(65 + i, ".", is_punct=True) for i in range(35)
        ]
        el = compute_eligibility(tokens)
        plan = plan_mask(tokens, el, StrategyFilter("random"), 0.2, seed=5)
        assert len(plan.masked) == 13
        eligible_ratio, actual_ratio = measure_ratios(plan, tokens)
        assert eligible_ratio == pytest.approx(0.2)
        assert actual_ratio == pytest.approx(0.13)

    def test_empty_plan(self):
        tokens = plain_tokens(4)
        el = compute_eligibility(tokens)
        plan = plan_mask(tokens, el, StrategyFilter("random"), 0.0, seed=0)
        assert measure_ratios(plan, tokens) == (0.0, 0.0)

    def test_zero_tokens_is_error(self):
        tokens = plain_tokens(1)
        el = compute_eligibility(tokens)
        plan = plan_mask(tokens, el, StrategyFilter("random"), 0.0, seed=0)
        with pytest.raises(ValueError):
            measure_ratios(plan, [])


class TestStrategyGrammar:
    def test_simple_forms(self):
        (component,) = parse_strategy("random:0.4")
        assert component[0].kind == "random" and component[1] == 0.4
        (component,) = parse_strategy("pos:noun:0.8")
        assert component[0].tagset == frozenset({"NOUN", "PROPN"})
        (component,) = parse_strategy("pos:verb:1.0")
        assert component[0].tagset == frozenset({"VERB", "AUX"})
        (component,) = parse_strategy("stopwords:0.6")
        assert component[0].kind == "stopwords"

    def test_hybrid_form(self):
        components = parse_strategy("hybrid:(pos:noun:0.5,stopwords:0.5)")
        assert len(components) == 2

    def test_bad_specs(self):
        for bad in ("nonsense:0.4", "random:1.5", "pos:noun", "hybrid:()", "hybrid:pos:noun:0.5"):
            with pytest.raises(ValueError):
                parse_strategy(bad)

    def test_sweep_expansion(self):
        specs = expand_strategy_sweep("random:0.0..1.0:0.1")
        assert len(specs) == 11
        assert specs[0] == "random:0" and specs[-1] == "random:1"
        assert expand_strategy_sweep("stopwords:0.6") == ["stopwords:0.6"]

    def test_seed_derivation_stable_and_spread(self):
        a = derive_seed(42, "letter-1", 0)
        assert a == derive_seed(42, "letter-1", 0)
        assert a != derive_seed(42, "letter-1", 1)
        assert a != derive_seed(43, "letter-1", 0)


_flag_sets = st.fixed_dictionaries(
    {
        "is_entity": st.booleans(),
        "is_structure": st.booleans(),
        "is_special": st.booleans(),
        "is_stopword": st.booleans(),
        "is_punct": st.booleans(),
        "is_number": st.booleans(),
        "is_phi_placeholder": st.booleans(),
        "raw_privacy": st.booleans(),
    }
)


def _labelled_token(index, flags, pos):
    # mirror the featurizer's flag-compatibility rule: privacy is
    # suppressed on punctuation / placeholders / structure / special
    suppressed = flags["is_punct"] or flags["is_phi_placeholder"] or flags["is_structure"] or flags["is_special"]
    return make_token(
        index,
        "." if flags["is_punct"] else f"t{index}",
        is_entity=flags["is_entity"],
        is_structure=flags["is_structure"],
        is_special=flags["is_special"],
        is_stopword=flags["is_stopword"],
        is_punct=flags["is_punct"],
        is_number=flags["is_number"],
        is_phi_placeholder=flags["is_phi_placeholder"],
        is_privacy=flags["raw_privacy"] and not suppressed,
        pos=pos,
    )


@given(
    st.lists(_flag_sets, min_size=1, max_size=30),
    st.sampled_from(["random", "pos", "stopwords"]),
    st.integers(0, 10),
    st.integers(0, 2**32),
    st.sampled_from(["NOUN", "VERB", "DET", "OTHER"]),
)
@settings(max_examples=300, deadline=None)
def test_masking_principles_property(flag_rows, kind, tenths, seed, pos):
    tokens = [_labelled_token(i, flags, pos) for i, flags in enumerate(flag_rows)]
    el = compute_eligibility(tokens)
    if kind == "pos":
        strategy = StrategyFilter("pos", tagset=frozenset({"NOUN", "PROPN"}), tagset_name="noun")
    else:
        strategy = StrategyFilter(kind)
    plan = plan_for(tokens, el, [(strategy, tenths / 10)], seed)
    masked = set(plan.masked)
    for token in tokens:
        if token.index in masked:
            assert not token.is_entity
            assert not token.is_structure
            assert not token.is_special
            assert not token.is_punct
            assert not token.is_phi_placeholder
            assert not (token.is_number and not token.is_privacy)
        if token.is_privacy and not token.is_entity:
            assert token.index in masked
