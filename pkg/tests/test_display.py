"""Display rules: slot dynamics, course priority, cues, name matching."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tourguide.display import (
    MAX_SLOTS,
    DisplayMode,
    DisplayState,
    NameIndex,
    action_cues,
    reset_for_phase,
    update,
)
from tourguide.phases import (
    BOW_ON_ENTRY,
    BOW_ON_EXIT,
    Phase,
    TransitionDecision,
)


@pytest.fixture(scope="module")
def indexes(resources):
    return (
        NameIndex.for_spots(resources.hub.spots),
        NameIndex.for_courses(resources.catalog),
    )


def apply(resources, state, utterance):
    spot_index, course_index = (
        NameIndex.for_spots(resources.hub.spots),
        NameIndex.for_courses(resources.catalog),
    )
    return update(
        state,
        utterance,
        spot_index,
        course_index,
        spot_directory=resources.hub.spots,
        catalog=resources.catalog,
    )


def simulate_slots_brute_force(mention_lists):
    """Independent rule simulator: replay the whole mention history with
    plain list logic (no shared code with the controller). Each utterance
    contributes its distinct mentions in first-occurrence order."""
    slots: list[str] = []
    for mentions in mention_lists:
        distinct = list(dict.fromkeys(mentions))
        for name in distinct:
            if name in slots:
                continue
            if len(slots) < 4:
                slots.append(name)
            else:
                slots[3] = name
    return slots


class TestNameMatching:
    def test_mentions_in_first_occurrence_order(self, resources):
        index = NameIndex.for_spots(resources.hub.spots)
        found = index.find_mentions("まず金閣寺、それから清水寺はいかがですか")
        assert found == ["金閣寺", "清水寺"]

    def test_alias_maps_to_canonical(self, resources):
        index = NameIndex.for_spots(resources.hub.spots)
        assert index.find_mentions("清水の舞台から眺めましょう") == ["清水寺"]

    def test_longest_match_wins_on_overlap(self):
        index = NameIndex({"清水寺": "清水寺", "寺": "別の寺"})
        assert index.find_mentions("清水寺へ行く") == ["清水寺"]

    def test_duplicate_mentions_deduplicated(self, resources):
        index = NameIndex.for_spots(resources.hub.spots)
        assert index.find_mentions("金閣寺と金閣寺") == ["金閣寺"]

    def test_unknown_text_matches_nothing(self, resources):
        index = NameIndex.for_spots(resources.hub.spots)
        assert index.find_mentions("特に固有名詞なし") == []


class TestSlotRules:
    def test_append_under_capacity(self, resources):
        state = apply(resources, DisplayState(), "金閣寺と清水寺をご紹介します")
        assert state.slot_names() == ("金閣寺", "清水寺")
        assert state.mode is DisplayMode.SPOT_SLOTS

    def test_fifth_replaces_fourth(self, resources):
        state = DisplayState()
        for name in ("金閣寺", "清水寺", "銀閣寺", "二条城"):
            state = apply(resources, state, f"{name}はいかがですか")
        assert len(state.slots) == MAX_SLOTS
        state = apply(resources, state, "嵐山もおすすめです")
        assert state.slot_names() == ("金閣寺", "清水寺", "銀閣寺", "嵐山")

    def test_slots_one_to_three_never_churn(self, resources):
        state = DisplayState()
        for name in ("金閣寺", "清水寺", "銀閣寺", "二条城", "嵐山", "東寺", "祇園"):
            state = apply(resources, state, f"{name}です")
        assert state.slot_names()[:3] == ("金閣寺", "清水寺", "銀閣寺")
        assert state.slot_names()[3] == "祇園"

    def test_mentioning_displayed_spot_changes_nothing(self, resources):
        state = apply(resources, DisplayState(), "金閣寺です")
        again = apply(resources, state, "やはり金閣寺ですね")
        assert again.slot_names() == state.slot_names()

    def test_unknown_names_ignored(self, resources):
        state = apply(resources, DisplayState(), "謎の場所と金閣寺")
        assert state.slot_names() == ("金閣寺",)

    def test_course_title_wins_over_spots(self, resources):
        state = apply(resources, DisplayState(), "禅と石庭コースの金閣寺が人気です")
        assert state.mode is DisplayMode.COURSE_LIST
        assert state.course is not None and state.course.course_id == "K03"

    def test_course_mode_persists_without_spot_mentions(self, resources):
        state = apply(resources, DisplayState(), "禅と石庭コースがおすすめ")
        state = apply(resources, state, "とても落ち着いた雰囲気ですよ")
        assert state.mode is DisplayMode.COURSE_LIST

    def test_course_mode_exits_on_spot_only_utterance(self, resources):
        state = apply(resources, DisplayState(), "金閣寺です")
        state = apply(resources, state, "禅と石庭コースもどうぞ")
        assert state.mode is DisplayMode.COURSE_LIST
        state = apply(resources, state, "清水寺も外せません")
        assert state.mode is DisplayMode.SPOT_SLOTS
        assert state.slot_names() == ("金閣寺", "清水寺")  # slots persisted underneath

    def test_capacity_never_exceeded(self, resources):
        state = DisplayState()
        for spot in resources.hub.spots:
            state = apply(resources, state, f"{spot.name}はいかがですか")
            assert len(state.slots) <= MAX_SLOTS


class TestResetForPhase:
    def test_phase4_pins_decided_spots_with_maps(self, resources):
        decided = (resources.hub.spots.get("金閣寺"), resources.hub.spots.get("清水寺"))
        state = reset_for_phase(DisplayState(turn_index=7), Phase.SCHEDULE_PROPOSAL, decided)
        assert state.slot_names() == ("金閣寺", "清水寺")
        assert state.show_maps is True
        assert state.turn_index == 7

    def test_phase5_keeps_confirmation_view(self, resources):
        decided = (resources.hub.spots.get("金閣寺"), resources.hub.spots.get("清水寺"))
        phase4 = reset_for_phase(DisplayState(), Phase.SCHEDULE_PROPOSAL, decided)
        phase5 = reset_for_phase(phase4, Phase.CONFIRMATION_CLOSING)
        assert phase5 == phase4

    def test_other_phases_start_empty(self, resources):
        dirty = apply(resources, DisplayState(), "金閣寺です")
        for phase in (Phase.ICE_BREAKER, Phase.INQUIRY, Phase.COURSE_SPOT_SELECTION):
            fresh = reset_for_phase(dirty, phase)
            assert fresh.slots == ()
            assert fresh.show_maps is False


class TestActionCues:
    def test_bow_on_initial_entry(self):
        assert action_cues(None, Phase.ICE_BREAKER) == [BOW_ON_ENTRY]

    def test_bow_on_close(self):
        assert action_cues(TransitionDecision.CLOSE, Phase.CONFIRMATION_CLOSING) == [BOW_ON_EXIT]

    def test_no_cue_elsewhere(self):
        assert action_cues(TransitionDecision.ADVANCE_BY_SIGN, Phase.COURSE_SPOT_SELECTION) == []
        assert action_cues(TransitionDecision.STAY, Phase.INQUIRY) == []
        assert action_cues(None, Phase.INQUIRY) == []


class TestAgainstBruteForce:
    UNIVERSE = ("金閣寺", "清水寺", "銀閣寺", "二条城", "嵐山", "東寺")

    def run_controller(self, resources, mention_lists):
        state = DisplayState()
        for mentions in mention_lists:
            utterance = "、".join(mentions) + "のご案内です" if mentions else "特になし"
            state = apply(resources, state, utterance)
        return list(state.slot_names())

    @settings(max_examples=200, deadline=None)
    @given(
        mention_lists=st.lists(
            st.lists(st.sampled_from(UNIVERSE), max_size=3), max_size=8
        )
    )
    def test_random_sequences_agree(self, resources, mention_lists):
        assert self.run_controller(resources, mention_lists) == simulate_slots_brute_force(
            mention_lists
        )

    def test_multi_mention_single_utterance_agrees(self, resources):
        mention_lists = [["金閣寺", "清水寺", "銀閣寺", "二条城", "嵐山"], ["東寺"]]
        assert self.run_controller(resources, mention_lists) == simulate_slots_brute_force(
            mention_lists
        )
