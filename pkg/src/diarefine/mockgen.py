"""Synthetic conversation fixtures for the mock backends.

Each generator produces a :class:`~diarefine.mock.MockScript` exercising
one pipeline behavior: ``clean`` is a well-behaved multi-party
conversation, ``split`` gives one real person two diarizer labels,
``drift`` is a long recording whose acoustics shift mid-way, and
``messy`` adds alignment mismatches (undetected turns, initially missed
words, a word-free ghost turn).
"""

from __future__ import annotations

import random

from .mock import EmbeddingDrift, MockScript, ScriptTurn, ScriptWord

_VOCAB = (
    "okay so how are you feeling today the pain is a bit better thanks "
    "let me check your shoulder again please lift this arm slowly good "
    "we will do three more sessions this week and then rest at home "
    "did you sleep well last night yes mostly although my back hurt "
    "keep breathing take your time that looks much stronger now"
).split()

DEFAULT_IDENTITIES = ("Patient", "Physical Therapist", "Son")

SCENARIOS = ("clean", "split", "drift", "messy")


def _turn_words(rng: random.Random, start: float, end: float) -> tuple[ScriptWord, ...]:
    words = []
    t = start + 0.05
    while t < end - 0.35:
        duration = rng.uniform(0.2, 0.35)
        words.append(ScriptWord(rng.choice(_VOCAB), round(t, 3), round(t + duration, 3)))
        t += duration + rng.uniform(0.02, 0.1)
    return tuple(words)


def _round_robin_turns(
    rng: random.Random,
    roster: list[tuple[str, str]],
    duration: float,
    turn_length: float,
    gap: float,
) -> list[ScriptTurn]:
    turns = []
    t = 0.0
    i = 0
    while t + turn_length <= duration:
        speaker, identity = roster[i % len(roster)]
        end = t + turn_length
        turns.append(ScriptTurn(speaker, identity, round(t, 3), round(end, 3), _turn_words(rng, t, end)))
        t = end + gap
        i += 1
    return turns


def clean_script(
    n_speakers: int = 3,
    duration: float = 300.0,
    turn_length: float = 6.0,
    gap: float = 1.0,
    seed: int = 0,
    identities: tuple[str, ...] = DEFAULT_IDENTITIES,
) -> MockScript:
    """A well-behaved conversation: every turn detected, every word aligned."""
    if n_speakers > len(identities):
        identities = identities + tuple(f"Speaker {i}" for i in range(len(identities), n_speakers))
    rng = random.Random(seed)
    roster = [(f"spk{i}", identities[i]) for i in range(n_speakers)]
    return MockScript(tuple(_round_robin_turns(rng, roster, duration, turn_length, gap)))


def split_speaker_script(
    duration: float = 300.0,
    turn_length: float = 6.0,
    gap: float = 1.0,
    seed: int = 0,
) -> MockScript:
    """One person, two diarizer labels.

    The patient is labeled spk0 in the first half of the visit and spk2 in
    the second half (as if their voice changed with microphone position),
    while the therapist stays spk1 throughout.  Ground truth has exactly
    two identities.
    """
    rng = random.Random(seed)
    half = duration / 2
    first = _round_robin_turns(
        rng, [("spk0", "Patient"), ("spk1", "Physical Therapist")], half, turn_length, gap
    )
    second = _round_robin_turns(
        rng, [("spk2", "Patient"), ("spk1", "Physical Therapist")], half, turn_length, gap
    )
    shifted = [
        ScriptTurn(t.speaker, t.identity, round(t.start + half, 3), round(t.end + half, 3),
                   tuple(ScriptWord(w.text, round(w.start + half, 3), round(w.end + half, 3)) for w in t.words))
        for t in second
    ]
    return MockScript(tuple(first + shifted))


def drift_script(
    n_speakers: int = 3,
    duration: float = 600.0,
    drift_time: float = 342.0,
    drift_angle_deg: float = 48.0,
    turn_length: float = 6.0,
    gap: float = 1.0,
    seed: int = 0,
) -> MockScript:
    """A long recording whose embeddings rotate after ``drift_time``.

    Speaker labels stay truthful; only the mock embedder's prototypes
    drift, so any label splitting observed downstream is the clustering's
    doing, not the script's.
    """
    base = clean_script(n_speakers=n_speakers, duration=duration,
                        turn_length=turn_length, gap=gap, seed=seed)
    return MockScript(base.turns, EmbeddingDrift(drift_time, drift_angle_deg))


def messy_script(seed: int = 0) -> MockScript:
    """A clean conversation plus the two alignment mismatch classes.

    One turn is invisible to the diarizer (its words become orphans), one
    turn's words are only recoverable by a focused re-run, and one ghost
    turn has no recognizable speech at all (it must be dropped).
    """
    rng = random.Random(seed)
    base = clean_script(n_speakers=2, duration=120.0, seed=seed,
                        identities=("Patient", "Physical Therapist"))
    turns = list(base.turns)

    orphan = turns[3]
    turns[3] = ScriptTurn(orphan.speaker, orphan.identity, orphan.start, orphan.end,
                          orphan.words, sd_miss=True)

    missed = turns[5]
    turns[5] = ScriptTurn(
        missed.speaker, missed.identity, missed.start, missed.end,
        tuple(ScriptWord(w.text, w.start, w.end, initial_miss=True) for w in missed.words),
    )

    last_end = turns[-1].end
    turns.append(ScriptTurn("spk0", "Patient", round(last_end + 2.0, 3), round(last_end + 5.0, 3), ()))
    return MockScript(tuple(turns))


def generate(scenario: str, seed: int = 0, **kwargs) -> MockScript:
    """Dispatch by scenario name (see :data:`SCENARIOS`)."""
    if scenario == "clean":
        return clean_script(seed=seed, **kwargs)
    if scenario == "split":
        return split_speaker_script(seed=seed, **kwargs)
    if scenario == "drift":
        return drift_script(seed=seed, **kwargs)
    if scenario == "messy":
        return messy_script(seed=seed)
    raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
