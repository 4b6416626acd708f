"""Tests for next-token scorers and the n-gram language model."""

import json
import math
import random

import numpy as np
import pytest

from dataflow_responder.errors import ConfigError, DatasetError, ModelFormatError, OutOfVocabulary
from dataflow_responder.lm.ngram import (
    NgramModel,
    NgramScorer,
    perplexity,
    prompt_features,
    train_ngram,
    train_on_texts,
)
from dataflow_responder.lm.scorers import ScriptedScorer, UniformScorer, apply_mask
from dataflow_responder.lm.tokenizer import Tokenizer

ABC = Tokenizer.word_level(["a", "b", "c"])
CORPUS = [[0, 1], [0, 2]]


def test_uniform_scorer():
    """Every token and EOS get the same mass."""
    logprobs = UniformScorer(4).next_logprobs([0, 3])
    assert logprobs.shape == (5,)
    np.testing.assert_allclose(logprobs, np.full(5, -math.log(5)))


def test_apply_mask_renormalizes():
    """Masked entries become -inf; the rest sum to one unless told otherwise."""
    logprobs = np.log(np.array([0.1, 0.2, 0.3, 0.4]))
    masked = apply_mask(logprobs, {3, 1})
    assert np.isneginf(masked[[0, 2]]).all()
    np.testing.assert_allclose(np.exp(masked[[1, 3]]), [1 / 3, 2 / 3])
    raw = apply_mask(logprobs, [1], renormalize=False)
    assert raw[1] == pytest.approx(math.log(0.2))
    assert np.isneginf(apply_mask(logprobs, [])).all()


def test_scripted_scorer_follows_script():
    """The longest script prefix ending the context picks the next token."""
    scorer = ScriptedScorer(5, [2, 3, 4])
    assert scorer.preferred(()) == 2
    assert scorer.preferred((2,)) == 3
    assert scorer.preferred((0, 2, 3)) == 4
    assert scorer.preferred((2, 3, 4)) == scorer.eos_id
    assert scorer.preferred((1,)) == 2
    logprobs = scorer.next_logprobs([2])
    assert logprobs[3] == pytest.approx(math.log(0.9))
    assert np.exp(logprobs).sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ScriptedScorer(5, [1], peak=1.0)


def test_context_outside_vocabulary():
    """Context ids must name vocabulary tokens."""
    scorer = UniformScorer(3)
    with pytest.raises(OutOfVocabulary):
        scorer.next_logprobs([3])
    with pytest.raises(OutOfVocabulary):
        scorer.next_logprobs([-1])


def test_ngram_matches_counts():
    """Bigram conditionals follow the add-k formula over counted histories."""
    model = train_ngram(CORPUS, order=2, k=1.0, tokenizer=ABC)
    # four outcomes: three tokens plus EOS
    assert model.probabilities([])[0] == pytest.approx((2 + 1) / (2 + 4))
    assert model.probabilities([0])[1] == pytest.approx((1 + 1) / (2 + 4))
    assert model.probabilities([0, 1])[ABC.eos_id] == pytest.approx((1 + 1) / (1 + 4))
    assert model.probabilities([2, 2])[0] == pytest.approx((0 + 1) / (1 + 4))
    assert model.history([]) == (-1,)


def test_unigram_model():
    """Order one ignores the context."""
    model = train_ngram(CORPUS, order=1, k=1.0, tokenizer=ABC)
    np.testing.assert_allclose(model.probabilities([1, 2]), [0.3, 0.2, 0.2, 0.3])
    np.testing.assert_allclose(model.probabilities([]), model.probabilities([0]))


def test_perplexity():
    """Perplexity is the exponentiated mean negative log-probability."""
    model = train_ngram(CORPUS, order=1, k=1.0, tokenizer=ABC)
    expected = math.exp(-(4 * math.log(0.3) + 2 * math.log(0.2)) / 6)
    assert perplexity(model, CORPUS) == pytest.approx(expected)
    assert perplexity(model, []) == math.inf


@pytest.mark.parametrize(
    ("kwargs", "error"),
    [
        ({"corpus": CORPUS, "order": 0, "k": 1.0}, ConfigError),
        ({"corpus": CORPUS, "order": 2, "k": 0.0}, ConfigError),
        ({"corpus": [], "order": 2, "k": 1.0}, DatasetError),
        ({"corpus": [[5]], "order": 2, "k": 1.0}, DatasetError),
        ({"corpus": CORPUS, "order": 2, "k": 1.0, "prompts": ["only one"]}, DatasetError),
    ],
)
def test_training_errors(kwargs, error):
    """Bad hyperparameters and corpora are rejected."""
    with pytest.raises(error):
        train_ngram(tokenizer=ABC, **kwargs)


def test_ngram_scorer_is_normalized():
    """Scorer vectors are log-distributions over tokens and EOS."""
    model = train_on_texts(["Yes , I found one event .", "No , your calendar is clear ."], 3, 0.1)
    scorer = NgramScorer(model)
    logprobs = scorer.next_logprobs(model.tokenizer.encode("Yes ,"))
    assert logprobs.shape == (model.tokenizer.size + 1,)
    assert np.exp(logprobs).sum() == pytest.approx(1.0)
    assert scorer.prompted("anything") is scorer


def _weather_model() -> NgramModel:
    responses = ["take umbrella"] * 5 + ["wear sunglasses"] * 5
    prompts = ["rain today"] * 5 + ["sun today"] * 5
    return train_on_texts(responses, 1, 0.1, prompts)


def test_prompt_triggers_shift_mass():
    """Prompt features raise the tokens they co-occurred with."""
    model = _weather_model()
    scorer = NgramScorer(model)
    umbrella = model.tokenizer.word_id("umbrella")
    base = scorer.next_logprobs([])
    rainy = scorer.prompted("rain").next_logprobs([])
    sunny = scorer.prompted("sun").next_logprobs([])
    assert rainy[umbrella] > base[umbrella] > sunny[umbrella]
    assert np.exp(rainy).sum() == pytest.approx(1.0)
    flat = NgramScorer(model, trigger_weight=0)
    assert flat.prompted("rain") is flat
    np.testing.assert_allclose(scorer.prompted("unseen words").next_logprobs([]), base)


def test_redundant_triggers_do_not_stack():
    """Features carrying the same evidence boost a token no more than one of them."""
    responses = ["take umbrella"] * 5 + ["wear sunglasses"] * 5
    prompts = ["rain drizzle today"] * 5 + ["sun today"] * 5
    triggers = train_on_texts(responses, 1, 0.1, prompts).triggers
    assert triggers is not None
    one = triggers.boost("rain", 1.0, 3.0)
    assert one.max() > 0 and one.min() < 0
    np.testing.assert_allclose(triggers.boost("rain drizzle", 1.0, 3.0), one)
    np.testing.assert_allclose(triggers.boost("rain drizzle today", 1.0, 3.0), one, atol=1e-12)
    np.testing.assert_array_equal(triggers.boost("hail", 1.0, 3.0), np.zeros_like(one))


def test_prompt_features():
    """Features are distinct words and digit runs."""
    assert prompt_features('(size (Date "2022-03-15")) ### 3 size') == [
        "size",
        "Date",
        "2022",
        "03",
        "15",
        "3",
    ]


def test_save_load_round_trip(tmp_path):
    """A reloaded model scores every context identically."""
    model = _weather_model()
    path = tmp_path / "weather.json"
    model.save(path)
    again = NgramModel.load(path)
    assert again.order == model.order
    assert again.tokenizer.digest == model.tokenizer.digest
    rng = random.Random(0)
    before, after = NgramScorer(model), NgramScorer(again)
    for prompt in ("", "rain", "sun today"):
        for _ in range(10):
            context = [rng.randrange(model.tokenizer.size) for _ in range(rng.randrange(4))]
            np.testing.assert_array_equal(
                before.prompted(prompt).next_logprobs(context),
                after.prompted(prompt).next_logprobs(context),
            )


def test_load_rejects_foreign_files(tmp_path):
    """Unreadable, malformed and foreign files are format errors."""
    with pytest.raises(ModelFormatError):
        NgramModel.load(tmp_path / "missing.json")
    garbage = tmp_path / "garbage.json"
    garbage.write_text("{not json", encoding="utf-8")
    with pytest.raises(ModelFormatError):
        NgramModel.load(garbage)
    path = tmp_path / "model.json"
    train_ngram(CORPUS, 2, 1.0, ABC).save(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    data["format"] = "something-else"
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ModelFormatError, match="unsupported"):
        NgramModel.load(path)
