import math

import pytest

import aya23


def test_published_parameter_counts():
    assert aya23.count_parameters("aya-23-8b-shape") == {
        "name": "aya-23-8b-shape",
        "embedding": 1_048_576_000,
        "non_embedding": 6_979_457_024,
        "total": 8_028_033_024,
    }
    big = aya23.count_parameters("aya-23-35b-shape")
    assert (big["embedding"], big["non_embedding"]) == (2_097_152_000, 32_883_679_232)
    assert set(aya23.preset_names()) >= {"aya-23-8b-shape", "aya-23-35b-shape", "toy-small"}


def test_gqa_cache_is_a_quarter_of_mha_for_8b():
    assert aya23.kv_cache_bytes("aya-23-8b-shape", 8192) * 4 == aya23.kv_cache_bytes("aya-23-8b-shape", 8192, mha=True)


def test_cosine_schedule_endpoints():
    assert aya23.cosine_lr(0) == 6e-4
    assert aya23.cosine_lr(13200) == 6e-5
    assert math.isclose(aya23.cosine_lr(6600), 3.3e-4, abs_tol=1e-12)


def test_chat_template_and_round_trip(tmp_path):
    tok = aya23.Tokenizer.train(["Hello, how are you? I am doing good!"], 300)
    r = tok.render_chat([("user", "Hello, how are you?")], "I am doing good!")
    assert r["text"] == (
        "<BOS_TOKEN><|START_OF_TURN_TOKEN|><|USER_TOKEN|>Hello, how are you?<|END_OF_TURN_TOKEN|>"
        "<|START_OF_TURN_TOKEN|><|CHATBOT_TOKEN|>I am doing good!<|END_OF_TURN_TOKEN|>"
    )
    assert len(r["ids"]) == len(r["loss_mask"])
    assert r["loss_mask"][-1] == 1 and r["loss_mask"][0] == 0

    text = "Merhaba dünya, 你好 123"
    assert tok.decode(tok.encode(text)) == text
    tok.save(tmp_path / "tok")
    again = aya23.Tokenizer.load(tmp_path / "tok")
    assert again.encode(text) == tok.encode(text)
    assert again.vocab_size == tok.vocab_size


def test_metrics():
    assert aya23.bleu("the cat sat", "the cat sat") == pytest.approx(100.0)
    assert aya23.bleu("", "the cat") == 0.0
    assert aya23.rouge_l("a b c", "a c") == pytest.approx(0.8)
    assert aya23.strict_match("so 3 apples, then 1,234.5") == 1234.5
    assert aya23.strict_match("no number") is None
    assert aya23.expected_max_toxicity([[0.4, 0.1], [0.6, 0.2]], 2) == pytest.approx(0.5)
    assert aya23.toxicity_probability([[0.4, 0.1], [0.6, 0.2]], 2) == 0.5
    assert aya23.win_rate(["a", "a", "b", "tie"]) == {"win_a": 50.0, "win_b": 25.0, "tie": 25.0}


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(aya23.InputError):
        aya23.count_parameters("no-such-preset")
    with pytest.raises(ValueError):
        aya23.Tokenizer.load(tmp_path / "missing")
    with pytest.raises(aya23.InputError):
        aya23.expected_max_toxicity([[0.1, 2.0]], 2)
