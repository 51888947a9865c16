"""Tests der Kanal-Schicht: Simulator, HTTP-Backend, Konfidenz."""

import math

import pytest
import requests
from pydantic import ValidationError

from reliability_engine.channel.channel import Channel, get_channel, intrinsic_confidence
from reliability_engine.channel.channel_models import AgentOutput, ChannelBackend, ChannelConfig
from reliability_engine.channel.http_backend import HttpBackend, strip_thinking
from reliability_engine.channel.synthetic_backend import (
    SyntheticBackend,
    draw_scope,
    read_quality_marker,
)
from reliability_engine.exceptions import (
    CapabilityError,
    ChannelTransportError,
    ConfigValidationError,
)
from reliability_engine.theory.theory_models import QualityMap


class FakeResponse:
    def __init__(self, status_code, payload=None, text="", valid_json=True):
        self.status_code = status_code
        self._payload = payload or {}
        self.text = text
        self.valid_json = valid_json

    def json(self):
        if not self.valid_json:
            raise ValueError("Expecting value: line 1 column 1 (char 0)")
        return self._payload


class FakeSession:
    """Liefert vorbereitete Antworten der Reihe nach und merkt sich die Payloads."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.payloads = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.payloads.append(json)
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def _completion(content, logprobs=None, usage=None):
    choice = {"message": {"content": content}}
    if logprobs is not None:
        choice["logprobs"] = {"content": [{"token": "x", "logprob": lp} for lp in logprobs]}
    return {"choices": [choice], "usage": usage or {"prompt_tokens": 10, "completion_tokens": 5}}


def _http_config(**kwargs):
    defaults = dict(
        name="remote",
        endpoint_url="http://localhost:8000/v1/",
        model_id="qwen-14b",
        price_per_input_token=1e-6,
        price_per_output_token=2e-6,
        supports_logprobs=True,
    )
    defaults.update(kwargs)
    return ChannelConfig(**defaults)


def test_zero_noise_channel_is_deterministic(synthetic_channel):
    channel = synthetic_channel("gen", quality_noise_sd=0.0, base_quality=0.7)
    output = channel.generate("Explain TCP slow start")
    assert read_quality_marker(output.text) == pytest.approx(0.7)


def test_same_scope_and_index_gives_identical_output(synthetic_channel):
    spec = dict(seed=3, quality_noise_sd=0.2)
    first = synthetic_channel("gen", **spec)
    second = synthetic_channel("gen", **spec)
    with draw_scope("task-1/r0"):
        a = first.generate("Prove that sqrt(2) is irrational")
    with draw_scope("task-1/r0"):
        b = second.generate("Prove that sqrt(2) is irrational")
    assert a == b


def test_repeated_calls_draw_fresh_samples(synthetic_channel):
    channel = synthetic_channel("gen", quality_noise_sd=0.2)
    texts = {channel.generate("Name three prime numbers").text for _ in range(5)}
    assert len(texts) > 1


def test_refinement_prompt_applies_update_map(synthetic_channel):
    channel = synthetic_channel(
        "gen", quality_noise_sd=0.0, refinement_map=QualityMap.power(0.5)
    )
    output = channel.generate("Improve this draft:\nQ=0.6400")
    assert read_quality_marker(output.text) == pytest.approx(0.8)


def test_correlated_branches_share_common_factor():
    def backend(name, rho, seed):
        return SyntheticBackend(
            ChannelConfig(
                name=name,
                backend=ChannelBackend.SYNTHETIC,
                model_id=name,
                synthetic={"branch_correlation": rho, "seed": seed},
            )
        )

    a, b = backend("a", 1.0, 11), backend("b", 1.0, 29)
    noise_a = [a.latent_noise(f"p{i}", 0) for i in range(20)]
    noise_b = [b.latent_noise(f"p{i}", 0) for i in range(20)]
    assert noise_a == pytest.approx(noise_b)


def test_logprobs_require_capability(synthetic_channel):
    channel = synthetic_channel("gen")
    with pytest.raises(CapabilityError):
        channel.generate("What is 2+2?", want_logprobs=True)


def test_synthetic_logprobs_encode_quality(synthetic_channel):
    channel = synthetic_channel("gen", supports_logprobs=True, quality_noise_sd=0.0, base_quality=0.5)
    output = channel.generate("What is 2+2?", want_logprobs=True)
    assert intrinsic_confidence(output) == pytest.approx(0.5)


def test_empty_prompt_and_negative_temperature_rejected(synthetic_channel):
    channel = synthetic_channel("gen")
    with pytest.raises(ConfigValidationError):
        channel.generate("   ")
    with pytest.raises(ConfigValidationError):
        channel.generate("hello", temperature=-0.1)


def test_mean_logprob_is_derived():
    output = AgentOutput(
        text="ok", model_id="m", temperature=0.0, completion_tokens=3, token_logprobs=[-0.1, -0.2, -0.3]
    )
    assert output.mean_logprob == pytest.approx(-0.2)
    with pytest.raises(ValidationError):
        AgentOutput(text="ok", model_id="m", temperature=0.0, completion_tokens=1, token_logprobs=[0.3])


@pytest.mark.parametrize(
    "logprobs, expected",
    [([0.0, 0.0], 1.0), ([-0.1, -0.2, -0.3], math.exp(-0.2)), ([-1.0], math.exp(-1.0))],
)
def test_intrinsic_confidence(logprobs, expected):
    output = AgentOutput(
        text="x", model_id="m", temperature=0.0, completion_tokens=1, token_logprobs=logprobs
    )
    assert intrinsic_confidence(output) == pytest.approx(expected)


def test_intrinsic_confidence_without_logprobs():
    with pytest.raises(CapabilityError):
        intrinsic_confidence(AgentOutput(text="x", model_id="m", temperature=0.0, completion_tokens=1))


def test_http_config_requires_endpoint():
    with pytest.raises(ValidationError):
        ChannelConfig(model_id="m")
    assert _http_config().endpoint_url == "http://localhost:8000/v1"


def test_get_channel_is_shared_per_config(synthetic_channel):
    config = ChannelConfig(name="shared", backend=ChannelBackend.SYNTHETIC, model_id="shared")
    assert get_channel(config) is get_channel(config.copy())
    channel = synthetic_channel("x")
    assert get_channel(channel) is channel


def test_strip_thinking():
    markers = [("<think>", "</think>")]
    assert strip_thinking("<think>hmm\nlong</think>\nAnswer: 4", markers) == "Answer: 4"
    assert strip_thinking("Answer: 4 <think>unfinished", markers) == "Answer: 4"


def test_http_backend_parses_completion():
    session = FakeSession([FakeResponse(200, _completion("<think>x</think>Paris", [-0.1, -0.3]))])
    backend = HttpBackend(_http_config(max_tokens=256), session=session, sleep=lambda s: None)
    output = Channel(_http_config(), backend=backend).generate(
        "Capital of France?", temperature=0.2, want_logprobs=True
    )
    assert output.text == "Paris"
    assert output.token_logprobs == [-0.1, -0.3]
    assert output.cost_usd == pytest.approx(10 * 1e-6 + 5 * 2e-6)
    payload = session.payloads[0]
    assert payload["model"] == "qwen-14b"
    assert payload["logprobs"] is True
    assert payload["max_tokens"] == 256


def test_http_backend_omits_max_tokens_by_default():
    session = FakeSession([FakeResponse(200, _completion("ok"))])
    HttpBackend(_http_config(), session=session).generate("hi", 0.0, False)
    assert "max_tokens" not in session.payloads[0]


def test_http_backend_retries_transient_errors():
    delays = []
    session = FakeSession(
        [
            FakeResponse(429, text="slow down"),
            requests.ConnectionError("reset"),
            FakeResponse(503, text="busy"),
            FakeResponse(200, _completion("done")),
        ]
    )
    backend = HttpBackend(_http_config(), session=session, sleep=delays.append)
    assert backend.generate("hi", 0.0, False).text == "done"
    assert delays == [1.0, 2.0, 4.0]


def test_http_backend_gives_up_after_four_attempts():
    session = FakeSession([FakeResponse(503, text="busy")] * 4)
    backend = HttpBackend(_http_config(), session=session, sleep=lambda s: None)
    with pytest.raises(ChannelTransportError) as excinfo:
        backend.generate("hi", 0.0, False)
    assert excinfo.value.attempts == 4
    assert excinfo.value.status_code == 503
    assert len(session.payloads) == 4


def test_http_backend_does_not_retry_client_errors():
    session = FakeSession([FakeResponse(400, text="bad request")])
    backend = HttpBackend(_http_config(), session=session, sleep=lambda s: None)
    with pytest.raises(ChannelTransportError) as excinfo:
        backend.generate("hi", 0.0, False)
    assert excinfo.value.status_code == 400
    assert excinfo.value.attempts == 1


def test_http_backend_rejects_malformed_body():
    session = FakeSession([FakeResponse(200, {"choices": []})])
    with pytest.raises(ChannelTransportError):
        HttpBackend(_http_config(), session=session).generate("hi", 0.0, False)


def test_http_backend_retries_non_json_success_body():
    gateway = FakeResponse(200, text="<html>gateway</html>", valid_json=False)
    session = FakeSession([gateway, FakeResponse(200, _completion("done"))])
    delays = []
    backend = HttpBackend(_http_config(), session=session, sleep=delays.append)
    assert backend.generate("hi", 0.0, False).text == "done"
    assert delays == [1.0]


def test_http_backend_raises_transport_error_on_persistent_non_json_body():
    gateway = FakeResponse(200, text="<html>gateway</html>", valid_json=False)
    session = FakeSession([gateway] * 4)
    backend = HttpBackend(_http_config(), session=session, sleep=lambda s: None)
    with pytest.raises(ChannelTransportError) as excinfo:
        backend.generate("hi", 0.0, False)
    assert excinfo.value.attempts == 4
    assert excinfo.value.status_code == 200
    assert "gateway" in str(excinfo.value)
