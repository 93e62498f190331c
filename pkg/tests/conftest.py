"""Shared fixtures: hand-built cohorts, a synthetic PH cohort and a stub
chat-completions endpoint."""

import json
import re
from dataclasses import dataclass
from typing import Dict, Optional

import httpx
import numpy as np
import pytest

from survrank.services.cohort import Cohort, CohortRecord, split_cohort
from survrank.services.synth import SynthConfig, generate_ph_cohort


def make_cohort(rows, column: str = "x") -> Cohort:
    """rows of (id, time, event, features) where features is a dict or a single value."""
    records = []
    for rid, t, e, feats in rows:
        if not isinstance(feats, dict):
            feats = {column: feats}
        records.append(CohortRecord(id=rid, features=feats, event=int(e), time=float(t)))
    schema = tuple(records[0].features) if records else (column,)
    return Cohort(records=tuple(records), schema=schema)


def coded_cohort(n: int = 12) -> Cohort:
    """Records p00..p{n-1} whose 'code' feature is their index."""
    return make_cohort([(f"p{i:02d}", i + 1, 1, {"code": float(i)}) for i in range(n)])


@dataclass
class PHData:
    cohort: Cohort
    truth: Dict[str, float]
    train: Cohort
    test: Cohort
    beta: tuple


@pytest.fixture(scope="session")
def ph_data() -> PHData:
    """n=2000, beta=(1, -0.5), about 40% events, 80/20 split."""
    config = SynthConfig(n=2000, beta=(1.0, -0.5), baseline_rate=0.1, censor_rate=0.15, seed=11)
    cohort, truth = generate_ph_cohort(config)
    train, test = split_cohort(cohort, test_fraction=0.2, seed=0)
    return PHData(cohort=cohort, truth=truth, train=train, test=test, beta=config.beta)


CODE = re.compile(r"code is (\d+)")
LINE = re.compile(r"^([ab])\. (.*)$", re.MULTILINE)


class StubEndpoint:
    """Answers the label whose record has the smaller 'code'.

    ``statuses`` are returned (and consumed) before normal answers;
    ``answer`` overrides the reply text.
    """

    def __init__(self, statuses=(), answer: Optional[str] = None, logprob: float = -0.01, fail: bool = False):
        self.statuses = list(statuses)
        self.answer = answer
        self.logprob = logprob
        self.fail = fail
        self.calls = 0

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.calls += 1
        if self.fail:
            raise httpx.ConnectError("connection refused", request=request)
        if self.statuses:
            status = self.statuses.pop(0)
            if status != 200:
                return httpx.Response(status, text="upstream busy")

        body = json.loads(request.content)
        prompt = body["messages"][0]["content"]
        if self.answer is not None:
            content = self.answer
        else:
            codes = {label: int(CODE.search(text).group(1)) for label, text in LINE.findall(prompt)}
            content = min(codes, key=codes.get)
        return httpx.Response(
            200,
            json={
                "choices": [
                    {
                        "message": {"role": "assistant", "content": content},
                        "logprobs": {"content": [{"token": content, "logprob": self.logprob}]},
                    }
                ]
            },
        )

    @property
    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self)


@pytest.fixture
def stub_endpoint() -> StubEndpoint:
    return StubEndpoint()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
