# SPDX-License-Identifier: Apache-2.0
"""Per-step metric recording."""

import numpy as np
import pytest

from rgpssm.bench.instances import random_model
from rgpssm.filter.belief import init_belief
from rgpssm.filter.recursion import FilterSession
from rgpssm.utils.configuration import FilterConfig
from rgpssm.utils.configuration import TelemetryConfig


class _Recorder:
    def __init__(self):
        self.reports = []

    def record(self, report):
        self.reports.append(report)


def test_session_feeds_every_step_to_the_metrics(hyper, rng):
    recorder = _Recorder()
    session = FilterSession(init_belief(np.zeros(2), np.eye(2), hyper), random_model(rng, 2, 1), FilterConfig(), recorder)
    for _ in range(3):
        session.step(rng.standard_normal(2), rng.standard_normal(2))
    assert recorder.reports == session.history


def test_filter_metrics_accept_step_reports(hyper, rng):
    pytest.importorskip("opentelemetry")
    from rgpssm.observability.otel_metrics import FilterMetrics

    metrics = FilterMetrics("rgpssm-test", "random")
    session = FilterSession(init_belief(np.zeros(2), np.eye(2), hyper), random_model(rng, 2, 1), FilterConfig(), metrics)
    session.step(rng.standard_normal(2), rng.standard_normal(2))
    assert metrics.attributes == {"task": "random"}


def test_filter_metrics_reach_the_sdk_reader(hyper, rng):
    pytest.importorskip("opentelemetry.sdk")
    from opentelemetry.sdk.metrics.export import InMemoryMetricReader

    from rgpssm.observability.otel_metrics import FilterMetrics
    from rgpssm.observability.otel_metrics import create_meter_provider

    reader = InMemoryMetricReader()
    provider = create_meter_provider(TelemetryConfig(enabled=True, service_name="rgpssm-test"), readers=[reader])
    metrics = FilterMetrics("rgpssm-test", "random", provider)
    session = FilterSession(init_belief(np.zeros(2), np.eye(2), hyper), random_model(rng, 2, 1), FilterConfig(), metrics)
    for _ in range(3):
        session.step(rng.standard_normal(2), rng.standard_normal(2))
    data = reader.get_metrics_data()
    resource = data.resource_metrics[0]
    assert resource.resource.attributes["service.name"] == "rgpssm-test"
    points = {m.name: m.data.data_points for scope in resource.scope_metrics for m in scope.metrics}
    assert points["filter_steps_total"][0].value == 3
    assert dict(points["filter_steps_total"][0].attributes) == {"task": "random"}
    assert points["inducing_points"][0].value == session.belief.n_u
    assert points["filter_step_latency"][0].count == 3
    provider.shutdown()
