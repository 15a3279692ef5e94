# SPDX-License-Identifier: Apache-2.0
"""Opentelemetry metrics for filter runs
  1. create_meter_provider(): SDK meter provider exporting over OTLP gRPC or to the console.
  2. instrument(): Install the provider globally once per process.
  3. FilterMetrics: Per-step counters, gauge and latency histogram.
"""

import logging
import sys
from typing import Optional
from typing import Sequence

from opentelemetry import metrics
from opentelemetry.sdk.metrics import MeterProvider
from opentelemetry.sdk.metrics.export import ConsoleMetricExporter
from opentelemetry.sdk.metrics.export import MetricReader
from opentelemetry.sdk.metrics.export import PeriodicExportingMetricReader
from opentelemetry.sdk.resources import SERVICE_NAME
from opentelemetry.sdk.resources import Resource

from rgpssm.utils.configuration import TelemetryConfig

logger = logging.getLogger(__name__)

_installed: Optional[MeterProvider] = None


def create_meter_provider(settings: TelemetryConfig, readers: Optional[Sequence[MetricReader]] = None) -> MeterProvider:
    """Meter provider for `settings.service_name`; without `readers` a periodic exporter is attached."""
    resource = Resource(attributes={SERVICE_NAME: settings.service_name})
    if readers is None:
        if settings.otlp_grpc_endpoint != "":
            from opentelemetry.exporter.otlp.proto.grpc.metric_exporter import OTLPMetricExporter

            logger.debug("configuring otlp grpc exporter %s", settings.otlp_grpc_endpoint)
            exporter = OTLPMetricExporter(endpoint=settings.otlp_grpc_endpoint, insecure=True)
        else:
            logger.debug("configuring console exporter for %s", settings.service_name)
            # stdout carries the CLI's JSON output
            exporter = ConsoleMetricExporter(out=sys.stderr)
        readers = [PeriodicExportingMetricReader(exporter, export_interval_millis=settings.export_interval_ms)]
    return MeterProvider(resource=resource, metric_readers=list(readers))


def instrument(settings: TelemetryConfig) -> MeterProvider:
    """Install the global meter provider on first use and return the installed one."""
    global _installed
    if _installed is None:
        _installed = create_meter_provider(settings)
        metrics.set_meter_provider(_installed)
        logger.info("OpenTelemetry meter provider installed for %s", settings.service_name)
    return _installed


class FilterMetrics:
    """Encapsulates OpenTelemetry metrics for per-step filter tracking."""

    def __init__(self, service_name: str = "rgpssm", task: str = "", meter_provider: Optional[MeterProvider] = None):
        self.service_name = service_name
        self.attributes = {"task": task} if task else {}
        self.meter = metrics.get_meter(service_name, meter_provider=meter_provider)
        self._setup_metrics()

    def _setup_metrics(self):
        """Initializes the OpenTelemetry metrics."""
        self.step_counter = self.meter.create_counter(
            "filter_steps_total", description="Filter steps executed"
        )
        self.added_counter = self.meter.create_counter(
            "inducing_points_added_total", description="Inducing points added by the novelty gate"
        )
        self.discarded_counter = self.meter.create_counter(
            "inducing_points_discarded_total", description="Inducing points discarded by the budget"
        )
        self.inducing_gauge = self.meter.create_gauge(
            "inducing_points", description="Inducing points held after the step"
        )
        self.latency_histogram = self.meter.create_histogram(
            "filter_step_latency", unit="ms", description="Wall-clock time per filter step"
        )
        logger.info("OpenTelemetry filter metrics initialized for %s", self.service_name)

    def record(self, report):
        """Updates every metric from one StepReport."""
        self.step_counter.add(1, self.attributes)
        if report.added is not None:
            self.added_counter.add(1, self.attributes)
        if report.discarded:
            self.discarded_counter.add(len(report.discarded), self.attributes)
        self.inducing_gauge.set(report.n_u, self.attributes)
        if report.elapsed_ms is not None:
            self.latency_histogram.record(report.elapsed_ms, self.attributes)
        logger.debug("Step %d metrics recorded (n_u=%d)", report.step, report.n_u)


def filter_metrics(settings: TelemetryConfig, task: str = "") -> FilterMetrics:
    """FilterMetrics recording through the globally installed SDK provider."""
    return FilterMetrics(settings.service_name, task, instrument(settings))
