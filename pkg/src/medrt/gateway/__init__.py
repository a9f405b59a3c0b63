from medrt.gateway.config import ROLES, ServerConfig, allows, role_of
from medrt.gateway.storage import BlobStore, StudyIndex
from medrt.gateway.audit import AuditLog
from medrt.gateway.bench import (BenchReport, BenchRow, bench_run, measure_latency,
                                 prepare_variants)
from medrt.gateway.app import Gateway, create_app

__all__ = [
    "ServerConfig", "ROLES", "role_of", "allows", "BlobStore", "StudyIndex",
    "AuditLog", "BenchReport", "BenchRow", "bench_run", "measure_latency",
    "prepare_variants", "Gateway", "create_app",
]
