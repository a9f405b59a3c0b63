"""Service configuration: listen address, tokens/roles, thresholds, pipeline."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from medrt.errors import ValidationError
from medrt.pipeline.policy import BatcherConfig
from medrt.pipeline.service import Thresholds
from medrt.pipeline.sim import PipelineConfig

ROLES = ("viewer", "operator", "admin")
ROLE_RANK = {r: i for i, r in enumerate(ROLES)}


@dataclass
class ServerConfig:
    storage_dir: str
    tokens: dict[str, str]                  # bearer token -> role
    host: str = "127.0.0.1"
    port: int = 8077
    thresholds: Thresholds = field(default_factory=Thresholds)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    model_path: str | None = None
    unet_path: str | None = None
    deident_salt: str = ""
    metrics_interval_s: float = 1.0
    audit_fsync: bool = True

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ValidationError(f"port {self.port} out of range")
        for token, role in self.tokens.items():
            if role not in ROLES:
                raise ValidationError(f"unknown role {role!r} for token")
            if not token:
                raise ValidationError("empty token")
        if "admin" not in self.tokens.values():
            raise ValidationError("at least one admin token required")
        if self.metrics_interval_s <= 0:
            raise ValidationError("metrics interval must be positive")

    @classmethod
    def from_json(cls, d: dict) -> "ServerConfig":
        th = Thresholds(**d.get("thresholds", {}))
        pl = d.get("pipeline", {})
        batcher = BatcherConfig(**pl.get("batcher", {}))
        pipeline = PipelineConfig(
            workers=pl.get("workers", {"ingest": 1, "preprocess": 1,
                                       "inference": 1, "postprocess": 1}),
            queue_capacity=pl.get("queue_capacity", 64),
            batcher=batcher,
            aging_threshold_ms=pl.get("aging_threshold_ms", 500.0),
            tau_exit=pl.get("tau_exit"),
            overload=pl.get("overload", "shed"))
        return cls(storage_dir=d["storage_dir"], tokens=d["tokens"],
                   host=d.get("host", "127.0.0.1"), port=d.get("port", 8077),
                   thresholds=th, pipeline=pipeline,
                   model_path=d.get("model_path"), unet_path=d.get("unet_path"),
                   deident_salt=d.get("deident_salt", ""),
                   metrics_interval_s=d.get("metrics_interval_s", 1.0),
                   audit_fsync=d.get("audit_fsync", True))

    @classmethod
    def from_file(cls, path: str) -> "ServerConfig":
        with open(path) as f:
            return cls.from_json(json.load(f))


def role_of(config: ServerConfig, token: str | None) -> str | None:
    if not token:
        return None
    return config.tokens.get(token)


def allows(role: str | None, minimum: str) -> bool:
    return role is not None and ROLE_RANK[role] >= ROLE_RANK[minimum]
