"""Versioned npz checkpoints for both agent kinds; round-trips are bit-exact."""

from __future__ import annotations

import json

import numpy as np

from .errors import ConfigError
from .sacbcn import SacBcnAgent, SacBcnConfig
from .td3bcn import Td3BcnAgent, Td3BcnConfig

CHECKPOINT_VERSION = 1

_KINDS = {Td3BcnAgent.kind: (Td3BcnAgent, Td3BcnConfig),
          SacBcnAgent.kind: (SacBcnAgent, SacBcnConfig)}


def save_agent(agent, path: str):
    header = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "kind": agent.kind,
        "state_dim": agent.state_dim,
        "action_dim": agent.action_dim,
        "config": agent.config_dict(),
    }
    np.savez(path, __header__=np.frombuffer(
        json.dumps(header).encode("utf-8"), dtype=np.uint8), **agent.to_arrays())


def load_agent(path: str):
    with np.load(path) as blob:
        header = json.loads(bytes(blob["__header__"]).decode("utf-8"))
        if header.get("checkpoint_version") != CHECKPOINT_VERSION:
            raise ConfigError(
                f"unsupported checkpoint version {header.get('checkpoint_version')}")
        kind = header["kind"]
        if kind not in _KINDS:
            raise ConfigError(f"unknown agent kind {kind!r}")
        agent_cls, config_cls = _KINDS[kind]
        config = config_cls(**header["config"])
        arrays = {k: blob[k] for k in blob.files if k != "__header__"}
    return agent_cls.from_arrays(header["state_dim"], header["action_dim"],
                                 config, arrays)
