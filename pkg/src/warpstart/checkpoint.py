"""Self-describing checkpoint files.

Checkpoints are plain ``.npz`` archives: one named float array per parameter
tensor (keys are ``<module>.<parameter>``) plus a ``__meta__`` JSON string
carrying the training step and any caller-supplied metadata. Everything is
inspectable with nothing but numpy.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

META_KEY = "__meta__"


def save_checkpoint(path, modules: dict, meta: dict | None = None) -> None:
    """Write all parameters of the named torch modules into one npz file."""
    arrays = {}
    for prefix, module in modules.items():
        for name, tensor in module.state_dict().items():
            arrays[f"{prefix}.{name}"] = tensor.detach().cpu().numpy()
    meta = dict(meta or {})
    meta["tensors"] = {k: list(v.shape) for k, v in arrays.items()}
    arrays[META_KEY] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path, modules: dict) -> dict:
    """Restore parameters into the named modules; returns the metadata dict."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    data = np.load(path)
    meta = json.loads(bytes(data[META_KEY]).decode()) if META_KEY in data else {}
    for prefix, module in modules.items():
        state = {}
        for name, tensor in module.state_dict().items():
            key = f"{prefix}.{name}"
            if key not in data:
                raise KeyError(f"checkpoint missing tensor '{key}'")
            state[name] = torch.as_tensor(data[key]).to(tensor.dtype)
        module.load_state_dict(state)
    return meta
