from .base import ContractViolation, EnvSpec, EnvState, FieldCodec, StepResult, TeleportEnv
from .pass_grid import PassGrid
from .tabular_climb import TabularClimb

_REGISTRY = {
    "pass_grid": PassGrid,
    "tabular_climb": TabularClimb,
}


def make_env(name: str, **params) -> TeleportEnv:
    try:
        cls = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown environment '{name}' (choices: {sorted(_REGISTRY)})") from None
    return cls(**params)


__all__ = [
    "ContractViolation",
    "EnvSpec",
    "EnvState",
    "FieldCodec",
    "StepResult",
    "TeleportEnv",
    "PassGrid",
    "TabularClimb",
    "make_env",
]
