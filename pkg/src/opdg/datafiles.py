"""Access to the bundled example games and their reference values."""

from __future__ import annotations

import json
from importlib import resources

from .game import LqGame, game_from_dict

BUILTIN_GAMES = ("example1", "example2")


def _read(name):
    with resources.files("opdg.data").joinpath(f"{name}.json").open() as fh:
        return json.load(fh)


def builtin_game(name: str) -> LqGame:
    """One of the two bundled two-player games by name."""
    if name not in BUILTIN_GAMES:
        raise KeyError(f"unknown builtin game {name!r}; "
                       f"choose from {BUILTIN_GAMES}")
    return game_from_dict(_read(name))


def builtin_game_dict(name: str) -> dict:
    if name not in BUILTIN_GAMES:
        raise KeyError(f"unknown builtin game {name!r}")
    return _read(name)


def reference_values(name: str) -> dict:
    """Published reference numbers used by the reproduction reports."""
    return _read("reference")[name]
