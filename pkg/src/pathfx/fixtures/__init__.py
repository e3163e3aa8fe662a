"""Bundled model files used by the tests, scripts and README examples.

F1  A -> M -> Y, A -> Y                      (natural indirect effect setting)
F2  Z -> T -> Y, Z -> Y                      (confounded treatment)
F3  X -> A -> M -> Y, A -> Y                 (recanting witness A)
F4  W, A, M, Z, Y with M -> Z -> Y           (recanting witness M)
F1_SCM       F1 with explicit tabular mechanisms
F1_DEGENERATE_SCM  same mechanisms, but p(A=1) = 1
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..dsl import load_model

NAMES = ("f1", "f2", "f3", "f4", "f1_scm", "f1_degenerate_scm")


def path(name: str) -> Path:
    return Path(str(resources.files(__name__).joinpath(f"{name}.scm.txt")))


def source(name: str) -> str:
    return path(name).read_text(encoding="utf-8")


def load(name: str):
    return load_model(source(name))
