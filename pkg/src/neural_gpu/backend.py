"""Selects the convolution backend: compiled extension or numpy fallback.

The compiled module ``neural_gpu._core`` is preferred when importable.  Set
``NEURAL_GPU_BACKEND=python`` (or ``compiled``) to force a choice, or call
:func:`use` at runtime.  Both backends implement identical contracts; the
forward convolution is bit-identical between them.
"""

import os

from neural_gpu import _core_py

try:
    from neural_gpu import _core
except ImportError:
    _core = None

_BACKENDS = {"python": _core_py}
if _core is not None:
    _BACKENDS["compiled"] = _core

_active_name = os.environ.get("NEURAL_GPU_BACKEND", "").strip().lower()
if _active_name in ("", "auto"):
    _active_name = "compiled" if _core is not None else "python"
if _active_name not in _BACKENDS:
    raise ImportError(
        f"backend {_active_name!r} unavailable; choices: {sorted(_BACKENDS)}"
    )


def available():
    """Names of importable backends."""
    return sorted(_BACKENDS)


def active():
    """Name of the backend currently in use."""
    return _active_name


def get():
    """The active backend module."""
    return _BACKENDS[_active_name]


def use(name):
    """Switch the active backend; returns the previous name."""
    global _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choices: {sorted(_BACKENDS)}")
    previous = _active_name
    _active_name = name
    return previous
