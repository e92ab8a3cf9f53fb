from __future__ import annotations
from typing import Dict, Hashable
from weakref import WeakValueDictionary


__all__ = ['BaseOperator']


class BaseOperator:
    """**Registry of live operators.**

    Building the same Hamiltonian twice (same couplings, fields, sector and apply path)
    hands back the instance that already exists, as long as somebody still holds it.
    Protocols rely on this to make paired runs, like the two DEER arms, share one
    sampled Hamiltonian without passing it around explicitly.

    Subclasses pass ``key=`` to the constructor and register themselves at the end
    of ``__init__``."""

    # Weak refs so cached operators die with their last user.
    _instances: Dict[Hashable, BaseOperator] = WeakValueDictionary()

    def __new__(cls, *args, key: Hashable = None, **kwargs):
        if key is not None:
            try:
                return cls._instances[key]
            except KeyError:
                pass
        return object.__new__(cls)

    @classmethod
    def _is_registered(cls, key: Hashable) -> bool:
        return key is not None and key in cls._instances

    @classmethod
    def _register(cls, key: Hashable, instance: BaseOperator) -> None:
        if key is not None:
            cls._instances[key] = instance
