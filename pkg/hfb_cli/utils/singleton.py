"""
Singleton metaclass shared by ConfigManager and Runtime.
"""
import threading
from typing import Any, Dict, Type


class Singleton(type):
    """
    Metaclass that keeps one instance per class.
    Creation is guarded by a lock because sweep workers may touch Runtime
    from several threads.
    """

    _instances: Dict[Type, Any] = {}
    _lock = threading.Lock()

    def __call__(cls, *args: Any, **kwargs: Any) -> Any:
        if cls not in cls._instances:
            with cls._lock:
                if cls not in cls._instances:
                    cls._instances[cls] = super(Singleton, cls).__call__(*args, **kwargs)
        return cls._instances[cls]

    @classmethod
    def clear_all_instances(mcs) -> None:
        """Forget every instance (used between tests)"""
        mcs._instances.clear()
