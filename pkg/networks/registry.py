"""
Architecture registry for lookup and instantiation.

Architectures are registered manually (ID -> module path) and loaded
on first use. CLI names ("cnn-dnn") resolve through each
architecture's metadata.
"""
import importlib
from typing import Dict, List, Optional, Type

from networks.base import ArchitectureConfig, ArchitectureMetadata, YieldNetwork


class ArchitectureRegistry:
    """
    Maps architecture IDs to their YieldNetwork subclasses.
    """

    ARCHITECTURES = {
        "CNN_DNN": "networks.cnn_dnn",
        "CNN_LSTM_DNN": "networks.cnn_lstm_dnn",
    }

    def __init__(self):
        """Initialize registry."""
        self._module_map = dict(self.ARCHITECTURES)
        self._class_cache: Dict[str, Type[YieldNetwork]] = {}
        self._metadata_cache: Dict[str, ArchitectureMetadata] = {}

    def _load_module(self, arch_id: str):
        module_path = self._module_map.get(arch_id)
        if not module_path:
            raise ValueError(f"Unknown architecture ID: {arch_id}. Expected one of {self.ids()}")
        try:
            return importlib.import_module(module_path)
        except ImportError as e:
            raise ImportError(f"Failed to load architecture '{arch_id}' from '{module_path}': {e}")

    def get_class(self, arch_id: str) -> Type[YieldNetwork]:
        """
        Architecture class by ID.

        Raises:
            ValueError: Unknown ID
            AttributeError: Module has no YieldNetwork subclass
        """
        if arch_id in self._class_cache:
            return self._class_cache[arch_id]

        module = self._load_module(arch_id)
        network_class = None
        for name in dir(module):
            obj = getattr(module, name)
            if (isinstance(obj, type) and issubclass(obj, YieldNetwork)
                    and obj is not YieldNetwork and obj.__module__ == module.__name__):
                network_class = obj
                break
        if network_class is None:
            raise AttributeError(
                f"Architecture module '{self._module_map[arch_id]}' must contain "
                f"a class inheriting from YieldNetwork"
            )

        # metadata does not depend on built layers
        metadata = network_class.__new__(network_class).get_metadata()
        if metadata.id != arch_id:
            raise ValueError(f"{network_class.__name__} declares ID {metadata.id}, registered as {arch_id}")
        self._class_cache[arch_id] = network_class
        self._metadata_cache[arch_id] = metadata
        return network_class

    def get_metadata(self, arch_id: str) -> ArchitectureMetadata:
        """Architecture metadata without building a network."""
        if arch_id not in self._metadata_cache:
            self.get_class(arch_id)
        return self._metadata_cache[arch_id]

    def resolve(self, name: str) -> str:
        """
        Architecture ID from an ID or CLI name.

        Example:
            >>> ArchitectureRegistry().resolve("cnn-lstm-dnn")
            'CNN_LSTM_DNN'
        """
        if name in self._module_map:
            return name
        for arch_id in self._module_map:
            if self.get_metadata(arch_id).name == name:
                return arch_id
        raise ValueError(f"Unknown architecture: {name}. Expected one of {self.names()}")

    def default_config(self, arch_id: str, **overrides) -> ArchitectureConfig:
        """Architecture defaults with optional overrides."""
        if self.get_metadata(arch_id).requires_lstm:
            return ArchitectureConfig.cnn_lstm_dnn(**overrides)
        return ArchitectureConfig.cnn_dnn(**overrides)

    def create(self, name: str, config: Optional[ArchitectureConfig], n_others: int) -> YieldNetwork:
        """
        Build a network.

        Args:
            name: Architecture ID or CLI name
            config: Hyperparameters (None = architecture defaults)
            n_others: One-hot block width of the feature rows
        """
        arch_id = self.resolve(name)
        network_class = self.get_class(arch_id)
        return network_class(config or self.default_config(arch_id), n_others)

    def ids(self) -> List[str]:
        return list(self._module_map)

    def names(self) -> List[str]:
        return [self.get_metadata(arch_id).name for arch_id in self._module_map]

    def register(self, arch_id: str, module_path: str):
        """
        Register an additional architecture.

        Raises:
            ValueError: If the ID is already registered
        """
        if arch_id in self._module_map:
            raise ValueError(f"Architecture ID '{arch_id}' is already registered")
        self._module_map[arch_id] = module_path


_registry: Optional[ArchitectureRegistry] = None


def get_registry() -> ArchitectureRegistry:
    """Process-wide registry, created on first use."""
    global _registry
    if _registry is None:
        _registry = ArchitectureRegistry()
    return _registry
