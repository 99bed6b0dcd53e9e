"""Socket deployment topology."""

from dataclasses import dataclass
from typing import Tuple

from src.models.HoeffdingParams import ConfigError


@dataclass(frozen=True)
class Topology:
    """
    Node ids and hub address of a socket run.

    Attributes:
        nodes: ``host:port`` labels of the processing nodes; they double as node ids
        mediator: ``host:port`` the initiation group's hub listens on; the
            termination group's hub listens on the next port (port 0 picks
            free ports for both)
    """

    nodes: Tuple[str, ...]
    mediator: str

    def __post_init__(self):
        if not self.nodes:
            raise ConfigError("Topology lists no nodes")
        if len(set(self.nodes)) != len(self.nodes):
            raise ConfigError(f"Topology lists duplicate nodes: {list(self.nodes)}")

    def hub_addresses(self) -> Tuple[Tuple[str, int], Tuple[str, int]]:
        host, _, port_text = self.mediator.rpartition(":")
        if not host or not port_text.isdigit():
            raise ConfigError(f"mediator must look like host:port, got {self.mediator!r}")
        port = int(port_text)
        return (host, port), (host, port + 1 if port else 0)
