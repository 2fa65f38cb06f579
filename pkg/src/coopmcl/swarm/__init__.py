"""Multi-agent simulation: world, channel, wire protocol and agent nodes."""

from .agent import AgentNode, ExchangeResult, exchange_and_fuse
from .channel import SimulatedChannel
from .protocol import CloudMessage, MeasurementRecord, ProtocolError
from .scenario import AgentSpec, Scenario, ScenarioError, load_scenario
from .simulation import Simulation, TickResult
from .world import EncounterEvent, World, WorldStreams
