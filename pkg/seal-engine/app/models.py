from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Any, Dict, List, Literal, Optional, Tuple, Union
from enum import Enum

CLOUD = "CLOUD"
Assignee = Union[int, Literal["CLOUD"]]


class TrafficParams(BaseModel):
    """Traffic state around one sensing location."""
    model_config = ConfigDict(frozen=True)

    density: float = Field(ge=0.0, description="Vehicle density in vehicles per km")
    max_density: float = Field(gt=0.0, description="Jam density in vehicles per km")
    v_min: float = Field(gt=0.0, description="Congested vehicle speed floor in m/s")
    v_max: float = Field(gt=0.0, description="Free-flow vehicle speed in m/s")
    coverage_radius: float = Field(gt=0.0, description="UAV coverage radius in m")
    slot_interval: float = Field(default=1.0, gt=0.0, description="Slot length in s")
    slot_count: int = Field(default=1000, ge=0, description="Number of slots K")

    @model_validator(mode="after")
    def _check_bounds(self) -> "TrafficParams":
        if self.density > self.max_density:
            raise ValueError("density must not exceed max_density")
        if self.v_min > self.v_max:
            raise ValueError("v_min must not exceed v_max")
        return self


class VehicleState(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int = Field(description="Unique vehicle id")
    distance_to_uav: float = Field(ge=0.0, description="Ground distance to the UAV projection in m")
    heading: Literal[1, -1] = Field(description="+1 driving towards the location, -1 driving away")
    speed: float = Field(ge=0.0, description="m/s")
    idle_compute: float = Field(ge=0.0, description="Idle computation capacity in cycles/s")
    unit_cost: float = Field(gt=0.0, description="Currency per (cycles/s) supplied")
    fixed_cost: float = Field(default=0.0, ge=0.0, description="Fixed cost c_0 per supplied task")
    link_rate: float = Field(gt=0.0, description="Uplink rate to this vehicle in bits/s")


class VehicleAttributeRanges(BaseModel):
    """Sampling ranges for spawned vehicles, SI units."""
    model_config = ConfigDict(frozen=True)

    idle_compute: Tuple[float, float] = Field(default=(0.5e9, 2.0e9), description="cycles/s")
    unit_cost: Tuple[float, float] = Field(default=(1e-9, 9e-9), description="currency per cycles/s")
    fixed_cost: float = Field(default=0.0, ge=0.0)
    link_rate: float = Field(default=6e6, gt=0.0, description="bits/s")


class PopulationTrace(BaseModel):
    slots: List[List[VehicleState]] = Field(default_factory=list)
    slot_ids: List[int] = Field(default_factory=list)
    arrivals: List[int] = Field(default_factory=list)
    departures: List[int] = Field(default_factory=list)
    dropped: int = Field(default=0, description="Rows or vehicles discarded for lying outside coverage")


class TaskSpec(BaseModel):
    """One computation mission collected at a sensing location."""
    model_config = ConfigDict(frozen=True)

    id: int
    size: float = Field(gt=0.0, description="Input size in bits")
    urgency: float = Field(gt=0.0, le=1.0, description="Urgency degree / processing priority")
    deadline: float = Field(gt=0.0, description="Completion deadline in s")
    intensity: float = Field(gt=0.0, description="Computation intensity in cycles/bit")


class EnergyParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_hover: float = Field(default=500.0, gt=0.0, description="Hover power in W")
    p_a2g: float = Field(default=0.2, gt=0.0, description="Air-to-ground transmit power in W")
    p_fly: float = Field(default=150.0, gt=0.0, description="Constant propulsion power in W")
    fly_power_curve: Optional[Tuple[float, float]] = Field(
        default=None, description="(c1, c2) for P(V) = c1*V^3 + c2/V; overrides p_fly when set"
    )
    segment_length: float = Field(default=500.0, ge=0.0, description="Flight distance to this location in m")
    fly_speed: float = Field(default=20.0, gt=0.0, description="Flight speed in m/s")
    altitude: float = Field(default=50.0, ge=0.0, description="Hover altitude in m")
    v_min: float = Field(default=2.0, gt=0.0)
    v_max: float = Field(default=20.0, gt=0.0)

    @model_validator(mode="after")
    def _check_speed(self) -> "EnergyParams":
        if self.v_min > self.v_max:
            raise ValueError("v_min must not exceed v_max")
        if not self.v_min <= self.fly_speed <= self.v_max:
            raise ValueError("fly_speed must lie within [v_min, v_max]")
        if self.fly_power_curve is not None and min(self.fly_power_curve) <= 0:
            raise ValueError("fly_power_curve coefficients must be positive")
        return self


class CostWeights(BaseModel):
    # omega = 1 leaves the critical price undefined
    model_config = ConfigDict(frozen=True)

    omega: float = Field(default=0.5, ge=0.0, lt=1.0, description="Energy weight")
    lambda_p: float = Field(default=40.0, gt=0.0, description="Payment adjustment factor")


class ServerProfile(BaseModel):
    """A fixed computing server (cloud, fog or the UAV itself)."""
    model_config = ConfigDict(frozen=True)

    name: str
    unit_cost: float = Field(ge=0.0, description="Currency per cycles/s")
    compute: float = Field(gt=0.0, description="cycles/s")
    link_rate: float = Field(default=6e6, gt=0.0, description="bits/s")

    @property
    def price(self) -> float:
        return self.unit_cost * self.compute


class CombinatorialBid(BaseModel):
    """Single-minded bid: a bundle with take-it-or-leave-it resources and prices."""
    model_config = ConfigDict(frozen=True)

    vehicle_id: int
    bundle: Tuple[int, ...] = Field(default=(), description="Feasible task set, urgency order")
    resources: Dict[int, float] = Field(default_factory=dict, description="task id -> cycles/s")
    prices: Dict[int, float] = Field(default_factory=dict, description="task id -> currency")

    @model_validator(mode="after")
    def _check_keys(self) -> "CombinatorialBid":
        members = set(self.bundle)
        if len(members) != len(self.bundle):
            raise ValueError("bundle contains duplicate task ids")
        if set(self.resources) != members or set(self.prices) != members:
            raise ValueError("resources and prices must be keyed exactly by the bundle")
        if any(value <= 0 for value in self.resources.values()):
            raise ValueError("resources must be positive")
        if any(value < 0 for value in self.prices.values()):
            raise ValueError("prices must be non-negative")
        return self


class AuctionEnvironment(BaseModel):
    """What the auctioneer observes about the bidders and its own costs."""
    model_config = ConfigDict(frozen=True)

    dwell: Dict[int, float] = Field(default_factory=dict, description="vehicle id -> residual dwell time in s")
    link_rate: Dict[int, float] = Field(default_factory=dict, description="vehicle id -> bits/s")
    capacity: Dict[int, float] = Field(default_factory=dict, description="vehicle id -> declared idle compute")
    energy: EnergyParams = Field(default_factory=EnergyParams)
    weights: CostWeights = Field(default_factory=CostWeights)
    fallback: ServerProfile = Field(
        default_factory=lambda: ServerProfile(name="cloud", unit_cost=8e-9, compute=1e10),
        description="Server receiving tasks with no candidate",
    )


class AuctionOutcome(BaseModel):
    winner_of: Dict[int, Assignee] = Field(default_factory=dict)
    critical_payment: Dict[int, float] = Field(default_factory=dict)
    winners: List[int] = Field(default_factory=list)
    tasks_of: Dict[int, List[int]] = Field(default_factory=dict)
    mcf_trace: Dict[int, List[Tuple[int, float]]] = Field(
        default_factory=dict, description="Per task, candidates ordered by marginal cost factor"
    )
    critical_bidder: Dict[int, Optional[int]] = Field(default_factory=dict)

    def vehicle_tasks(self) -> List[int]:
        return [task for task, who in self.winner_of.items() if who != CLOUD]

    def cloud_tasks(self) -> List[int]:
        return [task for task, who in self.winner_of.items() if who == CLOUD]

    def public_view(self) -> "PublishedOutcome":
        """The (allocation, payment) pair that leaves the enclave."""
        return PublishedOutcome(winner_of=dict(self.winner_of), critical_payment=dict(self.critical_payment))


class PublishedOutcome(BaseModel):
    winner_of: Dict[int, Assignee] = Field(default_factory=dict)
    critical_payment: Dict[int, float] = Field(default_factory=dict)


class AuctionInstance(BaseModel):
    """A complete single-location auction: tasks, truthful bids and bidder types."""
    tasks: List[TaskSpec]
    bids: List[CombinatorialBid]
    vehicles: List[VehicleState]
    env: AuctionEnvironment
    reserve: float = Field(ge=0.0)

    def vehicle(self, vehicle_id: int) -> VehicleState:
        for vehicle in self.vehicles:
            if vehicle.id == vehicle_id:
                return vehicle
        raise KeyError(vehicle_id)

    def bid_of(self, vehicle_id: int) -> CombinatorialBid:
        for bid in self.bids:
            if bid.vehicle_id == vehicle_id:
                return bid
        raise KeyError(vehicle_id)

    def task(self, task_id: int) -> TaskSpec:
        for task in self.tasks:
            if task.id == task_id:
                return task
        raise KeyError(task_id)


class Deviation(BaseModel):
    task_id: int
    compute: float = Field(gt=0.0)
    price: float = Field(ge=0.0)


class ObjectiveResult(BaseModel):
    value: float
    feasible: bool = True
    violated: Optional[str] = Field(default=None, description="Constraint id, e.g. deadline or capacity")
    task_id: Optional[int] = None


class EnergyBreakdown(BaseModel):
    flight: float = 0.0
    hover: float = 0.0
    transmit: float = 0.0

    @property
    def total(self) -> float:
        return self.flight + self.hover + self.transmit


class Scheme(str, Enum):
    SEAL = "SEAL"
    EAA = "EAA"
    DAA = "DAA"
    PAA = "PAA"
    CLOUD = "CLOUD"
    FOG = "FOG"
    LOCAL = "LOCAL"


class BaselineConfig(BaseModel):
    scheme: Scheme
    cloud_unit_cost: float = Field(default=8.0, gt=0.0, description="Currency per GC/s")
    cloud_compute: float = Field(default=10e9, gt=0.0, description="cycles/s")
    fog_unit_cost: float = Field(default=9.0, gt=0.0, description="Currency per GC/s")
    fog_compute: float = Field(default=3e9, gt=0.0, description="cycles/s")
    uav_compute: float = Field(default=1e9, gt=0.0, description="cycles/s")
    paa_speed_seed: int = 0


class AllocationReport(BaseModel):
    """Metrics of one scheme at one location."""
    scheme: Scheme
    winner_of: Dict[int, Assignee] = Field(default_factory=dict)
    payments: Dict[int, float] = Field(default_factory=dict)
    fly_speed: float
    energy: EnergyBreakdown
    uav_cost: float
    total_payment: float
    mean_delay: float
    journey_time: float
    vehicle_tasks: int
    cloud_tasks: int
    deadline_misses: int = Field(default=0, description="Tasks whose completion exceeds their deadline")
    flagged: List[int] = Field(default_factory=list, description="Tasks routed to the fallback for lack of candidates")


# Ledger and protocol records

class TxType(str, Enum):
    DEPOSIT = "deposit"
    OUTCOME = "outcome"
    COMMIT = "commit"
    PUBLISH_HASH = "publish_hash"
    KEY = "key"
    MISBEHAVIOR = "misbehavior"
    TIMEOUT = "timeout"
    CLAIM = "claim"
    REFUND = "refund"


class TxStatus(str, Enum):
    PENDING = "pending"
    CONFIRMED = "confirmed"
    REJECTED = "rejected"


class Transaction(BaseModel):
    seq: int = -1
    type: TxType
    payload: Dict[str, Any] = Field(default_factory=dict)
    pk: str = Field(description="Submitter public key, lowercase hex")
    timestamp: float = Field(description="Submission time on the logical clock")
    confirmed_at: Optional[float] = None
    signature: str = ""
    status: TxStatus = TxStatus.PENDING
    reason: Optional[str] = None
    effects: Dict[str, Any] = Field(default_factory=dict, description="State changes applied by the ledger")


class ProtocolSettings(BaseModel):
    """Timing, deposit and penalty knobs of one exchange round."""
    model_config = ConfigDict(frozen=True)

    deposit_multiplier: float = Field(default=1.5, ge=1.0)
    slash_fraction: float = Field(default=1.0, gt=0.0, le=1.0)
    consensus_delay: Tuple[float, float] = Field(default=(0.3, 0.81), description="Confirmation delay range in s")
    phase_window: float = Field(default=2.0, gt=0.0, description="Length of each pre-exchange phase in s")
    claim_window: float = Field(default=5.0, gt=0.0)
    certificate_ttl: float = Field(default=3600.0, gt=0.0)
    key_grace: Optional[float] = Field(
        default=None, ge=0.0, description="Extra time after a task deadline for its key; defaults to the max consensus delay"
    )

    @model_validator(mode="after")
    def _check_windows(self) -> "ProtocolSettings":
        low, high = self.consensus_delay
        if not 0 <= low <= high:
            raise ValueError("consensus_delay must be an ordered non-negative range")
        if self.phase_window <= high or self.claim_window <= high:
            raise ValueError("phase and claim windows must exceed the maximum consensus delay")
        return self

    @property
    def effective_key_grace(self) -> float:
        return self.consensus_delay[1] if self.key_grace is None else self.key_grace


class Verdict(str, Enum):
    DELIVERED_AND_PAID = "DELIVERED_AND_PAID"
    NEITHER_WITH_PENALTY = "NEITHER_WITH_PENALTY"
    VIOLATION = "VIOLATION"


class TaskVerdict(BaseModel):
    task_id: int
    winner: int
    index: int = Field(description="Position of the task on the winner's hashchain")
    verdict: Verdict
    delivered: bool
    paid: bool
    fault: Optional[Literal["bidder", "uav"]] = None


class BalanceEntry(BaseModel):
    initial: int
    final: int


class LatencyStats(BaseModel):
    count: int = 0
    mean: float = 0.0
    min: float = 0.0
    max: float = 0.0


class ProtocolReport(BaseModel):
    script: str
    aborted: bool = False
    verdicts: List[TaskVerdict] = Field(default_factory=list)
    balances: Dict[str, BalanceEntry] = Field(default_factory=dict)
    escrow: int = 0
    penalty_pool: int = 0
    failed_tasks: Dict[str, List[int]] = Field(default_factory=dict, description="winner -> failed task ids")
    tx_counts: Dict[str, int] = Field(default_factory=dict)
    ledger_bytes: Dict[str, int] = Field(default_factory=dict)
    conservation_ok: bool = True
    payoffs: Dict[str, float] = Field(default_factory=dict)
    consensus_latency: LatencyStats = Field(default_factory=LatencyStats)
    log: List[Transaction] = Field(default_factory=list)

    def verdict_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for entry in self.verdicts:
            counts[entry.verdict.value] = counts.get(entry.verdict.value, 0) + 1
        return counts


class LocationMetrics(BaseModel):
    location: int
    tasks: int
    vehicles: int
    vehicle_tasks: int
    cloud_tasks: int
    uav_cost: float
    energy_j: float
    flight_energy_j: float
    hover_energy_j: float
    transmit_energy_j: float
    mean_delay_s: float
    journey_time_s: float
    total_payment: float
    deadline_misses: int


class LocationReport(BaseModel):
    """One line of the run report."""
    location: int
    seed: int
    metrics: LocationMetrics
    outcome: PublishedOutcome
    protocol: Optional[ProtocolReport] = None
