"""
Evolution Plan
Time step, total time, stepper mode and sampling settings shared by both examples.
"""

from dataclasses import dataclass, asdict

from errors import InvalidPlan


SPIN_MODES = ('literal_paper', 'exact_term', 'strang')
PARTICLE_MODES = ('lie', 'strang')


@dataclass(frozen=True)
class EvolutionPlan:
    """
    How to advance a system: round(T / dt) steps of size dt.

    Attributes:
        dt: Time step (> 0)
        T: Requested total time (> 0); the realized time is steps * dt
        mode: Spin stepper mode or particle splitting mode
        sample_stride: Record observables every this many steps
        seed: Seed for terminal sampling
        shots: Terminal measurement shots (0 disables sampling)
        sign: +1 or -1, the sign of i in the literal step I + i*sign*H*dt/hbar
        renormalize_after_step: Rescale to unit norm after each literal step
        paper_literal_signs: Flip kinetic and potential phases to exp(+iEt)
        minimal_image: Wrap two-body separations into [-L/2, L/2)
    """

    dt: float
    T: float
    mode: str = 'exact_term'
    sample_stride: int = 1
    seed: int = 0
    shots: int = 0
    sign: int = 1
    renormalize_after_step: bool = False
    paper_literal_signs: bool = False
    minimal_image: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidPlan(f"dt must be > 0, got {self.dt}")
        if not self.T > 0:
            raise InvalidPlan(f"T must be > 0, got {self.T}")
        if self.mode not in SPIN_MODES + PARTICLE_MODES:
            raise InvalidPlan(f"unknown mode {self.mode!r}")
        if self.sample_stride < 1:
            raise InvalidPlan(f"sample_stride must be >= 1, got {self.sample_stride}")
        if self.shots < 0:
            raise InvalidPlan(f"shots must be >= 0, got {self.shots}")
        if self.sign not in (1, -1):
            raise InvalidPlan(f"sign must be +1 or -1, got {self.sign}")
        if self.steps < 1:
            raise InvalidPlan(f"round(T/dt) must be >= 1, got T={self.T}, dt={self.dt}")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def realized_T(self) -> float:
        return self.steps * self.dt

    @property
    def num_records(self) -> int:
        return self.steps // self.sample_stride + 1

    def with_dt(self, dt: float) -> 'EvolutionPlan':
        """Same plan at a different step size."""
        fields = asdict(self)
        fields['dt'] = dt
        return EvolutionPlan(**fields)

    def replace(self, **changes) -> 'EvolutionPlan':
        fields = asdict(self)
        fields.update(changes)
        return EvolutionPlan(**fields)

    def to_dict(self) -> dict:
        return asdict(self)
