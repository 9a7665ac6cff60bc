"""
Problem Module
JSON problem files: schema, validation and construction of the validated
spin or particle problem they describe.
"""

import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import pydantic
from pydantic import BaseModel, ConfigDict, Field, model_validator

from errors import InvalidPlan, ParseError, ValidationError
from particle_sim import (
    CoulombSoft, Harmonic, OneBody, ParticleSystem, Polynomial, PotentialSpec,
    Tabulated, TwoBody, Wavepacket, WavepacketSpec, prepare_product_wavepackets,
)
from plan import EvolutionPlan, PARTICLE_MODES, SPIN_MODES
from spin_sim import PauliTerm, SpinSystem, default_spin_observables
from statevec import StateVector, new_basis_state
from utils import log_execution


PARTICLE_OBSERVABLES = ('moments', 'density', 'energy')


class StrictModel(BaseModel):
    """Unknown keys are rejected at every level."""

    model_config = ConfigDict(extra='forbid')


# Systems

class TermModel(StrictModel):
    coefficient: float
    sites: List[int]
    paulis: List[str]


class SpinSystemModel(StrictModel):
    num_spins: int
    terms: List[TermModel]
    hbar: float = 1.0


class ParticleSystemModel(StrictModel):
    num_particles: int
    qubits_per_particle: int
    box_length: float = 1.0
    masses: Optional[List[float]] = None
    hbar: float = 1.0


# Potentials

class HarmonicModel(StrictModel):
    type: Literal['harmonic']
    stiffness: float
    center: float = 0.0


class PolynomialModel(StrictModel):
    type: Literal['polynomial']
    coefficients: List[float]


class CoulombSoftModel(StrictModel):
    type: Literal['coulomb_soft']
    strength: float
    softening: Optional[float] = None
    center: float = 0.0


class TabulatedModel(StrictModel):
    type: Literal['tabulated']
    values: Union[List[float], List[List[float]]]


KindModel = Annotated[
    Union[HarmonicModel, PolynomialModel, CoulombSoftModel, TabulatedModel],
    Field(discriminator='type'),
]


class OneBodyModel(StrictModel):
    particle: int
    kind: KindModel


class TwoBodyModel(StrictModel):
    particles: Tuple[int, int]
    kind: KindModel


class PotentialsModel(StrictModel):
    one_body: List[OneBodyModel] = []
    two_body: List[TwoBodyModel] = []


# Initial state, plan, observables, tolerances

class WavepacketModel(StrictModel):
    center: float
    momentum: float = 0.0
    width: float


class InitialStateModel(StrictModel):
    basis_index: Optional[int] = None
    wavepackets: Optional[List[WavepacketModel]] = None

    @model_validator(mode='after')
    def exactly_one_source(self):
        if (self.basis_index is None) == (self.wavepackets is None):
            raise ValueError("initial_state needs exactly one of basis_index or wavepackets")
        return self


class PlanModel(StrictModel):
    dt: float
    T: float
    mode: Optional[str] = None
    sample_stride: int = 1
    seed: int = 0
    shots: int = 0
    sign: int = 1
    renormalize_after_step: bool = False
    paper_literal_signs: bool = False
    minimal_image: bool = False


class ObservableModel(StrictModel):
    kind: Literal['pauli', 'moments', 'density', 'energy']
    sites: Optional[List[int]] = None
    paulis: Optional[List[str]] = None


class AnalyticCheckModel(StrictModel):
    case: str
    params: Dict[str, float] = {}
    observable: str
    max_abs_error: float


class TolerancesModel(StrictModel):
    max_norm_drift: Optional[float] = None
    analytic: Optional[AnalyticCheckModel] = None
    min_oracle_fidelity: Optional[float] = None
    max_relative_energy_drift: Optional[float] = None


class ProblemModel(StrictModel):
    problem_type: Literal['spins', 'particles']
    system: Dict[str, Any]
    potentials: Optional[PotentialsModel] = None
    initial_state: InitialStateModel
    plan: PlanModel
    observables: Optional[List[ObservableModel]] = None
    tolerances: Optional[TolerancesModel] = None


@dataclass(frozen=True)
class Problem:
    """
    A fully validated problem.

    Attributes:
        name: Config name (file stem)
        problem_type: spins or particles
        system: SpinSystem or ParticleSystem
        plan: Evolution plan
        potentials: Potential entries (particles only)
        wavepackets: Initial wavepackets, when the config gives them
        basis_index: Initial basis state, when the config gives one
        observables: PauliTerms (spins) or menu names (particles)
        tolerances: Embedded checks
        config: The raw config, echoed into reports
    """

    name: str
    problem_type: str
    system: Union[SpinSystem, ParticleSystem]
    plan: EvolutionPlan
    potentials: Optional[PotentialSpec] = None
    wavepackets: Optional[WavepacketSpec] = None
    basis_index: Optional[int] = None
    observables: Tuple[Union[PauliTerm, str], ...] = ()
    tolerances: Optional[TolerancesModel] = None
    config: Optional[dict] = None

    @property
    def num_qubits(self) -> int:
        if self.problem_type == 'spins':
            return self.system.num_spins
        return self.system.num_qubits

    def initial_state(self) -> StateVector:
        if self.basis_index is not None:
            return new_basis_state(self.num_qubits, self.basis_index)
        return prepare_product_wavepackets(self.system, self.wavepackets)

    def with_plan(self, plan: EvolutionPlan) -> 'Problem':
        return dataclasses.replace(self, plan=plan)


def _format_pydantic_error(exc: pydantic.ValidationError, context: str) -> str:
    lines = []
    for error in exc.errors():
        location = '.'.join(str(part) for part in error['loc'])
        lines.append(f"{context}.{location}: {error['msg']}" if location else f"{context}: {error['msg']}")
    return '; '.join(lines)


def _validate(model: type, data: Any, context: str):
    try:
        return model.model_validate(data)
    except pydantic.ValidationError as exc:
        raise ValidationError(_format_pydantic_error(exc, context)) from exc


def _build_kind(model) -> Union[Harmonic, Polynomial, CoulombSoft, Tabulated]:
    if isinstance(model, HarmonicModel):
        return Harmonic(model.stiffness, model.center)
    if isinstance(model, PolynomialModel):
        return Polynomial(tuple(model.coefficients))
    if isinstance(model, CoulombSoftModel):
        return CoulombSoft(model.strength, model.softening, model.center)
    return Tabulated(model.values)


def _build_potentials(model: Optional[PotentialsModel]) -> PotentialSpec:
    if model is None:
        return PotentialSpec()
    return PotentialSpec(
        one_body=tuple(OneBody(e.particle, _build_kind(e.kind)) for e in model.one_body),
        two_body=tuple(TwoBody(e.particles, _build_kind(e.kind)) for e in model.two_body),
    )


def _build_plan(model: PlanModel, problem_type: str, seed: Optional[int]) -> EvolutionPlan:
    fields = model.model_dump()
    allowed = SPIN_MODES if problem_type == 'spins' else PARTICLE_MODES
    if fields['mode'] is None:
        fields['mode'] = allowed[1] if problem_type == 'spins' else allowed[0]
    if fields['mode'] not in allowed:
        raise InvalidPlan(f"mode {fields['mode']!r} is not valid for {problem_type}; "
                          f"expected one of {allowed}")
    if seed is not None:
        fields['seed'] = seed
    return EvolutionPlan(**fields)


def _build_spin_observables(models: Optional[List[ObservableModel]],
                            system: SpinSystem) -> Tuple[PauliTerm, ...]:
    if not models:
        return tuple(default_spin_observables(system))
    observables = []
    for model in models:
        if model.kind != 'pauli':
            raise ValidationError(f"observable kind {model.kind!r} is not available for spins")
        if model.sites is None or model.paulis is None:
            raise ValidationError("pauli observable needs sites and paulis")
        term = PauliTerm(1.0, tuple(model.sites), tuple(model.paulis))
        if max(term.sites) >= system.num_spins:
            raise ValidationError(f"observable {term.label} site exceeds num_spins={system.num_spins}")
        observables.append(term)
    return tuple(observables)


def _build_particle_observables(models: Optional[List[ObservableModel]]) -> Tuple[str, ...]:
    if not models:
        return ('moments',)
    kinds = []
    for model in models:
        if model.kind not in PARTICLE_OBSERVABLES:
            raise ValidationError(f"observable kind {model.kind!r} is not available for particles")
        if model.sites is not None or model.paulis is not None:
            raise ValidationError(f"observable {model.kind!r} takes no sites or paulis")
        if model.kind not in kinds:
            kinds.append(model.kind)
    return tuple(kinds)


def build_problem(data: Any, name: str = 'problem', seed: Optional[int] = None) -> Problem:
    """
    Validate a parsed config document and build the Problem it describes.

    Args:
        data: Parsed JSON document
        name: Name recorded in reports
        seed: Overrides plan.seed when given

    Returns:
        Problem

    Raises:
        ValidationError: naming the violated invariant or schema rule
    """
    model = _validate(ProblemModel, data, 'config')
    plan = _build_plan(model.plan, model.problem_type, seed)
    initial = model.initial_state

    if model.problem_type == 'spins':
        system_model = _validate(SpinSystemModel, model.system, 'system')
        system = SpinSystem(
            system_model.num_spins,
            tuple(PauliTerm(t.coefficient, tuple(t.sites), tuple(t.paulis)) for t in system_model.terms),
            system_model.hbar,
        )
        if model.potentials is not None:
            raise ValidationError("potentials are only valid for particle problems")
        if initial.wavepackets is not None:
            raise ValidationError("wavepackets are only valid for particle problems")
        return Problem(
            name=name, problem_type='spins', system=system, plan=plan,
            basis_index=initial.basis_index,
            observables=_build_spin_observables(model.observables, system),
            tolerances=model.tolerances, config=data,
        )

    system_model = _validate(ParticleSystemModel, model.system, 'system')
    system = ParticleSystem(
        system_model.num_particles,
        system_model.qubits_per_particle,
        system_model.box_length,
        tuple(system_model.masses) if system_model.masses is not None else None,
        system_model.hbar,
    )
    potentials = _build_potentials(model.potentials).resolved(system)
    wavepackets = None
    if initial.wavepackets is not None:
        wavepackets = WavepacketSpec(tuple(
            Wavepacket(w.center, w.momentum, w.width) for w in initial.wavepackets
        ))
        if len(wavepackets.packets) != system.num_particles:
            raise ValidationError(f"expected {system.num_particles} wavepackets, "
                                  f"got {len(wavepackets.packets)}")
    return Problem(
        name=name, problem_type='particles', system=system, plan=plan,
        potentials=potentials, wavepackets=wavepackets, basis_index=initial.basis_index,
        observables=_build_particle_observables(model.observables),
        tolerances=model.tolerances, config=data,
    )


def load_problem(path: str, seed: Optional[int] = None) -> Problem:
    """
    Load and validate a JSON problem file.

    Raises:
        ParseError: unreadable file or malformed JSON, as path:line:col: message
        ValidationError: schema or invariant violation
    """
    try:
        with open(path, 'r') as f:
            text = f.read()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read file ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc

    name = os.path.splitext(os.path.basename(path))[0]
    problem = build_problem(data, name=name, seed=seed)
    log_execution('load_problem', f"loaded {problem.problem_type} problem '{name}' from {path}")
    return problem
