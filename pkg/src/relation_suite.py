"""
Declarative catalog of commutation relations and their mechanical verification.

Catalog relations are loaded from ``config/relations.yaml``; every instance is
checked by normal ordering the bracket and comparing it syntactically with the
instantiated right-hand side. The residual must be exactly zero.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from pathlib import Path
from string import Template
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .exceptions import ErrorCode, RelationError
from .expr_parser import ExpressionParser, render
from .models.expression import Energy, Expr, Profile, Term
from .models.reports import EscapeReport, Report
from .models.workbench_config import WorkbenchConfig
from .pdo_algebra import (
    combine,
    expected_commutator,
    generator_names,
    pdo_commutator,
    poincare_generators,
    second_quantize,
)
from .symbolic_core import add_exprs, apply_sifting, subtract
from .utils.logging_utils import LoggerMixin, log_duration
from .wick_engine import bracket, commutator, normal_order

CATALOG_PATH = Path(__file__).resolve().parent.parent / "config" / "relations.yaml"

JACOBI_LABELS = ("k", "k'", "p", "p'", "q", "q'")
MAX_ERRATA = 5
MAX_HIGHER_PRODUCT_ORDER = 4


class RelationId(Enum):
    """Identifiers of every relation the suite can verify."""
    U_CONTINUUM = "U-CONTINUUM"
    SP_19 = "SP-19"
    SP_20 = "SP-20"
    SP_21 = "SP-21"
    SP_22 = "SP-22"
    SP_23 = "SP-23"
    SP_24 = "SP-24"
    DERIV_26 = "DERIV-26"
    DERIV_27 = "DERIV-27"
    DERIV_28 = "DERIV-28"
    DERIV_29 = "DERIV-29"
    DERIV_30 = "DERIV-30"
    OSC_10_BLOCK = "OSC-10-BLOCK"
    JACOBI = "JACOBI"
    POINCARE = "POINCARE"
    HIGHER_PRODUCTS = "HIGHER-PRODUCTS"

    @classmethod
    def parse(cls, text: str) -> Tuple["RelationId", Optional[int]]:
        """Accept ``SP-19`` style ids and ``HIGHER-PRODUCTS(n)``."""
        name, order = text.strip(), None
        if name.endswith(")") and "(" in name:
            name, argument = name[:-1].split("(", 1)
            try:
                order = int(argument)
            except ValueError as exc:
                raise RelationError(f"Invalid relation argument in '{text}'", ErrorCode.RELATION_UNKNOWN, text, exc) from exc
        try:
            return cls(name), order
        except ValueError as exc:
            raise RelationError(f"Unknown relation '{text}'", ErrorCode.RELATION_UNKNOWN, text, exc) from exc


@dataclass(frozen=True)
class RhsTerm:
    expr: str
    when: Tuple[Tuple[str, str], ...] = ()

    def applies(self, values: Dict[str, str]) -> bool:
        return all(values[first] == values[second] for first, second in self.when)


@dataclass(frozen=True)
class RelationTemplate:
    """One catalog entry: a bracket of two templates and its expected value."""
    relation: str
    description: str = ""
    kind: str = "template"
    left: str = ""
    right: str = ""
    rhs: Tuple[RhsTerm, ...] = ()
    printed: Optional[Tuple[RhsTerm, ...]] = None
    species: Tuple[str, ...] = ()
    axes: Tuple[str, ...] = ()
    options: Dict[str, object] = field(default_factory=dict, hash=False, compare=False)

    def placeholders(self) -> Tuple[str, ...]:
        return self.species + self.axes


def _rhs_terms(entries: Iterable[Dict], relation: str) -> Tuple[RhsTerm, ...]:
    terms = []
    for entry in entries or []:
        if "expr" not in entry:
            raise RelationError("Right-hand term without 'expr'", ErrorCode.RELATION_TEMPLATE_INVALID, relation)
        pairs = tuple((str(first), str(second)) for first, second in entry.get("when", []))
        terms.append(RhsTerm(str(entry["expr"]), pairs))
    return tuple(terms)


def load_catalog(path: Optional[Union[str, Path]] = None) -> Dict[str, RelationTemplate]:
    """
    Load the relation catalog from YAML.

    Raises:
        RelationError: if the file is missing, an id is unknown or an entry is malformed
    """
    catalog_path = Path(path) if path else CATALOG_PATH
    try:
        with open(catalog_path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise RelationError(
            f"Cannot load relation catalog {catalog_path}: {exc}",
            ErrorCode.RELATION_TEMPLATE_INVALID,
            cause=exc,
        ) from exc

    catalog: Dict[str, RelationTemplate] = {}
    for relation, entry in (data.get("relations") or {}).items():
        RelationId.parse(relation)
        kind = entry.get("kind", "template")
        printed = entry.get("printed")
        template = RelationTemplate(
            relation=relation,
            description=entry.get("description", ""),
            kind=kind,
            left=entry.get("left", ""),
            right=entry.get("right", ""),
            rhs=_rhs_terms(entry.get("rhs"), relation),
            printed=None if printed is None else _rhs_terms(printed, relation),
            species=tuple(entry.get("species", [])),
            axes=tuple(entry.get("axes", [])),
            options={key: value for key, value in entry.items() if key in ("families", "n")},
        )
        if kind == "template":
            _check_template(template)
        catalog[relation] = template
    return catalog


def _check_template(template: RelationTemplate) -> None:
    if not template.left or not template.right:
        raise RelationError("Template relation needs 'left' and 'right'", ErrorCode.RELATION_TEMPLATE_INVALID, template.relation)
    names = set(template.placeholders())
    for term in template.rhs + (template.printed or ()):
        for first, second in term.when:
            if first not in names or second not in names:
                raise RelationError(
                    f"Kronecker pair ({first}, {second}) uses an undeclared index",
                    ErrorCode.RELATION_TEMPLATE_INVALID,
                    template.relation,
                )


def _substitute(text: str, values: Dict[str, str], relation: str) -> str:
    try:
        return Template(text).substitute(values)
    except (KeyError, ValueError) as exc:
        raise RelationError(f"Bad placeholder in '{text}': {exc}", ErrorCode.RELATION_TEMPLATE_INVALID, relation, exc) from exc


def _instantiate(parser: ExpressionParser, terms: Sequence[RhsTerm], values: Dict[str, str], relation: str) -> Expr:
    parts = [parser.parse(_substitute(term.expr, values, relation)) for term in terms if term.applies(values)]
    return normal_order(add_exprs(*parts)) if parts else Expr()


def check_instance(
    template: RelationTemplate,
    values: Dict[str, str],
    species_count: int,
    dimension: int,
) -> Tuple[str, Optional[str]]:
    """
    Verify a single instantiation.

    Returns the rendered residual (empty on success) and, when a printed form
    exists and disagrees, its rendered residual.
    """
    parser = ExpressionParser(species_count=species_count, dimension=dimension)
    left = parser.parse(_substitute(template.left, values, template.relation))
    right = parser.parse(_substitute(template.right, values, template.relation))
    lhs = bracket(left, right, -1)

    residual = subtract(lhs, _instantiate(parser, template.rhs, values, template.relation))
    printed_residual = None
    if template.printed is not None:
        printed = subtract(lhs, _instantiate(parser, template.printed, values, template.relation))
        if not printed.is_zero:
            printed_residual = render(printed)
    return ("" if residual.is_zero else render(residual)), printed_residual


def _check_instance_job(job: Tuple[RelationTemplate, Dict[str, str], int, int]) -> Tuple[str, Optional[str]]:
    return check_instance(*job)


def jacobi_residual(x: Expr, y: Expr, z: Expr) -> Expr:
    """``[[X,Y],Z] + [[Y,Z],X] + [[Z,X],Y]`` normal ordered."""
    return add_exprs(
        commutator(commutator(x, y), z),
        commutator(commutator(y, z), x),
        commutator(commutator(z, x), y),
    )


def family_source(family: str, first: int, second: int, labels: Tuple[str, str], axis: int = 1) -> str:
    """Expression text for one member of a generator family."""
    l1, l2 = labels
    if family == "E":
        return f"E_{first}^{second}({l1},{l2})"
    if family == "Elow":
        return f"Elow_{{{first},{second}}}({l1},{l2})"
    if family == "Eup":
        return f"Eup^{{{first},{second}}}({l1},{l2})"
    if family in ("A", "B"):
        return f"{family}[{axis}]_{{{first},{second}}}({l1},{l2})"
    raise RelationError(f"Unknown generator family '{family}'", ErrorCode.RELATION_TEMPLATE_INVALID, "JACOBI")


class RelationSuite(LoggerMixin):
    """
    Runs catalog relations, the Jacobi sampler, the Poincaré table and the
    higher-product closure check for one configuration.
    """

    def __init__(self, config: Optional[WorkbenchConfig] = None, catalog_path: Optional[Union[str, Path]] = None):
        self.config = config or WorkbenchConfig()
        self.catalog = load_catalog(catalog_path)
        self.parser = ExpressionParser.from_config(self.config)

    # -- catalog relations ---------------------------------------------------------------------

    def species_assignments(self, names: Sequence[str], seed_offset: int = 0) -> List[Tuple[int, ...]]:
        """All species tuples for small N; a seeded sample of ``jacobi_samples`` tuples beyond."""
        count = self.config.species_count
        if not names:
            return [()]
        if count <= self.config.exhaustive_species_limit:
            return list(product(range(1, count + 1), repeat=len(names)))
        rng = np.random.default_rng(self.config.seed + seed_offset)
        draws = rng.integers(1, count + 1, size=(self.config.jacobi_samples, len(names)))
        return sorted({tuple(int(value) for value in row) for row in draws})

    def instances(self, template: RelationTemplate) -> List[Dict[str, str]]:
        axis_values = list(product(range(1, self.config.momentum_dimension + 1), repeat=len(template.axes)))
        result = []
        for species in self.species_assignments(template.species):
            for axes in axis_values:
                values = dict(zip(template.species, (str(value) for value in species)))
                values.update(zip(template.axes, (str(value) for value in axes)))
                result.append(values)
        return result

    def verify_relation(self, relation: Union[str, RelationId], order: Optional[int] = None) -> Report:
        """
        Verify every instance of one relation.

        Raises:
            RelationError: for an id that is not in the catalog
        """
        if isinstance(relation, RelationId):
            relation_id = relation
        else:
            relation_id, parsed_order = RelationId.parse(relation)
            order = order if order is not None else parsed_order

        if relation_id == RelationId.JACOBI:
            return self.verify_jacobi()
        if relation_id == RelationId.POINCARE:
            return self.verify_poincare_table()
        if relation_id == RelationId.HIGHER_PRODUCTS:
            template = self.catalog.get(relation_id.value)
            default_order = int(template.options.get("n", 3)) if template else 3
            return self.verify_higher_products(order if order is not None else default_order)

        template = self.catalog.get(relation_id.value)
        if template is None:
            raise RelationError(f"Relation '{relation_id.value}' is not in the catalog", ErrorCode.RELATION_UNKNOWN, relation_id.value)

        report = Report(relation=relation_id.value)
        jobs = [
            (template, values, self.config.species_count, self.config.momentum_dimension)
            for values in self.instances(template)
        ]
        for values, (residual, printed_residual) in zip((job[1] for job in jobs), self._run(jobs)):
            if residual:
                report.add_failure(residual, values)
                self.logger.debug("%s failed at %s: %s", relation_id.value, values, residual)
            else:
                report.add_pass()
                if printed_residual and len(report.errata) < MAX_ERRATA:
                    report.add_erratum(values, printed_residual)

        self.logger.info("%s: %s over %d instance(s)", relation_id.value, report.status.value, report.instances)
        return report

    def _run(self, jobs: List[Tuple]) -> List[Tuple[str, Optional[str]]]:
        workers = self.config.parallel_workers
        with log_duration(self.logger, f"{len(jobs)} instance check(s) on {workers} worker(s)", logging.DEBUG):
            if workers <= 1 or len(jobs) < 2:
                return [_check_instance_job(job) for job in jobs]
            with ProcessPoolExecutor(max_workers=workers) as executor:
                return list(executor.map(_check_instance_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))

    def verify_all(self, higher_order: int = 3) -> List[Report]:
        """Every relation in id order."""
        reports = []
        for relation_id in RelationId:
            if relation_id == RelationId.HIGHER_PRODUCTS:
                reports.append(self.verify_higher_products(higher_order))
            else:
                reports.append(self.verify_relation(relation_id))
        return reports

    # -- Jacobi --------------------------------------------------------------------------------

    def random_triple(self, rng: np.random.Generator, families: Sequence[str]) -> Tuple[List[str], List[Expr]]:
        labels = list(JACOBI_LABELS)
        rng.shuffle(labels)
        sources = []
        for slot in range(3):
            family = families[int(rng.integers(len(families)))]
            first, second = (int(value) for value in rng.integers(1, self.config.species_count + 1, size=2))
            axis = int(rng.integers(1, self.config.momentum_dimension + 1))
            sources.append(family_source(family, first, second, (labels[2 * slot], labels[2 * slot + 1]), axis))
        return sources, [self.parser.parse(source) for source in sources]

    def verify_jacobi(
        self,
        families: Optional[Sequence[str]] = None,
        samples: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> Report:
        """Jacobi identity on randomly drawn triples of generator-family members."""
        template = self.catalog.get(RelationId.JACOBI.value)
        families = list(families or (template.options.get("families") if template else None) or ["E", "Elow", "Eup", "A", "B"])
        samples = self.config.jacobi_samples if samples is None else samples
        if samples < 1:
            raise RelationError("Jacobi sampling needs at least one sample", ErrorCode.RELATION_TEMPLATE_INVALID, "JACOBI")
        rng = np.random.default_rng(self.config.seed if seed is None else seed)

        report = Report(relation=RelationId.JACOBI.value)
        for _ in range(samples):
            sources, (x, y, z) = self.random_triple(rng, families)
            residual = jacobi_residual(x, y, z)
            if residual.is_zero:
                report.add_pass()
            else:
                report.add_failure(render(residual), {"triple": sources})
        self.logger.info("JACOBI: %s over %d sample(s)", report.status.value, report.instances)
        return report

    # -- Poincaré ------------------------------------------------------------------------------

    def verify_poincare_table(self, dimension: Optional[int] = None) -> Report:
        """Every pairwise commutator of the one-particle generators against the generated table."""
        dimension = dimension or self.config.momentum_dimension
        gens = poincare_generators(1, dimension)
        names = generator_names(dimension)
        report = Report(relation=RelationId.POINCARE.value)
        for index, first in enumerate(names):
            for second in names[index + 1:]:
                actual = pdo_commutator(gens[first], gens[second])
                expected = combine(expected_commutator(first, second), gens)
                residual = actual - expected
                if residual.is_zero:
                    report.add_pass()
                else:
                    report.add_failure(residual.render(), {"pair": [first, second]})
        self.logger.info("POINCARE: %s over %d pair(s)", report.status.value, report.instances)
        return report

    # -- higher products -----------------------------------------------------------------------

    def _higher_product_expected(self, mu: int, nu: int, species: Sequence[int], labels: Sequence[str]) -> Expr:
        parts = []
        for slot, (member, label) in enumerate(zip(species, labels)):
            if member != nu:
                continue
            replaced_species = list(species)
            replaced_labels = list(labels)
            replaced_species[slot], replaced_labels[slot] = mu, "k"
            product_text = "Elow_{" + ",".join(map(str, replaced_species)) + "}(" + ",".join(replaced_labels) + ")"
            parts.append(self.parser.parse(f"-delta(k',{label}) {product_text}"))
        return add_exprs(*parts) if parts else Expr()

    def verify_higher_products(self, n: int) -> Report:
        """
        Closure of ``E_mu^nu(k,k')`` with n-fold annihilation products, their mutual
        commutativity and Jacobi on sampled triples from the extended set.
        """
        if not 2 <= n <= MAX_HIGHER_PRODUCT_ORDER:
            raise RelationError(
                f"Product order must be between 2 and {MAX_HIGHER_PRODUCT_ORDER}, got {n}",
                ErrorCode.RELATION_TEMPLATE_INVALID,
                RelationId.HIGHER_PRODUCTS.value,
            )
        relation = f"{RelationId.HIGHER_PRODUCTS.value}({n})"
        report = Report(relation=relation)
        labels = [f"p{slot}" for slot in range(1, n + 1)]
        others = [f"q{slot}" for slot in range(1, n + 1)]

        for assignment in self.species_assignments(["mu", "nu"] + labels, seed_offset=n):
            mu, nu, species = assignment[0], assignment[1], assignment[2:]
            generator = self.parser.parse(f"E_{mu}^{nu}(k,k')")
            monomial = self.parser.parse(self._product_source(species, labels))
            residual = subtract(commutator(generator, monomial), self._higher_product_expected(mu, nu, species, labels))
            if residual.is_zero:
                report.add_pass()
            else:
                report.add_failure(render(residual), {"mu": mu, "nu": nu, "species": list(species)})

        rng = np.random.default_rng(self.config.seed + n)
        count = self.config.species_count
        for _ in range(max(1, self.config.jacobi_samples // 10)):
            draws = [int(value) for value in rng.integers(1, count + 1, size=2 + 2 * n)]
            generator = self.parser.parse(f"E_{draws[0]}^{draws[1]}(k,k')")
            first = self.parser.parse(self._product_source(draws[2:2 + n], labels))
            second = self.parser.parse(self._product_source(draws[2 + n:], others))
            checks = {"annihilators commute": commutator(first, second), "jacobi": jacobi_residual(generator, first, second)}
            for name, residual in checks.items():
                if residual.is_zero:
                    report.add_pass()
                else:
                    report.add_failure(render(residual), {"check": name, "species": draws})

        self.logger.info("%s: %s over %d instance(s)", relation, report.status.value, report.instances)
        return report

    @staticmethod
    def _product_source(species: Sequence[int], labels: Sequence[str]) -> str:
        return "Elow_{" + ",".join(map(str, species)) + "}(" + ",".join(labels) + ")"

    # -- smeared generators and the template-family probe ---------------------------------------

    def smeared_bilinear(
        self,
        creator: int,
        annihilator: int,
        creator_kernel: str = "",
        annihilator_kernel: str = "",
    ) -> Expr:
        """``∫dk dk' f(k) g(k') a+_i(k) a_j(k')``; kernels are expression text on labels k and k'."""
        parts = ["int(k) int(k')", creator_kernel, annihilator_kernel, f"a+_{creator}(k) a_{annihilator}(k')"]
        return self.parser.parse(" ".join(part for part in parts if part))

    def one_particle_generator(self, kind: str, species: int) -> Expr:
        """Second-quantized ``∫dk a+_i(k) (G a_i)(k)`` for a one-particle Poincaré generator."""
        gens = poincare_generators(species, self.config.momentum_dimension)
        if kind not in gens:
            raise RelationError(f"Unknown generator '{kind}'", ErrorCode.RELATION_UNKNOWN, kind)
        return second_quantize(gens[kind], species)

    def coupling_generator(self, first: int, second: int, profile: str = "F", conjugate: str = "Fc") -> Expr:
        """``d_ij`` with profile F and its conjugate partner; self-adjoint by construction."""
        if first == second:
            raise RelationError("Coupling needs two different species", ErrorCode.RELATION_TEMPLATE_INVALID, "coupling")
        return add_exprs(
            self.smeared_bilinear(first, second, f"fn_{profile}(k)", f"fn_{conjugate}(k')"),
            self.smeared_bilinear(second, first, f"fn_{conjugate}(k)", f"fn_{profile}(k')"),
        )

    def template_family_escape(self, first: int = 1, second: int = 2) -> EscapeReport:
        """
        Bracket the total energy with ``d_ij``, sift, and list the terms that are
        not of the P/M (one bound label, polynomial kernels) or D (two bound labels,
        pure profile kernels) shapes.
        """
        energy = add_exprs(*(self.one_particle_generator("P0", species) for species in (first, second)))
        result = apply_sifting(commutator(energy, self.coupling_generator(first, second)))
        report = EscapeReport(probe=f"[P0, d_{first}{second}]", total_terms=len(result.terms))
        for term in result.terms:
            if not (_is_single_particle_shape(term) or _is_coupling_shape(term)):
                report.escaping_terms.append(render(Expr((term,))))
        self.logger.info("Template-family probe: %d of %d term(s) escape", len(report.escaping_terms), report.total_terms)
        return report


def _is_single_particle_shape(term: Term) -> bool:
    if len(term.bound) != 1 or term.deltas or len(term.ops) != 2:
        return False
    creator, annihilator = term.ops
    label = term.bound[0].name
    return (
        creator.dagger
        and not annihilator.dagger
        and not creator.deriv
        and creator.species == annihilator.species
        and creator.label_name == annihilator.label_name == label
        and not any(isinstance(kernel.kind, Profile) for kernel in term.kernels)
    )


def _is_coupling_shape(term: Term) -> bool:
    if len(term.bound) != 2 or term.deltas or len(term.ops) != 2:
        return False
    creator, annihilator = term.ops
    profile_labels = sorted(kernel.label.name for kernel in term.kernels if isinstance(kernel.kind, Profile))
    return (
        creator.dagger
        and not annihilator.dagger
        and creator.species != annihilator.species
        and not creator.deriv
        and not annihilator.deriv
        and len(term.kernels) == 2
        and profile_labels == sorted(label.name for label in term.bound)
        and not any(isinstance(kernel.kind, Energy) for kernel in term.kernels)
    )


def verify_relation(relation: Union[str, RelationId], config: Optional[WorkbenchConfig] = None) -> Report:
    return RelationSuite(config).verify_relation(relation)


def verify_jacobi(
    families: Optional[Sequence[str]] = None,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
    config: Optional[WorkbenchConfig] = None,
) -> Report:
    return RelationSuite(config).verify_jacobi(families, samples, seed)


def verify_poincare_table(config: Optional[WorkbenchConfig] = None) -> Report:
    return RelationSuite(config).verify_poincare_table()


def verify_higher_products(n: int, config: Optional[WorkbenchConfig] = None) -> Report:
    return RelationSuite(config).verify_higher_products(n)
