"""Real-valued genetic algorithm over flattened weight/bias vectors.

Gene layout: every hidden-layer weight matrix (row-major, layer order), then
every hidden-layer bias vector, then the output weights and output biases.
With ``include_geometry`` the per-layer centers and widths are appended after
the output biases so the kernel geometry evolves as well.

Fitness is a loss: lower is better everywhere in this module, and ties are
broken in favour of the lowest population index.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
import numpy as np

from .errors import ChromosomeError, ConfigError
from .network import NetworkSpec, RbfLayer, RbfNetwork, init_network, network_forward
from .training import compute_loss

CROSSOVER_KINDS = ("one_point", "two_point")
MIN_WIDTH = 1e-6


@dataclass(frozen=True, eq=False)
class Chromosome:
    genes: np.ndarray
    spec_fingerprint: str

    def __post_init__(self):
        g = np.array(self.genes, dtype=np.float64)
        if g.ndim != 1:
            raise ChromosomeError("genes must be a flat vector")
        g.setflags(write=False)
        object.__setattr__(self, "genes", g)

    def __len__(self):
        return self.genes.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Chromosome):
            return NotImplemented
        return self.spec_fingerprint == other.spec_fingerprint and np.array_equal(self.genes, other.genes)


def _fingerprint(spec: NetworkSpec, include_geometry):
    return spec.fingerprint() + ("+geom" if include_geometry else "")


def gene_count(spec: NetworkSpec, include_geometry=False) -> int:
    hidden, (ow, ob) = spec.layout()
    n = sum(w[0] * w[1] + b[0] for w, b in hidden) + ow[0] * ow[1] + ob[0]
    if include_geometry:
        dim = spec.input_dim
        for units, out in zip(spec.hidden_units, spec.hidden_outputs):
            n += units * dim + units
            dim = out
    return n


def encode_chromosome(net: RbfNetwork, include_geometry=False) -> Chromosome:
    parts = [l.weights.ravel() for l in net.hidden_layers]
    parts += [l.biases for l in net.hidden_layers]
    parts += [net.output_weights.ravel(), net.output_biases]
    if include_geometry:
        for l in net.hidden_layers:
            parts += [l.centers.ravel(), l.widths]
    genes = np.concatenate(parts) if parts else np.zeros(0)
    return Chromosome(genes, _fingerprint(net.spec, include_geometry))


def decode_chromosome(chrom: Chromosome, spec: NetworkSpec, geometry=None) -> RbfNetwork:
    """Rebuild a network from ``chrom``.

    ``geometry`` supplies per-layer ``(centers, widths)``; it may be omitted
    only when the chromosome carries the geometry itself.
    """
    include_geometry = chrom.spec_fingerprint.endswith("+geom")
    if chrom.spec_fingerprint != _fingerprint(spec, include_geometry):
        raise ChromosomeError("chromosome fingerprint does not match the network spec")
    expected = gene_count(spec, include_geometry)
    if len(chrom) != expected:
        raise ChromosomeError(f"chromosome has {len(chrom)} genes, spec needs {expected}")
    g = chrom.genes
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        block = g[pos : pos + size].reshape(shape)
        pos += size
        return block

    hidden_shapes, (ow, ob) = spec.layout()
    weights = [take(w) for w, _ in hidden_shapes]
    biases = [take(b) for _, b in hidden_shapes]
    out = (take(ow), take(ob))
    if include_geometry:
        geometry = []
        dim = spec.input_dim
        for units, out_dim in zip(spec.hidden_units, spec.hidden_outputs):
            centers = take((units, dim))
            widths = np.maximum(np.abs(take((units,))), MIN_WIDTH)
            geometry.append((centers, widths))
            dim = out_dim
    elif geometry is None:
        if spec.hidden_units:
            raise ChromosomeError("geometry (centers/widths) required to decode this chromosome")
        geometry = ()
    if len(geometry) != len(hidden_shapes):
        raise ChromosomeError("geometry depth does not match spec")
    layers = tuple(RbfLayer(c, s, w, b) for (c, s), w, b in zip(geometry, weights, biases))
    return RbfNetwork(spec.input_dim, layers, out[0], out[1], spec.output_activation)


def fitness(chrom: Chromosome, X, Y, loss_kind, spec: NetworkSpec, geometry=None) -> float:
    """Mean loss of the decoded network over ``(X, Y)``; lower is fitter."""
    net = decode_chromosome(chrom, spec, geometry)
    X = np.array(X, dtype=np.float64, ndmin=2)
    Y = np.array(Y, dtype=np.float64, ndmin=2)
    if X.shape[0] == 0:
        raise ConfigError("fitness needs a non-empty dataset")
    return compute_loss(network_forward(X, net).output, Y, loss_kind)


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    mutation_rate: float = 0.1
    num_generations: int = 100
    crossover: str = "one_point"
    mutation_sigma: float = 0.1
    elitism: int = 1
    tournament_size: int = 3
    include_geometry: bool = False
    seed: int = 0

    def __post_init__(self):
        if int(self.population_size) < 1:
            raise ConfigError("population_size must be >= 1")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate must lie in [0, 1]")
        if int(self.num_generations) < 1:
            raise ConfigError("num_generations must be >= 1")
        if self.crossover not in CROSSOVER_KINDS:
            raise ConfigError(f"unknown crossover kind {self.crossover!r}")
        if self.mutation_sigma < 0:
            raise ConfigError("mutation_sigma must be >= 0")
        if not 0 <= self.elitism < self.population_size:
            raise ConfigError("elitism must satisfy 0 <= elitism < population_size")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ConfigError("tournament_size must lie in [1, population_size]")


@dataclass
class FitnessHistory:
    """Best and mean population loss per generation; entry 0 is the initial population."""

    best: list[float] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.best)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("generation,best_fitness,mean_fitness\n")
        for i, (b, m) in enumerate(zip(self.best, self.mean)):
            buf.write(f"{i},{float(b)!r},{float(m)!r}\n")
        return buf.getvalue()


def tournament_pick(scores, rng, k) -> int:
    scores = np.asarray(scores)
    # distinct contenders, so k == population size always finds the global best
    contenders = rng.choice(scores.shape[0], size=k, replace=False)
    best = contenders[0]
    for c in contenders[1:]:
        if scores[c] < scores[best] or (scores[c] == scores[best] and c < best):
            best = c
    return int(best)


def select_parents(population, scores, rng, config: GaConfig, n_pairs=None):
    """Tournament selection; returns a list of ``(parent1, parent2)`` pairs."""
    if len(population) == 0:
        raise ConfigError("empty population")
    if len(scores) != len(population):
        raise ConfigError("scores are not aligned with the population")
    if n_pairs is None:
        n_pairs = (len(population) + 1) // 2
    k = config.tournament_size
    pairs = []
    for _ in range(n_pairs):
        i = tournament_pick(scores, rng, k)
        j = tournament_pick(scores, rng, k)
        pairs.append((population[i], population[j]))
    return pairs


def crossover(p1: Chromosome, p2: Chromosome, rng, kind="one_point"):
    if len(p1) != len(p2) or p1.spec_fingerprint != p2.spec_fingerprint:
        raise ChromosomeError("crossover parents have different layouts")
    n = len(p1)
    a, b = p1.genes, p2.genes
    if n < 2:
        return Chromosome(a.copy(), p1.spec_fingerprint), Chromosome(b.copy(), p2.spec_fingerprint)
    if kind == "one_point":
        cut = int(rng.integers(1, n))
        c1 = np.concatenate([a[:cut], b[cut:]])
        c2 = np.concatenate([b[:cut], a[cut:]])
    elif kind == "two_point":
        if n > 2:
            lo, hi = np.sort(rng.choice(np.arange(1, n), size=2, replace=False))
        else:
            lo, hi = 1, n
        c1 = np.concatenate([a[:lo], b[lo:hi], a[hi:]])
        c2 = np.concatenate([b[:lo], a[lo:hi], b[hi:]])
    else:
        raise ConfigError(f"unknown crossover kind {kind!r}")
    return Chromosome(c1, p1.spec_fingerprint), Chromosome(c2, p1.spec_fingerprint)


def mutate(chrom: Chromosome, rate, sigma_mut, rng) -> Chromosome:
    """Add N(0, sigma_mut^2) noise to each gene independently with probability ``rate``."""
    n = len(chrom)
    hit = rng.random(n) < rate
    noise = rng.normal(0.0, 1.0, size=n) * sigma_mut
    return Chromosome(np.where(hit, chrom.genes + noise, chrom.genes), chrom.spec_fingerprint)


def initial_population(spec: NetworkSpec, geometry, config: GaConfig, rng):
    pop = []
    for _ in range(config.population_size):
        net = init_network(spec, rng)
        if geometry is not None and not config.include_geometry:
            net = net.with_parameters(
                [(l.weights, l.biases) for l in net.hidden_layers],
                (net.output_weights, net.output_biases),
                geometry=geometry,
            )
        pop.append(encode_chromosome(net, config.include_geometry))
    return pop


def _ranked(scores):
    # stable argsort: equal losses keep their population order
    return np.argsort(np.asarray(scores), kind="stable")


def evolve(
    spec: NetworkSpec,
    X,
    Y,
    config: GaConfig = GaConfig(),
    loss_kind="mse",
    geometry=None,
    population=None,
):
    """Run the generation loop; returns ``(best_network, FitnessHistory)``.

    Per generation: keep ``config.elitism`` best individuals, fill the rest by
    tournament selection, crossover and mutation, and re-evaluate.  The
    returned network is the best individual ever evaluated.  ``geometry``
    defaults to the kernel geometry of a network initialized from the seed.
    """
    rng = np.random.default_rng(config.seed)
    X = np.array(X, dtype=np.float64, ndmin=2)
    Y = np.array(Y, dtype=np.float64, ndmin=2)
    if geometry is None and not config.include_geometry:
        geometry = init_network(spec, rng, "sample_from_data", data=X).geometry
    if population is None:
        population = initial_population(spec, geometry, config, rng)
    elif len(population) != config.population_size:
        raise ConfigError("supplied population does not match population_size")
    population = list(population)

    def score(pop):
        return np.array([fitness(c, X, Y, loss_kind, spec, geometry) for c in pop])

    scores = score(population)
    history = FitnessHistory()
    best_i = int(_ranked(scores)[0])
    best_chrom, best_score = population[best_i], float(scores[best_i])
    history.best.append(best_score)
    history.mean.append(float(scores.mean()))

    size = config.population_size
    for _ in range(int(config.num_generations)):
        order = _ranked(scores)
        offspring = [population[i] for i in order[: config.elitism]]
        need = size - len(offspring)
        for p1, p2 in select_parents(population, scores, rng, config, n_pairs=(need + 1) // 2):
            for child in crossover(p1, p2, rng, config.crossover):
                if len(offspring) < size:
                    offspring.append(mutate(child, config.mutation_rate, config.mutation_sigma, rng))
        population = offspring
        scores = score(population)
        i = int(_ranked(scores)[0])
        if scores[i] < best_score:
            best_chrom, best_score = population[i], float(scores[i])
        history.best.append(float(scores[i]))
        history.mean.append(float(scores.mean()))

    return decode_chromosome(best_chrom, spec, geometry), history
