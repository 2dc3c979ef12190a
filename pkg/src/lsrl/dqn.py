"""Deep Q-learning control module over perception latents.

Q-network, epsilon-greedy exploration, FIFO experience replay, a periodically
synchronised target network, TD regression, the training loop, greedy
evaluation and a tabular value-iteration oracle for verification.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from lsrl.nn import Dense, ReLU, Sequential, make_optimizer
from lsrl.simenv import metrics as M
from lsrl.simenv.env import DrivingEnv

Q_LAYER_SIZES = (64, 100, 50, 25, 15, 8, 3)


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 0.9
    minimum: float = 0.04
    decay_steps: float = 20_000.0

    def __call__(self, step: int) -> float:
        return epsilon_at(self, step)


def epsilon_at(schedule: EpsilonSchedule, step: int) -> float:
    if step < 0:
        raise ValueError("step must be non-negative")
    return schedule.minimum + (schedule.start - schedule.minimum) * math.exp(-step / schedule.decay_steps)


@dataclass(frozen=True)
class DqnConfig:
    state_dim: int = 64
    n_actions: int = 3
    buffer_capacity: int = 7500
    gamma: float = 0.999
    target_sync_every: int = 256
    batch_size: int = 512
    max_episode_steps: int = 500
    actions: tuple[float, ...] = (-0.4, 0.0, 0.4)
    optimizer: str = "adam"
    learning_rate: float = 1e-4
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)

    def table_values(self) -> tuple:
        """The fixed hyperparameter table in its published order."""
        return (
            self.state_dim,
            self.n_actions,
            self.buffer_capacity,
            self.gamma,
            self.target_sync_every,
            self.batch_size,
            self.max_episode_steps,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class QNetworkSpec:
    layer_sizes: tuple[int, ...] = Q_LAYER_SIZES

    def to_dict(self) -> dict:
        return {"layer_sizes": list(self.layer_sizes)}

    @classmethod
    def from_dict(cls, d: dict) -> "QNetworkSpec":
        return cls(tuple(int(n) for n in d["layer_sizes"]))


def build_q_network(spec: QNetworkSpec = QNetworkSpec(), seed: int = 0) -> Sequential:
    """Dense layers with ReLU between them and a linear output."""
    rng = np.random.default_rng(seed)
    sizes = spec.layer_sizes
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(Dense(n_in, n_out, rng))
        if i < len(sizes) - 2:
            layers.append(ReLU())
    return Sequential(layers)


def q_forward(net: Sequential, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    n_in = net.layers[0].n_in
    if s.shape[-1] != n_in:
        raise ValueError(f"Q-network expects {n_in}-dim states, got {s.shape[-1]}")
    return net.forward(s)


def select_action(q: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy with lowest-index tie-breaking for the greedy branch."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    explore = rng.random() < epsilon
    if explore:
        return int(rng.integers(len(q)))
    return int(np.argmax(q))


# -- replay ------------------------------------------------------------------------------


@dataclass
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool


@dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray
    ids: np.ndarray


class ReplayBuffer:
    """Fixed-capacity FIFO ring; inserting into a full buffer evicts the oldest transition."""

    def __init__(self, capacity: int = 7500, state_dim: int = 64) -> None:
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.s_next = np.zeros((capacity, state_dim))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.done = np.zeros(capacity, dtype=bool)
        self.ids = np.zeros(capacity, dtype=np.int64)
        self.inserted = 0

    def __len__(self) -> int:
        return min(self.inserted, self.capacity)

    def push(self, t: Transition) -> None:
        if t.a not in (0, 1, 2):
            raise ValueError(f"invalid action index {t.a}")
        i = self.inserted % self.capacity
        self.s[i], self.a[i], self.r[i] = t.s, t.a, t.r
        self.s_next[i], self.done[i], self.ids[i] = t.s_next, t.done, self.inserted
        self.inserted += 1

    def oldest_id(self) -> int:
        return max(0, self.inserted - self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform sampling with replacement."""
        if len(self) == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(len(self), size=batch_size)
        return Batch(self.s[idx], self.a[idx], self.r[idx], self.s_next[idx], self.done[idx], self.ids[idx])


# -- targets and regression -----------------------------------------------------------------


def td_targets(batch: Batch, target: Sequential, gamma: float) -> np.ndarray:
    """r for terminal transitions, r + gamma * max_a' Q_target(s', a') otherwise."""
    y = batch.r.astype(np.float64).copy()
    live = ~batch.done.astype(bool)
    if live.any():
        y[live] += gamma * q_forward(target, batch.s_next[live]).max(axis=1)
    return y


def td_regression(primary: Sequential, batch: Batch, targets: np.ndarray) -> float:
    """Mean half squared TD error on the taken actions; leaves gradients in ``primary``.

    ``targets`` are constants, so no gradient reaches the target network.
    """
    q = q_forward(primary, batch.s)
    rows = np.arange(len(targets))
    err = targets - q[rows, batch.a]
    grad = np.zeros_like(q)
    grad[rows, batch.a] = -err / len(targets)
    primary.backward(grad)
    return float(0.5 * np.mean(err**2))


def train_step(
    buffer: ReplayBuffer,
    primary: Sequential,
    target: Sequential,
    optimizer,
    config: DqnConfig,
    rng: np.random.Generator,
) -> float | None:
    """One gradient step on a uniformly sampled batch; ``None`` while the buffer is too small."""
    if len(buffer) < config.batch_size:
        return None
    batch = buffer.sample(config.batch_size, rng)
    y = td_targets(batch, target, config.gamma)
    loss = td_regression(primary, batch, y)
    optimizer.step(primary.state_dict(), dict(primary.named_grads()))
    return loss


def sync_target(primary: Sequential, target: Sequential) -> None:
    if primary.describe() != target.describe():
        raise ValueError("primary and target networks have different architectures")
    target.load_state_dict(primary.state_dict())


def clone_network(net: Sequential, spec: QNetworkSpec = QNetworkSpec()) -> Sequential:
    other = build_q_network(spec)
    sync_target(net, other)
    return other


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    total, scale = 0.0, 1.0
    for r in rewards:
        total += scale * r
        scale *= gamma
    return total


# -- agent and loop --------------------------------------------------------------------------


@dataclass
class EpisodeRecord:
    episode: int
    steps: int
    ret: float
    discounted_return: float
    epsilon: float
    mean_td_loss: float
    termination_reason: str
    goal_reached: bool = False

    CSV_HEADER = "episode,steps,return,discounted_return,epsilon,mean_td_loss,termination_reason"

    def csv_row(self) -> str:
        loss = "" if math.isnan(self.mean_td_loss) else repr(self.mean_td_loss)
        return (
            f"{self.episode},{self.steps},{self.ret!r},{self.discounted_return!r},"
            f"{self.epsilon!r},{loss},{self.termination_reason}"
        )


class DqnAgent:
    """Bundles the networks, optimizer, buffer and RNG that one training run owns."""

    def __init__(self, config: DqnConfig = DqnConfig(), seed: int = 0, spec: QNetworkSpec = QNetworkSpec()):
        self.config = config
        self.spec = spec
        self.rng = np.random.default_rng(seed)
        self.primary = build_q_network(spec, seed)
        self.target = build_q_network(spec, seed)
        sync_target(self.primary, self.target)
        self.optimizer = make_optimizer(config.optimizer, config.learning_rate)
        self.buffer = ReplayBuffer(config.buffer_capacity, spec.layer_sizes[0])
        self.global_step = 0

    def act(self, s: np.ndarray, epsilon: float) -> int:
        return select_action(q_forward(self.primary, s), epsilon, self.rng)

    def observe(self, t: Transition) -> float | None:
        """Store a transition, train once, and sync the target on schedule."""
        self.buffer.push(t)
        loss = train_step(self.buffer, self.primary, self.target, self.optimizer, self.config, self.rng)
        self.global_step += 1
        if self.global_step % self.config.target_sync_every == 0:
            sync_target(self.primary, self.target)
        return loss


def train_loop(
    env: DrivingEnv,
    encoder: Callable[[np.ndarray], np.ndarray],
    config: DqnConfig = DqnConfig(),
    total_steps: int = 100_000,
    seed: int = 0,
    agent: DqnAgent | None = None,
    epsilon_override: float | None = None,
    on_episode: Callable[[EpisodeRecord], None] | None = None,
    on_step: Callable[[DqnAgent], None] | None = None,
) -> list[EpisodeRecord]:
    """Run epsilon-greedy deep Q-learning for ``total_steps`` environment steps.

    ``encoder`` maps an RGB frame to its latent state. Timeouts end the episode
    but are stored as non-terminal transitions. Episodes cut off by the step
    budget are not logged.
    """
    agent = agent or DqnAgent(config, seed)
    env.seed(seed)
    log: list[EpisodeRecord] = []
    if total_steps <= 0:
        return log
    steps_done = 0
    episode = 0
    while steps_done < total_steps:
        res = env.reset()
        s = encoder(res.rgb)
        rewards, losses = [], []
        while True:
            eps = epsilon_override if epsilon_override is not None else epsilon_at(config.epsilon, agent.global_step)
            a = agent.act(s, eps)
            res = env.step(a)
            s_next = encoder(res.rgb)
            terminal = res.done and res.reason != M.TIMEOUT
            loss = agent.observe(Transition(s, a, res.reward, s_next, terminal))
            if loss is not None:
                losses.append(loss)
            rewards.append(res.reward)
            steps_done += 1
            s = s_next
            if on_step is not None:
                on_step(agent)
            if res.done or steps_done >= total_steps:
                break
        if not res.done:
            break
        rec = EpisodeRecord(
            episode=episode,
            steps=len(rewards),
            ret=float(sum(rewards)),
            discounted_return=discounted_return(rewards, config.gamma),
            epsilon=eps,
            mean_td_loss=float(np.mean(losses)) if losses else float("nan"),
            termination_reason=res.reason,
            goal_reached=env.goal_reached,
        )
        log.append(rec)
        if on_episode is not None:
            on_episode(rec)
        episode += 1
    return log


def run_episode(env: DrivingEnv, policy: Callable[[np.ndarray], int]) -> tuple[float, int, str, bool]:
    """Roll out one episode with ``policy(rgb) -> action``; returns (return, steps, reason, goal)."""
    res = env.reset()
    total, steps = 0.0, 0
    while True:
        res = env.step(policy(res.rgb))
        total += res.reward
        steps += 1
        if res.done:
            return total, steps, res.reason, env.goal_reached


def evaluate(
    q_net: Sequential,
    encoder: Callable[[np.ndarray], np.ndarray],
    env: DrivingEnv,
    episodes: int,
    seed: int = 0,
) -> dict:
    """Greedy (epsilon = 0) rollouts summarised as mean/min/max return and turn completions."""
    if episodes <= 0:
        raise ValueError("evaluate needs at least one episode")
    env.seed(seed)
    runs = [
        run_episode(env, lambda rgb: int(np.argmax(q_forward(q_net, encoder(rgb)))))
        for _ in range(episodes)
    ]
    returns = [r[0] for r in runs]
    return {
        "episodes": episodes,
        "mean_return": float(np.mean(returns)),
        "min_return": float(np.min(returns)),
        "max_return": float(np.max(returns)),
        "mean_length": float(np.mean([r[1] for r in runs])),
        "turn_completions": int(sum(r[3] for r in runs)),
        "returns": [float(r) for r in returns],
        "lengths": [int(r[1]) for r in runs],
        "termination_reasons": [r[2] for r in runs],
    }


# -- tabular oracle -------------------------------------------------------------------------


@dataclass
class TabularMDP:
    """Finite MDP: P[s, a, s'] transition probabilities, R[s, a] rewards,
    terminal[s, a] marks transitions after which the episode ends."""

    P: np.ndarray
    R: np.ndarray
    terminal: np.ndarray

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.R = np.asarray(self.R, dtype=np.float64)
        self.terminal = np.asarray(self.terminal, dtype=bool)
        n_s, n_a = self.R.shape
        if self.P.shape != (n_s, n_a, n_s) or self.terminal.shape != (n_s, n_a):
            raise ValueError("inconsistent MDP array shapes")
        if not (np.all(np.isfinite(self.P)) and np.all(np.isfinite(self.R))):
            raise ValueError("MDP must have finite transition probabilities and rewards")
        if np.any(np.abs(self.P.sum(-1) - 1) > 1e-9):
            raise ValueError("transition probabilities must sum to 1")

    @property
    def n_states(self) -> int:
        return self.R.shape[0]

    @property
    def n_actions(self) -> int:
        return self.R.shape[1]


def value_iteration_oracle(mdp: TabularMDP, gamma: float, tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    """Iterate Bellman optimality backups on Q until the sup-norm change is below ``tol``."""
    q = np.zeros_like(mdp.R)
    for _ in range(max_iter):
        v = q.max(axis=1)
        new = mdp.R + gamma * (~mdp.terminal) * (mdp.P @ v)
        if np.max(np.abs(new - q)) < tol:
            return new
        q = new
    raise RuntimeError("value iteration did not converge")


def corridor_mdp(n_states: int = 5, goal_reward: float = 1.0) -> TabularMDP:
    """Deterministic corridor: actions left / stay / right; stepping right out of the
    last state earns ``goal_reward`` and ends the episode."""
    P = np.zeros((n_states, 3, n_states))
    R = np.zeros((n_states, 3))
    term = np.zeros((n_states, 3), dtype=bool)
    for s in range(n_states):
        P[s, 0, max(s - 1, 0)] = 1.0
        P[s, 1, s] = 1.0
        if s == n_states - 1:
            P[s, 2, s] = 1.0
            R[s, 2] = goal_reward
            term[s, 2] = True
        else:
            P[s, 2, s + 1] = 1.0
    return TabularMDP(P, R, term)


def brute_force_q(mdp: TabularMDP, gamma: float, horizon: int) -> np.ndarray:
    """Best discounted return over every action sequence of length <= ``horizon``
    (deterministic MDPs only)."""
    if np.any((mdp.P != 0) & (mdp.P != 1)):
        raise ValueError("brute force enumeration needs a deterministic MDP")
    nxt = mdp.P.argmax(axis=2)
    q = np.full(mdp.R.shape, -np.inf)
    for s0, a0 in itertools.product(range(mdp.n_states), range(mdp.n_actions)):
        best = -np.inf
        for tail in itertools.product(range(mdp.n_actions), repeat=horizon - 1):
            s, total, scale = s0, 0.0, 1.0
            for a in (a0,) + tail:
                total += scale * mdp.R[s, a]
                if mdp.terminal[s, a]:
                    break
                s, scale = nxt[s, a], scale * gamma
            best = max(best, total)
        q[s0, a0] = best
    return q


def one_hot_states(n_states: int, state_dim: int = 64) -> np.ndarray:
    """Row i is the one-hot code of tabular state i, zero-padded to ``state_dim``."""
    if n_states > state_dim:
        raise ValueError("more tabular states than input dimensions")
    return np.eye(n_states, state_dim)


def fit_tabular(
    mdp: TabularMDP,
    gamma: float,
    max_steps: int = 50_000,
    batch_size: int = 32,
    target_sync_every: int = 100,
    learning_rate: float = 1e-3,
    seed: int = 0,
    q_star: np.ndarray | None = None,
    tol: float = 0.05,
    check_every: int = 250,
) -> tuple[Sequential, int, float]:
    """Train the control network on every transition of a deterministic tabular MDP.

    States are fed as zero-padded one-hot vectors. The replay buffer holds each
    (s, a) transition once, minibatches are drawn with replacement, and targets
    come from a periodically synced copy, just as in the driving loop. When
    ``q_star`` is given training stops as soon as max |Q - Q*| <= ``tol``.
    Returns (network, gradient steps taken, final max error or nan).
    """
    n_s, n_a = mdp.R.shape
    nxt = mdp.P.argmax(axis=2)
    codes = one_hot_states(n_s)
    buf = ReplayBuffer(n_s * n_a, codes.shape[1])
    for s in range(n_s):
        for a in range(n_a):
            buf.push(Transition(codes[s], a, mdp.R[s, a], codes[nxt[s, a]], bool(mdp.terminal[s, a])))
    spec = QNetworkSpec(Q_LAYER_SIZES[:-1] + (n_a,))
    primary = build_q_network(spec, seed)
    target = clone_network(primary, spec)
    optimizer = make_optimizer("adam", learning_rate)
    rng = np.random.default_rng(seed)
    err = float("nan")
    for step in range(1, max_steps + 1):
        batch = buf.sample(batch_size, rng)
        td_regression(primary, batch, td_targets(batch, target, gamma))
        optimizer.step(primary.state_dict(), dict(primary.named_grads()))
        if step % target_sync_every == 0:
            sync_target(primary, target)
        if q_star is not None and step % check_every == 0:
            err = float(np.max(np.abs(q_forward(primary, codes) - q_star)))
            if err <= tol:
                return primary, step, err
    return primary, max_steps, err
