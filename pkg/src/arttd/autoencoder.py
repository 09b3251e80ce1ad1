"""Reliability encoder, event encoder, observation decoder, and the
Monte-Carlo loss and pathwise gradients that train them jointly.

The latent draws are reparameterized so the loss is a deterministic function
of the network weights once the noise is frozen: each agent's reliability
vector is its encoder output plus a single shared Gaussian deviate scaled by
b, and each event state is a temperature-relaxed argmax over Gumbel-perturbed
log-probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ObservationMatrix, onehot_col, onehot_row, onehot_cols_all, onehot_rows_all
from .nets import AdamState, DenseNet, adam_step, backward, forward

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class ReliabilitySample:
    """One reparameterized draw of every agent's reliability vector."""

    o: np.ndarray       # (N, R1*R2) encoder means, rows on the simplex
    zeta: np.ndarray    # (N,) standard normal, one scalar per agent
    vec_c: np.ndarray   # (N, R1*R2), vec_c = o + zeta * b

    def matrices(self, r1: int, r2: int) -> np.ndarray:
        return self.vec_c.reshape(-1, r1, r2)


@dataclass
class EventSample:
    """One Gumbel draw per event: the relaxed simplex and the hard argmax."""

    u: np.ndarray              # (J, R) encoder output
    chi: np.ndarray            # (J, R) Gumbel(0, 1) draws
    theta_relaxed: np.ndarray  # (J, R) rows on the simplex
    theta_hard: np.ndarray     # (J,) int


@dataclass
class FrozenNoise:
    zeta: np.ndarray  # (N,)
    chi: np.ndarray   # (J, R)


def build_nets(obs: ObservationMatrix, hyper, rng) -> tuple:
    """The three networks sized for a dataset: reliability encoder
    (J*R -> R1*R2, simplex), event encoder (N*R -> R, simplex), decoder
    (R1*R2 + R -> R, squash)."""
    from .nets import init_net

    enc_r, enc_e, dec = hyper.layer_sizes
    R = obs.n_states
    net_r = init_net((obs.n_events * R, *enc_r, hyper.n_rel), "simplex", rng)
    net_e = init_net((obs.n_agents * R, *enc_e, R), "simplex", rng)
    net_d = init_net((hyper.n_rel + R, *dec, R), "squash", rng)
    return net_r, net_e, net_d


def encode_reliability(net_r: DenseNet, obs: ObservationMatrix, agent: int) -> np.ndarray:
    if net_r.dims[0] != obs.n_events * obs.n_states or net_r.head != "simplex":
        raise ValueError("reliability encoder shape/head does not match the dataset")
    o, _ = forward(net_r, onehot_row(obs, agent))
    return o


def encode_event(net_e: DenseNet, obs: ObservationMatrix, event: int) -> np.ndarray:
    if net_e.dims[0] != obs.n_agents * obs.n_states or net_e.head != "simplex":
        raise ValueError("event encoder shape/head does not match the dataset")
    u, _ = forward(net_e, onehot_col(obs, event))
    return u


def reliability_from_noise(o: np.ndarray, zeta, b: float) -> np.ndarray:
    """vec_c = o + zeta * b with one shared deviate per agent row."""
    o = np.asarray(o, dtype=np.float64)
    zeta = np.asarray(zeta, dtype=np.float64)
    if o.ndim == 1:
        return o + float(zeta) * b
    return o + zeta[:, None] * b


def sample_reliability(o: np.ndarray, b: float, rng) -> ReliabilitySample:
    if b < 0:
        raise ValueError("b must be non-negative")
    o = np.atleast_2d(np.asarray(o, dtype=np.float64))
    zeta = rng.standard_normal(o.shape[0])
    return ReliabilitySample(o=o, zeta=zeta, vec_c=reliability_from_noise(o, zeta, b))


def gumbel_from_uniform(unif: np.ndarray) -> np.ndarray:
    return -np.log(-np.log(unif))


def event_from_noise(u: np.ndarray, chi: np.ndarray, tau: float, epsilon: float) -> EventSample:
    """Relaxed and hard state draws from fixed Gumbel noise.

    hard = argmax(chi + log u); relaxed = softmax((chi + log u) / tau).
    u is floored at epsilon before the log.
    """
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    chi = np.atleast_2d(np.asarray(chi, dtype=np.float64))
    logits = chi + np.log(np.maximum(u, epsilon))
    hard = logits.argmax(axis=1)
    a = logits / tau
    e = np.exp(a - a.max(axis=1, keepdims=True))
    relaxed = e / e.sum(axis=1, keepdims=True)
    return EventSample(u=u, chi=chi, theta_relaxed=relaxed, theta_hard=hard)


def sample_event(u: np.ndarray, tau: float, rng, epsilon: float = 1e-10) -> EventSample:
    if tau <= 0:
        raise ValueError("tau must be positive")
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    chi = gumbel_from_uniform(rng.random(u.shape))
    return event_from_noise(u, chi, tau, epsilon)


def decode(net_d: DenseNet, vec_c: np.ndarray, theta_relaxed: np.ndarray,
           epsilon: float) -> np.ndarray:
    """Per-pair report probabilities in [epsilon, 1 - epsilon].  Accepts a
    single (vec_c, theta) pair or aligned batches."""
    vec_c = np.atleast_2d(np.asarray(vec_c, dtype=np.float64))
    theta = np.atleast_2d(np.asarray(theta_relaxed, dtype=np.float64))
    x = np.concatenate([vec_c, theta], axis=1)
    if net_d.dims[0] != x.shape[1] or net_d.head != "squash":
        raise ValueError("decoder shape/head does not match its inputs")
    d, _ = forward(net_d, x)
    d = np.clip(d, epsilon, 1.0 - epsilon)
    return d[0] if np.asarray(theta_relaxed).ndim == 1 else d


# ---------------------------------------------------------------------------
# loss terms
# ---------------------------------------------------------------------------

def onehot_targets(obs: ObservationMatrix, pair_n: np.ndarray, pair_j: np.ndarray) -> np.ndarray:
    t = np.zeros((pair_n.size, obs.n_states))
    t[np.arange(pair_n.size), obs.values[pair_n, pair_j]] = 1.0
    return t


def bernoulli_loglik(targets: np.ndarray, d: np.ndarray) -> float:
    """Sum of independent Bernoulli log-likelihoods of the one-hot targets."""
    return float(np.sum(targets * np.log(d) + (1.0 - targets) * np.log1p(-d)))


def reliability_prior_loglik(vec_c: np.ndarray, ctilde: np.ndarray,
                             s: np.ndarray, b_prime: float) -> float:
    """log density of the agent vectors around their community's matrix,
    independent entries with variance b_prime."""
    flat = ctilde.reshape(ctilde.shape[0], -1)
    diff = vec_c - flat[s]
    n_terms = diff.size
    return float(-(diff ** 2).sum() / (2.0 * b_prime)
                 - 0.5 * n_terms * (LOG_2PI + np.log(b_prime)))


def encoder_gaussian_loglik(vec_c: np.ndarray, o: np.ndarray, b: float) -> float:
    """log density of the draw under the encoder's per-entry Gaussian with
    variance b.  Constant in the encoder weights once the noise is frozen."""
    diff = vec_c - o
    n_terms = diff.size
    return float(-(diff ** 2).sum() / (2.0 * b)
                 - 0.5 * n_terms * (LOG_2PI + np.log(b)))


def loss_l11(rel: ReliabilitySample, ev: EventSample, obs: ObservationMatrix,
             net_d: DenseNet, ctilde: np.ndarray, s: np.ndarray, hyper) -> float:
    """Single-draw estimate of the reconstruction-plus-prior cost (the term
    minimized in the network weights), with the convention that lower is
    better: -(log p(C | communities) + log p(M | C, theta) - log q(C))."""
    pair_n, pair_j = obs.observed_pairs()
    if pair_n.size:
        d = decode(net_d, rel.vec_c[pair_n], ev.theta_relaxed[pair_j], hyper.epsilon)
        obs_ll = bernoulli_loglik(onehot_targets(obs, pair_n, pair_j), d)
    else:
        obs_ll = 0.0
    prior_ll = reliability_prior_loglik(rel.vec_c, ctilde, s, hyper.b_prime)
    q_ll = encoder_gaussian_loglik(rel.vec_c, rel.o, hyper.b)
    return -(prior_ll + obs_ll - q_ll)


def loss_l12(theta_relaxed: np.ndarray, log_u: np.ndarray, log_mv: np.ndarray) -> float:
    """Relaxed divergence of the event posterior from the vote-share prior:
    sum_j sum_r theta[j,r] * (log u[j,r] - log prior[j,r])."""
    return float(np.sum(theta_relaxed * (log_u - log_mv)))


# ---------------------------------------------------------------------------
# joint objective and pathwise gradients
# ---------------------------------------------------------------------------

def _run(nets, x_rel, x_ev, obs, noise, ctilde, s, log_mv, hyper, want_grads):
    net_r, net_e, net_d = nets
    eps = hyper.epsilon
    pair_n, pair_j = obs.observed_pairs()

    o, cache_r = forward(net_r, x_rel)
    u, cache_e = forward(net_e, x_ev)

    u_floor = np.maximum(u, eps)
    log_u = np.log(u_floor)
    a = (noise.chi + log_u) / hyper.tau
    exp_a = np.exp(a - a.max(axis=1, keepdims=True))
    theta = exp_a / exp_a.sum(axis=1, keepdims=True)

    vec_c = o + noise.zeta[:, None] * hyper.b

    x_dec = np.concatenate([vec_c[pair_n], theta[pair_j]], axis=1)
    d_raw, cache_d = forward(net_d, x_dec)
    d = np.clip(d_raw, eps, 1.0 - eps)
    targets = onehot_targets(obs, pair_n, pair_j)

    obs_ll = bernoulli_loglik(targets, d)
    ctilde_flat = ctilde.reshape(ctilde.shape[0], -1)
    c_diff = vec_c - ctilde_flat[s]
    prior_ll = float(-(c_diff ** 2).sum() / (2.0 * hyper.b_prime)
                     - 0.5 * c_diff.size * (LOG_2PI + np.log(hyper.b_prime)))
    q_ll = float(-(noise.zeta ** 2 * hyper.b).sum() * vec_c.shape[1] / 2.0
                 - 0.5 * vec_c.size * (LOG_2PI + np.log(hyper.b)))
    l11 = -(prior_ll + obs_ll - q_ll)
    l12 = float(np.sum(theta * (log_u - log_mv)))
    loss = l11 + l12
    if not want_grads:
        return loss, l11, l12, None

    # decoder: d(loss)/dd, gradient blocked where the clamp was active
    dd = -(targets / d - (1.0 - targets) / (1.0 - d))
    dd[(d_raw < eps) | (d_raw > 1.0 - eps)] = 0.0
    dw_d, db_d, dx_dec = backward(net_d, cache_d, dd)

    n_rel = vec_c.shape[1]
    dvec_c = c_diff / hyper.b_prime  # from -prior_ll; the q term is constant in o
    np.add.at(dvec_c, pair_n, dx_dec[:, :n_rel])
    dw_r, db_r, _ = backward(net_r, cache_r, dvec_c)

    dtheta = log_u - log_mv  # from l12
    np.add.at(dtheta, pair_j, dx_dec[:, n_rel:])
    da = theta * (dtheta - (dtheta * theta).sum(axis=1, keepdims=True))
    dlog_u = da / hyper.tau + theta  # relaxation path + explicit l12 term
    du = np.where(u >= eps, dlog_u / u_floor, 0.0)
    dw_e, db_e, _ = backward(net_e, cache_e, du)

    grads = {"reliability": (dw_r, db_r), "event": (dw_e, db_e), "decoder": (dw_d, db_d)}
    return loss, l11, l12, grads


def autoencoder_objective(nets, x_rel, x_ev, obs, noise: FrozenNoise,
                          ctilde, s, log_mv, hyper) -> float:
    """Total training loss for frozen noise; pure in the network weights."""
    loss, _, _, _ = _run(nets, x_rel, x_ev, obs, noise, ctilde, s, log_mv, hyper, False)
    return loss


def autoencoder_gradients(nets, x_rel, x_ev, obs, noise: FrozenNoise,
                          ctilde, s, log_mv, hyper):
    """Returns (loss, l11, l12, grads) with analytic gradients for all three
    networks, matching finite differences of autoencoder_objective."""
    return _run(nets, x_rel, x_ev, obs, noise, ctilde, s, log_mv, hyper, True)


def autoencoder_step(nets, opts, x_rel, x_ev, obs, noise: FrozenNoise,
                     ctilde, s, log_mv, hyper):
    """One sampled gradient step on all three networks.  Returns the loss
    pieces evaluated before the update."""
    loss, l11, l12, grads = _run(nets, x_rel, x_ev, obs, noise, ctilde, s,
                                 log_mv, hyper, True)
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite training loss {loss}")
    for name, net, opt in zip(("reliability", "event", "decoder"), nets, opts):
        dw, db = grads[name]
        params, gs = [], []
        for w, b, gw, gb in zip(net.weights, net.biases, dw, db):
            params.extend((w, b))
            gs.extend((gw, gb))
        adam_step(opt, params, gs)
    return loss, l11, l12


def adam_states(nets, lr: float) -> tuple:
    return tuple(AdamState.for_net(net, lr) for net in nets)
