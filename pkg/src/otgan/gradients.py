"""Gradients of the combined transport loss for both players.

The matching matrix of each term is treated as a constant of the backward
pass: it minimizes the smoothed transport objective, so its own sensitivity
contributes nothing to first order, and the solver is simply excluded from
the differentiation tape. Gradients therefore flow through the cost
matrices, the embedding network, and the generator only.

One engine serves the unconditional six-term loss, the conditional
four-term loss (side information entering as extra columns), and the
random-matching variant (plan replaced by a random permutation matrix,
equally constant).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import transport
from .distances import ALG1_TERMS, LossBreakdown
from .nets import Gradients, Mlp
from .numerics import Rng
from .transport import CostSpec, SinkhornConfig

__all__ = [
    "GeneratedBatch",
    "combined_loss_gradients",
    "identity_embedder",
    "loss_gradients",
]


@dataclass
class GeneratedBatch:
    """A generator-side batch: the latent that produces it, plus optional
    side-information columns appended after the generator output."""

    latent: np.ndarray
    side: np.ndarray | None = None


def identity_embedder(dim: int, normalize: bool) -> Mlp:
    """Parameter-free embedding: the input itself, optionally row-normalized.

    Stands in for the critic when the transport cost lives in the original
    feature space, so cosine costs still differentiate through the
    normalization.
    """
    return Mlp(sizes=[int(dim)], weights=[], biases=[], normalize_output=normalize)


def _cost_pair_grads(spec: CostSpec, w: np.ndarray, ua: np.ndarray, ub: np.ndarray,
                     c: np.ndarray):
    """d(sum_ij w_ij C_ij)/dU_a and /dU_b for weight matrix w.

    Cosine formulas assume unit-norm embeddings, which both the critic head
    and the identity embedder guarantee.
    """
    if spec.is_cosine:
        return -(w @ ub), -(w.T @ ua)
    if spec.kind == "squared-euclidean":
        ga = 2.0 * (w.sum(axis=1)[:, None] * ua - w @ ub)
        gb = 2.0 * (w.sum(axis=0)[:, None] * ub - w.T @ ua)
        return ga, gb
    # euclidean; matched identical points get a zero subgradient
    r = np.where(c > 0.0, w / np.where(c > 0.0, c, 1.0), 0.0)
    ga = r.sum(axis=1)[:, None] * ua - r @ ub
    gb = r.sum(axis=0)[:, None] * ub - r.T @ ua
    return ga, gb


def combined_loss_gradients(
    data: dict,
    generated: dict,
    generator: Mlp,
    critic: Mlp | None,
    terms,
    spec: CostSpec,
    cfg: SinkhornConfig,
    match_rng: Rng | None = None,
):
    """Loss value and parameter gradients for a signed term combination.

    `data` maps batch keys to fixed matrices; `generated` maps keys to
    GeneratedBatch records whose outputs are recomputed here with tapes.
    Returns (generator Gradients, critic Gradients or None, LossBreakdown);
    terms whose solve hit the iteration cap are flagged on the breakdown.
    """
    batches = dict(data)
    gen_tapes = {}
    for key, gb in generated.items():
        out, tape = generator.forward(gb.latent)
        gen_tapes[key] = (tape, out.shape[1])
        batches[key] = out if gb.side is None else np.concatenate([out, gb.side], axis=1)

    if spec.needs_critic:
        if critic is None:
            raise ValueError("learned-cosine cost requires a critic")
        embedder = critic
    else:
        width = next(iter(batches.values())).shape[1]
        embedder = identity_embedder(width, normalize=spec.is_cosine)

    emb = {}
    emb_tapes = {}
    for key, batch in batches.items():
        emb[key], emb_tapes[key] = embedder.forward(batch)

    breakdown = LossBreakdown()
    unconverged = []
    total = 0.0
    demb = {key: np.zeros_like(u) for key, u in emb.items()}
    for name, key_a, key_b, coef in terms:
        c = transport.pairwise_cost(emb[key_a], emb[key_b], spec)
        if match_rng is None:
            result = transport.sinkhorn(c, cfg)
            plan = result.plan
            w_val = result.distance
            if not result.converged:
                unconverged.append(name)
        else:
            k = c.shape[0]
            perm = match_rng.permutation(k)
            plan = np.zeros((k, k))
            plan[np.arange(k), perm] = 1.0
            w_val = float(c[np.arange(k), perm].sum())
        setattr(breakdown, LossBreakdown._FIELD_BY_TERM[name], w_val)
        total += coef * w_val
        ga, gb = _cost_pair_grads(spec, coef * plan, emb[key_a], emb[key_b], c)
        demb[key_a] += ga
        demb[key_b] += gb
    breakdown.total = total
    breakdown.unconverged_terms = tuple(unconverged)

    critic_grads = Gradients.zeros_like(embedder) if embedder.n_layers > 0 else None
    gen_grads = Gradients.zeros_like(generator)
    for key in batches:
        params, g_in = emb_tapes[key].backward(demb[key])
        if critic_grads is not None:
            critic_grads.add_(params)
        if key in generated:
            tape, out_width = gen_tapes[key]
            g_params, _ = tape.backward(g_in[:, :out_width])
            gen_grads.add_(g_params)
    return gen_grads, critic_grads, breakdown


def loss_gradients(
    x: np.ndarray,
    x2: np.ndarray,
    z: np.ndarray,
    z2: np.ndarray,
    generator: Mlp,
    critic: Mlp | None,
    spec: CostSpec,
    cfg: SinkhornConfig,
    match_rng: Rng | None = None,
):
    """Six-term loss and gradients from data batches and recorded latents.

    The generated batches are the generator's outputs on `z` and `z2`;
    gradients for the generator descend the loss and gradients for the
    critic ascend it (the caller picks the direction at update time).
    """
    return combined_loss_gradients(
        data={"x": x, "x2": x2},
        generated={"y": GeneratedBatch(z), "y2": GeneratedBatch(z2)},
        generator=generator,
        critic=critic,
        terms=ALG1_TERMS,
        spec=spec,
        cfg=cfg,
        match_rng=match_rng,
    )
