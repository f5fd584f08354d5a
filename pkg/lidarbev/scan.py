# This file is part of lidarbev-desk.
#
# Copyright (C) 2026  lidarbev-desk contributors.
#
# This program is provided to you as free software: you can redistribute it and/or modify it under
# the terms of the GNU General Public License as published by the Free Software Foundation, either
# version 3 of the License, or (at your option) any later version. It is distributed in the hope
# that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the GNU General Public License for more
# details. You should have received a copy of the GNU General Public License along with this
# program. If not, see https://www.gnu.org/licenses/.

"""
Selective state-space scan and the gated single-layer sequence block built around it.

The recurrence runs over a serialized voxel sequence of length L with E inner channels
and S state dimensions per channel:

    dA_t = exp(delta_t * A)
    h_t  = dA_t * h_{t-1} + (delta_t * u_t) B_t
    y_t  = h_t C_t + D * u_t

with h_0 = 0. The scan loops over positions; backward replays it in reverse from the saved
states.
"""

import logging

import numpy as np

from bevgrad import basic_ops, nn_ops
from bevgrad.tensor import Primitive, Tensor, TensorLike, as_tensor, parameter

from .modules import Linear, Module


logger = logging.getLogger(__name__)

DT_RANGE = (1e-2, 1e-1)


@Primitive.register
class SelectiveScan(Primitive):
    """
    Inputs: u (L, E), delta (L, E) positive, A (E, S) negative, B (L, S), C (L, S), D (E,).
    """

    name = 'selective_scan'

    @staticmethod
    def forward(ctx, u, delta, a, b, c, d):
        length, inner = u.shape
        state = np.zeros((inner, a.shape[1]))
        states = np.empty((length, inner, a.shape[1]))
        decays = np.empty_like(states)
        y = np.empty((length, inner))
        for t in range(length):
            decays[t] = np.exp(delta[t][:, None] * a)
            state = decays[t] * state + (delta[t] * u[t])[:, None] * b[t][None, :]
            states[t] = state
            y[t] = state @ c[t] + d * u[t]
        ctx.saved = u, delta, a, b, c, d, states, decays
        return y

    @staticmethod
    def backward(ctx, grad):
        u, delta, a, b, c, d, states, decays = ctx.saved
        length, inner = u.shape
        du, ddelta = np.zeros_like(u), np.zeros_like(delta)
        da, db, dc, dd = np.zeros_like(a), np.zeros_like(b), np.zeros_like(c), np.zeros_like(d)
        dstate = np.zeros_like(states[0])
        for t in range(length - 1, -1, -1):
            dy = grad[t]
            dc[t] = dy @ states[t]
            dstate = dstate + dy[:, None] * c[t][None, :]
            previous = states[t - 1] if t > 0 else np.zeros_like(dstate)
            ddecay = dstate * previous * decays[t]
            da += ddecay * delta[t][:, None]
            drive = (dstate * b[t][None, :]).sum(axis=1)
            ddelta[t] = (ddecay * a).sum(axis=1) + drive * u[t]
            db[t] = (dstate * (delta[t] * u[t])[:, None]).sum(axis=0)
            du[t] = drive * delta[t] + dy * d
            dd += dy * u[t]
            dstate = dstate * decays[t]
        return du, ddelta, da, db, dc, dd

    @classmethod
    def sample(cls, rng):
        length, inner, states = 4, 2, 3
        return [
            rng.normal(size=(length, inner)),
            rng.uniform(0.1, 1.0, size=(length, inner)),
            -rng.uniform(0.2, 2.0, size=(inner, states)),
            rng.normal(size=(length, states)),
            rng.normal(size=(length, states)),
            rng.normal(size=(inner,)),
        ], {}


def scan(u: TensorLike, delta: TensorLike, a: TensorLike, b: TensorLike, c: TensorLike, d: TensorLike) -> Tensor:
    return SelectiveScan.apply(u, delta, a, b, c, d)


def dt_bias(rng: np.random.Generator, inner: int, dt_range=DT_RANGE) -> np.ndarray:
    """
    Bias whose softplus lands log-uniformly inside `dt_range`.
    """
    dt = np.exp(rng.uniform(np.log(dt_range[0]), np.log(dt_range[1]), size=inner))
    # inverse softplus
    return dt + np.log(-np.expm1(-dt))


class ScanParams(Module):
    """
    Weights of one gated scan layer over sequences with `channel_dim` features.
    """

    def __init__(self, channel_dim: int, rng: np.random.Generator, state_dim: int = 8, expand: int = 2,
                 use_conv: bool = True, conv_width: int = 4):
        inner = expand * channel_dim
        self.channel_dim, self.inner_dim, self.state_dim = channel_dim, inner, state_dim
        self.in_proj = Linear(channel_dim, inner, rng, bias=False)
        self.gate_proj = Linear(channel_dim, inner, rng, bias=False)
        self.use_conv = use_conv
        if use_conv:
            self.conv_weight = parameter(rng.normal(scale=1.0 / np.sqrt(conv_width), size=(inner, conv_width)))
            self.conv_bias = parameter(np.zeros(inner))
        self.dt_proj = Linear(inner, inner, rng, std=inner ** -0.5)
        self.dt_proj.bias.data[:] = dt_bias(rng, inner)
        self.B_proj = Linear(inner, state_dim, rng, bias=False, std=inner ** -0.5)
        self.C_proj = Linear(inner, state_dim, rng, bias=False, std=inner ** -0.5)
        self.A_log = parameter(np.tile(np.log(np.arange(1, state_dim + 1, dtype=np.float64)), (inner, 1)))
        self.D_skip = parameter(np.ones(inner))
        self.out_proj = Linear(inner, channel_dim, rng, std=inner ** -0.5)

    def decay_rates(self) -> Tensor:
        """
        A = -exp(A_log), strictly negative so every discretized decay lies in (0, 1).
        """
        return basic_ops.scale(basic_ops.exp(self.A_log), -1.0)


def selective_scan(seq: TensorLike, params: ScanParams) -> Tensor:
    """
    Runs the input-dependent recurrence over an (L, E) inner sequence.

    The step size, input and output projections are computed per position from `seq`;
    the step size is positive through softplus.
    """
    seq = as_tensor(seq)
    delta = basic_ops.softplus(params.dt_proj(seq))
    b = params.B_proj(seq)
    c = params.C_proj(seq)
    return scan(seq, delta, params.decay_rates(), b, c, params.D_skip)


def mamba_layer(seq: TensorLike, params: ScanParams) -> Tensor:
    """
    Gated scan block with a residual connection.

    Args:
        seq: (L, C) sequence, C == params.channel_dim
        params: layer weights

    Returns:
        (L, C) sequence: seq + out_proj(scan(conv(in_proj(seq))) * silu(gate_proj(seq)))
    """
    seq = as_tensor(seq)
    inner = params.in_proj(seq)
    if params.use_conv:
        inner = basic_ops.silu(nn_ops.causal_conv1d(inner, params.conv_weight, params.conv_bias))
    scanned = selective_scan(inner, params)
    gated = basic_ops.mul(scanned, basic_ops.silu(params.gate_proj(seq)))
    return basic_ops.add(seq, params.out_proj(gated))
