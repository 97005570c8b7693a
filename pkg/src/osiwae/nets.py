"""Minimal feed-forward networks with explicit backpropagation.

Networks are rectifier MLPs with identity output, evaluated in batches.
Parameters live in flat float64 vectors (layout: per layer, weight matrix in
row-major order followed by the bias) so they can be embedded directly in a
ParamVector block.  backward() returns per-sample parameter gradients, which
is what the per-particle weight gradients downstream require.

The rectifier subgradient at exactly zero is defined as zero; the same
activity mask is recorded on the forward tape and reused in backward, so
forward and backward always agree on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Tape:
    """Activation record from one forward call.

    Valid only for the exact params array and inputs it was created with.
    """

    params: np.ndarray
    inputs: list      # layer inputs: [X, h_1, ..., h_{L-1}], each (B, n_in)
    masks: list       # rectifier activity masks for hidden layers, (B, n_out)


class Mlp:
    """Fully connected net: affine -> relu -> ... -> affine (identity out)."""

    def __init__(self, sizes):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ValueError(f"bad layer sizes {sizes}")
        self.sizes = sizes
        self._layout = []
        offset = 0
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            self._layout.append((offset, n_in, n_out))
            offset += n_out * n_in + n_out
        self.n_params = offset

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform Glorot weights, zero biases."""
        params = np.zeros(self.n_params)
        for offset, n_in, n_out in self._layout:
            bound = np.sqrt(6.0 / (n_in + n_out))
            w = rng.uniform(-bound, bound, size=(n_out, n_in))
            params[offset: offset + n_out * n_in] = w.ravel()
        return params

    def unpack(self, params: np.ndarray):
        """Views (W, b) per layer into the flat vector; no copies."""
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {params.shape}")
        layers = []
        for offset, n_in, n_out in self._layout:
            w = params[offset: offset + n_out * n_in].reshape(n_out, n_in)
            b = params[offset + n_out * n_in: offset + n_out * n_in + n_out]
            layers.append((w, b))
        return layers

    def forward(self, params: np.ndarray, x: np.ndarray):
        """Evaluate the net on a batch x of shape (B, n_in).

        Returns (output (B, n_out), tape).
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"input shape {x.shape} incompatible with n_in={self.n_in}")
        layers = self.unpack(params)
        inputs = [x]
        masks = []
        h = x
        for li, (w, b) in enumerate(layers):
            z = h @ w.T + b
            if li < len(layers) - 1:
                mask = z > 0.0
                h = np.where(mask, z, 0.0)
                masks.append(mask)
                inputs.append(h)
            else:
                h = z
        return h, Tape(params=params, inputs=inputs, masks=masks)

    def backward(self, params: np.ndarray, tape: Tape, upstream: np.ndarray):
        """Gradients of <upstream, output> per sample.

        upstream: (B, n_out).  Returns (param_grads (B, n_params),
        input_grads (B, n_in)).  The tape must come from a forward call with
        this exact params array.
        """
        if tape.params is not params:
            raise ValueError("stale tape: params changed since forward")
        upstream = np.asarray(upstream, dtype=np.float64)
        batch = tape.inputs[0].shape[0]
        if upstream.shape != (batch, self.n_out):
            raise ValueError(f"upstream shape {upstream.shape} != ({batch}, {self.n_out})")
        layers = self.unpack(params)
        grads = np.empty((batch, self.n_params))
        delta = upstream
        for li in range(len(layers) - 1, -1, -1):
            offset, n_in, n_out = self._layout[li]
            w, _ = layers[li]
            a = tape.inputs[li]
            dw = np.einsum("bo,bi->boi", delta, a)
            grads[:, offset: offset + n_out * n_in] = dw.reshape(batch, -1)
            grads[:, offset + n_out * n_in: offset + n_out * n_in + n_out] = delta
            delta = delta @ w
            if li > 0:
                delta = delta * tape.masks[li - 1]
        return grads, delta


class GaussianProposalHead:
    """Two nets mapping a conditioning feature vector to mean and log-std.

    Both nets share the input dimension; outputs have the latent dimension.
    Parameters are the concatenation [mean-net params, log-std-net params].
    """

    def __init__(self, n_features: int, d_x: int, hidden=(64,), init_log_std: float = np.log(0.5)):
        sizes = (n_features, *hidden, d_x)
        self.mean_net = Mlp(sizes)
        self.logstd_net = Mlp(sizes)
        self.n_params = self.mean_net.n_params + self.logstd_net.n_params
        self.init_log_std = float(init_log_std)

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        mean_p = self.mean_net.init_params(rng)
        logstd_p = self.logstd_net.init_params(rng)
        # bias the initial proposal scale; keeps early importance weights sane
        logstd_p[-self.logstd_net.n_out:] = self.init_log_std
        return np.concatenate([mean_p, logstd_p])

    def split(self, params: np.ndarray):
        n = self.mean_net.n_params
        return params[:n], params[n:]

    def forward(self, params: np.ndarray, features: np.ndarray):
        """Returns (mean (B, d_x), log_std (B, d_x), tapes)."""
        mean_p, logstd_p = self.split(params)
        mean, tape_m = self.mean_net.forward(mean_p, features)
        log_std, tape_s = self.logstd_net.forward(logstd_p, features)
        return mean, log_std, (mean_p, logstd_p, tape_m, tape_s)

    def backward(self, tapes, up_mean: np.ndarray, up_logstd: np.ndarray):
        """Per-sample gradients of <up_mean, mean> + <up_logstd, log_std>.

        Returns (param_grads (B, n_params), input_grads (B, n_features)).
        """
        mean_p, logstd_p, tape_m, tape_s = tapes
        gm, xm = self.mean_net.backward(mean_p, tape_m, up_mean)
        gs, xs = self.logstd_net.backward(logstd_p, tape_s, up_logstd)
        return np.concatenate([gm, gs], axis=1), xm + xs
