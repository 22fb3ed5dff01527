"""The commitment pipeline: the two training rounds that get proved.

Both parties run these functions on identical inputs, so every quantity they
exchange agrees bit for bit. Layer-1 weighted sums are exact integer dot
products of quantized features and weights (scale 2). Everything above layer 1
runs in IEEE double with ``math.fsum`` over index-ascending terms and is
re-quantized where it enters a commitment:

    o      -> f(o)                      scale 1
    σ'(z°) -> f(σ'(z°))                 scale 1
    D      = (f(o) - f(y)) * f(σ'(z°))  scale 2, committed as δ°
    δ^L_k  = f(w°_k) * f(σ'(z^L_k)) * D scale 4
    A_jk   = Σ_i f(x_ij) * f(η δ^1_ik)  scale 2
    B_j    = Σ_i f(η a^L_ij) * D_i      scale 3

Layer 1 and the output layer are updated from A and B; layers ≥ 2 from doubles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..codec import CodecParams, ScaledInt, SplitSum, encode, round_ratio, split_dot
from ..datasets import QuantizedDataset
from .network import Activation, ModelState, NetworkConfig

IntMatrix = Tuple[Tuple[int, ...], ...]


@dataclass(frozen=True)
class QuantizedModel:
    """Scale-1 mirrors f(w) of every weight. ``hidden[l][j][k]`` as in ModelState."""

    hidden: Tuple[IntMatrix, ...]
    output: Tuple[int, ...]

    @classmethod
    def from_state(cls, state: ModelState, params: CodecParams) -> "QuantizedModel":
        hidden = tuple(
            tuple(tuple(encode(float(v), params).value for v in row) for row in w) for w in state.hidden
        )
        return cls(hidden, tuple(encode(float(v), params).value for v in state.output))

    def to_state(self, params: CodecParams) -> ModelState:
        unit = params.one
        hidden = [np.array([[v / unit for v in row] for row in w], dtype=np.float64) for w in self.hidden]
        return ModelState(hidden, np.array([v / unit for v in self.output], dtype=np.float64))

    @property
    def layer_sizes(self) -> Tuple[int, ...]:
        return (len(self.hidden[0]), *(len(w[0]) for w in self.hidden))


def converged_model(initial: ModelState, update: ModelState, params: CodecParams) -> QuantizedModel:
    """f(W_0 + ΔW); the one place both parties derive the proved model from."""
    return QuantizedModel.from_state(initial + update, params)


class WeightView:
    """Column-major views of one quantized model, built once per round."""

    def __init__(self, model: QuantizedModel, params: CodecParams) -> None:
        self.model = model
        unit = params.one
        first = model.hidden[0]
        self.first_columns: List[List[ScaledInt]] = [
            [ScaledInt(first[j][k], 1) for j in range(len(first))] for k in range(len(first[0]))
        ]
        # float columns per layer: columns[l][k][j] = w^{l+1}_{jk}
        self.columns: List[List[List[float]]] = [
            [[w[j][k] / unit for j in range(len(w))] for k in range(len(w[0]))] for w in model.hidden
        ]
        # rows per layer for the backward recursion: rows[l][k][j] = w^{l+1}_{kj}
        self.rows: List[List[List[float]]] = [[[v / unit for v in row] for row in w] for w in model.hidden]
        self.output: List[float] = [v / unit for v in model.output]


@dataclass
class RoundFaults:
    """Injected misbehaviour for the convergence round.

    ``activations`` maps (sample, layer, neuron) to a replacement activation with
    layer counted from 1; ``outputs`` maps a sample to a replacement output.
    """

    activations: Dict[Tuple[int, int, int], float] = field(default_factory=dict)
    outputs: Dict[int, float] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.activations or self.outputs)


@dataclass(frozen=True)
class SampleForward:
    z: Tuple[SplitSum, ...]
    hidden_z: Tuple[Tuple[float, ...], ...]
    activations: Tuple[Tuple[float, ...], ...]
    z_out: float
    output: float
    encoded_output: int

    @property
    def last_activations(self) -> Tuple[float, ...]:
        return self.activations[-1]


@dataclass(frozen=True)
class RoundRecord:
    model: QuantizedModel
    samples: Tuple[SampleForward, ...]
    error_sum: ScaledInt

    @property
    def size(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class BackpropRecord:
    delta_out: Tuple[int, ...]
    delta_last: Tuple[Tuple[int, ...], ...]
    layer1_increments: Tuple[Tuple[SplitSum, ...], ...]
    output_increments: Tuple[ScaledInt, ...]
    updated: QuantizedModel


@dataclass(frozen=True)
class CommitmentRounds:
    first: RoundRecord
    backprop: BackpropRecord
    second: RoundRecord

    @property
    def s1(self) -> ScaledInt:
        return self.first.error_sum

    @property
    def s2(self) -> ScaledInt:
        return self.second.error_sum


def commitment_layer1_sums(features: Sequence[ScaledInt], view: WeightView, params: CodecParams) -> Tuple[SplitSum, ...]:
    """One SplitSum per first-layer neuron, at scale 2."""
    return tuple(split_dot(features, column, params) for column in view.first_columns)


def forward_tail(
    z_totals: Sequence[int],
    view: WeightView,
    activation: Activation,
    params: CodecParams,
    *,
    sample: int = 0,
    faults: Optional[RoundFaults] = None,
) -> Tuple[Tuple[Tuple[float, ...], ...], Tuple[Tuple[float, ...], ...], float, float]:
    """Layers 1..L and the output neuron from verified layer-1 totals."""
    unit2 = params.unit(2)
    z_layer = tuple(t / unit2 for t in z_totals)
    zs: List[Tuple[float, ...]] = []
    acts: List[Tuple[float, ...]] = []
    for layer, columns in enumerate(view.columns):
        if layer > 0:
            prev = acts[-1]
            z_layer = tuple(math.fsum(a * w for a, w in zip(prev, col)) for col in columns)
        a_layer = [activation.value_of(z) for z in z_layer]
        if faults:
            for k in range(len(a_layer)):
                key = (sample, layer + 1, k)
                if key in faults.activations:
                    a_layer[k] = faults.activations[key]
        zs.append(z_layer)
        acts.append(tuple(a_layer))
    z_out = math.fsum(a * w for a, w in zip(acts[-1], view.output))
    o = activation.value_of(z_out)
    if faults and sample in faults.outputs:
        o = faults.outputs[sample]
    return tuple(zs), tuple(acts), z_out, o


def squared_residual(label: int, encoded_output: int) -> int:
    q = label - encoded_output
    return q * q


def run_round(
    model: QuantizedModel,
    dataset: QuantizedDataset,
    config: NetworkConfig,
    params: CodecParams,
    faults: Optional[RoundFaults] = None,
) -> RoundRecord:
    view = WeightView(model, params)
    samples: List[SampleForward] = []
    total = 0
    for i, (x, y) in enumerate(dataset.rows()):
        sums = commitment_layer1_sums([ScaledInt(v, 1) for v in x], view, params)
        zs, acts, z_out, o = forward_tail(
            [s.total.value for s in sums], view, config.activation, params, sample=i, faults=faults
        )
        fo = encode(o, params).value
        total += squared_residual(y, fo)
        samples.append(SampleForward(sums, zs, acts, z_out, o, fo))
    return RoundRecord(model, tuple(samples), ScaledInt(total, 2))


def output_signal(label: int, sample: SampleForward, activation: Activation, params: CodecParams) -> Tuple[int, int]:
    """(f(σ'(z°)), D) for one sample."""
    fsp = encode(activation.derivative_of(sample.z_out), params).value
    return fsp, (sample.encoded_output - label) * fsp


def last_layer_coefficients(model: QuantizedModel, sample: SampleForward, activation: Activation, params: CodecParams) -> Tuple[int, ...]:
    """c_k = f(w°_k) * f(σ'(z^L_k)); δ^L_k = c_k * D."""
    return tuple(
        w * encode(activation.derivative_of(z), params).value for w, z in zip(model.output, sample.hidden_z[-1])
    )


def hidden_deltas(
    delta_last: Sequence[int],
    sample: SampleForward,
    view: WeightView,
    activation: Activation,
    params: CodecParams,
) -> List[Tuple[float, ...]]:
    """δ^1..δ^L in doubles, δ^L taken from the verified scale-4 integers."""
    unit4 = params.unit(4)
    depth = len(view.columns)
    deltas: List[Tuple[float, ...]] = [()] * depth
    deltas[-1] = tuple(v / unit4 for v in delta_last)
    for layer in range(depth - 2, -1, -1):
        above = deltas[layer + 1]
        rows = view.rows[layer + 1]
        deltas[layer] = tuple(
            activation.derivative_of(z) * math.fsum(w * d for w, d in zip(rows[k], above))
            for k, z in enumerate(sample.hidden_z[layer])
        )
    return deltas


def scaled_signals(values: Sequence[float], rate: float, params: CodecParams) -> Tuple[int, ...]:
    return tuple(encode(rate * v, params).value for v in values)


def layer1_increment_sums(
    dataset: QuantizedDataset, first_deltas: Sequence[Sequence[int]], params: CodecParams
) -> Tuple[Tuple[SplitSum, ...], ...]:
    """A_jk over samples of f(x_ij) * f(η δ^1_ik)."""
    m = dataset.input_dim
    d1 = len(first_deltas[0])
    columns_x = [[ScaledInt(row[j], 1) for row in dataset.features] for j in range(m)]
    columns_d = [[ScaledInt(fd[k], 1) for fd in first_deltas] for k in range(d1)]
    return tuple(tuple(split_dot(columns_x[j], columns_d[k], params) for k in range(d1)) for j in range(m))


def output_increment_sums(scaled_last: Sequence[Sequence[int]], delta_out: Sequence[int]) -> Tuple[ScaledInt, ...]:
    """B_j over samples of f(η a^L_ij) * D_i."""
    width = len(scaled_last[0])
    return tuple(ScaledInt(sum(fa[j] * d for fa, d in zip(scaled_last, delta_out)), 3) for j in range(width))


def updated_model(
    model: QuantizedModel,
    view: WeightView,
    layer1: Sequence[Sequence[int]],
    output: Sequence[int],
    forwards: Sequence[SampleForward],
    deltas: Sequence[Sequence[Tuple[float, ...]]],
    config: NetworkConfig,
    params: CodecParams,
) -> QuantizedModel:
    """Apply one update: ``layer1[j][k]`` holds A_jk totals, ``output[j]`` holds B_j."""
    n = len(forwards)
    unit = params.one
    first = tuple(
        tuple(w + round_ratio(-a, n * unit) for w, a in zip(row, sums)) for row, sums in zip(model.hidden[0], layer1)
    )
    hidden: List[IntMatrix] = [first]
    rate = -config.learning_rate / n
    for layer in range(1, len(model.hidden)):
        rows = view.rows[layer]
        new_rows = []
        for j, row in enumerate(rows):
            new_rows.append(
                tuple(
                    encode(
                        w + rate * math.fsum(f.activations[layer - 1][j] * d[layer][k] for f, d in zip(forwards, deltas)),
                        params,
                    ).value
                    for k, w in enumerate(row)
                )
            )
        hidden.append(tuple(new_rows))
    out = tuple(w + round_ratio(-b, n * unit * unit) for w, b in zip(model.output, output))
    return QuantizedModel(tuple(hidden), out)


def backprop_round(
    record: RoundRecord,
    dataset: QuantizedDataset,
    config: NetworkConfig,
    params: CodecParams,
) -> BackpropRecord:
    act = config.activation
    view = WeightView(record.model, params)
    delta_out: List[int] = []
    delta_last: List[Tuple[int, ...]] = []
    deltas: List[List[Tuple[float, ...]]] = []
    first_scaled: List[Tuple[int, ...]] = []
    last_scaled: List[Tuple[int, ...]] = []
    for label, sample in zip(dataset.labels, record.samples):
        _, d = output_signal(label, sample, act, params)
        coeffs = last_layer_coefficients(record.model, sample, act, params)
        dl = tuple(c * d for c in coeffs)
        ds = hidden_deltas(dl, sample, view, act, params)
        delta_out.append(d)
        delta_last.append(dl)
        deltas.append(ds)
        first_scaled.append(scaled_signals(ds[0], config.learning_rate, params))
        last_scaled.append(scaled_signals(sample.last_activations, config.learning_rate, params))
    a_sums = layer1_increment_sums(dataset, first_scaled, params)
    b_sums = output_increment_sums(last_scaled, delta_out)
    updated = updated_model(
        record.model,
        view,
        [[s.total.value for s in row] for row in a_sums],
        [b.value for b in b_sums],
        record.samples,
        deltas,
        config,
        params,
    )
    return BackpropRecord(tuple(delta_out), tuple(delta_last), a_sums, b_sums, updated)


def commitment_rounds(
    model: QuantizedModel,
    dataset: QuantizedDataset,
    config: NetworkConfig,
    params: CodecParams,
    faults: Optional[RoundFaults] = None,
) -> CommitmentRounds:
    """Convergence round, its update, and the round after it."""
    first = run_round(model, dataset, config, params, faults)
    bp = backprop_round(first, dataset, config, params)
    second = run_round(bp.updated, dataset, config, params)
    return CommitmentRounds(first, bp, second)


def error_value(error_sum: ScaledInt, n: int, params: CodecParams) -> Fraction:
    """E = S / (2 N 2^{2L}) exactly."""
    return Fraction(error_sum.value, 2 * n * params.unit(2))


def within_threshold(s1: int, s2: int, n: int, threshold: float, params: CodecParams) -> bool:
    if math.isinf(threshold):
        return True
    return Fraction(abs(s1 - s2), 2 * n * params.unit(2)) <= Fraction(threshold)
