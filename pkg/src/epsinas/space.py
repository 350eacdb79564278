"""Cell search space: genotype codec, enumeration, mutation, instantiation.

A cell is a densely connected 4-node DAG.  Node 0 is the cell input, node 3
the output, and each of the 6 ordered edges (1<-0; 2<-0, 2<-1; 3<-0, 3<-1,
3<-2) carries one of five ops.  A genotype is just those six op choices, so
the space holds 5^6 = 15,625 architectures.

The macro skeleton wraps cells the way the public tabular benchmark does:
a 3x3 stem convolution + batch norm, three stacks of identical cells with
channel widths C, 2C, 4C, a stride-2 two-conv residual block between stacks,
then batch norm + ReLU, global average pooling and an affine classifier.

Networks built here are forward-only and float32; see ``engine`` for the
numeric contracts.  Forward passes borrow the per-thread shared workspace,
so run concurrent evaluations on distinct threads (one forward at a time
per thread).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .engine import (
    F32,
    ShapeError,
    _out_dim,
    as_f32,
    nhwc_avg_pool,
    nhwc_batchnorm,
    nhwc_conv,
    nhwc_global_mean,
    nhwc_im2col,
    nhwc_linear,
    nhwc_relu,
    nhwc_relu_pad,
    pack_conv_weight,
    sc_avg_pool,
    sc_batchnorm,
    sc_boxsum,
    shared_workspace,
)

OPS = ("none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3")
EDGES = ((1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2))
NUM_GENOTYPES = len(OPS) ** len(EDGES)

_BN_EPS = 1e-5


class GenotypeError(ValueError):
    """Malformed genotype text or an invalid op identifier."""


@dataclass(frozen=True)
class Genotype:
    """Six edge ops in canonical order; immutable and hashable."""

    edge_ops: tuple[str, str, str, str, str, str]

    def __post_init__(self):
        ops = tuple(self.edge_ops)
        if len(ops) != len(EDGES):
            raise GenotypeError(
                f"genotype needs {len(EDGES)} edge ops, got {len(ops)}")
        for op in ops:
            if op not in OPS:
                raise GenotypeError(f"unknown op {op!r}")
        object.__setattr__(self, "edge_ops", ops)

    def __str__(self) -> str:
        return format_genotype(self)


def format_genotype(g: Genotype) -> str:
    """Render the canonical text form, the join key against benchmark CSVs."""
    parts = []
    k = 0
    for dst in (1, 2, 3):
        toks = []
        for src in range(dst):
            toks.append(f"{g.edge_ops[k]}~{src}")
            k += 1
        parts.append("|" + "|".join(toks) + "|")
    return "+".join(parts)


def parse_genotype(text: str) -> Genotype:
    """Parse `|op~0|+|op~0|op~1|+|op~0|op~1|op~2|` into a Genotype.

    Errors carry the character position where scanning failed.
    """
    pos = 0

    def fail(msg):
        raise GenotypeError(f"{msg} at position {pos}: {text!r}")

    def expect(ch):
        nonlocal pos
        if pos >= len(text) or text[pos] != ch:
            fail(f"expected {ch!r}")
        pos += 1

    ops = []
    for dst in (1, 2, 3):
        if dst > 1:
            expect("+")
        expect("|")
        for src in range(dst):
            start = pos
            while pos < len(text) and (text[pos].isalnum() or text[pos] == "_"):
                pos += 1
            name = text[start:pos]
            if not name:
                fail("expected op name")
            if name not in OPS:
                pos = start
                fail(f"unknown op {name!r}")
            expect("~")
            start = pos
            while pos < len(text) and text[pos].isdigit():
                pos += 1
            if text[start:pos] != str(src):
                pos = start
                fail(f"expected source index {src}")
            expect("|")
            ops.append(name)
    if pos != len(text):
        fail("trailing characters")
    return Genotype(tuple(ops))


def enumerate_space() -> list[Genotype]:
    """All 15,625 genotypes in lexicographic edge-op order (stable)."""
    return [Genotype(ops) for ops in itertools.product(OPS, repeat=len(EDGES))]


def arch_index(g: Genotype) -> int:
    """Position of g in enumerate_space() order, computed directly."""
    idx = 0
    for op in g.edge_ops:
        idx = idx * len(OPS) + OPS.index(op)
    return idx


def mutate(g: Genotype, rng: np.random.Generator) -> Genotype:
    """Uniform single-edge mutation: pick an edge, swap in one of the other
    4 ops.  Edit distance from g is always exactly 1."""
    edge = int(rng.integers(len(EDGES)))
    alts = [op for op in OPS if op != g.edge_ops[edge]]
    ops = list(g.edge_ops)
    ops[edge] = alts[int(rng.integers(len(alts)))]
    return Genotype(tuple(ops))


@dataclass(frozen=True)
class SkeletonConfig:
    """Macro-skeleton hyperparameters.

    Defaults are the desk scale (one cell per stack) used by fast runs and
    CI; parity runs against the tabular benchmark set cells_per_stack=5.
    """

    stem_channels: int = 16
    cells_per_stack: int = 1
    num_stacks: int = 3
    num_classes: int = 10
    input_shape: tuple[int, int, int] = (3, 32, 32)

    def __post_init__(self):
        if self.num_stacks != 3:
            raise ValueError("num_stacks is fixed at 3")
        if self.stem_channels < 1 or self.cells_per_stack < 1 \
                or self.num_classes < 1:
            raise ValueError("stem_channels, cells_per_stack and num_classes "
                             "must be positive")
        shape = tuple(int(d) for d in self.input_shape)
        if len(shape) != 3 or min(shape) < 1:
            raise ValueError(f"input_shape must be 3 positive dims, "
                             f"got {self.input_shape!r}")
        object.__setattr__(self, "input_shape", shape)

    def stack_channels(self) -> tuple[int, int, int]:
        c = self.stem_channels
        return (c, 2 * c, 4 * c)


@dataclass
class Parameter:
    """One named weight tensor with its role tag."""

    name: str
    role: str  # conv-weight | bn-gain | bn-bias | linear-weight | linear-bias | embedding
    array: np.ndarray


class _ParamBag:
    def __init__(self):
        self.params: list[Parameter] = []

    def add(self, name: str, role: str, shape) -> np.ndarray:
        arr = np.empty(shape, dtype=F32)
        self.params.append(Parameter(name, role, arr))
        return arr


class _ConvBN:
    """Optional ReLU -> conv -> batchnorm, the conv edge/backbone unit."""

    def __init__(self, bag, name, cin, cout, k, stride, pad, relu_first):
        self.w = bag.add(f"{name}.conv.weight", "conv-weight",
                         (cout, cin, k, k))
        self.g = bag.add(f"{name}.bn.gain", "bn-gain", (cout,))
        self.b = bag.add(f"{name}.bn.bias", "bn-bias", (cout,))
        self.k, self.stride, self.pad = k, stride, pad
        self.relu_first = relu_first
        self.tag = name

    def forward(self, x, ws):
        pad = self.pad
        if self.relu_first:
            # Fused: the activation lands directly in the zero-bordered
            # buffer the convolution reads from, saving a full pass.
            x = nhwc_relu_pad(x, pad, ws, self.tag)
            pad = 0
        y = nhwc_conv(x, pack_conv_weight(self.w), self.k, self.k,
                      self.stride, pad, ws, self.tag)
        return nhwc_batchnorm(y, self.g, self.b, _BN_EPS, ws, self.tag)


class _Cell:
    """One DAG cell at a fixed channel width.

    Edges are walked source-major: when node i is being read, every edge into
    it has already been summed, so products of reading it — the ReLU, the
    zero-padded im2col patches, the window mean — are computed once and
    shared by every edge leaving it.  Conv edges leaving one source are
    batched further: their packed weight matrices stack side by side into a
    single wider sgemm, and batch norm runs once over the concatenated
    channel block (statistics are per-channel, so the merged call is exactly
    the per-edge ones).  A `none` edge adds nothing to the target sum; a
    node with no surviving inputs is the zero tensor.
    """

    def __init__(self, bag, name, genotype, channels):
        self.channels = channels
        self.units = {}
        # Per-source edge groups, each in destination order.
        self.conv3 = [[], [], []]   # (dst, unit)
        self.conv1 = [[], [], []]   # (dst, unit)
        self.pools = [[], [], []]   # dst
        self.skips = [[], [], []]   # dst
        for (dst, src), op in zip(EDGES, genotype.edge_ops):
            if op == "none":
                continue
            if op == "skip_connect":
                self.skips[src].append(dst)
            elif op == "avg_pool_3x3":
                self.pools[src].append(dst)
            else:
                k = 1 if op == "nor_conv_1x1" else 3
                unit = _ConvBN(bag, f"{name}.e{dst}{src}", channels, channels,
                               k, 1, k // 2, relu_first=True)
                self.units[(dst, src)] = unit
                (self.conv1 if k == 1 else self.conv3)[src].append((dst, unit))

    def forward(self, x, ws):
        vals: list[np.ndarray | None] = [x, None, None, None]
        c = self.channels

        def put(dst, arr, owned):
            """Accumulate an edge output; copy borrowed arrays on adoption."""
            if vals[dst] is None:
                vals[dst] = arr if owned else arr.copy()
            else:
                vals[dst] += arr

        def conv_group(edges, y2d, n, h, w):
            width = c * len(edges)
            y = y2d.reshape(n, h, w, width)
            if len(edges) == 1:
                dst, u = edges[0]
                put(dst, nhwc_batchnorm(y, u.g, u.b, _BN_EPS, ws, "cellbn"),
                    owned=True)
                return
            gain = np.concatenate([u.g for _, u in edges])
            bias = np.concatenate([u.b for _, u in edges])
            ybn = nhwc_batchnorm(y, gain, bias, _BN_EPS, ws, "cellbn")
            for i, (dst, _) in enumerate(edges):
                put(dst, ybn[..., i * c:(i + 1) * c], owned=False)

        for src in range(3):
            v = vals[src]
            if v is None:
                v = np.zeros_like(x)
                vals[src] = v
            n, h, w = v.shape[0], v.shape[1], v.shape[2]
            c3, c1 = self.conv3[src], self.conv1[src]
            xp = None
            if c3:
                xp = nhwc_relu_pad(v, 1, ws, "cellconv")
                cols, ho, wo = nhwc_im2col(xp, 3, 3, 1, 0, ws, "cellconv")
                wmat = (pack_conv_weight(c3[0][1].w) if len(c3) == 1 else
                        np.concatenate([pack_conv_weight(u.w) for _, u in c3],
                                       axis=1))
                y2d = np.empty((cols.shape[0], wmat.shape[1]), dtype=F32)
                np.matmul(cols, wmat, out=y2d)
                conv_group(c3, y2d, n, ho, wo)
            if c1:
                rel = (np.ascontiguousarray(xp[:, 1:-1, 1:-1, :])
                       if xp is not None else nhwc_relu(v))
                wmat = (pack_conv_weight(c1[0][1].w) if len(c1) == 1 else
                        np.concatenate([pack_conv_weight(u.w) for _, u in c1],
                                       axis=1))
                y2d = rel.reshape(n * h * w, c) @ wmat
                conv_group(c1, y2d, n, h, w)
            if self.pools[src]:
                pl = nhwc_avg_pool(v, 3, 1, 1, False, ws, "cellpool")
                for dst in self.pools[src]:
                    # pl is shared by the group; only the last use owns it.
                    put(dst, pl, owned=dst == self.pools[src][-1])
            for dst in self.skips[src]:
                put(dst, v, owned=False)
        return vals[3] if vals[3] is not None else np.zeros_like(x)


class _Residual:
    """Stride-2 two-conv residual block joining stacks (channels double)."""

    def __init__(self, bag, name, cin, cout):
        self.conv_a = _ConvBN(bag, f"{name}.a", cin, cout, 3, 2, 1,
                              relu_first=True)
        self.conv_b = _ConvBN(bag, f"{name}.b", cout, cout, 3, 1, 1,
                              relu_first=True)
        self.down_w = bag.add(f"{name}.down.weight", "conv-weight",
                              (cout, cin, 1, 1))
        self.tag = name

    def forward(self, x, ws):
        y = self.conv_b.forward(self.conv_a.forward(x, ws), ws)
        d = nhwc_avg_pool(x, 2, 2, 0, False, ws, self.tag)
        n, h, w, c = d.shape
        d = (d.reshape(n * h * w, c)
             @ pack_conv_weight(self.down_w)).reshape(n, h, w, -1)
        return y + d


class Network:
    """A genotype realised in the macro skeleton; forward-only, float32.

    `registry` lists every trainable tensor exactly once (construction
    order), ready for the shared-weight initialisers.  Forward passes use
    the calling thread's shared scratch workspace, so at most one forward
    may run per thread at a time (any number of Network instances is fine).
    """

    def __init__(self, genotype: Genotype, cfg: SkeletonConfig):
        self.genotype = genotype
        self.cfg = cfg
        bag = _ParamBag()

        cin, h, w = cfg.input_shape
        widths = cfg.stack_channels()
        self.stem = _ConvBN(bag, "stem", cin, widths[0], 3, 1, 1,
                            relu_first=False)
        h, w = _out_dim(h, 3, 1, 1), _out_dim(w, 3, 1, 1)

        self.blocks = []
        for s, width in enumerate(widths):
            if s > 0:
                self.blocks.append(_Residual(bag, f"reduce{s - 1}",
                                             widths[s - 1], width))
                ha = _out_dim(h, 3, 2, 1)
                wa = _out_dim(w, 3, 2, 1)
                hd, wd = _out_dim(h, 2, 2, 0), _out_dim(w, 2, 2, 0)
                if min(ha, wa, hd, wd) < 1 or (ha, wa) != (hd, wd):
                    raise ShapeError(
                        f"input {cfg.input_shape} collapses at reduce{s - 1}: "
                        f"conv path {ha}x{wa} vs shortcut {hd}x{wd}")
                h, w = ha, wa
            for c in range(cfg.cells_per_stack):
                self.blocks.append(_Cell(bag, f"stack{s}.cell{c}",
                                         genotype, width))

        self.head_g = bag.add("head.bn.gain", "bn-gain", (widths[2],))
        self.head_b = bag.add("head.bn.bias", "bn-bias", (widths[2],))
        self.fc_w = bag.add("head.fc.weight", "linear-weight",
                            (cfg.num_classes, widths[2]))
        self.fc_b = bag.add("head.fc.bias", "linear-bias", (cfg.num_classes,))
        self.registry = bag.params

    def forward(self, batch: np.ndarray) -> np.ndarray:
        """[N, C, H, W] -> raw logits [N, num_classes] (no softmax)."""
        x = as_f32(batch)
        if x.ndim != 4 or x.shape[1:] != self.cfg.input_shape:
            raise ShapeError(
                f"forward: batch shape {x.shape} incompatible with input "
                f"shape {self.cfg.input_shape}")
        ws = shared_workspace()
        # Float range exhaustion is expected behaviour (it surfaces as a
        # non-finite-output status downstream), not a warning condition.
        with np.errstate(all="ignore"):
            x = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
            x = self.stem.forward(x, ws)
            for block in self.blocks:
                x = block.forward(x, ws)
            x = nhwc_batchnorm(x, self.head_g, self.head_b, _BN_EPS, ws,
                               "head")
            x = nhwc_relu(x)
            return nhwc_linear(nhwc_global_mean(x), self.fc_w, self.fc_b)


def build_network(g: Genotype, cfg: SkeletonConfig) -> Network:
    return Network(g, cfg)


def constant_forward(genotype: Genotype, cfg: SkeletonConfig,
                     batch: np.ndarray, w: float) -> np.ndarray:
    """Logits of ``build_network`` under all-constant shared weights.

    With one shared constant in every tensor, all channels of every feature
    map are identical, so the network evaluates exactly at effective width
    one: a conv contributes weight * in_channels * (window sum of the
    collapsed map), batch norm sees the same per-channel statistics it
    would at full width, and the classifier emits one logit repeated across
    classes.  Output matches ``Network.forward`` up to float32 summation
    order, at a small fraction of the cost.
    """
    x = as_f32(batch)
    if x.ndim != 4 or x.shape[1:] != cfg.input_shape:
        raise ShapeError(
            f"forward: batch shape {x.shape} incompatible with input "
            f"shape {cfg.input_shape}")
    wf = float(w)
    widths = cfg.stack_channels()

    def convbn(u, mult, k, stride, pad, relu_first):
        if relu_first:
            u = np.maximum(u, F32(0.0))
        s = u if k == 1 else sc_boxsum(u, k, stride, pad)
        y = s * F32(wf * mult)
        return sc_batchnorm(y, wf, wf, _BN_EPS)

    ops_by_edge = dict(zip(EDGES, genotype.edge_ops))

    def cell(u, width):
        vals = [u, None, None, None]
        for (dst, src) in EDGES:
            op = ops_by_edge[(dst, src)]
            if op == "none":
                continue
            v = vals[src]
            if v is None:
                v = np.zeros_like(u)
                vals[src] = v
            if op == "skip_connect":
                out = v
            elif op == "avg_pool_3x3":
                out = sc_avg_pool(v, 3, 1, 1, False)
            else:
                k = 1 if op == "nor_conv_1x1" else 3
                out = convbn(v, width, k, 1, k // 2, relu_first=True)
            if vals[dst] is None:
                vals[dst] = out.copy() if out is v else out
            else:
                vals[dst] += out
        return vals[3] if vals[3] is not None else np.zeros_like(u)

    # Float range exhaustion is expected behaviour (it surfaces as a
    # non-finite-output status downstream), not a warning condition.
    with np.errstate(all="ignore"):
        # Stem: the explicit channel sum folds the input's real channels,
        # so no multiplicity factor applies.
        u = convbn(x.sum(axis=1), 1.0, 3, 1, 1, relu_first=False)
        for s, width in enumerate(widths):
            if s > 0:
                prev = widths[s - 1]
                y = convbn(convbn(u, prev, 3, 2, 1, True),
                           width, 3, 1, 1, True)
                d = sc_avg_pool(u, 2, 2, 0, False) * F32(wf * prev)
                u = y + d
            for _ in range(cfg.cells_per_stack):
                u = cell(u, width)
        u = sc_batchnorm(u, wf, wf, _BN_EPS)
        u = np.maximum(u, F32(0.0))
        logit = u.mean(axis=(1, 2)) * F32(wf * widths[2]) + F32(wf)
        return np.ascontiguousarray(
            np.broadcast_to(logit[:, None], (x.shape[0], cfg.num_classes)))


def _cell_param_count(g: Genotype, c: int) -> int:
    n = 0
    for op in g.edge_ops:
        if op == "nor_conv_3x3":
            n += c * c * 9 + 2 * c
        elif op == "nor_conv_1x1":
            n += c * c + 2 * c
    return n


def param_count(g: Genotype, cfg: SkeletonConfig) -> int:
    """Scalar parameter count of build_network(g, cfg), computed in closed
    form (independent of actually instantiating the arrays)."""
    cin = cfg.input_shape[0]
    widths = cfg.stack_channels()
    total = widths[0] * cin * 9 + 2 * widths[0]  # stem conv + bn
    for s, width in enumerate(widths):
        if s > 0:
            prev = widths[s - 1]
            total += width * prev * 9 + 2 * width      # conv_a
            total += width * width * 9 + 2 * width     # conv_b
            total += width * prev                      # 1x1 shortcut
        total += cfg.cells_per_stack * _cell_param_count(g, width)
    total += 2 * widths[2]                             # head bn
    total += cfg.num_classes * widths[2] + cfg.num_classes
    return total
