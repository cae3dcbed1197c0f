"""Acceptance suite: one test per criterion, one printed pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see every line.
"""

import random
import time

from rfscope import refine
from rfscope.analysis import compute_imax, compute_imin
from rfscope.cli import main
from rfscope.dsl import emit_dsl, parse_dsl
from rfscope.engine import brute_force_rf, propagate
from rfscope.graph import LayerKind, count_params, with_layer
from rfscope.ingest_onnx import load_onnx
from rfscope.refine import (
    NoFeasibleProposal,
    enumerate_stride_reductions,
    prune_and_widen,
    stride_proposal,
)

from randgraphs import random_conv_chain, random_dag

GOLDEN_IMIN = {
    "vgg11": 150, "vgg13": 156, "vgg16": 212, "vgg19": 268,
    "mobilenet_v1": 315, "mobilenet_v2": 163, "mobilenet_v3_small": 303,
    "mobilenet_v3_large": 263, "mnasnet": 283,
    "resnet18": 139, "resnet34": 139, "resnet50": 96,
    "efficientnet_b0": 299, "efficientnet_b1": 299, "efficientnet_b2": 299,
    "efficientnet_b3": 299, "efficientnet_b4": 299, "efficientnet_b5": 299,
    "efficientnet_b6": 299, "efficientnet_b7": 299,
    "convnext_t": 224, "nasnet_a_mobile": 327,
}

#: architectures not fully utilized at 224x224 (the shaded table rows)
SHADED_AT_224 = [
    "vgg19", "mobilenet_v1", "mobilenet_v3_small", "mobilenet_v3_large",
    "mnasnet", "efficientnet_b0", "efficientnet_b1", "efficientnet_b2",
    "nasnet_a_mobile", "convnext_t",
]

#: fully utilized architectures at their design resolution (unshaded rows)
UNSHADED_AT_DESIGN = [
    ("vgg11", 224), ("vgg13", 224), ("vgg16", 224), ("mobilenet_v2", 224),
    ("resnet18", 224), ("resnet34", 224), ("resnet50", 224),
    ("efficientnet_b3", 300), ("efficientnet_b4", 380), ("efficientnet_b5", 456),
    ("efficientnet_b6", 528), ("efficientnet_b7", 600),
]


def _report(criterion: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" — {detail}" if detail else ""
    print(f"criterion {criterion}: {status}{suffix}")


def test_criterion_1_golden_imin_table(load_fixture):
    start = time.perf_counter()
    results = {}
    for name in GOLDEN_IMIN:
        g = load_fixture(name)
        results[name] = compute_imin(g, propagate(g))
    elapsed = time.perf_counter() - start
    mismatches = {
        name: got for name, got in results.items()
        if got != (GOLDEN_IMIN[name], GOLDEN_IMIN[name])
    }
    in_time = elapsed < 1.0
    detail = f"{len(GOLDEN_IMIN) - len(mismatches)}/{len(GOLDEN_IMIN)} exact in {elapsed:.2f}s"
    if mismatches:
        detail += "; " + ", ".join(
            f"{n}: got {got[0]} want {GOLDEN_IMIN[n]}" for n, got in mismatches.items()
        )
    _report("1 (golden I_min table)", not mismatches and in_time, detail)
    assert elapsed < 1.0
    assert not mismatches, detail


def test_criterion_2_rmax_spot_checks(load_fixture):
    g18 = load_fixture("resnet18")
    r18 = compute_imax(g18, propagate(g18))
    gb7 = load_fixture("efficientnet_b7")
    rb7 = compute_imax(gb7, propagate(gb7))
    ok = r18 == (435, 435) and rb7 == (3079, 3079)
    _report("2 (r_max spot checks)", ok,
            f"resnet18 {r18[0]} (want 435), efficientnet_b7 {rb7[0]} (want 3079)")
    assert ok


def test_criterion_3_refinement_deltas(load_fixture):
    stride_catalog = [
        ("mobilenet_v1", [("dw6", (1, 1)), ("dw10", (2, 2)), ("dw12", (1, 1))], 315, 219),
        ("mobilenet_v3_small", [("b4_dw", (1, 1))], 303, 175),
        ("mobilenet_v3_large", [("b13_dw", (1, 1))], 263, 199),
        ("mnasnet", [("s5b1_dw", (1, 1))], 283, 219),
        ("nasnet_a_mobile", [("stem_conv", (1, 1))], 327, 165),
    ]
    failures = []
    for name, changes, before, after in stride_catalog:
        g = load_fixture(name)
        if compute_imin(g, propagate(g)) != (before, before):
            failures.append(f"{name} baseline")
            continue
        proposal = stride_proposal(g, changes)
        applied = refine.apply(g, proposal)
        got = compute_imin(applied, propagate(applied))
        if got != (after, after) or proposal.predicted_imin != (after, after):
            failures.append(f"{name}: got {got[0]} want {after}")

    # ConvNeXt: the 4x4 patching layer becomes a 2x2 patching layer.
    g = load_fixture("convnext_t")
    patched = with_layer(g, "patch", kernel=(2, 2), stride=(2, 2))
    got = compute_imin(patched, propagate(patched))
    if got != (112, 112):
        failures.append(f"convnext_t: got {got[0]} want 112")

    # VGG19: pooling rearrangement, encoded as its own fixture.
    g = load_fixture("vgg19_refined")
    got = compute_imin(g, propagate(g))
    if got != (220, 220):
        failures.append(f"vgg19_refined: got {got[0]} want 220")

    _report("3 (refinement deltas)", not failures,
            "7/7 exact" if not failures else "; ".join(failures))
    assert not failures


def test_criterion_4_check_exit_codes(fixtures_dir):
    failures = []
    for name in SHADED_AT_224:
        code = main(["check", str(fixtures_dir / f"{name}.rfa"),
                     "--input-res", "224x224"])
        if code != 3:
            failures.append(f"{name} at 224: exit {code} want 3")
    for name, res in UNSHADED_AT_DESIGN:
        code = main(["check", str(fixtures_dir / f"{name}.rfa"),
                     "--input-res", f"{res}x{res}"])
        if code != 0:
            failures.append(f"{name} at {res}: exit {code} want 0")
    total = len(SHADED_AT_224) + len(UNSHADED_AT_DESIGN)
    _report("4 (check exit codes)", not failures,
            f"{total - len(failures)}/{total} correct"
            + ("" if not failures else "; " + "; ".join(failures)))
    assert not failures


def test_criterion_5_oracle_equivalence():
    rng = random.Random(20240)
    start = time.perf_counter()
    checked = 0
    for _ in range(1000):
        g = random_dag(rng, max_vertices=12, max_kernel=7, max_stride=3,
                       max_merges=3)
        rf = propagate(g)
        for v in g.order:
            lo, hi = brute_force_rf(g, v)
            assert rf[v].r_min == lo, v
            assert rf[v].r_max == hi, v
            checked += 1
    elapsed = time.perf_counter() - start
    _report("5 (oracle equivalence)", elapsed < 30.0,
            f"1000 DAGs / {checked} vertices exact in {elapsed:.1f}s")
    assert elapsed < 30.0


def _all_proposals(load_fixture):
    for name, res in [
        ("vgg19", 224), ("mobilenet_v1", 224), ("mobilenet_v3_small", 224),
        ("mobilenet_v3_large", 224), ("mnasnet", 224), ("efficientnet_b0", 224),
        ("efficientnet_b1", 240), ("efficientnet_b2", 260), ("convnext_t", 224),
    ]:
        g = load_fixture(name)
        try:
            for p in enumerate_stride_reductions(g, (res, res), max_changes=2):
                yield name, g, p
        except NoFeasibleProposal:
            continue
    g = load_fixture("nasnet_a_mobile")
    for p in enumerate_stride_reductions(g, (224, 224), max_changes=1):
        yield "nasnet_a_mobile", g, p
    g = load_fixture("efficientnet_b0")
    widenable = [v for v in g.order
                 if g.nodes[v].block in {"s5b1", "s5b2", "s5b3", "s6b1"}
                 and g.nodes[v].kind in (LayerKind.CONV, LayerKind.DWCONV)]
    yield "efficientnet_b0", g, prune_and_widen(g, (224, 224), widenable)


def test_criterion_6_prediction_honesty(load_fixture):
    checked = 0
    for name, g, proposal in _all_proposals(load_fixture):
        applied = refine.apply(g, proposal)
        got = compute_imin(applied, propagate(applied))
        assert got == proposal.predicted_imin, (name, proposal)
        checked += 1
    _report("6 (prediction honesty)", True, f"{checked} proposals exact")
    assert checked > 0


def test_criterion_7_parameter_preservation(load_fixture):
    g = load_fixture("efficientnet_b0")
    orig = count_params(g)
    widenable = [v for v in g.order
                 if g.nodes[v].block in {"s5b1", "s5b2", "s5b3", "s6b1"}
                 and g.nodes[v].kind in (LayerKind.CONV, LayerKind.DWCONV)]
    proposal = prune_and_widen(g, (224, 224), widenable, tolerance=0.02)
    applied = refine.apply(g, proposal)
    b0_delta = abs(count_params(applied) - orig) / orig
    assert b0_delta <= 0.02
    removed_blocks = {g.nodes[v].block for v in proposal.variant.removed}
    assert removed_blocks == {"s6b2", "s6b3", "s6b4", "s7b1"}

    rng = random.Random(77)
    chains = 0
    worst = b0_delta
    while chains < 100:
        toy = random_conv_chain(rng)
        rf = propagate(toy)
        convs = [v for v in toy.order if toy.nodes[v].kind is LayerKind.CONV]
        target = rf[convs[-1]].r_min[0]
        flagged = [v for v in convs if rf[v].r_min >= (target, target)]
        if len(flagged) >= len(convs) - 1:
            continue
        widenable = [v for v in convs if v not in flagged]
        orig_toy = count_params(toy)
        p = prune_and_widen(toy, (target, target), widenable, tolerance=0.02)
        got = count_params(refine.apply(toy, p))
        delta = abs(got - orig_toy) / orig_toy
        worst = max(worst, delta)
        assert delta <= 0.02, f"chain {chains}: {delta:.3%}"
        chains += 1
    _report("7 (parameter preservation)", True,
            f"efficientnet_b0 {b0_delta:.3%}, 100 chains worst {worst:.3%}")


def test_criterion_8_round_trip(load_fixture, fixtures_dir):
    for name in GOLDEN_IMIN:
        g = load_fixture(name)
        text = emit_dsl(g)
        assert parse_dsl(text) == g, name

    onnx_graph = load_onnx((fixtures_dir / "mobilenet_v2.onnx").read_bytes())
    dsl_graph = load_fixture("mobilenet_v2")
    rf_kinds = {LayerKind.CONV, LayerKind.DWCONV, LayerKind.POOL,
                LayerKind.GPOOL, LayerKind.DENSE, LayerKind.ADD, LayerKind.CONCAT}

    def signature(g):
        rf = propagate(g)
        return [
            (g.nodes[v].kind.value, g.nodes[v].kernel, g.nodes[v].stride,
             rf[v].r_min, rf[v].r_max)
            for v in g.order if g.nodes[v].kind in rf_kinds
        ]

    onnx_sig = signature(onnx_graph)
    dsl_sig = signature(dsl_graph)
    assert len(onnx_sig) == len(dsl_sig)
    assert onnx_sig == dsl_sig
    _report("8 (round-trip + ONNX alignment)", True,
            f"{len(GOLDEN_IMIN)} fixtures round-trip, "
            f"{len(onnx_sig)} aligned vertices equal")
