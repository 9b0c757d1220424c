"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
pass/fail lines.
"""

from __future__ import annotations

import json
import math
import threading
import time
from datetime import date
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import simpson

from conftest import CountingTransport, s2_citations_exchange
from litmetrics.cli import main
from litmetrics.demo import build_demo_snapshot
from litmetrics.extraction import (
    chunk_text,
    extract_features_from_document,
    load_structured_text,
    section_positions,
)
from litmetrics.indicators import (
    AgingPolynomial,
    CitationSeries,
    ExponentialFit,
    RuiWeights,
    bernstein,
    fit_exponential_mle,
    iei_average,
    iei_instantaneous,
    kl_divergence,
    optimize_beta,
    rad,
    rqm_spread,
    rqm_value,
    rui,
    tncsi,
)
from litmetrics.retrieval import (
    ArxivClient,
    FixtureTransport,
    LazyPaper,
    LlmHttpClient,
    OfflineTransport,
    RateLimiter,
    SemanticScholarClient,
    StubLlm,
    arxiv_review_query,
    fetch_monthly_citations,
)

FIXTURES = Path(__file__).parent / "fixtures"
WINDOW_END = date(2024, 10, 1)


def verdict(number: int, name: str, ok: bool = True) -> None:
    print(f"[acceptance] criterion {number:2d} ({name}): {'PASS' if ok else 'FAIL'}")


@pytest.fixture(scope="module")
def demo_db(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("acceptance") / "demo.db"
    build_demo_snapshot(path)
    return path


def test_criterion_01_rqm_table_reproduction():
    rows = [
        (0.72, 2, 0.94),
        (0.83, 3, 0.95),
        (0.83, 1, 0.99),
        (0.69, 5, 0.65),
        (0.52, 2, 0.85),
        (0.19, 2, 0.63),
    ]
    start = time.monotonic()
    for arq_v, s_mp, printed in rows:
        assert rqm_value(arq_v, s_mp, beta=5.0) == pytest.approx(printed, abs=0.015)
    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    verdict(1, "RQM reference pairs reproduced at beta=5, +/-0.015")


def test_criterion_02_tncsi_closed_form_vs_quadrature():
    rng = np.random.default_rng(20241001)
    start = time.monotonic()
    worst = 0.0
    for _ in range(1000):
        lam = float(rng.uniform(1e-6, 1.0))
        cite_num = int(rng.integers(0, 5001))
        closed = tncsi(cite_num, ExponentialFit(lam=lam, sample_size=1))
        if cite_num == 0:
            numeric = 0.0
        else:
            upper = min(float(cite_num), 60.0 / lam)  # truncated tail < 1e-26
            xs = np.linspace(0.0, upper, 20001)
            numeric = float(simpson(lam * np.exp(-lam * xs), x=xs))
        worst = max(worst, abs(closed - numeric))
    elapsed = time.monotonic() - start
    assert worst <= 1e-9, f"worst deviation {worst}"
    assert elapsed < 5.0, f"took {elapsed:.2f}s"
    verdict(2, "TNCSI closed form equals quadrature within 1e-9")


def test_criterion_03_mle_identity():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 100:
        sample = rng.integers(0, 400, size=int(rng.integers(1, 60))).tolist()
        if sum(sample) == 0:
            continue
        fit = fit_exponential_mle(sample)
        mean = sum(sample) / len(sample)
        assert abs(fit.lam * mean - 1.0) <= 1e-12
        checked += 1
    verdict(3, "MLE identity lam * mean == 1 within 1e-12")


def test_criterion_04_iei_affine_identity_and_partition_of_unity():
    rng = np.random.default_rng(11)
    for _ in range(50):
        base = int(rng.integers(0, 50))
        d = int(rng.integers(-10, 11))
        counts = [base + d * i for i in range(6)]
        if min(counts) < 0:
            counts = [c - min(counts) for c in counts]
        series = CitationSeries(monthly_counts=tuple(counts), window_end=WINDOW_END)
        assert iei_average(series) == pytest.approx(d, abs=1e-9)
        assert iei_instantaneous(series) == pytest.approx(d, abs=1e-9)
    for n in range(1, 11):
        for t in np.linspace(0.0, 1.0, 11):
            total = sum(bernstein(i, n, float(t)) for i in range(n + 1))
            assert abs(total - 1.0) <= 1e-12
    verdict(4, "IEI affine identity and Bernstein partition of unity")


def test_criterion_05_iei_oracle_equivalence():
    rng = np.random.default_rng(13)

    def oracle(counts: list[int]) -> float:
        # difference-of-Bernstein derivative applied to the raw control points
        n = len(counts) - 1
        total = 0.0
        for a in range(n + 1):
            t = a / n
            dx = dy = 0.0
            for i, y in enumerate(counts):
                basis = n * (bernstein(i - 1, n - 1, t) - bernstein(i, n - 1, t))
                dx += basis * i
                dy += basis * y
            total += dy / dx
        return total / (n + 1)

    for _ in range(100):
        counts = rng.integers(0, 300, size=6).tolist()
        series = CitationSeries(monthly_counts=tuple(counts), window_end=WINDOW_END)
        assert iei_average(series) == pytest.approx(oracle(counts), abs=1e-9)
    verdict(5, "IEI average equals independent curve-derivative oracle")


def test_criterion_06_rad_quadrature():
    poly = AgingPolynomial()
    assert rad(0) == 0.0
    for m_pc in range(1, 73):
        assert rad(m_pc) == pytest.approx(poly.antiderivative(m_pc / 12.0), abs=1e-4)
    verdict(6, "RAD trapezoid within 1e-4 of exact antiderivative, RAD(0)=0")


def test_criterion_07_beta_optimizer():
    # diverges from the shipped default beta=5, which stays the default
    beta = optimize_beta(5, 10, 0.6)
    decay = 1.0 - 0.6
    k_l, k_r = math.exp(-decay * 5), math.exp(-decay * 10)
    stationary = math.log(k_l / k_r) / (k_l - k_r)
    assert beta == pytest.approx(stationary, abs=1e-3)
    assert stationary == pytest.approx(17.09, abs=0.01)
    grid = np.arange(0.1, 100.0, 1e-3)
    best = max(rqm_spread(float(b), 5, 10, 0.6) for b in grid)
    assert rqm_spread(beta, 5, 10, 0.6) >= best - 1e-6
    verdict(7, "beta optimizer hits closed-form stationary point ~17.09")


def test_criterion_08_rui_linear_form():
    rng = np.random.default_rng(17)
    weights = RuiWeights()
    for _ in range(100):
        c = float(rng.uniform(0, 10))
        r = float(rng.uniform(0, 2))
        assert rui(c, r, weights) == 10.0 * c + 5.0 * r
    assert rui(1.0, 0.2) == 11.0
    verdict(8, "RUI is exactly 10*CDR + 5*RAD")


def test_criterion_09_correlation_oracle():
    from test_analysis import brute_force_correlations

    from litmetrics.analysis import correlations

    rng = np.random.default_rng(19)
    for _ in range(100):
        x = list(rng.normal(size=8))
        y = list(rng.normal(size=8))
        res = correlations(x, y)
        r, pr, rho, prho = brute_force_correlations(x, y)
        assert res.pearson_r == pytest.approx(r, abs=1e-12)
        assert res.spearman_rho == pytest.approx(rho, abs=1e-12)
        assert res.pearson_p == pytest.approx(pr, abs=1e-6)
        assert res.spearman_p == pytest.approx(prho, abs=1e-6)
    x = list(range(1, 11))
    perfect = correlations(x, [2 * v + 1 for v in x])
    assert perfect.pearson_r == 1.0 and perfect.spearman_rho == 1.0
    inverse = correlations(x, list(reversed(x)))
    assert inverse.pearson_r == -1.0 and inverse.spearman_rho == -1.0
    verdict(9, "correlations match brute-force oracle; monotone cases exact")


def test_criterion_10_kl_properties():
    rng = np.random.default_rng(23)
    for _ in range(1000):
        size = int(rng.integers(2, 15))
        p = rng.integers(0, 40, size=size).tolist()
        q = rng.integers(0, 40, size=size).tolist()
        assert kl_divergence(p, q) >= -1e-12
        assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-12)
    forward = kl_divergence([8, 1, 1], [4, 5, 1])
    backward = kl_divergence([4, 5, 1], [8, 1, 1])
    assert forward != backward
    verdict(10, "KL non-negativity, identity, and asymmetry")


def test_criterion_11_pipeline_determinism(demo_db, capsys):
    start = time.monotonic()
    outputs = []
    attempts = []
    for _ in range(3):
        transport = OfflineTransport()
        code = main(
            ["--db", str(demo_db), "--offline", "--now", "2024-10-01", "score", "--all"],
            transport=transport,
        )
        assert code == 0
        attempts.append(transport.attempts)
        outputs.append(capsys.readouterr().out)
    elapsed = time.monotonic() - start
    assert outputs[0] == outputs[1] == outputs[2]
    assert outputs[0].count("\n") == 21  # header + 20 fixture papers
    assert attempts == [0, 0, 0]
    assert elapsed < 30.0
    with capsys.disabled():
        verdict(11, "offline scoring run is byte-identical and networkless")


def test_criterion_12_query_grammar():
    cases = {
        "Object Detection": '(ti:"review" OR ti:"survey") AND (ti:"object detection" OR abs:"object detection")',
        "NER": '(ti:"review" OR ti:"survey") AND (ti:"ner" OR abs:"ner")',
        "Pose Estimation": '(ti:"review" OR ti:"survey") AND (ti:"pose estimation" OR abs:"pose estimation")',
        "GAN": '(ti:"review" OR ti:"survey") AND (ti:"gan" OR abs:"gan")',
        "Few-Shot Learning": '(ti:"review" OR ti:"survey") AND (ti:"few-shot learning" OR abs:"few-shot learning")',
        "speech recognition": '(ti:"review" OR ti:"survey") AND (ti:"speech recognition" OR abs:"speech recognition")',
        "Knowledge Graph": '(ti:"review" OR ti:"survey") AND (ti:"knowledge graph" OR abs:"knowledge graph")',
        "3D Reconstruction": '(ti:"review" OR ti:"survey") AND (ti:"3d reconstruction" OR abs:"3d reconstruction")',
        "Machine Translation": '(ti:"review" OR ti:"survey") AND (ti:"machine translation" OR abs:"machine translation")',
        "Video Object Segmentation": '(ti:"review" OR ti:"survey") AND (ti:"video object segmentation" OR abs:"video object segmentation")',
    }
    for keyword, expected in cases.items():
        assert arxiv_review_query(keyword) == expected
    verdict(12, "arXiv query grammar byte-exact for 10 keywords")


def test_criterion_13_extraction_contracts():
    # chunking
    lines = ["alpha " * 20, "beta " * 30, "gamma " * 50, "x" * 500]
    text = "\n".join(line.strip() for line in lines)
    chunks = chunk_text(text)
    assert "\n".join(c.text for c in chunks) == text
    assert all(len(c.text) <= 400 or c.oversized for c in chunks)
    # section positions
    titles = ["Introduction", "Methods", "Experiments", "Conclusion"]
    pos = section_positions(titles, ["introduction", "conclusion", "methods"])
    assert pos["introduction"] == [0.0]
    assert pos["conclusion"] == [1.0]
    assert all(0.0 <= v <= 1.0 for vs in pos.values() for v in vs)
    # stub-driven feature extraction against the golden file
    stub = StubLlm.from_json_file(FIXTURES / "stubs" / "extraction_stub.json")
    golden = json.loads((FIXTURES / "golden" / "feature_vectors.json").read_text())
    for doc_name, expected in golden.items():
        doc = load_structured_text(FIXTURES / "docs" / doc_name)
        fv = extract_features_from_document(doc, stub)
        assert fv.as_dict() == expected, doc_name
    verdict(13, "chunking, section positions, and golden feature vectors")


def test_criterion_14_lazy_loading_and_rate_limiting():
    # construction performs zero requests
    probe = OfflineTransport()
    s2 = SemanticScholarClient(transport=probe)
    ArxivClient(transport=probe)
    LlmHttpClient("https://llm.example/v1", transport=probe)
    LazyPaper("ARXIV:2401.00001", s2)
    assert probe.attempts == 0

    # a 100-item batch through a fake transport never exceeds the budget
    rate = 50.0
    exchanges = [s2_citations_exchange(f"p{i}", []) for i in range(100)]
    inner = FixtureTransport.from_pairs(exchanges)
    counting = CountingTransport(inner)
    client = SemanticScholarClient(transport=counting, limiter=RateLimiter(rate))

    def worker(ids):
        for pid in ids:
            fetch_monthly_citations(client, pid, 6, now=WINDOW_END)

    ids = [f"p{i}" for i in range(100)]
    threads = [threading.Thread(target=worker, args=(ids[i::4],)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    stamps = sorted(ts for ts, _ in counting.calls)
    assert len(stamps) == 100
    window = 1.0 - 0.02  # guard against scheduler jitter at the window edge
    for start in stamps:
        assert sum(1 for s in stamps if start <= s < start + window) <= rate
    assert stamps[-1] - stamps[0] >= (len(ids) - 1) / rate - 0.05
    verdict(14, "zero-request construction; batch honors the rps budget")
