import numpy as np
import pytest

from etcpn.dsl import (
    Diagnostic,
    ModelDocument,
    benchmark_path,
    load_benchmark,
    parse,
    parse_gains,
    parse_with_diagnostics,
    serialize,
    serialize_gains,
)
from etcpn.errors import ModelFormatError
from etcpn.net import incidence
from etcpn.observer import ObserverGains

from .helpers import COS60, SIN60, make_benchmark_model, random_document


class TestBenchmarkFixture:
    def test_fixture_parses_and_matches_programmatic_model(self):
        doc = load_benchmark()
        assert doc.name == "benchmark_two_mode"
        assert (doc.n, doc.p, doc.r, doc.m_f, doc.n_modes) == (2, 1, 1, 1, 2)
        reference = make_benchmark_model()
        model = doc.to_model()
        for q in (1, 2):
            assert np.allclose(model.mode(q).A, reference.mode(q).A, atol=1e-15)
        assert model.guards == reference.guards

    def test_fixture_derived_incidence_matches_study_matrices(self):
        doc = load_benchmark()
        blocks = doc.to_model().incidence_blocks()
        w1 = np.array([[0, 0, 0], [1, COS60 - 1, SIN60], [0, -SIN60, COS60 - 1]])
        assert np.allclose(blocks.wc[0], w1, atol=1e-12)

    def test_fixture_gains_are_exact_trig(self):
        doc = load_benchmark()
        assert doc.observer_gains is not None
        assert np.allclose(doc.observer_gains.L[0].ravel(), [SIN60, COS60], atol=0)
        assert doc.detectors.nu == 0.12


class TestParseErrors:
    def test_empty_file(self):
        doc, diags = parse_with_diagnostics("")
        assert doc is None
        assert any("no modes declared" in d.message for d in diags)

    def test_dimension_diagnostic_names_block(self):
        text = benchmark_path().read_text()
        broken = text.replace(
            "A: [cos(2*pi/3), sin(2*pi/3); -sin(2*pi/3), cos(2*pi/3)]",
            "A: [cos(2*pi/3), sin(2*pi/3), 0; -sin(2*pi/3), cos(2*pi/3), 0]",
        )
        doc, diags = parse_with_diagnostics(broken)
        assert doc is None
        assert any("[mode 2] A" in d.message and "2x3" in d.message for d in diags)

    def test_unknown_key_positioned(self):
        text = "model: m\ndims: n=1 p=1 r=1 mf=1 modes=1\n[mode 1]\nA: [1]\nB: [1]\nC: [1]\nFx: [1]\nFy: [1]\nbogus: 3\n"
        doc, diags = parse_with_diagnostics(text)
        assert doc is None
        hit = [d for d in diags if "bogus" in d.message]
        assert hit and hit[0].line == 9 and hit[0].col == 1

    def test_duplicate_mode_id(self):
        text = (
            "dims: n=1 p=1 r=1 mf=1 modes=1\n"
            "[mode 1]\nA: [1]\nB: [1]\nC: [1]\nFx: [1]\nFy: [1]\n"
            "[mode 1]\nA: [1]\nB: [1]\nC: [1]\nFx: [1]\nFy: [1]\n"
        )
        doc, diags = parse_with_diagnostics(text)
        assert doc is None
        assert any("duplicate mode id" in d.message for d in diags)

    def test_every_diagnostic_has_position(self):
        bad_inputs = [
            "dims: n=0\n[mode 1]\n",
            "[guard]\nfrom: 1\n",
            "model m\n",
            "[mode x]\n",
            "dims: n=1 p=1 r=1 mf=1 modes=1\n[mode 1]\nA: [cos(]\nB: [1]\nC: [1]\nFx: [1]\nFy: [1]\n",
        ]
        for text in bad_inputs:
            doc, diags = parse_with_diagnostics(text)
            assert doc is None
            assert diags
            for d in diags:
                assert d.line >= 1 and d.col >= 1

    def test_parse_raises_with_diagnostics(self):
        with pytest.raises(ModelFormatError) as err:
            parse("nonsense")
        assert err.value.diagnostics


class TestExpressionGrammar:
    def test_symbolic_trig(self):
        text = (
            "dims: n=1 p=1 r=1 mf=1 modes=1\n[mode 1]\n"
            "A: [cos(pi/3) + sin(pi/3) * 0]\nB: [2/4 - -0.0]\nC: [1]\nFx: [0]\nFy: [(1)]\n"
        )
        doc = parse(text)
        assert doc.modes[0].A[0, 0] == pytest.approx(COS60, abs=1e-15)
        assert doc.modes[0].B[0, 0] == 0.5

    def test_division_by_zero_diagnosed(self):
        doc, diags = parse_with_diagnostics(
            "dims: n=1 p=1 r=1 mf=1 modes=1\n[mode 1]\nA: [1/0]\nB: [1]\nC: [1]\nFx: [1]\nFy: [1]\n"
        )
        assert doc is None
        assert any("division by zero" in d.message for d in diags)

    def test_deep_nesting_rejected_not_crashed(self):
        text = (
            "dims: n=1 p=1 r=1 mf=1 modes=1\n[mode 1]\n"
            f"A: [{'(' * 500}1{')' * 500}]\nB: [1]\nC: [1]\nFx: [1]\nFy: [1]\n"
        )
        doc, diags = parse_with_diagnostics(text)
        assert doc is None
        assert any("nested" in d.message for d in diags)


class TestRoundTrip:
    def test_benchmark_round_trips_identically(self):
        doc = load_benchmark()
        text = serialize(doc)
        again = parse(text)
        assert again == doc
        assert serialize(again) == text

    def test_minimal_document_round_trips(self):
        text = "dims: n=1 p=1 r=1 mf=1 modes=1\n[mode 1]\nA: [0.5]\nB: [1]\nC: [1]\nFx: [0]\nFy: [0]\n"
        doc = parse(text)
        assert parse(serialize(doc)) == doc

    def test_randomized_documents_round_trip(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            doc = random_document(rng)
            assert parse(serialize(doc)) == doc

    def test_equality_is_discriminating(self):
        rng = np.random.default_rng(7)
        doc = random_document(rng)
        other = parse(serialize(doc))
        other.modes[0].A = other.modes[0].A + 1e-9
        assert other != doc


class TestTotality:
    def test_fuzz_bytes_never_crash(self):
        rng = np.random.default_rng(99)
        for _ in range(1500):
            length = int(rng.integers(0, 400))
            blob = bytes(rng.integers(0, 256, length, dtype=np.uint8))
            doc, diags = parse_with_diagnostics(blob)
            assert doc is None or isinstance(doc, ModelDocument)

    def test_fuzz_structured_noise(self):
        rng = np.random.default_rng(100)
        vocab = ["[mode 1]", "A:", "[guard]", "dims:", "[", "]", ";", ",", "cos(", "pi",
                 "1e999", "-", "#", ":", "\n", "model:", "0.5", "n=2", "..", "(", ")"]
        for _ in range(800):
            text = "".join(rng.choice(vocab) for _ in range(int(rng.integers(1, 60))))
            parse_with_diagnostics(text)


class TestGainsFiles:
    def test_round_trip(self):
        gains = ObserverGains(
            L=[np.array([[SIN60], [COS60]]), np.array([[SIN60], [-0.5]])],
            P=[np.eye(2), 2 * np.eye(2)],
        )
        text = serialize_gains(gains)
        back = parse_gains(text, n=2, r=1)
        for a, b in zip(gains.L, back.L):
            assert np.array_equal(a, b)
        for a, b in zip(gains.P, back.P):
            assert np.array_equal(a, b)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ModelFormatError):
            parse_gains("L1: [1, 2; 3, 4]\n", n=2, r=1)

    def test_missing_modes_rejected(self):
        with pytest.raises(ModelFormatError):
            parse_gains("L2: [1; 2]\n", n=2, r=1)
