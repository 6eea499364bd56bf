import numpy as np
import pytest

from ivgraph import (
    ReachabilitySpec,
    ScmParams,
    brute_force_iv_oracle,
    gen_classification_corpus,
    gen_random_graph,
    gen_scm_panel,
)
from ivgraph import fit_ols

from conftest import EXPECTED_368_TRIPLES


class TestGenRandomGraph:
    def test_zero_probability_is_edgeless(self):
        assert gen_random_graph(12, 0.0, seed=1).n_edges == 0

    def test_full_probability_is_complete(self):
        g = gen_random_graph(3, 1.0, seed=1)
        assert g.n_edges == 6

    def test_seed_determinism(self):
        g1 = gen_random_graph(25, 0.2, seed=9)
        g2 = gen_random_graph(25, 0.2, seed=9)
        assert g1.out_edges == g2.out_edges
        assert gen_random_graph(25, 0.2, seed=10).out_edges != g1.out_edges

    def test_terms_and_weights(self):
        g = gen_random_graph(5, 0.8, weight_range=(2.0, 3.0), seed=0)
        assert g.term(3) == "n3"
        assert all(2.0 <= w <= 3.0 for _u, _v, w in g.edges())

    def test_validation(self):
        with pytest.raises(ValueError):
            gen_random_graph(0, 0.5)
        with pytest.raises(ValueError):
            gen_random_graph(3, 1.5)
        with pytest.raises(ValueError):
            gen_random_graph(3, 0.5, weight_range=(0.0, 1.0))


class TestOracle:
    def test_worked_example(self, demo_graph):
        triples = brute_force_iv_oracle(demo_graph)
        assert {t for t in triples if t[0] == 368} == EXPECTED_368_TRIPLES

    def test_edgeless_graph_is_empty(self):
        g = gen_random_graph(10, 0.0, seed=0)
        assert brute_force_iv_oracle(g) == []
        assert brute_force_iv_oracle(g, exclusion_mode="literal") == []

    def test_output_is_sorted(self):
        g = gen_random_graph(30, 0.12, seed=3)
        triples = brute_force_iv_oracle(g)
        assert triples == sorted(triples)

    def test_size_guard(self):
        g = gen_random_graph(301, 0.0, seed=0)
        with pytest.raises(ValueError, match="300"):
            brute_force_iv_oracle(g)


class TestGenClassificationCorpus:
    VOCAB = ["cash", "debt", "asset", "rate", "price", "index"]
    MARKERS = {"growth": ["expansion", "innovation"], "value": ["dividend", "yield"]}

    def test_zero_noise_keeps_classes_pure(self):
        docs = gen_classification_corpus(30, self.VOCAB, self.MARKERS, noise_rate=0.0, seed=1)
        for _doc_id, text, label in docs:
            other = "value" if label == "growth" else "growth"
            for marker in self.MARKERS[other]:
                assert marker not in text.split()
            assert any(m in text.split() for m in self.MARKERS[label])

    def test_seed_determinism(self):
        a = gen_classification_corpus(20, self.VOCAB, self.MARKERS, 0.1, seed=5)
        b = gen_classification_corpus(20, self.VOCAB, self.MARKERS, 0.1, seed=5)
        assert a == b

    def test_labels_alternate_and_balance(self):
        docs = gen_classification_corpus(40, self.VOCAB, self.MARKERS, 0.05, seed=2)
        labels = [d[2] for d in docs]
        assert labels.count("growth") == labels.count("value") == 20

    def test_overlapping_markers_rejected(self):
        with pytest.raises(ValueError, match="disjoint"):
            gen_classification_corpus(10, self.VOCAB, {"x": ["same"], "y": ["same"]}, 0.0)

    def test_marker_terms_excluded_from_background(self):
        docs = gen_classification_corpus(40, self.VOCAB + ["dividend"], self.MARKERS, 0.0, seed=3)
        for _doc_id, text, label in docs:
            if label == "growth":
                assert "dividend" not in text.split()


class TestGenScmPanel:
    def test_no_confounding_ols_recovers_beta(self):
        params = ScmParams(pi=1.0, alpha=0.0, beta=2.0, gamma=0.0, n=10_000, seed=6)
        panel = gen_scm_panel(params)
        a, b = panel["a"].to_numpy(), panel["b"].to_numpy()
        fit = fit_ols(b, np.column_stack([np.ones(a.size), a]), names=["intercept", "a"])
        assert abs(fit.coef[1] - 2.0) < 3 * fit.se[1]

    def test_irrelevant_instrument_has_near_zero_covariance(self):
        params = ScmParams(pi=0.0, alpha=1.0, beta=2.0, gamma=1.0, n=10_000, seed=7)
        panel = gen_scm_panel(params)
        cov = np.cov(panel["z"], panel["a"])[0, 1]
        assert abs(cov) < 3.0 / np.sqrt(params.n) * np.std(panel["a"].to_numpy())

    def test_confounded_panel_hits_analytic_bias_window(self):
        # population OLS slope is beta + gamma*alpha*Var(U)/Var(A) = 2 + 1/3
        params = ScmParams(pi=1.0, alpha=1.0, beta=2.0, gamma=1.0, n=10_000, seed=42)
        panel = gen_scm_panel(params)
        a, b = panel["a"].to_numpy(), panel["b"].to_numpy()
        slope = fit_ols(b, np.column_stack([np.ones(a.size), a])).coef[1]
        assert 2.2 <= slope <= 2.45

    def test_confounder_is_not_emitted(self):
        panel = gen_scm_panel(ScmParams(pi=1.0, alpha=1.0, beta=2.0, gamma=1.0, n=100, seed=0))
        assert list(panel.columns) == ["z", "a", "b"]

    def test_group_columns_emitted_when_enabled(self):
        params = ScmParams(
            pi=1.0, alpha=1.0, beta=2.0, gamma=1.0, n=500, seed=0,
            n_industries=3, n_years=2,
        )
        panel = gen_scm_panel(params)
        assert list(panel.columns) == ["z", "a", "b", "industry", "year"]
        assert set(panel["industry"]) == {"ind0", "ind1", "ind2"}
        assert set(panel["year"]) == {"y0", "y1"}

    def test_instrument_exogeneity_in_sample(self):
        # z and the structural error gamma*u + eps decorrelate as n grows
        params = ScmParams(pi=1.0, alpha=1.0, beta=2.0, gamma=1.0, n=20_000, seed=11)
        panel = gen_scm_panel(params)
        z = panel["z"].to_numpy()
        eps2 = panel["b"].to_numpy() - params.beta * panel["a"].to_numpy()
        r = np.corrcoef(z, eps2)[0, 1]
        assert abs(r) <= 3.0 / np.sqrt(params.n)

    def test_seed_determinism(self):
        params = ScmParams(pi=0.5, alpha=1.0, beta=2.0, gamma=1.0, n=100, seed=3)
        assert gen_scm_panel(params).equals(gen_scm_panel(params))

    def test_validation(self):
        with pytest.raises(ValueError):
            ScmParams(pi=1, alpha=1, beta=2, gamma=1, n=5)
        with pytest.raises(ValueError):
            ScmParams(pi=1, alpha=1, beta=2, gamma=1, sigma_nu=0.0)
        with pytest.raises(ValueError):
            ScmParams(pi=1, alpha=1, beta=2, gamma=1, n_industries=1)
