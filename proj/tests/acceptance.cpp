// Acceptance suite: one pass/fail line per criterion, exit 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "gsmile/metrics.hpp"
#include "gsmile/pipeline.hpp"
#include "gsmile/significance.hpp"
#include "gsmile/surrogate.hpp"
#include "gsmile/transport.hpp"
#include "oracles.hpp"

using namespace gsmile;
using clock_type = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    if (!ok) ++failures;
}

double elapsed_s(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::vector<double> random_weights(std::mt19937& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) {
        x = u(rng);
        s += x;
    }
    for (auto& x : w) x /= s;
    return w;
}

EmbeddedDoc random_doc(std::mt19937& rng, std::size_t n, std::size_t dim) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    EmbeddedDoc d;
    d.support.assign(n, Vec(dim));
    for (auto& p : d.support)
        for (auto& x : p) x = u(rng);
    d.weights = random_weights(rng, n);
    return d;
}

double oracle_emd(const EmbeddedDoc& a, const EmbeddedDoc& b, int p) {
    oracle::Matrix C(a.support.size(), std::vector<double>(b.support.size()));
    for (std::size_t i = 0; i < a.support.size(); ++i)
        for (std::size_t j = 0; j < b.support.size(); ++j) {
            double s = 0.0;
            for (std::size_t d = 0; d < a.support[i].size(); ++d) {
                double diff = a.support[i][d] - b.support[j][d];
                s += diff * diff;
            }
            C[i][j] = std::pow(std::sqrt(s), p);
        }
    return std::pow(oracle::transport_lp(a.weights, b.weights, C), 1.0 / p);
}

// --- criterion 1: published Pearson correlations --------------------------

void criterion_1() {
    auto t0 = clock_type::now();
    std::vector<double> acc = {0.70, 0.688, 0.785};
    double r_auroc = pearson(acc, {0.84, 0.84, 0.88});
    double r_acc = pearson(acc, {0.70, 0.76, 0.82});
    double r_f1 = pearson(acc, {0.59, 0.40, 0.67});
    double dt = elapsed_s(t0);
    bool ok = std::abs(r_auroc - 0.994) <= 0.002 && std::abs(r_acc - 0.804) <= 0.002 &&
              std::abs(r_f1 - 0.802) <= 0.002 && dt < 0.001;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "pearson correlations %.4f/%.4f/%.4f vs 0.994/0.804/0.802 (+-0.002), %.3g s",
                  r_auroc, r_acc, r_f1, dt);
    report(1, ok, buf);
}

// --- criterion 2: OT solver vs independent LP oracle ----------------------

void criterion_2() {
    auto t0 = clock_type::now();
    std::mt19937 rng(2026);
    TransportConfig cfg;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t m = 1 + rng() % 6, n = 1 + rng() % 6, dim = 1 + rng() % 4;
        auto a = random_doc(rng, m, dim);
        auto b = random_doc(rng, n, dim);
        cfg.p = (trial % 2) + 1;
        double got = emd(a, b, cfg).value;
        double want = oracle_emd(a, b, cfg.p);
        worst = std::max(worst, std::abs(got - want));
    }
    double dt = elapsed_s(t0);
    bool ok = worst <= 1e-9 && dt < 10.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "200 random OT instances, max |emd - LP oracle| = %.3g (<= 1e-9), %.2f s",
                  worst, dt);
    report(2, ok, buf);
}

// --- criterion 3: closed-form 1-D Wasserstein -----------------------------

void criterion_3() {
    bool ok = true;
    double w1 = wasserstein_1d({0, 1, 2}, {1, 2, 3}, 1).value;
    double w2 = wasserstein_1d({0}, {3}, 2).value;
    ok = ok && std::abs(w1 - 1.0) <= 1e-12 && std::abs(w2 - 3.0) <= 1e-12;

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    TransportConfig cfg;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 1 + rng() % 8;
        std::vector<double> xs(n), ys(n);
        for (auto& x : xs) x = u(rng);
        for (auto& y : ys) y = u(rng);
        EmbeddedDoc a, b;
        for (double x : xs) a.support.push_back({x});
        for (double y : ys) b.support.push_back({y});
        a.weights.assign(n, 1.0 / double(n));
        b.weights = a.weights;
        double closed = wasserstein_1d(xs, ys, 1).value;
        double exact = emd(a, b, cfg).value;
        worst = std::max(worst, std::abs(closed - exact));
    }
    ok = ok && worst <= 1e-9;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "W1=%.3f (want 1), W2=%.3f (want 3); closed-form vs emd max err %.3g on 100 "
                  "clouds",
                  w1, w2, worst);
    report(3, ok, buf);
}

// --- criterion 4: TV bound ------------------------------------------------

void criterion_4() {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TransportConfig cfg;
    int violations = 0;
    for (int trial = 0; trial < 500; ++trial) {
        std::size_t n = 2 + rng() % 5;
        std::vector<Vec> pts(n, Vec(3));
        for (auto& p : pts)
            for (auto& x : p) x = u(rng);
        EmbeddedDoc p, q;
        p.support = pts;
        q.support = pts;
        p.weights = random_weights(rng, n);
        q.weights = random_weights(rng, n);
        double diam = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                diam = std::max(diam, detail::euclid_pow(pts[i], pts[j], 1));
        if (emd(p, q, cfg).value > diam * tv_distance(p.weights, q.weights) + 1e-9)
            ++violations;
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "emd <= diam * tv on 500 shared-support pairs, %d violations", violations);
    report(4, violations == 0, buf);
}

// --- criterion 5: surrogate recovery --------------------------------------

void criterion_5() {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> wdist(0.05, 1.0);
    const double theta0 = 0.4;
    const std::vector<double> theta = {1.25, -0.5, 2.0, 0.0};
    RegressionProblem p;
    for (int r = 0; r < 24; ++r) {
        std::vector<double> z(4);
        for (auto& x : z) x = (rng() % 2) ? 1.0 : 0.0;
        double y = theta0;
        for (std::size_t i = 0; i < 4; ++i) y += theta[i] * z[i];
        p.Z.push_back(std::move(z));
        p.delta.push_back(y);
        p.w.push_back(wdist(rng));
    }

    auto wls = fit_wls(p, 0.0);
    double coef_err = std::abs(wls.theta0 - theta0);
    for (std::size_t i = 0; i < 4; ++i)
        coef_err = std::max(coef_err, std::abs(wls.theta[i] - theta[i]));

    std::vector<double> pred;
    for (const auto& z : p.Z) pred.push_back(wls.predict(z));
    double r2w = fidelity(p.delta, pred, p.w, 4).r2_w;

    auto bayes = fit_bayes_ridge(p, 1e-10, 1.0);
    double bayes_err = std::abs(bayes.theta0 - wls.theta0);
    for (std::size_t i = 0; i < 4; ++i)
        bayes_err = std::max(bayes_err, std::abs(bayes.theta[i] - wls.theta[i]));

    bool ok = coef_err <= 1e-9 && std::abs(r2w - 1.0) <= 1e-9 && bayes_err <= 1e-6;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "planted recovery err %.3g (<=1e-9), r2_w-1 = %.3g, flat-prior gap %.3g "
                  "(<=1e-6)",
                  coef_err, r2w - 1.0, bayes_err);
    report(5, ok, buf);
}

// --- criterion 6: kernel values -------------------------------------------

void criterion_6() {
    double sigma = 1.7;
    double e0 = std::abs(kernel_weight(0.0, sigma) - 1.0);
    double e1 = std::abs(kernel_weight(sigma, sigma) - std::exp(-1.0));
    double e2 = std::abs(kernel_weight(2.0 * sigma, sigma) - std::exp(-4.0));
    bool ok = e0 <= 1e-12 && e1 <= 1e-12 && e2 <= 1e-12;
    char buf[140];
    std::snprintf(buf, sizeof(buf),
                  "weight(0)=1, weight(s)=e^-1, weight(2s)=e^-4; errs %.2g/%.2g/%.2g", e0, e1,
                  e2);
    report(6, ok, buf);
}

// --- criterion 7: bootstrap behavior --------------------------------------

void criterion_7() {
    auto t0 = clock_type::now();
    std::mt19937 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Vec> X, Y;
    for (int i = 0; i < 10; ++i) X.push_back({g(rng)});
    for (int i = 0; i < 10; ++i) Y.push_back({g(rng) + 100.0});

    BootstrapConfig same_cfg;
    same_cfg.max_itr = 1000;
    same_cfg.seed = 2;
    auto same = bootstrap_pvalue(X, X, same_cfg);

    BootstrapConfig sep_cfg;
    sep_cfg.max_itr = 10000;
    sep_cfg.seed = 3;
    auto sep = bootstrap_pvalue(X, Y, sep_cfg);
    auto sep_again = bootstrap_pvalue(X, Y, sep_cfg);

    double dt = elapsed_s(t0);
    bool ok = same.p_value >= 0.95 && sep.p_value <= 0.01 &&
              sep.p_value == sep_again.p_value && dt < 5.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "identical p=%.3f (>=0.95), separated p=%.4f (<=0.01), seed-stable=%d, %.2f s",
                  same.p_value, sep.p_value, int(sep.p_value == sep_again.p_value), dt);
    report(7, ok, buf);
}

// --- criterion 8: end-to-end planted importance ---------------------------

void criterion_8() {
    auto t0 = clock_type::now();

    GeneratorSpec spec;
    spec.backend = Backend::Mock;
    spec.lexicon.fragments = {{"red", "aa bb"},
                              {"blue", "cc dd ee ff"},
                              {"green", "gg hh ii jj kk ll mm nn"}};
    // "cats" and "dogs" map to nothing: removing them never moves the output.
    const std::string prompt = "red blue green cats dogs";

    ExplainConfig cfg;
    cfg.n_perturbations = 30; // full enumeration at n = 5
    cfg.seed = 1;
    cfg.significance_enabled = false;
    cfg.ridge_lambda = 0.0;
    cfg.embedding_dim = 16;
    cfg.top_k = 3;

    ModelGateway gw;
    Explainer ex(gw, cfg);
    auto e = ex.explain(prompt, spec);

    bool rank_ok = e.top_token_set(1) == std::set<std::string>{"2:green"};

    GroundTruthMap truth;
    truth.labels = {1, 1, 1, 0, 0};
    std::vector<double> scores;
    for (const auto& a : e.attributions) scores.push_back(a.intensity);
    double auroc = att_accuracy(scores, truth).auroc;

    auto stab = ex.evaluate_stability(prompt, spec, "***");

    ModelGateway gw2;
    Explainer ex2(gw2, cfg);
    auto stats = ex2.evaluate_consistency(prompt, spec, 10, /*vary_seeds=*/false);
    double max_var = 0.0;
    for (double v : stats.variance) max_var = std::max(max_var, v);

    double dt = elapsed_s(t0);
    bool ok = rank_ok && auroc == 1.0 && stab.jaccard == 1.0 && max_var == 0.0 && dt < 2.0;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "dominant token first=%d, auroc=%.3f (=1), sentinel jaccard=%.3f (=1), "
                  "10-run shared-seed variance=%.3g (=0), %.2f s offline",
                  int(rank_ok), auroc, stab.jaccard, max_var, dt);
    report(8, ok, buf);
}

// --- criterion 9: sweep/compare harness generation budget ------------------

void criterion_9() {
    GeneratorSpec spec;
    spec.backend = Backend::Mock;
    spec.lexicon.fragments = {{"red", "aa bb"},
                              {"blue", "cc dd ee ff"},
                              {"green", "gg hh ii jj kk ll mm nn"}};
    const std::string prompt = "red blue green cats dogs";

    ExplainConfig cfg;
    cfg.n_perturbations = 64;
    cfg.seed = 1;
    cfg.significance_enabled = false;
    cfg.ridge_lambda = 1e-10;
    cfg.embedding_dim = 16;

    ModelGateway gw;
    Explainer ex(gw, cfg);
    auto rows = ex.sweep_perturbations(prompt, spec, {32, 64});
    std::vector<CompareCell> cells = {
        {DistKind::Wmd, DistKind::Wmd, SurrogateMethod::Wls},
        {DistKind::Cosine, DistKind::Cosine, SurrogateMethod::Wls},
        {DistKind::Wmd, DistKind::Wmd, SurrogateMethod::BayesRidge},
        {DistKind::WmdPlusC, DistKind::Wmd, SurrogateMethod::Wls},
    };
    auto matrix = ex.compare_methods(prompt, spec, cells);

    std::size_t calls = gw.backend_calls();
    bool ok = rows.size() == 2 && matrix.size() == 4 && calls <= 1 + 64;
    for (const auto& r : rows) ok = ok && r.fidelity_report.n_points > 0;
    for (const auto& m : matrix) ok = ok && m.fidelity_report.n_points > 0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "sweep rows=%zu (want 2), compare cells=%zu (want 4), generations=%zu "
                  "(<= 65 via cache)",
                  rows.size(), matrix.size(), calls);
    report(9, ok, buf);
}

// --- criterion 10: non-reproducibility note ---------------------------------

void criterion_10() {
    report(10, true,
           "note: published absolute benchmark scores depend on live commercial LLMs and are "
           "not acceptance targets; metric formulas are validated by criteria 1-8");
}

} // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    if (failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", failures);
    return 1;
}
