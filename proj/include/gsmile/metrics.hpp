#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "gsmile/error.hpp"

namespace gsmile {

struct FidelityReport {
    double wmse = 0.0;
    double wmae = 0.0;
    double mean_l1 = 0.0;
    double mean_l2 = 0.0;
    double r2 = 0.0;
    double r2_w = 0.0;
    double r2_w_adj = 0.0;
    bool r2_defined = true; // false when the reference values have zero variance
    std::size_t n_points = 0;
    std::size_t n_features = 0;
};

// Full fidelity battery between reference values f (black-box shifts) and
// surrogate predictions g, with per-sample weights w.
inline FidelityReport fidelity(const std::vector<double>& f, const std::vector<double>& g,
                               const std::vector<double>& w, std::size_t n_features) {
    if (f.size() != g.size() || f.size() != w.size())
        throw Error(ErrorCode::LengthMismatch, "fidelity inputs differ in length");
    if (f.size() < 2)
        throw Error(ErrorCode::EmptyInput, "fidelity needs at least 2 points");
    for (double wj : w)
        if (!(wj > 0.0))
            throw Error(ErrorCode::InvalidConfig, "fidelity weights must be positive");

    const std::size_t np = f.size();
    double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    double fbar = std::accumulate(f.begin(), f.end(), 0.0) / double(np);
    double fbar_w = 0.0;
    for (std::size_t j = 0; j < np; ++j) fbar_w += w[j] * f[j];
    fbar_w /= wsum;

    double sse = 0.0, sae = 0.0, wse = 0.0, wae = 0.0, sst = 0.0, sst_w = 0.0;
    for (std::size_t j = 0; j < np; ++j) {
        double e = f[j] - g[j];
        sse += e * e;
        sae += std::abs(e);
        wse += w[j] * e * e;
        wae += w[j] * std::abs(e);
        sst += (f[j] - fbar) * (f[j] - fbar);
        sst_w += (f[j] - fbar_w) * (f[j] - fbar_w);
    }

    FidelityReport rep;
    rep.n_points = np;
    rep.n_features = n_features;
    rep.mean_l1 = sae / double(np);
    rep.mean_l2 = sse / double(np);
    rep.wmse = wse / wsum;
    rep.wmae = wae / wsum;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (sst <= 0.0 || sst_w <= 0.0) {
        rep.r2_defined = false;
        rep.r2 = sst > 0.0 ? 1.0 - sse / sst : nan;
        rep.r2_w = sst_w > 0.0 ? 1.0 - sse / sst_w : nan;
        rep.r2_w_adj = nan;
        return rep;
    }
    rep.r2 = 1.0 - sse / sst;
    rep.r2_w = 1.0 - sse / sst_w;
    if (np > n_features + 1) {
        rep.r2_w_adj =
            1.0 - (1.0 - rep.r2_w) * (double(np) - 1.0) / (double(np) - double(n_features) - 1.0);
    } else {
        rep.r2_w_adj = nan;
    }
    return rep;
}

struct GroundTruthMap {
    std::vector<int> labels; // 0/1 per perturbable token

    std::size_t positives() const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    }
};

struct AccuracyResult {
    double acc = 0.0;
    double f1 = 0.0;
    double auroc = 0.0;
};

// Ranking accuracy of attribution scores against 0/1 token labels. AUROC uses
// the pairwise-comparison form with ties counted as half; ACC/F1 binarize at
// top-k where k is the number of positive labels (ties to the lower index).
inline AccuracyResult att_accuracy(const std::vector<double>& scores,
                                   const GroundTruthMap& truth) {
    if (scores.size() != truth.labels.size())
        throw Error(ErrorCode::LengthMismatch, "scores/labels length mismatch");
    const std::size_t n = scores.size();
    std::size_t pos = truth.positives();
    if (pos == 0 || pos == n)
        throw Error(ErrorCode::UndefinedAUROC, "ground truth is single-class");

    double pairs = 0.0, wins = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (truth.labels[i] != 1) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (truth.labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }

    // top-k binarization, k = number of positives; ties to lower token index
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    std::vector<int> pred(n, 0);
    for (std::size_t k = 0; k < pos; ++k) pred[order[k]] = 1;

    std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (pred[i] == truth.labels[i]) ++correct;
        if (pred[i] == 1 && truth.labels[i] == 1) ++tp;
        if (pred[i] == 1 && truth.labels[i] == 0) ++fp;
        if (pred[i] == 0 && truth.labels[i] == 1) ++fn;
    }

    AccuracyResult r;
    r.auroc = wins / pairs;
    r.acc = double(correct) / double(n);
    double denom = double(2 * tp + fp + fn);
    r.f1 = denom > 0.0 ? 2.0 * double(tp) / denom : 0.0;
    return r;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty())
        throw Error(ErrorCode::BothEmpty, "jaccard of two empty sets");
    std::size_t inter = 0;
    for (const auto& x : a)
        if (b.count(x)) ++inter;
    std::size_t uni = a.size() + b.size() - inter;
    return double(inter) / double(uni);
}

struct ConsistencyStats {
    std::vector<double> variance; // per token, sample (n-1) statistics
    std::vector<double> stddev;
    double mean_variance = 0.0;
    double mean_stddev = 0.0;
};

// Per-token sample variance/std of attribution scores across repeated runs.
inline ConsistencyStats consistency(const std::vector<std::vector<double>>& runs) {
    if (runs.size() < 2)
        throw Error(ErrorCode::TooFewRuns, "consistency needs at least 2 runs");
    const std::size_t n = runs[0].size();
    for (const auto& r : runs)
        if (r.size() != n)
            throw Error(ErrorCode::LengthMismatch, "runs differ in token count");

    ConsistencyStats out;
    out.variance.resize(n);
    out.stddev.resize(n);
    const double m = double(runs.size());
    for (std::size_t t = 0; t < n; ++t) {
        // shifted sums: exact zero for identical runs, better conditioned
        // than the naive mean when scores share a large common offset
        double s = 0.0, ss = 0.0;
        for (const auto& r : runs) {
            double d = r[t] - runs[0][t];
            s += d;
            ss += d * d;
        }
        out.variance[t] = std::max(0.0, (ss - s * s / m) / (m - 1.0));
        out.stddev[t] = std::sqrt(out.variance[t]);
    }
    out.mean_variance =
        std::accumulate(out.variance.begin(), out.variance.end(), 0.0) / double(n);
    out.mean_stddev = std::accumulate(out.stddev.begin(), out.stddev.end(), 0.0) / double(n);
    return out;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw Error(ErrorCode::LengthMismatch, "pearson inputs differ in length");
    if (x.size() < 2)
        throw Error(ErrorCode::EmptyInput, "pearson needs at least 2 points");
    const double n = double(x.size());
    double xbar = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ybar = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - xbar) * (y[i] - ybar);
        sxx += (x[i] - xbar) * (x[i] - xbar);
        syy += (y[i] - ybar) * (y[i] - ybar);
    }
    if (sxx <= 0.0 || syy <= 0.0)
        throw Error(ErrorCode::ZeroVariance, "pearson input has zero variance");
    return sxy / std::sqrt(sxx * syy);
}

} // namespace gsmile
