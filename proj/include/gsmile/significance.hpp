#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "gsmile/embedding.hpp"
#include "gsmile/error.hpp"
#include "gsmile/transport.hpp"

namespace gsmile {

struct BootstrapConfig {
    std::size_t max_itr = 1000;
    std::uint64_t seed = 0;
    double alpha = 0.05;
    // Published pseudocode draws e and f independently from the pool, so they
    // may overlap; `partition` switches to a disjoint split.
    bool partition = false;
    TransportConfig transport;
};

struct SignificanceResult {
    double observed = 0.0;
    double p_value = 1.0;
    bool kept = false;
};

namespace detail {

inline EmbeddedDoc uniform_cloud(const std::vector<Vec>& pts) {
    EmbeddedDoc d;
    d.support = pts;
    d.weights.assign(pts.size(), 1.0 / static_cast<double>(pts.size()));
    return d;
}

} // namespace detail

// Bootstrap p-value for the distance between two embedding clouds: pool both
// clouds, repeatedly resample same-size clouds without replacement, and count
// how often the resampled distance exceeds the observed one.
inline SignificanceResult bootstrap_pvalue(const std::vector<Vec>& X,
                                           const std::vector<Vec>& Y,
                                           const BootstrapConfig& cfg) {
    if (X.empty() || Y.empty())
        throw Error(ErrorCode::EmptyInput, "bootstrap over empty cloud");
    if (cfg.max_itr == 0)
        throw Error(ErrorCode::InvalidConfig, "max_itr must be > 0");

    const double observed =
        emd(detail::uniform_cloud(X), detail::uniform_cloud(Y), cfg.transport).value;

    std::vector<Vec> pool = X;
    pool.insert(pool.end(), Y.begin(), Y.end());
    const std::size_t lx = X.size(), ly = Y.size(), total = pool.size();

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> idx(total);
    std::size_t bigger = 0;
    for (std::size_t it = 0; it < cfg.max_itr; ++it) {
        for (std::size_t i = 0; i < total; ++i) idx[i] = i;
        // Partial shuffle: first lx entries become e.
        for (std::size_t i = 0; i < lx; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, total - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        std::vector<Vec> e, f;
        e.reserve(lx);
        f.reserve(ly);
        for (std::size_t i = 0; i < lx; ++i) e.push_back(pool[idx[i]]);
        if (cfg.partition) {
            for (std::size_t i = lx; i < total; ++i) f.push_back(pool[idx[i]]);
        } else {
            // Independent draw of f from the full pool, without replacement.
            for (std::size_t i = 0; i < total; ++i) idx[i] = i;
            for (std::size_t i = 0; i < ly; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, total - 1);
                std::swap(idx[i], idx[pick(rng)]);
                f.push_back(pool[idx[i]]);
            }
        }
        double boot =
            emd(detail::uniform_cloud(e), detail::uniform_cloud(f), cfg.transport).value;
        if (boot > observed) ++bigger;
    }

    SignificanceResult r;
    r.observed = observed;
    r.p_value = static_cast<double>(bigger) / static_cast<double>(cfg.max_itr);
    r.kept = r.p_value <= cfg.alpha;
    return r;
}

} // namespace gsmile
