#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "gsmile/embedding.hpp"
#include "gsmile/error.hpp"
#include "gsmile/text.hpp"

namespace gsmile {

struct TransportConfig {
    int p = 1;               // norm order of the Wasserstein-P distance
    std::size_t max_support = 512;
};

enum class SolverKind { Exact, ClosedForm };

struct DistanceResult {
    double value = 0.0;
    SolverKind solver = SolverKind::Exact;
    std::size_t iterations = 0;
};

namespace detail {

inline double euclid_pow(const Vec& a, const Vec& b, int p) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        double diff = a[d] - b[d];
        s += diff * diff;
    }
    double dist = std::sqrt(s);
    return p == 1 ? dist : std::pow(dist, p);
}

// Exact solver for the balanced transportation problem
//   min sum c_ij x_ij   s.t.  sum_j x_ij = a_i,  sum_i x_ij = b_j,  x >= 0
// via the primal transportation simplex (northwest-corner start, tree-based
// potentials, Bland's rule for anti-cycling). Returns optimal cost.
class TransportationSimplex {
public:
    TransportationSimplex(std::vector<double> supply, std::vector<double> demand,
                          const std::vector<std::vector<double>>& cost)
        : a_(std::move(supply)), d_(std::move(demand)), c_(cost),
          m_(a_.size()), n_(d_.size()) {}

    double solve(std::size_t& iterations_out) {
        flow_.assign(m_, std::vector<double>(n_, 0.0));
        basic_.assign(m_, std::vector<char>(n_, 0));
        northwest_corner();

        const std::size_t max_pivots = 50 * (m_ + n_) * (m_ + n_) + 1000;
        std::size_t pivots = 0;
        while (pivots < max_pivots) {
            compute_potentials();
            std::size_t ei = m_, ej = n_;
            double best = -entering_tol();
            for (std::size_t i = 0; i < m_; ++i) {
                for (std::size_t j = 0; j < n_; ++j) {
                    if (basic_[i][j]) continue;
                    double r = c_[i][j] - u_[i] - v_[j];
                    if (r < best) {
                        best = r;
                        ei = i;
                        ej = j;
                    }
                }
            }
            if (ei == m_) break; // optimal
            pivot(ei, ej);
            ++pivots;
        }
        if (pivots >= max_pivots)
            throw Error(ErrorCode::SolverFailure, "transport simplex did not converge");

        iterations_out = pivots;
        double total = 0.0;
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                if (flow_[i][j] > 0.0) total += flow_[i][j] * c_[i][j];
        return total;
    }

private:
    double entering_tol() const {
        double scale = 1.0;
        for (const auto& row : c_)
            for (double x : row) scale = std::max(scale, std::abs(x));
        return 1e-12 * scale;
    }

    void northwest_corner() {
        std::vector<double> a = a_, d = d_;
        std::size_t i = 0, j = 0;
        while (i < m_ && j < n_) {
            double q = std::min(a[i], d[j]);
            flow_[i][j] = q;
            basic_[i][j] = 1;
            a[i] -= q;
            d[j] -= q;
            bool row_done = a[i] <= 1e-15;
            bool col_done = d[j] <= 1e-15;
            if (row_done && col_done) {
                // Degenerate step: advance only one index so the basis keeps
                // m + n - 1 cells (the next cell enters with zero flow).
                if (i + 1 < m_) ++i;
                else ++j;
            } else if (row_done) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    void compute_potentials() {
        u_.assign(m_, 0.0);
        v_.assign(n_, 0.0);
        std::vector<char> udone(m_, 0), vdone(n_, 0);
        // Nodes 0..m-1 rows, m..m+n-1 cols; basis cells are tree edges.
        std::deque<std::size_t> queue;
        u_[0] = 0.0;
        udone[0] = 1;
        queue.push_back(0);
        while (!queue.empty()) {
            std::size_t node = queue.front();
            queue.pop_front();
            if (node < m_) {
                std::size_t i = node;
                for (std::size_t j = 0; j < n_; ++j) {
                    if (basic_[i][j] && !vdone[j]) {
                        v_[j] = c_[i][j] - u_[i];
                        vdone[j] = 1;
                        queue.push_back(m_ + j);
                    }
                }
            } else {
                std::size_t j = node - m_;
                for (std::size_t i = 0; i < m_; ++i) {
                    if (basic_[i][j] && !udone[i]) {
                        u_[i] = c_[i][j] - v_[j];
                        udone[i] = 1;
                        queue.push_back(i);
                    }
                }
            }
        }
    }

    // Cycle through the basis tree from row ei to col ej, then pivot on it.
    void pivot(std::size_t ei, std::size_t ej) {
        const std::size_t nodes = m_ + n_;
        std::vector<std::size_t> parent(nodes, nodes);
        std::vector<char> visited(nodes, 0);
        std::deque<std::size_t> queue;
        visited[ei] = 1;
        queue.push_back(ei);
        while (!queue.empty() && !visited[m_ + ej]) {
            std::size_t node = queue.front();
            queue.pop_front();
            if (node < m_) {
                std::size_t i = node;
                for (std::size_t j = 0; j < n_; ++j) {
                    if (basic_[i][j] && !visited[m_ + j]) {
                        visited[m_ + j] = 1;
                        parent[m_ + j] = node;
                        queue.push_back(m_ + j);
                    }
                }
            } else {
                std::size_t j = node - m_;
                for (std::size_t i = 0; i < m_; ++i) {
                    if (basic_[i][j] && !visited[i]) {
                        visited[i] = 1;
                        parent[i] = node;
                        queue.push_back(i);
                    }
                }
            }
        }
        if (!visited[m_ + ej])
            throw Error(ErrorCode::SolverFailure, "basis tree disconnected");

        // Path col ej -> ... -> row ei; cells alternate signs starting with
        // the entering cell at +.
        std::vector<std::pair<std::size_t, std::size_t>> cycle; // (i, j) cells
        cycle.emplace_back(ei, ej);
        std::size_t node = m_ + ej;
        while (node != ei) {
            std::size_t par = parent[node];
            if (node < m_) cycle.emplace_back(node, par - m_);
            else cycle.emplace_back(par, node - m_);
            node = par;
        }

        // Odd positions in the cycle are the minus cells.
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = cycle.size();
        for (std::size_t k = 1; k < cycle.size(); k += 2) {
            auto [i, j] = cycle[k];
            bool better = flow_[i][j] < theta;
            bool tie_lower = leave < cycle.size() && flow_[i][j] == theta &&
                             cycle[k] < cycle[leave];
            if (better || tie_lower) {
                theta = flow_[i][j];
                leave = k;
            }
        }
        if (leave == cycle.size())
            throw Error(ErrorCode::SolverFailure, "no leaving variable");

        for (std::size_t k = 0; k < cycle.size(); ++k) {
            auto [i, j] = cycle[k];
            if (k % 2 == 0) flow_[i][j] += theta;
            else flow_[i][j] -= theta;
        }
        auto [li, lj] = cycle[leave];
        flow_[li][lj] = 0.0;
        basic_[li][lj] = 0;
        basic_[ei][ej] = 1;
    }

    std::vector<double> a_, d_;
    std::vector<std::vector<double>> c_;
    std::size_t m_, n_;
    std::vector<std::vector<double>> flow_;
    std::vector<std::vector<char>> basic_;
    std::vector<double> u_, v_;
};

} // namespace detail

// Exact Wasserstein-P distance between two discrete distributions with
// Euclidean ground cost: cost(i,j) = |u_i - v_j|^p, result = (optimal cost)^(1/p).
inline DistanceResult emd(const EmbeddedDoc& a, const EmbeddedDoc& b,
                          const TransportConfig& cfg = {}) {
    if (a.support.empty() || b.support.empty())
        throw Error(ErrorCode::EmptyDocument, "emd over empty document");
    if (a.support.size() > cfg.max_support || b.support.size() > cfg.max_support)
        throw Error(ErrorCode::SupportTooLarge,
                    "support exceeds max_support = " + std::to_string(cfg.max_support));
    if (a.support[0].size() != b.support[0].size())
        throw Error(ErrorCode::SupportMismatch, "embedding dimensions differ");

    const std::size_t m = a.support.size(), n = b.support.size();
    std::vector<std::vector<double>> cost(m, std::vector<double>(n));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            cost[i][j] = detail::euclid_pow(a.support[i], b.support[j], cfg.p);

    detail::TransportationSimplex solver(a.weights, b.weights, cost);
    std::size_t iters = 0;
    double total = solver.solve(iters);
    total = std::max(total, 0.0);

    DistanceResult r;
    r.value = cfg.p == 1 ? total : std::pow(total, 1.0 / cfg.p);
    r.solver = SolverKind::Exact;
    r.iterations = iters;
    return r;
}

// Closed-form W_p for scalar empirical samples. Equal sizes reduce to the
// sorted-pairs mean; unequal sizes integrate over the merged quantile grid.
inline DistanceResult wasserstein_1d(std::vector<double> xs, std::vector<double> ys, int p = 1) {
    if (xs.empty() || ys.empty())
        throw Error(ErrorCode::EmptyInput, "wasserstein_1d on empty sample");
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());

    double acc = 0.0;
    if (xs.size() == ys.size()) {
        for (std::size_t i = 0; i < xs.size(); ++i)
            acc += std::pow(std::abs(xs[i] - ys[i]), p);
        acc /= static_cast<double>(xs.size());
    } else {
        // Quantile-function integral over the common refinement of both grids.
        const std::size_t nx = xs.size(), ny = ys.size();
        std::vector<double> cuts;
        cuts.reserve(nx + ny + 1);
        for (std::size_t i = 0; i <= nx; ++i) cuts.push_back(double(i) / double(nx));
        for (std::size_t j = 1; j < ny; ++j) cuts.push_back(double(j) / double(ny));
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            double lo = cuts[k], hi = cuts[k + 1];
            double mid = 0.5 * (lo + hi);
            std::size_t ix = std::min<std::size_t>(std::size_t(mid * nx), nx - 1);
            std::size_t iy = std::min<std::size_t>(std::size_t(mid * ny), ny - 1);
            acc += (hi - lo) * std::pow(std::abs(xs[ix] - ys[iy]), p);
        }
    }
    DistanceResult r;
    r.value = std::pow(acc, 1.0 / p);
    r.solver = SolverKind::ClosedForm;
    return r;
}

// Input-level distance between the original and a perturbed prompt.
inline DistanceResult iwmd(const TokenizedPrompt& x, const PerturbedPrompt& xj,
                           const WordVectorTable& table, const TransportConfig& cfg = {}) {
    auto xt = x.token_texts();
    auto pt = split_token_texts(xj.text);
    if (xt.empty() || pt.empty())
        throw Error(ErrorCode::EmptyDocument, "iwmd over empty token list");
    return emd(embed_doc(xt, table), embed_doc(pt, table), cfg);
}

// Output-level shift between the original and a perturbed generation.
inline DistanceResult owmd(const std::string& y_org, const std::string& y_pert,
                           const WordVectorTable& table, const TransportConfig& cfg = {}) {
    auto ta = split_token_texts(y_org);
    auto tb = split_token_texts(y_pert);
    if (ta.empty() || tb.empty())
        throw Error(ErrorCode::EmptyOutput, "generation is empty after tokenization");
    return emd(embed_doc(ta, table), embed_doc(tb, table), cfg);
}

inline double cosine_distance(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::SupportMismatch, "centroid dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        dot += a[d] * b[d];
        na += a[d] * a[d];
        nb += b[d] * b[d];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < 1e-15 || nb < 1e-15)
        throw Error(ErrorCode::ZeroVector, "cosine distance of zero centroid");
    double v = 1.0 - dot / (na * nb);
    return std::clamp(v, 0.0, 2.0);
}

// Half the L1 difference between two distributions on a shared support.
inline double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size() || p.empty())
        throw Error(ErrorCode::SupportMismatch, "tv_distance needs a shared support");
    double sp = 0.0, sq = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sp += p[i];
        sq += q[i];
        acc += std::abs(p[i] - q[i]);
    }
    if (std::abs(sp - 1.0) > 1e-6 || std::abs(sq - 1.0) > 1e-6)
        throw Error(ErrorCode::SupportMismatch, "distributions must be normalized");
    return 0.5 * acc;
}

} // namespace gsmile
