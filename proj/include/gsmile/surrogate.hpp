#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gsmile/error.hpp"
#include "gsmile/text.hpp"

namespace gsmile {

struct KernelConfig {
    // sigma > 0 for a fixed width; <= 0 selects the adaptive-median rule.
    double sigma = 0.0;
    bool adaptive() const { return sigma <= 0.0; }
};

// Gaussian similarity kernel: exp(-(delta/sigma)^2), in (0, 1].
inline double kernel_weight(double delta, double sigma) {
    if (sigma <= 0.0)
        throw Error(ErrorCode::NonpositiveSigma, "sigma must be > 0");
    double r = delta / sigma;
    return std::exp(-r * r);
}

// Fixed sigma passes through; adaptive mode takes the median of the
// positive distances in the batch.
inline double resolve_sigma(const std::vector<double>& deltas, const KernelConfig& cfg) {
    if (!cfg.adaptive()) return cfg.sigma;
    std::vector<double> pos;
    for (double d : deltas)
        if (d > 0.0) pos.push_back(d);
    if (pos.empty())
        throw Error(ErrorCode::AllZeroDistances,
                    "adaptive sigma needs at least one positive distance");
    std::sort(pos.begin(), pos.end());
    std::size_t n = pos.size();
    return n % 2 == 1 ? pos[n / 2] : 0.5 * (pos[n / 2 - 1] + pos[n / 2]);
}

struct RegressionProblem {
    // Rows = masks (1 = token kept), one column per perturbable token.
    std::vector<std::vector<double>> Z;
    std::vector<double> delta;
    std::vector<double> w;

    std::size_t rows() const { return Z.size(); }
    std::size_t cols() const { return Z.empty() ? 0 : Z[0].size(); }

    void validate() const {
        if (Z.empty()) throw Error(ErrorCode::EmptyInput, "regression problem has no rows");
        if (delta.size() != Z.size() || w.size() != Z.size())
            throw Error(ErrorCode::LengthMismatch, "Z/delta/w row counts differ");
        for (const auto& row : Z)
            if (row.size() != Z[0].size())
                throw Error(ErrorCode::LengthMismatch, "ragged design matrix");
        for (double wj : w)
            if (!(wj > 0.0 && wj <= 1.0 + 1e-12))
                throw Error(ErrorCode::InvalidConfig, "weights must lie in (0, 1]");
        for (double d : delta)
            if (!std::isfinite(d))
                throw Error(ErrorCode::InvalidConfig, "non-finite response value");
    }
};

enum class SurrogateMethod { Wls, BayesRidge };

struct SurrogateFit {
    double theta0 = 0.0;
    std::vector<double> theta;
    SurrogateMethod method = SurrogateMethod::Wls;
    double ridge_lambda = 0.0;
    std::optional<std::vector<double>> posterior_var;

    double predict(const std::vector<double>& z) const {
        double y = theta0;
        for (std::size_t i = 0; i < theta.size(); ++i) y += theta[i] * z[i];
        return y;
    }
};

namespace detail {

inline Eigen::MatrixXd design_with_intercept(const RegressionProblem& p) {
    Eigen::MatrixXd X(p.rows(), p.cols() + 1);
    for (std::size_t j = 0; j < p.rows(); ++j) {
        X(j, 0) = 1.0;
        for (std::size_t i = 0; i < p.cols(); ++i) X(j, i + 1) = p.Z[j][i];
    }
    return X;
}

} // namespace detail

// Weighted least squares with an optional ridge penalty on the coefficients.
// The intercept is never regularized. Closed-form normal-equation solve.
inline SurrogateFit fit_wls(const RegressionProblem& problem, double ridge_lambda = 0.0) {
    problem.validate();
    if (ridge_lambda < 0.0)
        throw Error(ErrorCode::InvalidConfig, "ridge_lambda must be >= 0");

    const std::size_t n = problem.cols();
    Eigen::MatrixXd X = detail::design_with_intercept(problem);
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(problem.delta.data(),
                                                          problem.delta.size());
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(problem.w.data(), problem.w.size());

    Eigen::MatrixXd A = X.transpose() * w.asDiagonal() * X;
    for (std::size_t i = 1; i <= n; ++i) A(i, i) += ridge_lambda;
    Eigen::VectorXd b = X.transpose() * (w.asDiagonal() * y);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) {
        if (ridge_lambda == 0.0)
            throw Error(ErrorCode::SingularSystem,
                        "weighted Gram matrix is rank-deficient; add ridge");
        throw Error(ErrorCode::SolverFailure, "normal equations singular despite ridge");
    }
    Eigen::VectorXd sol = lu.solve(b);

    SurrogateFit fit;
    fit.theta0 = sol(0);
    fit.theta.assign(sol.data() + 1, sol.data() + 1 + n);
    fit.method = SurrogateMethod::Wls;
    fit.ridge_lambda = ridge_lambda;
    return fit;
}

// Posterior mean/variance of a Gaussian-prior linear model on weight-scaled
// data. Prior precision applies to the coefficients only, so the flat-prior
// limit recovers the WLS solution.
inline SurrogateFit fit_bayes_ridge(const RegressionProblem& problem,
                                    double prior_precision, double noise_precision) {
    problem.validate();
    if (prior_precision <= 0.0 || noise_precision <= 0.0)
        throw Error(ErrorCode::NonpositivePrecision,
                    "prior and noise precisions must be > 0");

    const std::size_t n = problem.cols();
    Eigen::MatrixXd X = detail::design_with_intercept(problem);
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(problem.delta.data(),
                                                          problem.delta.size());
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(problem.w.data(), problem.w.size());

    Eigen::MatrixXd A = noise_precision * (X.transpose() * w.asDiagonal() * X);
    for (std::size_t i = 1; i <= n; ++i) A(i, i) += prior_precision;
    Eigen::VectorXd b = noise_precision * (X.transpose() * (w.asDiagonal() * y));

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw Error(ErrorCode::SolverFailure, "posterior precision matrix singular");
    Eigen::VectorXd mean = lu.solve(b);
    Eigen::MatrixXd cov = lu.inverse();

    SurrogateFit fit;
    fit.theta0 = mean(0);
    fit.theta.assign(mean.data() + 1, mean.data() + 1 + n);
    fit.method = SurrogateMethod::BayesRidge;
    std::vector<double> var(n);
    for (std::size_t i = 0; i < n; ++i) var[i] = cov(i + 1, i + 1);
    fit.posterior_var = std::move(var);
    return fit;
}

struct TokenAttribution {
    std::size_t token_index = 0; // index into the prompt's token list
    std::string token;
    double score = 0.0;
    double intensity = 0.0; // |score| / max|score|, or 0 if all zero
    int sign = 0;
};

// Per-token attribution scores from the fitted coefficients, with intensities
// normalized so the strongest token maps to 1.
inline std::vector<TokenAttribution> attributions(const SurrogateFit& fit,
                                                  const TokenizedPrompt& prompt) {
    auto idx = prompt.perturbable_indices();
    if (fit.theta.size() != idx.size())
        throw Error(ErrorCode::LengthMismatch,
                    "coefficient count " + std::to_string(fit.theta.size()) +
                        " != perturbable token count " + std::to_string(idx.size()));

    double max_abs = 0.0;
    for (double t : fit.theta) max_abs = std::max(max_abs, std::abs(t));

    std::vector<TokenAttribution> out;
    out.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        TokenAttribution a;
        a.token_index = idx[i];
        a.token = prompt.tokens[idx[i]].text;
        a.score = fit.theta[i];
        a.intensity = max_abs > 0.0 ? std::abs(fit.theta[i]) / max_abs : 0.0;
        a.sign = fit.theta[i] > 0.0 ? 1 : (fit.theta[i] < 0.0 ? -1 : 0);
        out.push_back(std::move(a));
    }
    return out;
}

} // namespace gsmile
