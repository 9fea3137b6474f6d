#pragma once

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gsmile/embedding.hpp"
#include "gsmile/error.hpp"
#include "gsmile/gateway.hpp"
#include "gsmile/metrics.hpp"
#include "gsmile/significance.hpp"
#include "gsmile/surrogate.hpp"
#include "gsmile/text.hpp"
#include "gsmile/transport.hpp"

namespace gsmile {

struct ExplainConfig {
    std::size_t n_perturbations = 64;
    std::uint64_t seed = 0;
    EditMode edit_mode = EditMode::Drop;
    TokenizerConfig tokenizer;

    std::size_t embedding_dim = 64;
    std::uint64_t embedding_seed = 0;
    std::string embedding_path; // optional GloVe-style vector file

    TransportConfig transport;

    bool significance_enabled = true;
    BootstrapConfig significance;

    SurrogateMethod method = SurrogateMethod::Wls;
    KernelConfig kernel; // sigma <= 0 -> adaptive median
    double ridge_lambda = 1e-8;
    bool include_origin = false;
    double prior_precision = 1e-6;
    double noise_precision = 1.0;

    int parallelism = 4;
    std::size_t top_k = 3; // size of the "important token" set for stability
};

struct PerturbationRecord {
    std::vector<bool> mask_bits;
    std::string text;
    std::string output;
    bool generation_ok = true;
    bool cache_hit = false;
    std::string failure; // why this row was dropped, if it was
    double iwmd_delta = 0.0;
    double weight = 0.0;
    double owmd_delta = 0.0;
    double p_value = 0.0;
    bool kept = false;
};

struct Explanation {
    std::string prompt_text;
    std::vector<std::string> tokens;
    std::vector<bool> perturbable;
    std::vector<TokenAttribution> attributions;
    std::vector<PerturbationRecord> perturbations;
    SurrogateFit fit;
    double sigma_used = 0.0;
    FidelityReport fidelity_report;
    std::string original_output;
    // config echo
    std::size_t n_perturbations = 0;
    std::uint64_t seed = 0;
    std::string method;
    std::string backend;
    std::string model_id;
    double temperature = 0.0;

    std::size_t kept_count() const {
        std::size_t k = 0;
        for (const auto& p : perturbations)
            if (p.kept) ++k;
        return k;
    }

    // Top-k perturbable tokens by attribution magnitude (ties to the lower
    // token index), identified by token index within the prompt.
    std::set<std::string> top_token_set(std::size_t k) const {
        std::vector<std::size_t> order(attributions.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            double ia = std::abs(attributions[a].score), ib = std::abs(attributions[b].score);
            if (ia != ib) return ia > ib;
            return attributions[a].token_index < attributions[b].token_index;
        });
        std::set<std::string> out;
        for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
            const auto& a = attributions[order[i]];
            out.insert(std::to_string(a.token_index) + ":" + a.token);
        }
        return out;
    }
};

struct StabilityResult {
    double jaccard = 0.0;
    std::string sentinel;
    Explanation base;
    Explanation extended;
};

struct SweepRow {
    std::size_t count = 0;
    FidelityReport fidelity_report;
};

enum class DistKind { Cosine, Wmd, WmdPlusC };

inline const char* dist_name(DistKind d) {
    switch (d) {
        case DistKind::Cosine: return "cosine";
        case DistKind::Wmd: return "wmd";
        case DistKind::WmdPlusC: return "wmd+c";
    }
    return "unknown";
}

inline DistKind dist_from_name(const std::string& s) {
    if (s == "cosine") return DistKind::Cosine;
    if (s == "wmd") return DistKind::Wmd;
    if (s == "wmd+c" || s == "wmdc") return DistKind::WmdPlusC;
    throw Error(ErrorCode::InvalidConfig, "unknown distance kind: " + s);
}

struct CompareCell {
    DistKind input_dist = DistKind::Wmd;
    DistKind output_dist = DistKind::Wmd;
    SurrogateMethod method = SurrogateMethod::Wls;
};

struct CompareRow {
    CompareCell cell;
    FidelityReport fidelity_report;
};

class Explainer {
public:
    Explainer(ModelGateway& gateway, ExplainConfig cfg)
        : gateway_(gateway), cfg_(std::move(cfg)), table_(make_table(cfg_)) {}

    const WordVectorTable& table() const { return table_; }
    const ExplainConfig& config() const { return cfg_; }

    Explanation explain(const std::string& prompt, const GeneratorSpec& spec) {
        TokenizedPrompt tokenized = tokenize(prompt, cfg_.tokenizer);
        return explain_tokenized(tokenized, spec, cfg_);
    }

    // Explains prompt and prompt+sentinel (sentinel frozen) and compares the
    // top-k attributed token sets.
    StabilityResult evaluate_stability(const std::string& prompt, const GeneratorSpec& spec,
                                       const std::string& sentinel) {
        if (sentinel.empty())
            throw Error(ErrorCode::InvalidConfig, "stability sentinel must be non-empty");

        TokenizedPrompt base_tok = tokenize(prompt, cfg_.tokenizer);
        std::string extended_text = prompt + " " + sentinel;
        TokenizedPrompt ext_tok = tokenize(extended_text, cfg_.tokenizer);
        for (std::size_t i = base_tok.tokens.size(); i < ext_tok.tokens.size(); ++i)
            ext_tok.perturbable[i] = false; // appended sentinel is never perturbed

        StabilityResult r;
        r.sentinel = sentinel;
        r.base = explain_tokenized(base_tok, spec, cfg_);
        r.extended = explain_tokenized(ext_tok, spec, cfg_);
        r.jaccard = jaccard(r.base.top_token_set(cfg_.top_k),
                            r.extended.top_token_set(cfg_.top_k));
        return r;
    }

    // Repeated explanations; vary_seeds indexes the perturbation seed per run.
    ConsistencyStats evaluate_consistency(const std::string& prompt, const GeneratorSpec& spec,
                                          std::size_t runs, bool vary_seeds = true,
                                          std::vector<Explanation>* out_runs = nullptr) {
        if (runs < 2) throw Error(ErrorCode::TooFewRuns, "consistency needs >= 2 runs");
        std::vector<std::vector<double>> score_runs;
        for (std::size_t r = 0; r < runs; ++r) {
            ExplainConfig run_cfg = cfg_;
            if (vary_seeds) run_cfg.seed = cfg_.seed + r;
            TokenizedPrompt tok = tokenize(prompt, cfg_.tokenizer);
            Explanation e = explain_tokenized(tok, spec, run_cfg);
            std::vector<double> scores;
            for (const auto& a : e.attributions) scores.push_back(a.score);
            score_runs.push_back(std::move(scores));
            if (out_runs) out_runs->push_back(std::move(e));
        }
        return consistency(score_runs);
    }

    // One explanation per perturbation count, shared base seed, so smaller
    // counts use a prefix of the larger counts' masks.
    std::vector<SweepRow> sweep_perturbations(const std::string& prompt,
                                              const GeneratorSpec& spec,
                                              const std::vector<std::size_t>& counts) {
        if (counts.empty()) throw Error(ErrorCode::EmptySweep, "no perturbation counts given");
        std::vector<SweepRow> rows;
        for (std::size_t count : counts) {
            ExplainConfig run_cfg = cfg_;
            run_cfg.n_perturbations = count;
            TokenizedPrompt tok = tokenize(prompt, cfg_.tokenizer);
            Explanation e = explain_tokenized(tok, spec, run_cfg);
            rows.push_back({count, e.fidelity_report});
        }
        return rows;
    }

    // Distance-measure x surrogate comparison matrix over one shared set of
    // generations; each cell only recomputes distances, weights, and the fit.
    std::vector<CompareRow> compare_methods(const std::string& prompt,
                                            const GeneratorSpec& spec,
                                            const std::vector<CompareCell>& cells) {
        if (cells.empty()) throw Error(ErrorCode::EmptyInput, "no comparison cells given");

        TokenizedPrompt tokenized = tokenize(prompt, cfg_.tokenizer);
        Batch batch = run_generations(tokenized, spec, cfg_);
        filter_significance(batch, cfg_);

        // Raw distance components per kept perturbation.
        std::vector<std::size_t> kept_rows;
        for (std::size_t j = 0; j < batch.records.size(); ++j)
            if (batch.records[j].kept) kept_rows.push_back(j);
        if (kept_rows.empty())
            throw Error(ErrorCode::AllPerturbationsFiltered, "no perturbation survived filtering");

        EmbeddedDoc in_org = embed_doc(tokenized.token_texts(), table_);
        EmbeddedDoc out_org = embed_doc(split_token_texts(batch.original_output), table_);
        std::vector<double> in_wmd, in_cos, out_wmd, out_cos;
        for (std::size_t j : kept_rows) {
            const auto& rec = batch.records[j];
            EmbeddedDoc in_pert = embed_doc(split_token_texts(rec.text), table_);
            EmbeddedDoc out_pert = embed_doc(split_token_texts(rec.output), table_);
            in_wmd.push_back(emd(in_org, in_pert, cfg_.transport).value);
            in_cos.push_back(cosine_distance(in_org.centroid(), in_pert.centroid()));
            out_wmd.push_back(emd(out_org, out_pert, cfg_.transport).value);
            out_cos.push_back(cosine_distance(out_org.centroid(), out_pert.centroid()));
        }

        auto pick = [&](DistKind kind, const std::vector<double>& wmd_v,
                        const std::vector<double>& cos_v) {
            switch (kind) {
                case DistKind::Wmd: return wmd_v;
                case DistKind::Cosine: return cos_v;
                case DistKind::WmdPlusC: return combine_minmax(wmd_v, cos_v);
            }
            return wmd_v;
        };

        std::vector<CompareRow> rows;
        for (const auto& cell : cells) {
            std::vector<double> deltas_in = pick(cell.input_dist, in_wmd, in_cos);
            std::vector<double> deltas_out = pick(cell.output_dist, out_wmd, out_cos);

            double sigma = resolve_sigma(deltas_in, cfg_.kernel);
            RegressionProblem prob;
            for (std::size_t r = 0; r < kept_rows.size(); ++r) {
                const auto& rec = batch.records[kept_rows[r]];
                std::vector<double> z(rec.mask_bits.size());
                for (std::size_t i = 0; i < z.size(); ++i) z[i] = rec.mask_bits[i] ? 1.0 : 0.0;
                prob.Z.push_back(std::move(z));
                prob.delta.push_back(deltas_out[r]);
                prob.w.push_back(kernel_weight(deltas_in[r], sigma));
            }
            SurrogateFit fit = cell.method == SurrogateMethod::Wls
                                   ? fit_wls(prob, cfg_.ridge_lambda)
                                   : fit_bayes_ridge(prob, cfg_.prior_precision,
                                                     cfg_.noise_precision);
            std::vector<double> predicted;
            for (const auto& z : prob.Z) predicted.push_back(fit.predict(z));
            CompareRow row;
            row.cell = cell;
            row.fidelity_report = fidelity(prob.delta, predicted, prob.w, prob.cols());
            rows.push_back(std::move(row));
        }
        return rows;
    }

private:
    struct Batch {
        TokenizedPrompt tokenized;
        std::string original_output;
        std::vector<PerturbationRecord> records;
        bool original_cache_hit = false;
    };

    static WordVectorTable make_table(const ExplainConfig& cfg) {
        if (!cfg.embedding_path.empty())
            return load_vectors(cfg.embedding_path, cfg.embedding_seed);
        return WordVectorTable(cfg.embedding_dim, cfg.embedding_seed);
    }

    static std::vector<double> combine_minmax(const std::vector<double>& a,
                                              const std::vector<double>& b) {
        auto norm = [](const std::vector<double>& v) {
            double lo = *std::min_element(v.begin(), v.end());
            double hi = *std::max_element(v.begin(), v.end());
            std::vector<double> out(v.size(), 0.0);
            if (hi > lo)
                for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
            return out;
        };
        auto na = norm(a), nb = norm(b);
        std::vector<double> out(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = 0.5 * (na[i] + nb[i]);
        return out;
    }

    Batch run_generations(const TokenizedPrompt& tokenized, const GeneratorSpec& spec,
                          const ExplainConfig& cfg) {
        if (tokenized.degenerate_for_explanation())
            throw Error(ErrorCode::DegeneratePrompt,
                        "prompt needs at least 2 perturbable tokens");

        Batch batch;
        batch.tokenized = tokenized;

        auto masks =
            sample_masks(tokenized.perturbable_count(), cfg.n_perturbations, cfg.seed);

        std::vector<std::string> texts;
        batch.records.resize(masks.size());
        for (std::size_t j = 0; j < masks.size(); ++j) {
            auto perturbed =
                apply_mask(tokenized, masks[j], cfg.edit_mode, cfg.tokenizer.placeholder);
            batch.records[j].mask_bits = masks[j].bits;
            batch.records[j].text = perturbed.text;
            texts.push_back(perturbed.text);
        }

        GenerationRecord org = gateway_.generate(spec, tokenized.raw_text);
        if (org.output.empty())
            throw Error(ErrorCode::EmptyOutput, "model returned empty output for the prompt");
        batch.original_output = org.output;
        batch.original_cache_hit = org.cache_hit;

        auto results = gateway_.generate_batch(spec, texts, cfg.parallelism);
        for (std::size_t j = 0; j < results.size(); ++j) {
            auto& rec = batch.records[j];
            if (!results[j].ok) {
                rec.generation_ok = false;
                rec.failure = results[j].error;
                std::cerr << "warning: dropping perturbation " << j << ": " << rec.failure
                          << "\n";
                continue;
            }
            rec.output = results[j].output;
            rec.cache_hit = results[j].cache_hit;
            if (rec.output.empty() || split_token_texts(rec.output).empty()) {
                rec.generation_ok = false;
                rec.failure = "EmptyOutput";
                std::cerr << "warning: dropping perturbation " << j << ": empty output\n";
            }
        }
        return batch;
    }

    void filter_significance(Batch& batch, const ExplainConfig& cfg) {
        std::vector<Vec> X;
        for (const auto& t : split_token_texts(batch.original_output))
            X.push_back(table_.lookup(t));
        for (std::size_t j = 0; j < batch.records.size(); ++j) {
            auto& rec = batch.records[j];
            if (!rec.generation_ok) {
                rec.kept = false;
                continue;
            }
            rec.owmd_delta = owmd(batch.original_output, rec.output, table_, cfg.transport).value;
            if (!cfg.significance_enabled) {
                rec.p_value = 0.0;
                rec.kept = true;
                continue;
            }
            std::vector<Vec> Y;
            for (const auto& t : split_token_texts(rec.output)) Y.push_back(table_.lookup(t));
            BootstrapConfig bcfg = cfg.significance;
            bcfg.seed = cfg.significance.seed + 0x9e3779b9ull * (j + 1); // per-row stream
            bcfg.transport = cfg.transport;
            auto sig = bootstrap_pvalue(X, Y, bcfg);
            rec.p_value = sig.p_value;
            rec.kept = sig.kept;
        }
    }

    Explanation explain_tokenized(const TokenizedPrompt& tokenized, const GeneratorSpec& spec,
                                  const ExplainConfig& cfg) {
        Batch batch = run_generations(tokenized, spec, cfg);
        filter_significance(batch, cfg);

        std::vector<std::size_t> kept_rows;
        for (std::size_t j = 0; j < batch.records.size(); ++j)
            if (batch.records[j].kept) kept_rows.push_back(j);
        if (kept_rows.empty())
            throw Error(ErrorCode::AllPerturbationsFiltered,
                        "every perturbation was filtered out; nothing to regress on");

        const std::size_t n_features = tokenized.perturbable_count();
        if (kept_rows.size() < n_features + 1)
            std::cerr << "warning: only " << kept_rows.size() << " perturbations for "
                      << n_features << " features; fit may be underdetermined\n";

        std::vector<double> iwmd_deltas;
        for (std::size_t j : kept_rows) {
            PerturbedPrompt pp;
            pp.text = batch.records[j].text;
            iwmd_deltas.push_back(iwmd(tokenized, pp, table_, cfg.transport).value);
        }
        double sigma = resolve_sigma(iwmd_deltas, cfg.kernel);

        RegressionProblem prob;
        for (std::size_t r = 0; r < kept_rows.size(); ++r) {
            auto& rec = batch.records[kept_rows[r]];
            rec.iwmd_delta = iwmd_deltas[r];
            rec.weight = kernel_weight(rec.iwmd_delta, sigma);
            std::vector<double> z(rec.mask_bits.size());
            for (std::size_t i = 0; i < z.size(); ++i) z[i] = rec.mask_bits[i] ? 1.0 : 0.0;
            prob.Z.push_back(std::move(z));
            prob.delta.push_back(rec.owmd_delta);
            prob.w.push_back(rec.weight);
        }
        if (cfg.include_origin) {
            prob.Z.push_back(std::vector<double>(n_features, 1.0));
            prob.delta.push_back(0.0);
            prob.w.push_back(1.0);
        }

        SurrogateFit fit = cfg.method == SurrogateMethod::Wls
                               ? fit_wls(prob, cfg.ridge_lambda)
                               : fit_bayes_ridge(prob, cfg.prior_precision, cfg.noise_precision);

        Explanation out;
        out.prompt_text = tokenized.raw_text;
        out.tokens = tokenized.token_texts();
        out.perturbable.assign(tokenized.perturbable.begin(), tokenized.perturbable.end());
        out.attributions = attributions(fit, tokenized);
        out.perturbations = std::move(batch.records);
        out.fit = fit;
        out.sigma_used = sigma;
        out.original_output = batch.original_output;
        out.n_perturbations = cfg.n_perturbations;
        out.seed = cfg.seed;
        out.method = cfg.method == SurrogateMethod::Wls ? "wls" : "bayes_ridge";
        out.backend = backend_name(spec.backend);
        out.model_id = spec.model_id;
        out.temperature = spec.temperature;

        if (prob.rows() >= 2) {
            std::vector<double> predicted;
            for (const auto& z : prob.Z) predicted.push_back(fit.predict(z));
            out.fidelity_report = fidelity(prob.delta, predicted, prob.w, n_features);
        }
        return out;
    }

    ModelGateway& gateway_;
    ExplainConfig cfg_;
    WordVectorTable table_;
};

} // namespace gsmile
