// gsmile: perturbation-based attribution for black-box text generators.
//
// Subcommands: explain, stability, consistency, sweep, compare, render,
// accuracy. Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gsmile/gateway.hpp"
#include "gsmile/gateway_http.hpp"
#include "gsmile/metrics.hpp"
#include "gsmile/pipeline.hpp"
#include "gsmile/report.hpp"

namespace {

using nlohmann::json;

struct CliOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::string backend;
    std::string model;
    std::string format = "html";
    long long seed = -1;
    long long perturbations = -1;

    std::string prompt;
    std::string prompt_file;
    std::string sentinel = "***";
    int runs = 10;
    bool shared_seed = false;
    std::string counts = "32,64,128,256";
    std::string cells = "wmd:wmd:wls,cosine:cosine:wls";
    std::string report_path;
    std::string truth_file;
};

struct Setup {
    gsmile::ExplainConfig explain;
    gsmile::GatewayConfig gateway;
    gsmile::GeneratorSpec spec;
};

double jnum(const json& j, const char* key, double dflt) {
    return j.contains(key) ? j.at(key).get<double>() : dflt;
}

Setup load_setup(const CliOptions& opt) {
    Setup s;
    json cfg = json::object();
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in)
            throw gsmile::Error(gsmile::ErrorCode::InvalidConfig,
                                "cannot open config file: " + opt.config_path);
        try {
            in >> cfg;
        } catch (const json::exception& e) {
            throw gsmile::Error(gsmile::ErrorCode::InvalidConfig,
                                std::string("config is not valid JSON: ") + e.what());
        }
    }

    auto& e = s.explain;
    e.n_perturbations = static_cast<std::size_t>(jnum(cfg, "n_perturbations", 64));
    e.seed = static_cast<std::uint64_t>(jnum(cfg, "seed", 0));
    e.top_k = static_cast<std::size_t>(jnum(cfg, "top_k", 3));
    if (cfg.value("edit_mode", "drop") == "placeholder")
        e.edit_mode = gsmile::EditMode::Placeholder;

    if (cfg.contains("tokenizer")) {
        const auto& t = cfg["tokenizer"];
        e.tokenizer.lowercase = t.value("lowercase", false);
        e.tokenizer.perturb_punctuation = t.value("perturb_punctuation", false);
        e.tokenizer.placeholder = t.value("placeholder", "UNKWORDZ");
    }
    if (cfg.contains("embedding")) {
        const auto& m = cfg["embedding"];
        e.embedding_dim = static_cast<std::size_t>(jnum(m, "dim", 64));
        e.embedding_seed = static_cast<std::uint64_t>(jnum(m, "seed", 0));
        e.embedding_path = m.value("path", "");
    }
    if (cfg.contains("transport")) {
        const auto& t = cfg["transport"];
        e.transport.p = static_cast<int>(jnum(t, "p", 1));
        e.transport.max_support = static_cast<std::size_t>(jnum(t, "max_support", 512));
    }
    if (cfg.contains("significance")) {
        const auto& g = cfg["significance"];
        e.significance_enabled = g.value("enabled", true);
        e.significance.max_itr = static_cast<std::size_t>(jnum(g, "max_itr", 1000));
        e.significance.alpha = jnum(g, "alpha", 0.05);
        e.significance.seed = static_cast<std::uint64_t>(jnum(g, "seed", 0));
        e.significance.partition = g.value("partition", false);
    }
    if (cfg.contains("surrogate")) {
        const auto& g = cfg["surrogate"];
        e.method = g.value("method", "wls") == "bayes_ridge"
                       ? gsmile::SurrogateMethod::BayesRidge
                       : gsmile::SurrogateMethod::Wls;
        e.kernel.sigma = jnum(g, "sigma", 0.0);
        e.ridge_lambda = jnum(g, "ridge_lambda", 1e-8);
        e.include_origin = g.value("include_origin", false);
        e.prior_precision = jnum(g, "prior_precision", 1e-6);
        e.noise_precision = jnum(g, "noise_precision", 1.0);
    }
    if (cfg.contains("gateway")) {
        const auto& g = cfg["gateway"];
        s.gateway.cache_dir = g.value("cache_dir", "");
        s.gateway.parallelism = static_cast<int>(jnum(g, "parallelism", 4));
        s.gateway.rate_per_minute = jnum(g, "rate_per_minute", 0.0);
        s.gateway.backoff_ms = static_cast<int>(jnum(g, "backoff_ms", 250));
        e.parallelism = s.gateway.parallelism;
    }
    if (cfg.contains("backend")) {
        const auto& b = cfg["backend"];
        s.spec.backend = gsmile::backend_from_name(b.value("name", "mock"));
        s.spec.model_id = b.value("model_id", "mock");
        s.spec.temperature = jnum(b, "temperature", 0.0);
        s.spec.max_tokens = static_cast<int>(jnum(b, "max_tokens", 256));
        s.spec.max_retries = static_cast<int>(jnum(b, "max_retries", 3));
        s.spec.timeout_ms = static_cast<int>(jnum(b, "timeout_ms", 30000));
        s.spec.base_url = b.value("base_url", "");
    }
    if (cfg.contains("mock_lexicon")) {
        const auto& m = cfg["mock_lexicon"];
        s.spec.lexicon.default_fragment = m.value("default_fragment", "");
        if (m.contains("fragments"))
            for (auto it = m["fragments"].begin(); it != m["fragments"].end(); ++it)
                s.spec.lexicon.fragments[it.key()] = it.value().get<std::string>();
    }

    // command-line overrides
    if (!opt.backend.empty()) s.spec.backend = gsmile::backend_from_name(opt.backend);
    if (!opt.model.empty()) s.spec.model_id = opt.model;
    if (opt.seed >= 0) e.seed = static_cast<std::uint64_t>(opt.seed);
    if (opt.perturbations > 0) e.n_perturbations = static_cast<std::size_t>(opt.perturbations);
    return s;
}

std::string read_prompt(const CliOptions& opt) {
    if (!opt.prompt.empty()) return opt.prompt;
    if (!opt.prompt_file.empty()) {
        std::ifstream in(opt.prompt_file);
        if (!in)
            throw gsmile::Error(gsmile::ErrorCode::IoError,
                                "cannot open prompt file: " + opt.prompt_file);
        std::ostringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
        return text;
    }
    throw gsmile::Error(gsmile::ErrorCode::InvalidConfig, "no prompt given");
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw gsmile::Error(gsmile::ErrorCode::IoError, "cannot write " + path.string());
    out << content;
}

void emit_heatmaps(const gsmile::Explanation& e, const CliOptions& opt,
                   const std::string& stem) {
    std::filesystem::path dir(opt.out_dir);
    if (opt.format == "html" || opt.format == "both") {
        auto path = dir / (stem + ".html");
        write_file(path, gsmile::render_html(e));
        std::cout << "wrote " << path.string() << "\n";
    }
    if (opt.format == "ansi" || opt.format == "both") std::cout << gsmile::render_ansi(e);
}

void print_fidelity_header() {
    std::cout << "count\tWMSE\tR2_w\tWMAE\tmean_L1\tmean_L2\tR2_w_adj\n";
}

void print_fidelity_row(const std::string& label, const gsmile::FidelityReport& f) {
    std::cout << label << '\t' << f.wmse << '\t' << f.r2_w << '\t' << f.wmae << '\t'
              << f.mean_l1 << '\t' << f.mean_l2 << '\t' << f.r2_w_adj << '\n';
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

int run_command(const std::string& cmd, const CliOptions& opt) {
    Setup setup = load_setup(opt);
    gsmile::ModelGateway gateway(setup.gateway);
    gateway.set_remote_call(gsmile::http_generate);
    gsmile::Explainer explainer(gateway, setup.explain);
    std::filesystem::path dir(opt.out_dir);

    if (cmd == "explain") {
        auto e = explainer.explain(read_prompt(opt), setup.spec);
        auto path = dir / "report.json";
        write_file(path, gsmile::serialize_report(e));
        std::cout << "wrote " << path.string() << "\n";
        emit_heatmaps(e, opt, "heatmap");
        return 0;
    }
    if (cmd == "render") {
        std::ifstream in(opt.report_path);
        if (!in)
            throw gsmile::Error(gsmile::ErrorCode::IoError,
                                "cannot open report: " + opt.report_path);
        std::ostringstream ss;
        ss << in.rdbuf();
        auto e = gsmile::parse_report(ss.str());
        emit_heatmaps(e, opt, "heatmap");
        return 0;
    }
    if (cmd == "stability") {
        auto r = explainer.evaluate_stability(read_prompt(opt), setup.spec, opt.sentinel);
        write_file(dir / "stability_base.json", gsmile::serialize_report(r.base));
        write_file(dir / "stability_extended.json", gsmile::serialize_report(r.extended));
        std::cout << "sentinel: " << r.sentinel << "\n";
        std::cout << "jaccard: " << r.jaccard << "\n";
        return 0;
    }
    if (cmd == "consistency") {
        auto stats = explainer.evaluate_consistency(read_prompt(opt), setup.spec,
                                                    static_cast<std::size_t>(opt.runs),
                                                    !opt.shared_seed);
        std::cout << "token\tvariance\tstd\n";
        for (std::size_t t = 0; t < stats.variance.size(); ++t)
            std::cout << t << '\t' << stats.variance[t] << '\t' << stats.stddev[t] << '\n';
        std::cout << "mean_variance: " << stats.mean_variance << "\n";
        std::cout << "mean_std: " << stats.mean_stddev << "\n";
        return 0;
    }
    if (cmd == "sweep") {
        std::vector<std::size_t> counts;
        for (const auto& c : split(opt.counts, ','))
            counts.push_back(static_cast<std::size_t>(std::stoull(c)));
        auto rows = explainer.sweep_perturbations(read_prompt(opt), setup.spec, counts);
        print_fidelity_header();
        for (const auto& row : rows)
            print_fidelity_row(std::to_string(row.count), row.fidelity_report);
        return 0;
    }
    if (cmd == "compare") {
        std::vector<gsmile::CompareCell> cells;
        for (const auto& spec3 : split(opt.cells, ',')) {
            auto parts = split(spec3, ':');
            if (parts.size() != 3)
                throw gsmile::Error(gsmile::ErrorCode::InvalidConfig,
                                    "cell must be input:output:method, got " + spec3);
            gsmile::CompareCell cell;
            cell.input_dist = gsmile::dist_from_name(parts[0]);
            cell.output_dist = gsmile::dist_from_name(parts[1]);
            cell.method = parts[2] == "bayes_ridge" ? gsmile::SurrogateMethod::BayesRidge
                                                    : gsmile::SurrogateMethod::Wls;
            cells.push_back(cell);
        }
        auto rows = explainer.compare_methods(read_prompt(opt), setup.spec, cells);
        print_fidelity_header();
        for (const auto& row : rows) {
            std::string label = std::string(gsmile::dist_name(row.cell.input_dist)) + ":" +
                                gsmile::dist_name(row.cell.output_dist) + ":" +
                                (row.cell.method == gsmile::SurrogateMethod::Wls ? "wls"
                                                                                 : "bayes_ridge");
            print_fidelity_row(label, row.fidelity_report);
        }
        return 0;
    }
    if (cmd == "accuracy") {
        // Ground-truth file: one record per line, "prompt<TAB>b0 b1 b2 ..."
        // with one 0/1 label per perturbable token.
        std::ifstream in(opt.truth_file);
        if (!in)
            throw gsmile::Error(gsmile::ErrorCode::IoError,
                                "cannot open ground-truth file: " + opt.truth_file);
        std::string line;
        std::vector<double> accs, f1s, aurocs;
        std::cout << "prompt\tacc\tf1\tauroc\n";
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw gsmile::Error(gsmile::ErrorCode::MalformedLine,
                                    "expected prompt<TAB>labels: " + line);
            std::string prompt = line.substr(0, tab);
            gsmile::GroundTruthMap truth;
            for (const auto& b : split(line.substr(tab + 1), ' '))
                truth.labels.push_back(std::stoi(b));
            auto e = explainer.explain(prompt, setup.spec);
            std::vector<double> scores;
            for (const auto& a : e.attributions) scores.push_back(a.intensity);
            auto r = gsmile::att_accuracy(scores, truth);
            std::cout << prompt << '\t' << r.acc << '\t' << r.f1 << '\t' << r.auroc << '\n';
            accs.push_back(r.acc);
            f1s.push_back(r.f1);
            aurocs.push_back(r.auroc);
        }
        if (accs.empty())
            throw gsmile::Error(gsmile::ErrorCode::EmptyInput, "ground-truth file has no records");
        auto mean = [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x;
            return s / double(v.size());
        };
        std::cout << "mean\t" << mean(accs) << '\t' << mean(f1s) << '\t' << mean(aurocs)
                  << '\n';
        return 0;
    }
    throw gsmile::Error(gsmile::ErrorCode::InvalidConfig, "unknown command: " + cmd);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"perturbation-based attribution for black-box text generators"};
    app.require_subcommand(1);
    CliOptions opt;

    app.add_option("--config", opt.config_path, "JSON config file");
    app.add_option("--seed", opt.seed, "override perturbation seed");
    app.add_option("--out-dir", opt.out_dir, "output directory");
    app.add_option("--backend", opt.backend, "mock | openai_completions | anthropic_messages");
    app.add_option("--model", opt.model, "model id");
    app.add_option("--perturbations", opt.perturbations, "number of perturbations");
    app.add_option("--format", opt.format, "heatmap format: html | ansi | both");

    auto* c_explain = app.add_subcommand("explain", "explain one prompt");
    c_explain->add_option("--prompt", opt.prompt, "prompt text");
    c_explain->add_option("--prompt-file", opt.prompt_file, "file with the prompt");

    auto* c_stab = app.add_subcommand("stability", "jaccard of top tokens after an inert edit");
    c_stab->add_option("--prompt", opt.prompt, "prompt text");
    c_stab->add_option("--prompt-file", opt.prompt_file, "file with the prompt");
    c_stab->add_option("--sentinel", opt.sentinel, "appended sentinel (default ***)");

    auto* c_cons = app.add_subcommand("consistency", "attribution variance across runs");
    c_cons->add_option("--prompt", opt.prompt, "prompt text");
    c_cons->add_option("--prompt-file", opt.prompt_file, "file with the prompt");
    c_cons->add_option("--runs", opt.runs, "number of runs (default 10)");
    c_cons->add_flag("--shared-seed", opt.shared_seed, "reuse one perturbation seed");

    auto* c_sweep = app.add_subcommand("sweep", "fidelity vs perturbation count");
    c_sweep->add_option("--prompt", opt.prompt, "prompt text");
    c_sweep->add_option("--prompt-file", opt.prompt_file, "file with the prompt");
    c_sweep->add_option("--counts", opt.counts, "comma-separated counts");

    auto* c_cmp = app.add_subcommand("compare", "distance x surrogate comparison matrix");
    c_cmp->add_option("--prompt", opt.prompt, "prompt text");
    c_cmp->add_option("--prompt-file", opt.prompt_file, "file with the prompt");
    c_cmp->add_option("--cells", opt.cells, "cells as input:output:method, comma separated");

    auto* c_render = app.add_subcommand("render", "re-render heatmaps from a report");
    c_render->add_option("--report", opt.report_path, "report.json path")->required();

    auto* c_acc = app.add_subcommand("accuracy", "attribution accuracy vs ground truth");
    c_acc->add_option("--truth-file", opt.truth_file, "prompt<TAB>labels records")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    std::string cmd;
    for (auto* sub : app.get_subcommands()) cmd = sub->get_name();

    try {
        return run_command(cmd, opt);
    } catch (const gsmile::Error& e) {
        nlohmann::json err = {{"error", gsmile::to_string(e.code())}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json err = {{"error", "Unhandled"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
