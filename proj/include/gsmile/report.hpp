#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gsmile/error.hpp"
#include "gsmile/pipeline.hpp"

namespace gsmile {

inline constexpr const char* kReportSchemaVersion = "gsmile-report/1";

inline nlohmann::json to_json(const FidelityReport& r) {
    auto num = [](double v) -> nlohmann::json {
        if (std::isnan(v)) return nullptr;
        return v;
    };
    return {{"wmse", r.wmse},       {"wmae", r.wmae},
            {"mean_l1", r.mean_l1}, {"mean_l2", r.mean_l2},
            {"r2", num(r.r2)},      {"r2_w", num(r.r2_w)},
            {"r2_w_adj", num(r.r2_w_adj)}, {"r2_defined", r.r2_defined},
            {"n_points", r.n_points}, {"n_features", r.n_features}};
}

inline FidelityReport fidelity_from_json(const nlohmann::json& j) {
    auto num = [&](const char* k) {
        return j.at(k).is_null() ? std::numeric_limits<double>::quiet_NaN()
                                 : j.at(k).get<double>();
    };
    FidelityReport r;
    r.wmse = j.at("wmse");
    r.wmae = j.at("wmae");
    r.mean_l1 = j.at("mean_l1");
    r.mean_l2 = j.at("mean_l2");
    r.r2 = num("r2");
    r.r2_w = num("r2_w");
    r.r2_w_adj = num("r2_w_adj");
    r.r2_defined = j.at("r2_defined");
    r.n_points = j.at("n_points");
    r.n_features = j.at("n_features");
    return r;
}

inline nlohmann::json to_json(const Explanation& e) {
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    j["prompt"] = e.prompt_text;
    j["tokens"] = e.tokens;
    j["perturbable"] = e.perturbable;
    j["original_output"] = e.original_output;
    j["sigma"] = e.sigma_used;
    j["config"] = {{"n_perturbations", e.n_perturbations},
                   {"seed", e.seed},
                   {"method", e.method},
                   {"backend", e.backend},
                   {"model_id", e.model_id},
                   {"temperature", e.temperature}};

    nlohmann::json atts = nlohmann::json::array();
    for (const auto& a : e.attributions)
        atts.push_back({{"token_index", a.token_index},
                        {"token", a.token},
                        {"score", a.score},
                        {"intensity", a.intensity},
                        {"sign", a.sign}});
    j["attributions"] = atts;

    nlohmann::json fit;
    fit["theta0"] = e.fit.theta0;
    fit["theta"] = e.fit.theta;
    fit["ridge_lambda"] = e.fit.ridge_lambda;
    if (e.fit.posterior_var) fit["posterior_var"] = *e.fit.posterior_var;
    j["fit"] = fit;

    j["fidelity"] = to_json(e.fidelity_report);

    nlohmann::json perts = nlohmann::json::array();
    for (const auto& p : e.perturbations) {
        nlohmann::json row;
        row["mask"] = p.mask_bits;
        row["text"] = p.text;
        row["output"] = p.output;
        row["generation_ok"] = p.generation_ok;
        row["cache_hit"] = p.cache_hit;
        row["failure"] = p.failure;
        row["iwmd"] = p.iwmd_delta;
        row["weight"] = p.weight;
        row["owmd"] = p.owmd_delta;
        row["p_value"] = p.p_value;
        row["kept"] = p.kept;
        perts.push_back(std::move(row));
    }
    j["perturbations"] = perts;
    return j;
}

inline Explanation explanation_from_json(const nlohmann::json& j) {
    if (!j.contains("schema_version") || j.at("schema_version") != kReportSchemaVersion)
        throw Error(ErrorCode::SchemaMismatch, "unsupported or missing report schema version");
    Explanation e;
    try {
        e.prompt_text = j.at("prompt");
        e.tokens = j.at("tokens").get<std::vector<std::string>>();
        e.perturbable = j.at("perturbable").get<std::vector<bool>>();
        e.original_output = j.at("original_output");
        e.sigma_used = j.at("sigma");
        const auto& c = j.at("config");
        e.n_perturbations = c.at("n_perturbations");
        e.seed = c.at("seed");
        e.method = c.at("method");
        e.backend = c.at("backend");
        e.model_id = c.at("model_id");
        e.temperature = c.at("temperature");
        for (const auto& a : j.at("attributions")) {
            TokenAttribution att;
            att.token_index = a.at("token_index");
            att.token = a.at("token");
            att.score = a.at("score");
            att.intensity = a.at("intensity");
            att.sign = a.at("sign");
            e.attributions.push_back(std::move(att));
        }
        e.fit.theta0 = j.at("fit").at("theta0");
        e.fit.theta = j.at("fit").at("theta").get<std::vector<double>>();
        e.fit.ridge_lambda = j.at("fit").at("ridge_lambda");
        if (j.at("fit").contains("posterior_var"))
            e.fit.posterior_var = j.at("fit").at("posterior_var").get<std::vector<double>>();
        e.fidelity_report = fidelity_from_json(j.at("fidelity"));
        for (const auto& p : j.at("perturbations")) {
            PerturbationRecord rec;
            rec.mask_bits = p.at("mask").get<std::vector<bool>>();
            rec.text = p.at("text");
            rec.output = p.at("output");
            rec.generation_ok = p.at("generation_ok");
            rec.cache_hit = p.at("cache_hit");
            rec.failure = p.at("failure");
            rec.iwmd_delta = p.at("iwmd");
            rec.weight = p.at("weight");
            rec.owmd_delta = p.at("owmd");
            rec.p_value = p.at("p_value");
            rec.kept = p.at("kept");
            e.perturbations.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::SchemaMismatch, std::string("malformed report: ") + ex.what());
    }
    return e;
}

inline std::string serialize_report(const Explanation& e) { return to_json(e).dump(2) + "\n"; }

inline Explanation parse_report(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::SchemaMismatch, std::string("report is not valid JSON: ") + ex.what());
    }
    return explanation_from_json(j);
}

namespace detail {

inline std::string html_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string fmt_double(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

} // namespace detail

// Inline-styled span per token: red scale for positive coefficients, blue for
// negative; tooltip carries the raw score and p-value context.
inline std::string render_html(const Explanation& e) {
    // intensity/p-value by token index for quick lookup
    std::map<std::size_t, const TokenAttribution*> by_index;
    for (const auto& a : e.attributions) by_index[a.token_index] = &a;

    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        << "<title>token attribution heatmap</title></head>\n<body>\n"
        << "<p style=\"font-family:sans-serif\">model: " << detail::html_escape(e.model_id)
        << " | backend: " << detail::html_escape(e.backend)
        << " | perturbations: " << e.n_perturbations << "</p>\n<p style=\"font-size:1.4em\">\n";
    for (std::size_t i = 0; i < e.tokens.size(); ++i) {
        auto it = by_index.find(i);
        if (it == by_index.end()) {
            out << "<span>" << detail::html_escape(e.tokens[i]) << "</span> ";
            continue;
        }
        const auto& a = *it->second;
        int alpha = static_cast<int>(std::lround(a.intensity * 200));
        const char* rgb = a.sign >= 0 ? "255,80,80" : "80,80,255";
        out << "<span style=\"background-color:rgba(" << rgb << ","
            << detail::fmt_double(alpha / 255.0) << ")\" title=\"score="
            << detail::fmt_double(a.score) << " intensity=" << detail::fmt_double(a.intensity)
            << "\">" << detail::html_escape(e.tokens[i]) << "</span> ";
    }
    out << "\n</p>\n<p style=\"font-family:monospace\">output: "
        << detail::html_escape(e.original_output) << "</p>\n</body></html>\n";
    return out.str();
}

// 256-color background scale on the terminal; positive red, negative blue.
inline std::string render_ansi(const Explanation& e) {
    std::map<std::size_t, const TokenAttribution*> by_index;
    for (const auto& a : e.attributions) by_index[a.token_index] = &a;

    std::ostringstream out;
    for (std::size_t i = 0; i < e.tokens.size(); ++i) {
        if (i > 0) out << ' ';
        auto it = by_index.find(i);
        if (it == by_index.end()) {
            out << e.tokens[i];
            continue;
        }
        const auto& a = *it->second;
        int level = static_cast<int>(std::lround(a.intensity * 5.0)); // 0..5
        int color;
        if (level == 0) {
            out << e.tokens[i];
            continue;
        }
        if (a.sign >= 0) color = 16 + 36 * level; // red ramp 52..196 region
        else color = 16 + level;                  // blue ramp
        out << "\x1b[48;5;" << color << "m" << e.tokens[i] << "\x1b[0m";
    }
    out << '\n';
    return out.str();
}

} // namespace gsmile
