#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hgrec/common.hpp"
#include "hgrec/graph.hpp"
#include "hgrec/model.hpp"

namespace hgrec::config {

// One meta-path entry: "name:walk" with the walk in relation-step syntax
// ("um.~um" = follow um, then um reversed).
struct MetaPathSpec {
    std::string name;
    std::string walk;
};

struct RunConfig {
    std::string manifest;  // dataset manifest path (used by prepare)
    std::vector<MetaPathSpec> meta_paths_user{{"umu", "um.~um"}, {"uu", "uu"}};
    std::vector<MetaPathSpec> meta_paths_item{{"mum", "~um.um"}, {"mgm", "mg.~mg"}};
    int d = 64;
    int L = 3;
    int d_a = 64;
    double lr = 5e-4;
    double lambda = 1e-2;
    double dropout_drop_prob = 0.2;
    int batch_size = 1024;
    int max_epochs = 1000;
    int patience = 100;
    int eval_every = 5;
    int k = 10;
    std::uint64_t seed = 42;
    bool uniform_ablation = false;
    std::string aggregator_activation = "none";  // none | leaky_relu
    double leaky_relu_alpha = 0.2;
    bool normalize_by_degree = false;
    bool include_order_zero = false;
    bool exclude_self_in_neighbors = false;
    std::int64_t max_neighbors_per_node = 0;  // 0 = unlimited
    std::string baseline = "hgrec";           // hgrec | bprmf
    double split_ratio = 0.8;
    double val_fraction = 0.1;

    model::ModelConfig model(bool uniform_override = false) const {
        model::ModelConfig m;
        m.d = d;
        m.L = L;
        m.d_a = d_a;
        m.dropout_drop_prob = dropout_drop_prob;
        m.uniform_ablation = uniform_ablation || uniform_override;
        m.include_order_zero = include_order_zero;
        if (aggregator_activation == "none")
            m.aggregator_activation = model::Activation::none;
        else if (aggregator_activation == "leaky_relu")
            m.aggregator_activation = model::Activation::leaky_relu;
        else
            throw ConfigError("aggregator_activation must be 'none' or 'leaky_relu', got '" +
                              aggregator_activation + "'");
        m.leaky_relu_alpha = leaky_relu_alpha;
        m.normalize_by_degree = normalize_by_degree;
        return m;
    }

    graph::ComposeOptions compose_options() const {
        graph::ComposeOptions o;
        o.exclude_self_in_neighbors = exclude_self_in_neighbors;
        o.max_neighbors_per_node = max_neighbors_per_node;
        return o;
    }

    std::vector<graph::MetaPath> user_paths() const {
        std::vector<graph::MetaPath> out;
        for (const auto& s : meta_paths_user) out.push_back(graph::parse_metapath(s.name, s.walk));
        return out;
    }
    std::vector<graph::MetaPath> item_paths() const {
        std::vector<graph::MetaPath> out;
        for (const auto& s : meta_paths_item) out.push_back(graph::parse_metapath(s.name, s.walk));
        return out;
    }

    void validate() const {
        if (d <= 0 || L <= 0 || d_a <= 0) throw ConfigError("d, L and d_a must be positive");
        if (lr <= 0) throw ConfigError("lr must be positive");
        if (lambda < 0) throw ConfigError("lambda must be non-negative");
        if (dropout_drop_prob < 0 || dropout_drop_prob >= 1)
            throw ConfigError("dropout_drop_prob must be in [0,1)");
        if (batch_size < 0) throw ConfigError("batch_size must be >= 0 (0 = full epoch)");
        if (max_epochs <= 0 || patience <= 0 || eval_every <= 0)
            throw ConfigError("max_epochs, patience and eval_every must be positive");
        if (k <= 0) throw ConfigError("k must be positive");
        if (meta_paths_user.empty() || meta_paths_item.empty())
            throw ConfigError("both meta-path lists must be non-empty");
        if (baseline != "hgrec" && baseline != "bprmf")
            throw ConfigError("baseline must be 'hgrec' or 'bprmf', got '" + baseline + "'");
        if (split_ratio <= 0 || split_ratio > 1) throw ConfigError("split_ratio must be in (0,1]");
        if (val_fraction < 0 || val_fraction >= 1)
            throw ConfigError("val_fraction must be in [0,1)");
        model();  // validates aggregator_activation
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto comma = s.find(',', start);
        auto tok = trim(s.substr(start, comma == std::string::npos ? std::string::npos
                                                                   : comma - start));
        if (!tok.empty()) out.push_back(tok);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::vector<MetaPathSpec> parse_metapath_list(const std::string& key,
                                                     const std::string& value) {
    std::vector<MetaPathSpec> out;
    for (const auto& tok : split_list(value)) {
        auto colon = tok.find(':');
        if (colon == std::string::npos)
            throw ConfigError(key + ": entry '" + tok + "' must be name:walk");
        out.push_back({trim(tok.substr(0, colon)), trim(tok.substr(colon + 1))});
        if (out.back().name.empty() || out.back().walk.empty())
            throw ConfigError(key + ": entry '" + tok + "' must be name:walk");
    }
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

template <typename T>
T parse_num(const std::string& key, const std::string& value) {
    std::istringstream is(value);
    T v{};
    char extra;
    if (!(is >> v) || (is >> extra))
        throw ConfigError(key + ": cannot parse '" + value + "'");
    return v;
}

}  // namespace detail

// Flat `key = value` text; '#' starts a comment; unknown keys are rejected
// by name before any compute happens.
inline void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "manifest") cfg.manifest = value;
    else if (key == "meta_paths_user") cfg.meta_paths_user = parse_metapath_list(key, value);
    else if (key == "meta_paths_item") cfg.meta_paths_item = parse_metapath_list(key, value);
    else if (key == "d") cfg.d = parse_num<int>(key, value);
    else if (key == "L") cfg.L = parse_num<int>(key, value);
    else if (key == "d_a") cfg.d_a = parse_num<int>(key, value);
    else if (key == "lr") cfg.lr = parse_num<double>(key, value);
    else if (key == "lambda") cfg.lambda = parse_num<double>(key, value);
    else if (key == "dropout_drop_prob") cfg.dropout_drop_prob = parse_num<double>(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_num<int>(key, value);
    else if (key == "max_epochs") cfg.max_epochs = parse_num<int>(key, value);
    else if (key == "patience") cfg.patience = parse_num<int>(key, value);
    else if (key == "eval_every") cfg.eval_every = parse_num<int>(key, value);
    else if (key == "k") cfg.k = parse_num<int>(key, value);
    else if (key == "seed") cfg.seed = parse_num<std::uint64_t>(key, value);
    else if (key == "uniform_ablation") cfg.uniform_ablation = parse_bool(key, value);
    else if (key == "aggregator_activation") cfg.aggregator_activation = value;
    else if (key == "leaky_relu_alpha") cfg.leaky_relu_alpha = parse_num<double>(key, value);
    else if (key == "normalize_by_degree") cfg.normalize_by_degree = parse_bool(key, value);
    else if (key == "include_order_zero") cfg.include_order_zero = parse_bool(key, value);
    else if (key == "exclude_self_in_neighbors")
        cfg.exclude_self_in_neighbors = parse_bool(key, value);
    else if (key == "max_neighbors_per_node")
        cfg.max_neighbors_per_node = parse_num<std::int64_t>(key, value);
    else if (key == "baseline") cfg.baseline = value;
    else if (key == "split_ratio") cfg.split_ratio = parse_num<double>(key, value);
    else if (key == "val_fraction") cfg.val_fraction = parse_num<double>(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

inline RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected key = value, got '" + line + "'");
        try {
            apply_config_line(cfg, detail::trim(line.substr(0, eq)),
                              detail::trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

// Effective-config echo: every field with defaults resolved, in config syntax.
inline void print_config(std::ostream& os, const RunConfig& c) {
    auto paths = [](const std::vector<MetaPathSpec>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ",";
            s += v[i].name + ":" + v[i].walk;
        }
        return s;
    };
    os << "manifest = " << c.manifest << "\n"
       << "meta_paths_user = " << paths(c.meta_paths_user) << "\n"
       << "meta_paths_item = " << paths(c.meta_paths_item) << "\n"
       << "d = " << c.d << "\n"
       << "L = " << c.L << "\n"
       << "d_a = " << c.d_a << "\n"
       << "lr = " << c.lr << "\n"
       << "lambda = " << c.lambda << "\n"
       << "dropout_drop_prob = " << c.dropout_drop_prob << "\n"
       << "batch_size = " << c.batch_size << "\n"
       << "max_epochs = " << c.max_epochs << "\n"
       << "patience = " << c.patience << "\n"
       << "eval_every = " << c.eval_every << "\n"
       << "k = " << c.k << "\n"
       << "seed = " << c.seed << "\n"
       << "uniform_ablation = " << (c.uniform_ablation ? "true" : "false") << "\n"
       << "aggregator_activation = " << c.aggregator_activation << "\n"
       << "leaky_relu_alpha = " << c.leaky_relu_alpha << "\n"
       << "normalize_by_degree = " << (c.normalize_by_degree ? "true" : "false") << "\n"
       << "include_order_zero = " << (c.include_order_zero ? "true" : "false") << "\n"
       << "exclude_self_in_neighbors = " << (c.exclude_self_in_neighbors ? "true" : "false") << "\n"
       << "max_neighbors_per_node = " << c.max_neighbors_per_node << "\n"
       << "baseline = " << c.baseline << "\n"
       << "split_ratio = " << c.split_ratio << "\n"
       << "val_fraction = " << c.val_fraction << "\n";
}

}  // namespace hgrec::config
