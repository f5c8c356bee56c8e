// hgrec: command-line front end for preparation, training, evaluation,
// recommendation, layer sweeps and gradient checking.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hgrec/checkpoint.hpp"
#include "hgrec/config.hpp"
#include "hgrec/data.hpp"
#include "hgrec/eval.hpp"
#include "hgrec/model.hpp"
#include "hgrec/training.hpp"

namespace {

using namespace hgrec;
using graph::NodeIndex;

// Mirrors the log stream to a file so runs are auditable after the fact.
struct TeeLog {
    std::ofstream file;
    std::ostringstream buffer;

    explicit TeeLog(const std::filesystem::path& path) : file(path) {}
    template <typename T>
    TeeLog& operator<<(const T& v) {
        std::ostringstream os;
        os << v;
        std::cout << os.str();
        file << os.str();
        return *this;
    }
};

struct CommonFlags {
    std::string config_path;
    std::string bundle_path;
    std::string out_path;
    std::int64_t seed = -1;  // -1 = keep config value
    bool uniform_ablation = false;
    int k = 0;  // 0 = keep config value
};

config::RunConfig load_config(const CommonFlags& flags) {
    config::RunConfig cfg;
    if (!flags.config_path.empty()) cfg = config::parse_config(flags.config_path);
    if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.uniform_ablation) cfg.uniform_ablation = true;
    if (flags.k > 0) cfg.k = flags.k;
    cfg.validate();
    return cfg;
}

void echo_config(const config::RunConfig& cfg) {
    std::cout << "# effective config\n";
    config::print_config(std::cout, cfg);
    std::cout << "# end config\n";
}

struct Adjacencies {
    std::vector<graph::MetaPathAdjacency> user, item;
    std::vector<const graph::MetaPathAdjacency*> user_ptrs, item_ptrs;
};

Adjacencies build_adjacencies(const config::RunConfig& cfg, const data::PreparedBundle& bundle) {
    Adjacencies a;
    auto opts = cfg.compose_options();
    a.user = data::build_metapath_adjacencies(bundle.graph, bundle.interaction_relation,
                                              bundle.split.train, cfg.user_paths(), opts);
    a.item = data::build_metapath_adjacencies(bundle.graph, bundle.interaction_relation,
                                              bundle.split.train, cfg.item_paths(), opts);
    for (auto& adj : a.user) a.user_ptrs.push_back(&adj);
    for (auto& adj : a.item) a.item_ptrs.push_back(&adj);
    return a;
}

// Exclusions for test-time ranking: everything the model saw as positive
// (train plus the carved-out validation items).
std::vector<std::vector<NodeIndex>> known_positives(const data::InteractionSplit& split) {
    std::vector<std::vector<NodeIndex>> merged(split.train.size());
    for (std::size_t u = 0; u < split.train.size(); ++u) {
        merged[u] = split.train[u];
        merged[u].insert(merged[u].end(), split.validation[u].begin(), split.validation[u].end());
        std::sort(merged[u].begin(), merged[u].end());
    }
    return merged;
}

void print_metrics(std::ostream& os, const eval::MetricsReport& r) {
    os << "precision," << r.k << "," << r.precision << "," << r.user_count << "\n"
       << "recall," << r.k << "," << r.recall << "," << r.user_count << "\n"
       << "ndcg," << r.k << "," << r.ndcg << "," << r.user_count << "\n"
       << "hr," << r.k << "," << r.hr << "," << r.user_count << "\n";
}

void check_bundle_compat(const checkpoint::CheckpointHeader& h, const data::PreparedBundle& b,
                         const config::RunConfig& cfg) {
    auto n_users = static_cast<std::uint64_t>(b.graph.count(b.user_type));
    auto n_items = static_cast<std::uint64_t>(b.graph.count(b.item_type));
    if (h.n_users != n_users || h.n_items != n_items)
        throw DataError("checkpoint (format v" + std::to_string(checkpoint::kVersion) +
                        ") was trained on " + std::to_string(h.n_users) + " users / " +
                        std::to_string(h.n_items) + " items but the bundle has " +
                        std::to_string(n_users) + " / " + std::to_string(n_items));
    if (!h.is_bprmf() && (h.k_user != cfg.meta_paths_user.size() ||
                          h.k_item != cfg.meta_paths_item.size()))
        throw DataError("checkpoint (format v" + std::to_string(checkpoint::kVersion) +
                        ") holds " + std::to_string(h.k_user) + "/" + std::to_string(h.k_item) +
                        " meta-paths but the config lists " +
                        std::to_string(cfg.meta_paths_user.size()) + "/" +
                        std::to_string(cfg.meta_paths_item.size()));
}

// Fused embeddings for a checkpoint, rebuilt over the bundle's train graph.
struct Scorer {
    Mat e_user, e_item;
    std::vector<double> user_weights, item_weights;
};

Scorer make_scorer(const std::filesystem::path& ckpt_path, const data::PreparedBundle& bundle,
                   config::RunConfig cfg) {
    Scorer s;
    auto header = checkpoint::peek_header(ckpt_path);
    check_bundle_compat(header, bundle, cfg);
    if (header.is_bprmf()) {
        auto loaded = checkpoint::load_bprmf(ckpt_path);
        s.e_user = loaded.params.user_embeddings;
        s.e_item = loaded.params.item_embeddings;
        return s;
    }
    auto loaded = checkpoint::load_hgrec(ckpt_path);
    cfg.d = loaded.cfg.d;
    cfg.L = loaded.cfg.L;
    cfg.d_a = loaded.cfg.d_a;
    auto adjs = build_adjacencies(cfg, bundle);
    training::HgrecBackend backend(loaded.params, cfg.model(), adjs.user_ptrs, adjs.item_ptrs);
    auto [eu, ei] = backend.fused_embeddings();
    s.e_user = eu;
    s.e_item = ei;
    s.user_weights = backend.user_fusion_weights();
    s.item_weights = backend.item_fusion_weights();
    return s;
}

struct TrainedRun {
    eval::MetricsReport test_metrics;
    training::TrainResult result;
};

// One full training run: init, fit with early stopping, test-set metrics.
TrainedRun run_training(const config::RunConfig& cfg, const data::PreparedBundle& bundle,
                        const std::filesystem::path& out_dir, std::ostream* log) {
    auto n_users = bundle.graph.count(bundle.user_type);
    auto n_items = bundle.graph.count(bundle.item_type);

    training::TrainOptions opts;
    opts.lr = cfg.lr;
    opts.lambda = cfg.lambda;
    opts.batch_size = static_cast<std::size_t>(cfg.batch_size);
    opts.max_epochs = cfg.max_epochs;
    opts.patience = cfg.patience;
    opts.eval_every = cfg.eval_every;
    opts.k = cfg.k;
    opts.seed = cfg.seed;

    TrainedRun run;
    if (cfg.baseline == "bprmf") {
        auto params = model::init_bprmf(cfg.d, n_users, n_items, cfg.seed);
        training::BprMfBackend backend(params);
        run.result = training::train(backend, bundle.split.train, bundle.split.validation, opts, log);
        if (!out_dir.empty()) checkpoint::save_bprmf(out_dir / "model.ckpt", params, cfg.d);
        run.test_metrics = eval::evaluate_all(params.user_embeddings, params.item_embeddings,
                                              known_positives(bundle.split), bundle.split.test,
                                              cfg.k);
        return run;
    }

    auto adjs = build_adjacencies(cfg, bundle);
    auto params = model::init_params(cfg.model(), n_users, n_items,
                                     static_cast<int>(adjs.user.size()),
                                     static_cast<int>(adjs.item.size()), cfg.seed);
    training::HgrecBackend backend(params, cfg.model(), adjs.user_ptrs, adjs.item_ptrs);
    run.result = training::train(backend, bundle.split.train, bundle.split.validation, opts, log);
    if (!out_dir.empty())
        checkpoint::save_hgrec(out_dir / "model.ckpt", params, cfg.model(),
                               run.result.user_fusion_weights, run.result.item_fusion_weights);
    auto [eu, ei] = backend.fused_embeddings();
    run.test_metrics =
        eval::evaluate_all(eu, ei, known_positives(bundle.split), bundle.split.test, cfg.k);
    return run;
}

int cmd_prepare(const CommonFlags& flags, const std::string& manifest_flag) {
    auto cfg = load_config(flags);
    std::string manifest_path = manifest_flag.empty() ? cfg.manifest : manifest_flag;
    if (manifest_path.empty()) throw ConfigError("prepare: no manifest given (flag or config)");
    if (flags.out_path.empty()) throw ConfigError("prepare: --out is required");
    echo_config(cfg);

    auto manifest = data::parse_manifest(manifest_path);
    auto bundle = data::prepare_bundle(manifest, cfg.seed, cfg.split_ratio, cfg.val_fraction);
    data::save_bundle(bundle, flags.out_path);

    std::cout << "bundle written to " << flags.out_path << "\n";
    std::ifstream stats(std::filesystem::path(flags.out_path) / "bundle.txt");
    std::cout << stats.rdbuf();
    return 0;
}

int cmd_train(const CommonFlags& flags) {
    auto cfg = load_config(flags);
    if (flags.bundle_path.empty()) throw ConfigError("train: --bundle is required");
    if (flags.out_path.empty()) throw ConfigError("train: --out is required");
    echo_config(cfg);

    auto bundle = data::load_bundle(flags.bundle_path);
    std::filesystem::create_directories(flags.out_path);
    std::ofstream log_file(std::filesystem::path(flags.out_path) / "train.log");
    std::ostringstream log;
    auto run = run_training(cfg, bundle, flags.out_path, &log);
    std::cout << log.str();
    log_file << log.str();

    std::ostringstream tail;
    tail << "best_epoch=" << run.result.best_epoch
         << " best_val_recall@" << cfg.k << "=" << run.result.best_recall
         << " diverged=" << (run.result.diverged ? 1 : 0) << "\n"
         << "fusion_user=" << training::detail::join_weights(run.result.user_fusion_weights)
         << " fusion_item=" << training::detail::join_weights(run.result.item_fusion_weights)
         << "\n";
    std::ostringstream metrics;
    print_metrics(metrics, run.test_metrics);
    std::cout << tail.str() << metrics.str();
    log_file << tail.str() << metrics.str();
    std::ofstream(std::filesystem::path(flags.out_path) / "metrics.txt") << metrics.str();
    return 0;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& ckpt_path) {
    auto cfg = load_config(flags);
    if (flags.bundle_path.empty()) throw ConfigError("evaluate: --bundle is required");
    if (ckpt_path.empty()) throw ConfigError("evaluate: --checkpoint is required");
    echo_config(cfg);

    auto bundle = data::load_bundle(flags.bundle_path);
    auto scorer = make_scorer(ckpt_path, bundle, cfg);
    auto report = eval::evaluate_all(scorer.e_user, scorer.e_item, known_positives(bundle.split),
                                     bundle.split.test, cfg.k);
    print_metrics(std::cout, report);
    return 0;
}

int cmd_recommend(const CommonFlags& flags, const std::string& ckpt_path,
                  const std::string& raw_user) {
    auto cfg = load_config(flags);
    if (flags.bundle_path.empty()) throw ConfigError("recommend: --bundle is required");
    if (ckpt_path.empty()) throw ConfigError("recommend: --checkpoint is required");
    echo_config(cfg);

    auto bundle = data::load_bundle(flags.bundle_path);
    auto& user_table = bundle.ids.to_dense[static_cast<std::size_t>(bundle.user_type)];
    auto it = user_table.find(raw_user);
    if (it == user_table.end()) throw DataError("recommend: unknown user id '" + raw_user + "'");
    NodeIndex u = it->second;

    auto scorer = make_scorer(ckpt_path, bundle, cfg);
    auto ranked = eval::rank_items(scorer.e_user, scorer.e_item, u, bundle.split.train[u], cfg.k);
    const auto& item_ids = bundle.ids.raw[static_cast<std::size_t>(bundle.item_type)];
    Vec scores = scorer.e_item * scorer.e_user.row(u).transpose();
    std::cout << "fusion_user=" << training::detail::join_weights(scorer.user_weights)
              << " fusion_item=" << training::detail::join_weights(scorer.item_weights) << "\n";
    for (std::size_t r = 0; r < ranked.items.size(); ++r)
        std::cout << (r + 1) << "," << item_ids[static_cast<std::size_t>(ranked.items[r])] << ","
                  << scores(ranked.items[r]) << "\n";
    return 0;
}

int cmd_sweep_layers(const CommonFlags& flags, const std::string& layers_csv,
                     const std::string& seeds_csv) {
    auto cfg = load_config(flags);
    if (flags.bundle_path.empty()) throw ConfigError("sweep-layers: --bundle is required");
    std::vector<int> layers, seeds;
    for (const auto& tok : config::detail::split_list(layers_csv))
        layers.push_back(config::detail::parse_num<int>("layers", tok));
    for (const auto& tok : config::detail::split_list(seeds_csv))
        seeds.push_back(config::detail::parse_num<int>("seeds", tok));
    if (layers.empty()) throw ConfigError("sweep-layers: empty layer list");
    if (seeds.empty()) throw ConfigError("sweep-layers: empty seed list");
    echo_config(cfg);

    auto bundle = data::load_bundle(flags.bundle_path);
    for (int L : layers) {
        double sum_recall = 0, sum_ndcg = 0;
        for (int seed : seeds) {
            auto run_cfg = cfg;
            run_cfg.L = L;
            run_cfg.seed = static_cast<std::uint64_t>(seed);
            std::filesystem::path out;
            if (!flags.out_path.empty()) {
                out = std::filesystem::path(flags.out_path) /
                      ("L" + std::to_string(L) + "_seed" + std::to_string(seed));
                std::filesystem::create_directories(out);
            }
            auto run = run_training(run_cfg, bundle, out, nullptr);
            std::cout << "sweep,L=" << L << ",seed=" << seed << ",recall@" << cfg.k << "="
                      << run.test_metrics.recall << ",ndcg@" << cfg.k << "="
                      << run.test_metrics.ndcg << "\n";
            sum_recall += run.test_metrics.recall;
            sum_ndcg += run.test_metrics.ndcg;
        }
        auto n = static_cast<double>(seeds.size());
        std::cout << "sweep_mean,L=" << L << ",recall@" << cfg.k << "=" << sum_recall / n
                  << ",ndcg@" << cfg.k << "=" << sum_ndcg / n << "\n";
    }
    return 0;
}

int cmd_gradcheck(const CommonFlags& flags, int n_users, int n_items, double eps, int coords,
                  double tolerance) {
    auto cfg = load_config(flags);
    echo_config(cfg);

    std::vector<graph::MetaPathAdjacency> user_adjs, item_adjs;
    std::vector<std::vector<NodeIndex>> train;
    Rng rng(cfg.seed);

    if (!flags.bundle_path.empty()) {
        auto bundle = data::load_bundle(flags.bundle_path);
        auto adjs = build_adjacencies(cfg, bundle);
        user_adjs = std::move(adjs.user);
        item_adjs = std::move(adjs.item);
        train = bundle.split.train;
        n_users = bundle.graph.count(bundle.user_type);
        n_items = bundle.graph.count(bundle.item_type);
    } else {
        // synthetic instance: random interaction graph, two meta-paths per
        // side (interaction closure plus a random same-type relation)
        std::vector<std::pair<NodeIndex, NodeIndex>> um, uu, mm;
        train.resize(static_cast<std::size_t>(n_users));
        for (NodeIndex u = 0; u < n_users; ++u)
            for (int e = 0; e < 3; ++e) {
                auto i = static_cast<NodeIndex>(uniform_int(rng, 0, n_items - 1));
                um.push_back({u, i});
                train[u].push_back(i);
            }
        for (auto& pos : train) {
            std::sort(pos.begin(), pos.end());
            pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
        }
        for (NodeIndex u = 0; u < n_users; ++u)
            uu.push_back({u, static_cast<NodeIndex>(uniform_int(rng, 0, n_users - 1))});
        for (NodeIndex m = 0; m < n_items; ++m)
            mm.push_back({m, static_cast<NodeIndex>(uniform_int(rng, 0, n_items - 1))});

        graph::RelationTable table;
        auto put = [&](const std::string& name, NodeIndex r, NodeIndex c,
                       const std::vector<std::pair<NodeIndex, NodeIndex>>& edges) {
            graph::Relation rel;
            rel.name = name;
            rel.src_type = name == "mm" ? 1 : 0;
            rel.dst_type = name == "uu" ? 0 : 1;
            if (name == "uu") rel.src_type = 0, rel.dst_type = 0;
            if (name == "mm") rel.src_type = 1, rel.dst_type = 1;
            if (name == "um") rel.src_type = 0, rel.dst_type = 1;
            rel.edges = graph::build_csr(edges, r, c);
            table[name] = rel;
        };
        auto nu = static_cast<NodeIndex>(n_users);
        auto ni = static_cast<NodeIndex>(n_items);
        put("um", nu, ni, um);
        put("uu", nu, nu, uu);
        put("mm", ni, ni, mm);
        user_adjs.push_back(graph::compose_metapath(graph::parse_metapath("umu", "um.~um"), table));
        user_adjs.push_back(graph::compose_metapath(graph::parse_metapath("uu", "uu"), table));
        item_adjs.push_back(graph::compose_metapath(graph::parse_metapath("mum", "~um.um"), table));
        item_adjs.push_back(graph::compose_metapath(graph::parse_metapath("mm", "mm"), table));
    }

    std::vector<const graph::MetaPathAdjacency*> user_ptrs, item_ptrs;
    for (auto& a : user_adjs) user_ptrs.push_back(&a);
    for (auto& a : item_adjs) item_ptrs.push_back(&a);

    auto mcfg = cfg.model();
    auto params = model::init_params(mcfg, n_users, n_items, static_cast<int>(user_adjs.size()),
                                     static_cast<int>(item_adjs.size()), cfg.seed);
    auto batch = training::sample_triples(train, static_cast<NodeIndex>(n_items), rng, 16);
    // frozen masks keep the objective deterministic across re-evaluations
    auto masks = model::make_dropout_masks(rng, mcfg, n_users, n_items,
                                           static_cast<int>(user_adjs.size()),
                                           static_cast<int>(item_adjs.size()));
    const model::DropoutMasks* mask_ptr = mcfg.dropout_drop_prob > 0 ? &masks : nullptr;

    training::HgrecBackend backend(params, mcfg, user_ptrs, item_ptrs);
    auto objective = [&](bool want_grads, std::vector<Mat>* grads) {
        ad::Tape tape;
        auto fwd = model::build_forward(tape, params, mcfg, user_ptrs, item_ptrs, mask_ptr);
        auto loss = backend.batch_loss(tape, fwd, batch, cfg.lambda);
        if (want_grads) {
            tape.backward(loss);
            backend.collect_grads(tape, fwd, *grads);
        }
        return tape.value(loss)(0, 0);
    };

    std::vector<Mat*> tensors;
    for (auto& [name, m] : params.tensors()) tensors.push_back(m);
    Rng check_rng(cfg.seed + 1);
    auto report = ad::finite_diff_check(objective, tensors, eps, coords, check_rng);
    bool pass = report.max_rel_err <= tolerance;
    std::cout << "gradcheck max_rel_err=" << report.max_rel_err
              << " coords=" << report.coords_checked << " tolerance=" << tolerance
              << " status=" << (pass ? "PASS" : "FAIL") << "\n";
    if (!pass) throw NumericError("gradcheck failed: max relative error " +
                                  std::to_string(report.max_rel_err));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hgrec: heterogeneous-graph recommendation engine"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string manifest_flag, ckpt_path, raw_user, layers_csv = "1,2,3,4", seeds_csv = "1,2,3";
    int gc_users = 20, gc_items = 20, gc_coords = 300;
    double gc_eps = 1e-6, gc_tol = 1e-5;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", flags.config_path, "run config file (key = value)");
        cmd->add_option("--bundle", flags.bundle_path, "prepared bundle directory");
        cmd->add_option("--out", flags.out_path, "output directory");
        cmd->add_option("--seed", flags.seed, "RNG seed override");
        cmd->add_flag("--uniform-ablation", flags.uniform_ablation,
                      "replace learned fusion weights with uniform 1/K");
        cmd->add_option("--k", flags.k, "ranking cutoff override");
    };

    auto* prepare = app.add_subcommand("prepare", "build a dataset bundle from a manifest");
    add_common(prepare);
    prepare->add_option("--manifest", manifest_flag, "dataset manifest path");

    auto* train = app.add_subcommand("train", "train a model on a prepared bundle");
    add_common(train);

    auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
    add_common(evaluate);
    evaluate->add_option("--checkpoint", ckpt_path, "model checkpoint path");

    auto* recommend = app.add_subcommand("recommend", "top-K recommendations for one user");
    add_common(recommend);
    recommend->add_option("--checkpoint", ckpt_path, "model checkpoint path");
    recommend->add_option("--user", raw_user, "raw user id")->required();

    auto* sweep = app.add_subcommand("sweep-layers", "train across layer depths and seeds");
    add_common(sweep);
    sweep->add_option("--layers", layers_csv, "comma-separated layer depths");
    sweep->add_option("--seeds", seeds_csv, "comma-separated seeds");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    add_common(gradcheck);
    gradcheck->add_option("--users", gc_users, "synthetic instance user count");
    gradcheck->add_option("--items", gc_items, "synthetic instance item count");
    gradcheck->add_option("--eps", gc_eps, "central-difference step");
    gradcheck->add_option("--coords", gc_coords, "minimum coordinates sampled");
    gradcheck->add_option("--tolerance", gc_tol, "max relative error allowed");

    try {
        app.parse(argc, argv);
        if (prepare->parsed()) return cmd_prepare(flags, manifest_flag);
        if (train->parsed()) return cmd_train(flags);
        if (evaluate->parsed()) return cmd_evaluate(flags, ckpt_path);
        if (recommend->parsed()) return cmd_recommend(flags, ckpt_path, raw_user);
        if (sweep->parsed()) return cmd_sweep_layers(flags, layers_csv, seeds_csv);
        if (gradcheck->parsed())
            return cmd_gradcheck(flags, gc_users, gc_items, gc_eps, gc_coords, gc_tol);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    }
}
