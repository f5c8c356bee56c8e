#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hgrec/autodiff.hpp"
#include "hgrec/common.hpp"
#include "hgrec/graph.hpp"

namespace hgrec::model {

using ad::Tape;
using ad::Var;
using graph::MetaPathAdjacency;

enum class Activation { none, leaky_relu };

struct ModelConfig {
    int d = 64;    // embedding width
    int L = 3;     // aggregation depth
    int d_a = 64;  // attention space width
    double dropout_drop_prob = 0.2;
    bool uniform_ablation = false;
    bool include_order_zero = false;
    Activation aggregator_activation = Activation::none;
    double leaky_relu_alpha = 0.2;
    bool normalize_by_degree = false;

    int fused_width() const { return d * (L + (include_order_zero ? 1 : 0)); }
};

// Fusion attention parameters for one side (user or item).
struct FusionParams {
    Mat w;  // d_a x fused_width
    Mat b;  // 1 x d_a
    Mat q;  // d_a x 1
};

struct SideParams {
    std::vector<std::vector<Mat>> w1;  // [path][layer], each d x d
    std::vector<std::vector<Mat>> w2;
    FusionParams fusion;
};

struct HgrecParams {
    Mat user_embeddings;  // N_users x d
    Mat item_embeddings;  // N_items x d
    SideParams user_side;
    SideParams item_side;

    // Declaration-order traversal; the checkpoint format, Adam state and the
    // L2 term all rely on this ordering.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn("user_embeddings", user_embeddings);
        fn("item_embeddings", item_embeddings);
        auto side = [&](const char* prefix, SideParams& s) {
            for (std::size_t k = 0; k < s.w1.size(); ++k)
                for (std::size_t l = 0; l < s.w1[k].size(); ++l) {
                    fn(std::string(prefix) + ".w1.p" + std::to_string(k) + ".l" + std::to_string(l),
                       s.w1[k][l]);
                    fn(std::string(prefix) + ".w2.p" + std::to_string(k) + ".l" + std::to_string(l),
                       s.w2[k][l]);
                }
            fn(std::string(prefix) + ".fusion.w", s.fusion.w);
            fn(std::string(prefix) + ".fusion.b", s.fusion.b);
            fn(std::string(prefix) + ".fusion.q", s.fusion.q);
        };
        side("user", user_side);
        side("item", item_side);
    }

    std::vector<std::pair<std::string, Mat*>> tensors() {
        std::vector<std::pair<std::string, Mat*>> out;
        for_each_tensor([&](const std::string& name, Mat& m) { out.push_back({name, &m}); });
        return out;
    }
};

inline Mat xavier_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double fan_in,
                          double fan_out) {
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform_real(rng, -bound, bound);
    return m;
}

inline HgrecParams init_params(const ModelConfig& cfg, Eigen::Index n_users, Eigen::Index n_items,
                               int k_user, int k_item, std::uint64_t seed) {
    if (cfg.d <= 0 || cfg.L <= 0 || cfg.d_a <= 0 || k_user <= 0 || k_item <= 0 || n_users <= 0 ||
        n_items <= 0)
        throw ConfigError("init_params: all dimensions must be positive");
    Rng rng(seed);
    HgrecParams p;
    p.user_embeddings = xavier_uniform(rng, n_users, cfg.d, cfg.d, cfg.d);
    p.item_embeddings = xavier_uniform(rng, n_items, cfg.d, cfg.d, cfg.d);
    auto make_side = [&](int k) {
        SideParams s;
        s.w1.resize(k);
        s.w2.resize(k);
        for (int i = 0; i < k; ++i)
            for (int l = 0; l < cfg.L; ++l) {
                s.w1[i].push_back(xavier_uniform(rng, cfg.d, cfg.d, cfg.d, cfg.d));
                s.w2[i].push_back(xavier_uniform(rng, cfg.d, cfg.d, cfg.d, cfg.d));
            }
        int fw = cfg.fused_width();
        s.fusion.w = xavier_uniform(rng, cfg.d_a, fw, fw, cfg.d_a);
        s.fusion.b = Mat::Zero(1, cfg.d_a);
        s.fusion.q = xavier_uniform(rng, cfg.d_a, 1, cfg.d_a, 1);
        return s;
    };
    p.user_side = make_side(k_user);
    p.item_side = make_side(k_item);
    return p;
}

// row u = W1 e_u + sum_{k in N_u} (W1 e_k + W2 (e_k . e_u)), vectorized as
// (E + S) W1^T + (S . E) W2^T with S the neighbor sum. No activation and no
// degree normalization unless the config flags say otherwise.
struct AggregateOptions {
    Activation activation = Activation::none;
    double leaky_relu_alpha = 0.2;
    bool normalize_by_degree = false;
};

inline Var aggregate_first_order(Tape& tape, Var e_prev, const MetaPathAdjacency* adj, Var w1,
                                 Var w2, const AggregateOptions& opts = {}) {
    if (tape.value(e_prev).cols() != tape.value(w1).cols() ||
        tape.value(e_prev).cols() != tape.value(w2).cols())
        throw DimensionError("aggregate_first_order: embedding width " +
                             std::to_string(tape.value(e_prev).cols()) + " vs weight width " +
                             std::to_string(tape.value(w1).cols()));
    Var s = tape.neighbor_sum(e_prev, adj, opts.normalize_by_degree);
    Var linear = tape.matmul_nt(tape.add(e_prev, s), w1);
    Var interact = tape.matmul_nt(tape.elementwise_mul(s, e_prev), w2);
    Var out = tape.add(linear, interact);
    if (opts.activation == Activation::leaky_relu) out = tape.leaky_relu(out, opts.leaky_relu_alpha);
    return out;
}

// Stacks first-order aggregation; the same adjacency is reused at every layer
// so layer l carries l-hop compositions of the meta-path.
inline std::vector<Var> aggregate_high_order(Tape& tape, Var e0, const MetaPathAdjacency* adj,
                                             const std::vector<Var>& w1_layers,
                                             const std::vector<Var>& w2_layers,
                                             const AggregateOptions& opts = {},
                                             const std::vector<Mat>* dropout_masks = nullptr,
                                             double keep_prob = 1.0) {
    if (w1_layers.empty() || w1_layers.size() != w2_layers.size())
        throw ConfigError("aggregate_high_order: need one (W1,W2) pair per layer, got " +
                          std::to_string(w1_layers.size()) + "/" + std::to_string(w2_layers.size()));
    std::vector<Var> outputs;
    Var e = e0;
    for (std::size_t l = 0; l < w1_layers.size(); ++l) {
        e = aggregate_first_order(tape, e, adj, w1_layers[l], w2_layers[l], opts);
        if (dropout_masks) e = tape.dropout(e, (*dropout_masks)[l], keep_prob);
        outputs.push_back(e);
    }
    return outputs;
}

inline Var concat_orders(Tape& tape, const std::vector<Var>& layer_outputs) {
    return tape.concat_cols(layer_outputs);
}

// alpha_k = mean over rows of q^T tanh(W e + b).
inline std::vector<Var> fusion_scores(Tape& tape, const std::vector<Var>& semantic_embeddings,
                                      Var w, Var b, Var q) {
    std::vector<Var> scores;
    for (Var e : semantic_embeddings) {
        Var h = tape.tanh_(tape.add_rowvec(tape.matmul_nt(e, w), b));
        scores.push_back(tape.reduce_mean_rows(tape.matmul(h, q)));
    }
    return scores;
}

inline Var fusion_weights(Tape& tape, const std::vector<Var>& scores, bool uniform_ablation) {
    if (scores.empty()) throw ConfigError("fusion_weights: no meta-paths");
    if (uniform_ablation) {
        auto k = static_cast<double>(scores.size());
        return tape.constant(Mat::Constant(1, scores.size(), 1.0 / k));
    }
    return tape.softmax_vec(tape.concat_cols(scores));
}

inline Var fuse(Tape& tape, const std::vector<Var>& semantic_embeddings, Var weights) {
    return tape.blend(semantic_embeddings, weights);
}

// Per-side dropout masks, drawn up front so the tape stays deterministic.
struct DropoutMasks {
    std::vector<std::vector<Mat>> user;  // [path][layer]
    std::vector<std::vector<Mat>> item;
    double keep_prob = 1.0;
};

inline DropoutMasks make_dropout_masks(Rng& rng, const ModelConfig& cfg, Eigen::Index n_users,
                                       Eigen::Index n_items, int k_user, int k_item) {
    DropoutMasks masks;
    masks.keep_prob = 1.0 - cfg.dropout_drop_prob;
    std::bernoulli_distribution keep(masks.keep_prob);
    auto draw = [&](Eigen::Index rows) {
        Mat m(rows, cfg.d);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (int j = 0; j < cfg.d; ++j) m(i, j) = keep(rng) ? 1.0 : 0.0;
        return m;
    };
    masks.user.resize(k_user);
    for (int k = 0; k < k_user; ++k)
        for (int l = 0; l < cfg.L; ++l) masks.user[k].push_back(draw(n_users));
    masks.item.resize(k_item);
    for (int k = 0; k < k_item; ++k)
        for (int l = 0; l < cfg.L; ++l) masks.item[k].push_back(draw(n_items));
    return masks;
}

struct ForwardLeaves {
    Var user_embeddings, item_embeddings;
    std::vector<std::pair<std::string, Var>> all;  // declaration order
};

struct ForwardResult {
    Var e_user, e_item;                  // fused, N x fused_width
    Var user_weights, item_weights;      // 1 x K
    ForwardLeaves leaves;
};

// Full HGRec forward over the whole graph. Adjacencies must be square
// (anchor type == terminal type) since neighbor embeddings are drawn from
// the same table that is being updated.
inline ForwardResult build_forward(Tape& tape, HgrecParams& params, const ModelConfig& cfg,
                                   const std::vector<const MetaPathAdjacency*>& user_adjs,
                                   const std::vector<const MetaPathAdjacency*>& item_adjs,
                                   const DropoutMasks* masks = nullptr) {
    if (user_adjs.size() != params.user_side.w1.size() ||
        item_adjs.size() != params.item_side.w1.size())
        throw ConfigError("build_forward: adjacency count does not match parameter meta-path count");
    for (const auto* a : user_adjs)
        if (a->adjacency.rows != a->adjacency.cols)
            throw ConfigError("build_forward: meta-path '" + a->meta_path.name +
                              "' is not anchor-closed (adjacency " +
                              std::to_string(a->adjacency.rows) + "x" +
                              std::to_string(a->adjacency.cols) + ")");
    for (const auto* a : item_adjs)
        if (a->adjacency.rows != a->adjacency.cols)
            throw ConfigError("build_forward: meta-path '" + a->meta_path.name +
                              "' is not anchor-closed");

    ForwardResult r;
    std::vector<std::pair<std::string, Var>>& leaf_list = r.leaves.all;

    // Leaves are created in the exact for_each_tensor order.
    std::vector<Mat*> tensor_ptrs;
    std::vector<std::string> tensor_names;
    params.for_each_tensor([&](const std::string& name, Mat& m) {
        tensor_ptrs.push_back(&m);
        tensor_names.push_back(name);
    });
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < tensor_ptrs.size(); ++i) {
        Var v = tape.leaf(*tensor_ptrs[i]);
        leaves.push_back(v);
        leaf_list.push_back({tensor_names[i], v});
    }
    std::size_t cursor = 0;
    auto next_leaf = [&] { return leaves[cursor++]; };

    r.leaves.user_embeddings = next_leaf();
    r.leaves.item_embeddings = next_leaf();

    AggregateOptions agg;
    agg.activation = cfg.aggregator_activation;
    agg.leaky_relu_alpha = cfg.leaky_relu_alpha;
    agg.normalize_by_degree = cfg.normalize_by_degree;

    auto run_side = [&](Var emb, const std::vector<const MetaPathAdjacency*>& adjs,
                        const std::vector<std::vector<Mat>>* side_masks,
                        std::pair<Var, Var>& out) {
        std::size_t k_count = adjs.size();
        std::vector<std::vector<Var>> w1(k_count), w2(k_count);
        for (std::size_t k = 0; k < k_count; ++k)
            for (int l = 0; l < cfg.L; ++l) {
                w1[k].push_back(next_leaf());
                w2[k].push_back(next_leaf());
            }
        Var fw = next_leaf();
        Var fb = next_leaf();
        Var fq = next_leaf();

        std::vector<Var> semantic;
        for (std::size_t k = 0; k < k_count; ++k) {
            double keep = side_masks ? (1.0 - cfg.dropout_drop_prob) : 1.0;
            auto orders = aggregate_high_order(tape, emb, adjs[k], w1[k], w2[k], agg,
                                               side_masks ? &(*side_masks)[k] : nullptr, keep);
            if (cfg.include_order_zero) orders.insert(orders.begin(), emb);
            semantic.push_back(concat_orders(tape, orders));
        }
        Var weights = cfg.uniform_ablation
                          ? fusion_weights(tape, std::vector<Var>(semantic.size(), Var{}), true)
                          : fusion_weights(tape, fusion_scores(tape, semantic, fw, fb, fq), false);
        out = {fuse(tape, semantic, weights), weights};
    };

    std::pair<Var, Var> user_out, item_out;
    run_side(r.leaves.user_embeddings, user_adjs, masks ? &masks->user : nullptr, user_out);
    run_side(r.leaves.item_embeddings, item_adjs, masks ? &masks->item : nullptr, item_out);
    r.e_user = user_out.first;
    r.user_weights = user_out.second;
    r.e_item = item_out.first;
    r.item_weights = item_out.second;
    return r;
}

// Plain inner-product scoring over fused embeddings: y_ui = E_u . E_i.
inline Vec predict_scores(const Mat& e_user, const Mat& e_item, Eigen::Index u) {
    if (e_user.cols() != e_item.cols())
        throw DimensionError("predict_scores: width mismatch " + std::to_string(e_user.cols()) +
                             " vs " + std::to_string(e_item.cols()));
    if (u < 0 || u >= e_user.rows()) throw DataError("predict_scores: user out of range");
    return e_item * e_user.row(u).transpose();
}

// BPR-MF baseline: free d-dim embeddings, same pairwise loss downstream.
struct BprMfParams {
    Mat user_embeddings;
    Mat item_embeddings;

    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn("user_embeddings", user_embeddings);
        fn("item_embeddings", item_embeddings);
    }
    std::vector<std::pair<std::string, Mat*>> tensors() {
        return {{"user_embeddings", &user_embeddings}, {"item_embeddings", &item_embeddings}};
    }
};

inline BprMfParams init_bprmf(int d, Eigen::Index n_users, Eigen::Index n_items,
                              std::uint64_t seed) {
    if (d <= 0 || n_users <= 0 || n_items <= 0)
        throw ConfigError("init_bprmf: all dimensions must be positive");
    Rng rng(seed);
    BprMfParams p;
    p.user_embeddings = xavier_uniform(rng, n_users, d, d, d);
    p.item_embeddings = xavier_uniform(rng, n_items, d, d, d);
    return p;
}

inline double bprmf_forward(const Mat& user_emb, const Mat& item_emb, Eigen::Index u,
                            Eigen::Index i) {
    if (user_emb.cols() != item_emb.cols())
        throw DimensionError("bprmf_forward: width mismatch");
    return user_emb.row(u).dot(item_emb.row(i));
}

}  // namespace hgrec::model
