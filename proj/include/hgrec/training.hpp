#pragma once

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hgrec/autodiff.hpp"
#include "hgrec/common.hpp"
#include "hgrec/eval.hpp"
#include "hgrec/model.hpp"

namespace hgrec::training {

using graph::NodeIndex;

struct TrainingTriple {
    NodeIndex u = 0;
    NodeIndex i = 0;  // observed item
    NodeIndex j = 0;  // unobserved item
};

// Positives are drawn uniformly over the observed (u,i) interactions; the
// negative is rejection-resampled until unobserved for that user. Positive
// lists must be sorted ascending.
inline std::vector<TrainingTriple> sample_triples(
    const std::vector<std::vector<NodeIndex>>& train_positives, NodeIndex n_items, Rng& rng,
    std::size_t count) {
    std::vector<std::pair<NodeIndex, NodeIndex>> flat;
    for (std::size_t u = 0; u < train_positives.size(); ++u) {
        if (static_cast<NodeIndex>(train_positives[u].size()) >= n_items && n_items > 0 &&
            !train_positives[u].empty())
            throw DataError("sample_triples: user " + std::to_string(u) +
                            " has positives covering the whole item set");
        for (NodeIndex i : train_positives[u]) flat.push_back({static_cast<NodeIndex>(u), i});
    }
    if (flat.empty()) throw DataError("sample_triples: no training interactions");

    std::vector<TrainingTriple> triples;
    triples.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        auto [u, i] = flat[uniform_int(rng, 0, static_cast<std::int64_t>(flat.size()) - 1)];
        NodeIndex j;
        const auto& pos = train_positives[u];
        do {
            j = static_cast<NodeIndex>(uniform_int(rng, 0, n_items - 1));
        } while (std::binary_search(pos.begin(), pos.end(), j));
        triples.push_back({u, i, j});
    }
    return triples;
}

// Pairwise objective: sum over the batch of -ln sigma(pos - neg), plus
// lambda * sum of squares over every trainable tensor. The batch term is a
// sum, not a mean.
inline ad::Var bpr_loss(ad::Tape& tape, ad::Var pos_scores, ad::Var neg_scores,
                        const std::vector<ad::Var>& param_leaves, double lambda) {
    const Mat& p = tape.value(pos_scores);
    const Mat& n = tape.value(neg_scores);
    if (p.rows() != n.rows() || p.cols() != 1 || n.cols() != 1)
        throw DimensionError("bpr_loss: score vectors must be equal-length columns");
    if (lambda < 0) throw ConfigError("bpr_loss: lambda must be nonnegative");
    for (Eigen::Index t = 0; t < p.rows(); ++t)
        if (std::isnan(p(t, 0)) || std::isnan(n(t, 0)))
            throw NumericError("bpr_loss: NaN score at triple " + std::to_string(t));

    ad::Var diff = tape.sub(pos_scores, neg_scores);
    ad::Var loss = tape.reduce_sum(tape.softplus_(tape.scale(diff, -1.0)));
    if (lambda > 0 && !param_leaves.empty()) {
        ad::Var reg = tape.l2_squared(param_leaves[0]);
        for (std::size_t k = 1; k < param_leaves.size(); ++k)
            reg = tape.add(reg, tape.l2_squared(param_leaves[k]));
        loss = tape.add(loss, tape.scale(reg, lambda));
    }
    return loss;
}

// Bias-corrected Adam.
struct OptimizerState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<Mat> m, v;

    void init(const std::vector<Mat*>& params) {
        m.clear();
        v.clear();
        for (const Mat* p : params) {
            m.push_back(Mat::Zero(p->rows(), p->cols()));
            v.push_back(Mat::Zero(p->rows(), p->cols()));
        }
    }
};

inline void adam_step(const std::vector<Mat*>& params, const std::vector<Mat>& grads,
                      OptimizerState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ConfigError("adam_step: parameter/gradient/state count mismatch");
    state.step_count++;
    double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
    double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Mat& p = *params[k];
        const Mat& g = grads[k];
        if (g.rows() != p.rows() || g.cols() != p.cols())
            throw ConfigError("adam_step: shape mismatch for parameter " + std::to_string(k));
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
        state.v[k] = (state.beta2 * state.v[k].array() + (1.0 - state.beta2) * g.array().square()).matrix();
        Mat mhat = state.m[k] / bc1;
        Mat vhat = state.v[k] / bc2;
        p.array() -= state.lr * mhat.array() / (vhat.array().sqrt() + state.eps);
    }
}

struct EarlyStopState {
    double best_metric = -1.0;
    int best_epoch = -1;
    std::vector<Mat> best_snapshot;
    int epochs_since_improvement = 0;
    int patience = 100;
};

struct TrainOptions {
    double lr = 1e-3;
    double lambda = 1e-2;
    std::size_t batch_size = 1024;  // 0 = one full-epoch batch
    int max_epochs = 1000;
    int patience = 100;
    int eval_every = 5;
    int k = 10;  // validation cutoff
    std::uint64_t seed = 0;
    bool verbose = true;
};

struct TrainResult {
    std::vector<Mat> best_params;  // declaration-order snapshot
    int best_epoch = -1;
    double best_recall = 0;
    double best_ndcg = 0;
    int epochs_run = 0;
    bool diverged = false;
    double final_loss = 0;
    std::vector<double> user_fusion_weights, item_fusion_weights;
};

// Forward/backward backend for HGRec: full-graph forward, batch scores via
// row gathers, dropout masks drawn per step from the training RNG.
class HgrecBackend {
  public:
    HgrecBackend(model::HgrecParams& params, const model::ModelConfig& cfg,
                 std::vector<const graph::MetaPathAdjacency*> user_adjs,
                 std::vector<const graph::MetaPathAdjacency*> item_adjs)
        : params_(params), cfg_(cfg), user_adjs_(std::move(user_adjs)),
          item_adjs_(std::move(item_adjs)) {}

    std::vector<Mat*> tensors() {
        std::vector<Mat*> out;
        for (auto& [name, m] : params_.tensors()) out.push_back(m);
        return out;
    }

    double step(const std::vector<TrainingTriple>& batch, double lambda, Rng& rng,
                std::vector<Mat>& grads_out) {
        ad::Tape tape;
        const model::DropoutMasks* masks_ptr = nullptr;
        model::DropoutMasks masks;
        if (cfg_.dropout_drop_prob > 0) {
            masks = model::make_dropout_masks(rng, cfg_, params_.user_embeddings.rows(),
                                              params_.item_embeddings.rows(),
                                              static_cast<int>(user_adjs_.size()),
                                              static_cast<int>(item_adjs_.size()));
            masks_ptr = &masks;
        }
        auto fwd = model::build_forward(tape, params_, cfg_, user_adjs_, item_adjs_, masks_ptr);
        ad::Var loss = batch_loss(tape, fwd, batch, lambda);
        tape.backward(loss);
        collect_grads(tape, fwd, grads_out);
        return tape.value(loss)(0, 0);
    }

    std::pair<Mat, Mat> fused_embeddings() {
        ad::Tape tape;
        auto fwd = model::build_forward(tape, params_, cfg_, user_adjs_, item_adjs_);
        last_user_weights_.assign(tape.value(fwd.user_weights).data(),
                                  tape.value(fwd.user_weights).data() +
                                      tape.value(fwd.user_weights).size());
        last_item_weights_.assign(tape.value(fwd.item_weights).data(),
                                  tape.value(fwd.item_weights).data() +
                                      tape.value(fwd.item_weights).size());
        return {tape.value(fwd.e_user), tape.value(fwd.e_item)};
    }

    const std::vector<double>& user_fusion_weights() const { return last_user_weights_; }
    const std::vector<double>& item_fusion_weights() const { return last_item_weights_; }
    NodeIndex item_count() const { return static_cast<NodeIndex>(params_.item_embeddings.rows()); }

    // Exposed so the gradient checker can reuse the exact training objective
    // with externally frozen dropout masks.
    ad::Var batch_loss(ad::Tape& tape, const model::ForwardResult& fwd,
                       const std::vector<TrainingTriple>& batch, double lambda) {
        std::vector<std::int64_t> us, is, js;
        for (const auto& t : batch) {
            us.push_back(t.u);
            is.push_back(t.i);
            js.push_back(t.j);
        }
        ad::Var eu = tape.gather_rows(fwd.e_user, us);
        ad::Var pos = tape.row_dot(eu, tape.gather_rows(fwd.e_item, is));
        ad::Var neg = tape.row_dot(eu, tape.gather_rows(fwd.e_item, js));
        std::vector<ad::Var> leaves;
        for (auto& [name, v] : fwd.leaves.all) leaves.push_back(v);
        return bpr_loss(tape, pos, neg, leaves, lambda);
    }

    void collect_grads(ad::Tape& tape, const model::ForwardResult& fwd,
                       std::vector<Mat>& grads_out) {
        grads_out.clear();
        for (auto& [name, v] : fwd.leaves.all)
            grads_out.push_back(tape.has_grad(v)
                                    ? tape.grad(v)
                                    : Mat::Zero(tape.value(v).rows(), tape.value(v).cols()));
    }

  private:
    model::HgrecParams& params_;
    model::ModelConfig cfg_;
    std::vector<const graph::MetaPathAdjacency*> user_adjs_, item_adjs_;
    std::vector<double> last_user_weights_, last_item_weights_;
};

class BprMfBackend {
  public:
    explicit BprMfBackend(model::BprMfParams& params) : params_(params) {}

    std::vector<Mat*> tensors() {
        return {&params_.user_embeddings, &params_.item_embeddings};
    }

    double step(const std::vector<TrainingTriple>& batch, double lambda, Rng&,
                std::vector<Mat>& grads_out) {
        ad::Tape tape;
        ad::Var ue = tape.leaf(params_.user_embeddings);
        ad::Var ie = tape.leaf(params_.item_embeddings);
        std::vector<std::int64_t> us, is, js;
        for (const auto& t : batch) {
            us.push_back(t.u);
            is.push_back(t.i);
            js.push_back(t.j);
        }
        ad::Var eu = tape.gather_rows(ue, us);
        ad::Var pos = tape.row_dot(eu, tape.gather_rows(ie, is));
        ad::Var neg = tape.row_dot(eu, tape.gather_rows(ie, js));
        ad::Var loss = bpr_loss(tape, pos, neg, {ue, ie}, lambda);
        tape.backward(loss);
        grads_out = {tape.grad(ue), tape.grad(ie)};
        return tape.value(loss)(0, 0);
    }

    std::pair<Mat, Mat> fused_embeddings() {
        return {params_.user_embeddings, params_.item_embeddings};
    }

    const std::vector<double>& user_fusion_weights() const { return empty_; }
    const std::vector<double>& item_fusion_weights() const { return empty_; }
    NodeIndex item_count() const { return static_cast<NodeIndex>(params_.item_embeddings.rows()); }

  private:
    model::BprMfParams& params_;
    std::vector<double> empty_;
};

namespace detail {

inline std::string join_weights(const std::vector<double>& w) {
    if (w.empty()) return "-";
    std::ostringstream os;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) os << ',';
        os << w[i];
    }
    return os.str();
}

}  // namespace detail

// Epoch loop: sample |R+| triples per epoch in minibatches, Adam updates,
// periodic validation Recall@K with best-snapshot early stopping. The log
// stream gets one structured line per evaluation.
template <typename Backend>
TrainResult train(Backend& backend, const std::vector<std::vector<NodeIndex>>& train_positives,
                  const std::vector<std::vector<NodeIndex>>& val_positives,
                  const TrainOptions& opts, std::ostream* log = nullptr) {
    Rng rng(opts.seed);
    auto params = backend.tensors();
    OptimizerState adam;
    adam.lr = opts.lr;
    adam.init(params);

    std::size_t epoch_samples = 0;
    for (const auto& pos : train_positives) epoch_samples += pos.size();
    std::size_t batch = opts.batch_size == 0 ? epoch_samples : opts.batch_size;

    EarlyStopState stop;
    stop.patience = opts.patience;
    auto snapshot = [&] {
        std::vector<Mat> s;
        for (Mat* p : params) s.push_back(*p);
        return s;
    };
    auto restore = [&](const std::vector<Mat>& s) {
        for (std::size_t k = 0; k < params.size(); ++k) *params[k] = s[k];
    };
    stop.best_snapshot = snapshot();  // fall-back if training aborts immediately

    TrainResult result;
    auto t0 = std::chrono::steady_clock::now();
    double epoch_loss = 0;

    for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
        bool diverged = false;
        epoch_loss = 0;
        try {
            auto triples = sample_triples(train_positives, backend.item_count(), rng, epoch_samples);
            std::vector<Mat> grads;
            for (std::size_t at = 0; at < triples.size(); at += batch) {
                std::vector<TrainingTriple> chunk(
                    triples.begin() + at,
                    triples.begin() + std::min(triples.size(), at + batch));
                epoch_loss += backend.step(chunk, opts.lambda, rng, grads);
                adam_step(params, grads, adam);
            }
        } catch (const NumericError&) {
            diverged = true;
        }
        result.epochs_run = epoch;
        if (diverged || std::isnan(epoch_loss)) {
            result.diverged = true;
            if (log) *log << "epoch=" << epoch << " status=diverged restoring_best=1\n";
            break;
        }
        result.final_loss = epoch_loss;

        if (epoch % opts.eval_every == 0 || epoch == opts.max_epochs) {
            auto [eu, ei] = backend.fused_embeddings();
            auto report = eval::evaluate_all(eu, ei, train_positives, val_positives, opts.k);
            auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
            if (log)
                *log << "epoch=" << epoch << " loss=" << epoch_loss
                     << " val_recall@" << opts.k << "=" << report.recall
                     << " val_ndcg@" << opts.k << "=" << report.ndcg << " ms=" << ms
                     << " fusion_user=" << detail::join_weights(backend.user_fusion_weights())
                     << " fusion_item=" << detail::join_weights(backend.item_fusion_weights())
                     << "\n";
            if (report.recall > stop.best_metric) {
                stop.best_metric = report.recall;
                stop.best_epoch = epoch;
                stop.best_snapshot = snapshot();
                stop.epochs_since_improvement = 0;
                result.best_recall = report.recall;
                result.best_ndcg = report.ndcg;
            } else {
                stop.epochs_since_improvement += opts.eval_every;
                if (stop.epochs_since_improvement > stop.patience) break;
            }
        }
    }

    restore(stop.best_snapshot);
    result.best_params = stop.best_snapshot;
    result.best_epoch = stop.best_epoch;
    auto [eu, ei] = backend.fused_embeddings();  // refresh logged fusion weights
    (void)eu;
    (void)ei;
    result.user_fusion_weights = backend.user_fusion_weights();
    result.item_fusion_weights = backend.item_fusion_weights();
    return result;
}

}  // namespace hgrec::training
