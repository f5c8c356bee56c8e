#pragma once

// Shared test utilities: independent straight-line reference implementations
// of the model equations, used as oracles against the tape-built forward.

#include <vector>

#include "hgrec/graph.hpp"
#include "hgrec/model.hpp"

namespace testsupport {

using hgrec::Mat;
using hgrec::Rng;
using hgrec::Vec;
using hgrec::graph::MetaPathAdjacency;

inline Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = hgrec::uniform_real(rng, -scale, scale);
    return m;
}

inline MetaPathAdjacency make_adjacency(
    const std::vector<std::pair<hgrec::graph::NodeIndex, hgrec::graph::NodeIndex>>& edges,
    hgrec::graph::NodeIndex rows, hgrec::graph::NodeIndex cols, const std::string& name = "adj") {
    MetaPathAdjacency adj;
    adj.meta_path.name = name;
    adj.adjacency = hgrec::graph::build_csr(edges, rows, cols);
    adj.finalize();
    return adj;
}

inline MetaPathAdjacency random_square_adjacency(Rng& rng, hgrec::graph::NodeIndex n,
                                                 int edges_per_node) {
    std::vector<std::pair<hgrec::graph::NodeIndex, hgrec::graph::NodeIndex>> edges;
    for (hgrec::graph::NodeIndex u = 0; u < n; ++u)
        for (int e = 0; e < edges_per_node; ++e)
            edges.push_back({u, static_cast<hgrec::graph::NodeIndex>(hgrec::uniform_int(rng, 0, n - 1))});
    return make_adjacency(edges, n, n);
}

// Naive per-node transcription of the first-order aggregation: for each u,
// W1 e_u + sum_k (W1 e_k + W2 (e_k . e_u)) computed with explicit
// matrix-vector products over column vectors.
inline Mat reference_first_order(const Mat& e_prev, const MetaPathAdjacency& adj, const Mat& w1,
                                 const Mat& w2) {
    Mat out(e_prev.rows(), e_prev.cols());
    for (Eigen::Index u = 0; u < e_prev.rows(); ++u) {
        Vec eu = e_prev.row(u).transpose();
        Vec acc = w1 * eu;
        for (auto k : adj.adjacency.row(static_cast<hgrec::graph::NodeIndex>(u))) {
            Vec ek = e_prev.row(k).transpose();
            acc += w1 * ek + w2 * Vec(ek.array() * eu.array());
        }
        out.row(u) = acc.transpose();
    }
    return out;
}

struct ReferenceSideResult {
    std::vector<Mat> semantic;   // per meta-path, N x d*L
    std::vector<double> alphas;  // pre-softmax fusion scores
    std::vector<double> weights; // softmax weights
    Mat fused;
};

// Straight-line transcription of the layer stack, concatenation, fusion
// attention, softmax and weighted fusion for one side.
inline ReferenceSideResult reference_side(const Mat& e0,
                                          const std::vector<const MetaPathAdjacency*>& adjs,
                                          const std::vector<std::vector<Mat>>& w1,
                                          const std::vector<std::vector<Mat>>& w2,
                                          const Mat& fusion_w, const Mat& fusion_b,
                                          const Mat& fusion_q, bool uniform_ablation = false) {
    ReferenceSideResult r;
    std::size_t k_count = adjs.size();
    std::size_t layers = w1[0].size();
    for (std::size_t k = 0; k < k_count; ++k) {
        Mat e = e0;
        Mat concat(e0.rows(), static_cast<Eigen::Index>(layers) * e0.cols());
        for (std::size_t l = 0; l < layers; ++l) {
            e = reference_first_order(e, *adjs[k], w1[k][l], w2[k][l]);
            concat.middleCols(static_cast<Eigen::Index>(l) * e0.cols(), e0.cols()) = e;
        }
        r.semantic.push_back(concat);
    }
    for (std::size_t k = 0; k < k_count; ++k) {
        double alpha = 0;
        const Mat& ek = r.semantic[k];
        for (Eigen::Index i = 0; i < ek.rows(); ++i) {
            Vec h = (fusion_w * ek.row(i).transpose() + fusion_b.transpose()).array().tanh();
            alpha += fusion_q.col(0).dot(h);
        }
        r.alphas.push_back(alpha / static_cast<double>(ek.rows()));
    }
    double denom = 0;
    double mx = *std::max_element(r.alphas.begin(), r.alphas.end());
    for (double a : r.alphas) denom += std::exp(a - mx);
    for (double a : r.alphas)
        r.weights.push_back(uniform_ablation ? 1.0 / static_cast<double>(k_count)
                                             : std::exp(a - mx) / denom);
    r.fused = Mat::Zero(e0.rows(), r.semantic[0].cols());
    for (std::size_t k = 0; k < k_count; ++k) r.fused += r.weights[k] * r.semantic[k];
    return r;
}

// Brute-force metric oracle, independent of hgrec::eval: full sort of all
// candidates, metrics by direct definition.
struct OracleMetrics {
    double precision = 0, recall = 0, ndcg = 0, hr = 0;
    std::vector<hgrec::graph::NodeIndex> topk;
};

inline OracleMetrics oracle_metrics(const Mat& e_user, const Mat& e_item,
                                    hgrec::graph::NodeIndex u,
                                    const std::vector<hgrec::graph::NodeIndex>& exclusions,
                                    const std::vector<hgrec::graph::NodeIndex>& relevant, int k) {
    using NodeIndex = hgrec::graph::NodeIndex;
    std::vector<std::pair<double, NodeIndex>> scored;
    for (NodeIndex i = 0; i < e_item.rows(); ++i) {
        bool skip = false;
        for (NodeIndex x : exclusions)
            if (x == i) skip = true;
        if (!skip) scored.push_back({e_user.row(u).dot(e_item.row(i)), i});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    OracleMetrics m;
    int hits = 0;
    double dcg = 0;
    for (int r = 0; r < k && r < static_cast<int>(scored.size()); ++r) {
        m.topk.push_back(scored[r].second);
        bool rel = false;
        for (NodeIndex x : relevant)
            if (x == scored[r].second) rel = true;
        if (rel) {
            hits++;
            dcg += 1.0 / std::log2(r + 2.0);
        }
    }
    double idcg = 0;
    for (int r = 0; r < k && r < static_cast<int>(relevant.size()); ++r)
        idcg += 1.0 / std::log2(r + 2.0);
    m.precision = static_cast<double>(hits) / k;
    m.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
    m.hr = hits >= 1 ? 1.0 : 0.0;
    m.ndcg = idcg > 0 ? dcg / idcg : 0.0;
    return m;
}

}  // namespace testsupport
