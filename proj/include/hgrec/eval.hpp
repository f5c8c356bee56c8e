#pragma once

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <thread>
#include <vector>

#include "hgrec/common.hpp"
#include "hgrec/graph.hpp"

namespace hgrec::eval {

using graph::NodeIndex;

struct RankedList {
    NodeIndex user = 0;
    std::vector<NodeIndex> items;  // descending score, ties by ascending id
};

// Deterministic top-K by (score desc, item id asc); exclusions (the user's
// training positives) never appear.
inline RankedList rank_items(const Mat& e_user, const Mat& e_item, NodeIndex u,
                             const std::vector<NodeIndex>& exclusions, int k) {
    if (k <= 0) throw ConfigError("rank_items: K must be positive");
    if (u < 0 || u >= e_user.rows()) throw DataError("rank_items: user out of range");
    Vec scores = e_item * e_user.row(u).transpose();

    std::vector<char> excluded(static_cast<std::size_t>(e_item.rows()), 0);
    for (NodeIndex x : exclusions) excluded[x] = 1;

    std::vector<NodeIndex> candidates;
    candidates.reserve(e_item.rows());
    for (NodeIndex i = 0; i < e_item.rows(); ++i)
        if (!excluded[i]) candidates.push_back(i);

    auto better = [&](NodeIndex a, NodeIndex b) {
        if (scores(a) != scores(b)) return scores(a) > scores(b);
        return a < b;
    };
    auto take = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end(), better);
    candidates.resize(take);
    return RankedList{u, std::move(candidates)};
}

inline int count_hits(const RankedList& ranked, const std::vector<NodeIndex>& relevant) {
    int hits = 0;
    for (NodeIndex i : ranked.items)
        if (std::binary_search(relevant.begin(), relevant.end(), i)) hits++;
    return hits;
}

// relevant must be sorted ascending and nonempty.
inline double precision_at_k(const RankedList& ranked, const std::vector<NodeIndex>& relevant,
                             int k) {
    return static_cast<double>(count_hits(ranked, relevant)) / static_cast<double>(k);
}

inline double recall_at_k(const RankedList& ranked, const std::vector<NodeIndex>& relevant) {
    return static_cast<double>(count_hits(ranked, relevant)) /
           static_cast<double>(relevant.size());
}

inline double hr_at_k(const RankedList& ranked, const std::vector<NodeIndex>& relevant) {
    return count_hits(ranked, relevant) >= 1 ? 1.0 : 0.0;
}

// Binary gains: DCG = sum over hit ranks r (1-based) of 1/log2(r+1),
// IDCG over min(K, |relevant|) ideal positions.
inline double ndcg_at_k(const RankedList& ranked, const std::vector<NodeIndex>& relevant, int k) {
    double dcg = 0;
    for (std::size_t r = 0; r < ranked.items.size(); ++r)
        if (std::binary_search(relevant.begin(), relevant.end(), ranked.items[r]))
            dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    double idcg = 0;
    auto ideal = std::min<std::size_t>(static_cast<std::size_t>(k), relevant.size());
    for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    return dcg / idcg;
}

struct MetricsReport {
    double precision = 0, recall = 0, ndcg = 0, hr = 0;
    int user_count = 0;  // users with nonempty test sets
    int k = 10;
};

namespace detail {

// Kahan accumulator so the report is independent of reduction order.
struct Compensated {
    double sum = 0, c = 0;
    void add(double x) {
        double y = x - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

struct Partial {
    Compensated precision, recall, ndcg, hr;
    int users = 0;
};

inline int thread_budget() {
    if (const char* env = std::getenv("HGREC_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

}  // namespace detail

// Per-user full ranking over all items excluding train positives, then mean
// metrics over users with nonempty test sets.
inline MetricsReport evaluate_all(const Mat& e_user, const Mat& e_item,
                                  const std::vector<std::vector<NodeIndex>>& train_positives,
                                  const std::vector<std::vector<NodeIndex>>& test_positives,
                                  int k) {
    if (k <= 0) throw ConfigError("evaluate_all: K must be positive");
    auto n_users = static_cast<std::size_t>(e_user.rows());

    int nthreads = std::min<int>(detail::thread_budget(), static_cast<int>(n_users));
    std::vector<detail::Partial> partials(std::max(nthreads, 1));

    auto worker = [&](int tid, std::size_t lo, std::size_t hi) {
        auto& p = partials[tid];
        for (std::size_t u = lo; u < hi; ++u) {
            const auto& relevant = test_positives[u];
            if (relevant.empty()) continue;
            RankedList ranked = rank_items(e_user, e_item, static_cast<NodeIndex>(u),
                                           train_positives[u], k);
            p.precision.add(precision_at_k(ranked, relevant, k));
            p.recall.add(recall_at_k(ranked, relevant));
            p.ndcg.add(ndcg_at_k(ranked, relevant, k));
            p.hr.add(hr_at_k(ranked, relevant));
            p.users++;
        }
    };

    if (nthreads <= 1) {
        worker(0, 0, n_users);
    } else {
        std::vector<std::thread> threads;
        std::size_t chunk = (n_users + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t)
            threads.emplace_back(worker, t, std::min(n_users, t * chunk),
                                 std::min(n_users, (t + 1) * chunk));
        for (auto& th : threads) th.join();
    }

    detail::Compensated precision, recall, ndcg, hr;
    int users = 0;
    for (const auto& p : partials) {
        precision.add(p.precision.sum);
        recall.add(p.recall.sum);
        ndcg.add(p.ndcg.sum);
        hr.add(p.hr.sum);
        users += p.users;
    }

    MetricsReport report;
    report.k = k;
    report.user_count = users;
    if (users > 0) {
        report.precision = precision.sum / users;
        report.recall = recall.sum / users;
        report.ndcg = ndcg.sum / users;
        report.hr = hr.sum / users;
    }
    return report;
}

}  // namespace hgrec::eval
