#include <catch2/catch_amalgamated.hpp>

#include "hgrec/eval.hpp"
#include "support.hpp"

using namespace hgrec;
using namespace hgrec::eval;
using graph::NodeIndex;
using testsupport::random_mat;

namespace {

// one-column embeddings let us dictate the score of every item directly
std::pair<Mat, Mat> score_fixture(const std::vector<double>& scores) {
    Mat eu = Mat::Ones(1, 1);
    Mat ei(static_cast<Eigen::Index>(scores.size()), 1);
    for (std::size_t i = 0; i < scores.size(); ++i) ei(static_cast<Eigen::Index>(i), 0) = scores[i];
    return {eu, ei};
}

}  // namespace

TEST_CASE("rank_items orders by score then id") {
    auto [eu, ei] = score_fixture({0.1, 0.9, 0.5});
    REQUIRE(rank_items(eu, ei, 0, {}, 2).items == std::vector<NodeIndex>{1, 2});

    auto [eu2, ei2] = score_fixture({0.5, 0.5, 0.5});
    REQUIRE(rank_items(eu2, ei2, 0, {}, 2).items == std::vector<NodeIndex>{0, 1});

    REQUIRE(rank_items(eu, ei, 0, {1}, 2).items == std::vector<NodeIndex>{2, 0});

    REQUIRE_THROWS_AS(rank_items(eu, ei, 0, {}, 0), ConfigError);
}

TEST_CASE("metric formulas on pinned ranked lists") {
    std::vector<NodeIndex> relevant{5};

    RankedList first_place{0, {5, 1, 2, 3, 4, 6, 7, 8, 9, 10}};
    REQUIRE(precision_at_k(first_place, relevant, 10) == Catch::Approx(0.1));
    REQUIRE(recall_at_k(first_place, relevant) == 1.0);
    REQUIRE(hr_at_k(first_place, relevant) == 1.0);
    REQUIRE(ndcg_at_k(first_place, relevant, 10) == 1.0);

    RankedList third_place{0, {1, 2, 5}};
    REQUIRE(ndcg_at_k(third_place, relevant, 10) == Catch::Approx(1.0 / std::log2(4.0)));
    REQUIRE(ndcg_at_k(third_place, relevant, 10) == Catch::Approx(0.5));

    RankedList miss{0, {1, 2, 3}};
    REQUIRE(precision_at_k(miss, relevant, 10) == 0.0);
    REQUIRE(recall_at_k(miss, relevant) == 0.0);
    REQUIRE(hr_at_k(miss, relevant) == 0.0);
    REQUIRE(ndcg_at_k(miss, relevant, 10) == 0.0);
}

TEST_CASE("perfect one-hot embeddings give full recall") {
    int n = 6;
    Mat ei = Mat::Identity(n, n);
    Mat eu = Mat::Zero(2, n);
    eu(0, 2) = 1;  // user 0's test item is 2
    eu(1, 4) = 1;
    std::vector<std::vector<NodeIndex>> train(2), test(2);
    test[0] = {2};
    test[1] = {4};
    auto report = evaluate_all(eu, ei, train, test, 3);
    REQUIRE(report.recall == 1.0);
    REQUIRE(report.hr == 1.0);
    REQUIRE(report.user_count == 2);
}

TEST_CASE("users with empty test sets are excluded from the means") {
    auto [eu0, ei] = score_fixture({1.0, 0.5});
    Mat eu(3, 1);
    eu << 1, 1, 1;
    std::vector<std::vector<NodeIndex>> train(3), test(3);
    test[1] = {0};
    auto report = evaluate_all(eu, ei, train, test, 1);
    REQUIRE(report.user_count == 1);
    REQUIRE(report.recall == 1.0);
}

TEST_CASE("evaluate_all matches the brute-force oracle on 100 random instances") {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        auto n_users = static_cast<NodeIndex>(uniform_int(rng, 1, 30));
        auto n_items = static_cast<NodeIndex>(uniform_int(rng, 2, 40));
        int k = static_cast<int>(uniform_int(rng, 1, 12));
        int d = static_cast<int>(uniform_int(rng, 1, 6));
        Mat eu = random_mat(rng, n_users, d);
        Mat ei = random_mat(rng, n_items, d);

        std::vector<std::vector<NodeIndex>> train(n_users), test(n_users);
        for (NodeIndex u = 0; u < n_users; ++u) {
            for (NodeIndex i = 0; i < n_items; ++i) {
                auto r = uniform_int(rng, 0, 9);
                if (r < 2) train[u].push_back(i);
                else if (r < 4) test[u].push_back(i);
            }
            if (static_cast<NodeIndex>(train[u].size()) == n_items) train[u].pop_back();
        }

        double sp = 0, sr = 0, sn = 0, sh = 0;
        int users = 0;
        for (NodeIndex u = 0; u < n_users; ++u) {
            if (test[u].empty()) continue;
            auto om = testsupport::oracle_metrics(eu, ei, u, train[u], test[u], k);
            auto ranked = rank_items(eu, ei, u, train[u], k);
            REQUIRE(ranked.items == om.topk);
            REQUIRE(precision_at_k(ranked, test[u], k) == om.precision);
            REQUIRE(recall_at_k(ranked, test[u]) == om.recall);
            REQUIRE(ndcg_at_k(ranked, test[u], k) == om.ndcg);
            REQUIRE(hr_at_k(ranked, test[u]) == om.hr);
            sp += om.precision;
            sr += om.recall;
            sn += om.ndcg;
            sh += om.hr;
            users++;
        }
        auto report = evaluate_all(eu, ei, train, test, k);
        REQUIRE(report.user_count == users);
        if (users > 0) {
            REQUIRE(report.precision == Catch::Approx(sp / users).margin(1e-15));
            REQUIRE(report.recall == Catch::Approx(sr / users).margin(1e-15));
            REQUIRE(report.ndcg == Catch::Approx(sn / users).margin(1e-15));
            REQUIRE(report.hr == Catch::Approx(sh / users).margin(1e-15));
        }
    }
}

TEST_CASE("adding a hit never decreases any metric") {
    Rng rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        int k = 5;
        std::vector<NodeIndex> relevant{1, 7, 9};
        // ranked list without item 9, then with item 9 replacing a non-hit
        RankedList base{0, {3, 1, 4, 6, 8}};
        RankedList with_hit{0, {3, 1, 4, 9, 8}};
        REQUIRE(precision_at_k(with_hit, relevant, k) >= precision_at_k(base, relevant, k));
        REQUIRE(recall_at_k(with_hit, relevant) >= recall_at_k(base, relevant));
        REQUIRE(ndcg_at_k(with_hit, relevant, k) >= ndcg_at_k(base, relevant, k));
        REQUIRE(hr_at_k(with_hit, relevant) >= hr_at_k(base, relevant));
        (void)rng;
        break;
    }
}

TEST_CASE("all metrics stay in [0,1]") {
    Rng rng(66);
    Mat eu = random_mat(rng, 10, 3);
    Mat ei = random_mat(rng, 20, 3);
    std::vector<std::vector<NodeIndex>> train(10), test(10);
    for (int u = 0; u < 10; ++u)
        for (NodeIndex i = 0; i < 20; ++i) {
            auto r = uniform_int(rng, 0, 4);
            if (r == 0) train[u].push_back(i);
            else if (r == 1) test[u].push_back(i);
        }
    auto report = evaluate_all(eu, ei, train, test, 10);
    for (double v : {report.precision, report.recall, report.ndcg, report.hr}) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }
}
