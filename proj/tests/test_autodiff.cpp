#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "hgrec/autodiff.hpp"

using namespace hgrec;
using namespace hgrec::ad;

namespace {

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uniform_real(rng, -scale, scale);
    return m;
}

// Runs finite_diff_check for an objective built from one primitive under a
// random linear functional, so every entry of the output gets exercised.
double primitive_grad_error(Rng& rng,
                            const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                            std::vector<Mat> inputs) {
    Mat probe;  // fixed random weighting of the output, captured lazily
    std::vector<Mat*> params;
    for (auto& m : inputs) params.push_back(&m);
    auto f = [&](bool want_grads, std::vector<Mat>* grads) {
        Tape tape;
        std::vector<Var> leaves;
        for (auto& m : inputs) leaves.push_back(tape.leaf(m));
        Var out = build(tape, leaves);
        if (probe.size() == 0) probe = random_mat(rng, tape.value(out).rows(), tape.value(out).cols());
        Var loss = tape.reduce_sum(tape.elementwise_mul(out, tape.constant(probe)));
        if (want_grads) {
            tape.backward(loss);
            grads->clear();
            for (std::size_t i = 0; i < leaves.size(); ++i)
                grads->push_back(tape.has_grad(leaves[i])
                                     ? tape.grad(leaves[i])
                                     : Mat::Zero(inputs[i].rows(), inputs[i].cols()));
        }
        return tape.value(loss)(0, 0);
    };
    auto report = finite_diff_check(f, params, 1e-6, 400, rng);
    return report.max_rel_err;
}

}  // namespace

TEST_CASE("elementwise_mul forward") {
    Tape t;
    Mat a(1, 2), b(1, 2);
    a << 1, 2;
    b << 3, 4;
    Var y = t.elementwise_mul(t.leaf(a), t.leaf(b));
    REQUIRE(t.value(y)(0, 0) == 3);
    REQUIRE(t.value(y)(0, 1) == 8);
}

TEST_CASE("softmax of zeros is uniform") {
    Tape t;
    Var y = t.softmax_vec(t.constant(Mat::Zero(1, 2)));
    REQUIRE(t.value(y)(0, 0) == Catch::Approx(0.5));
    REQUIRE(t.value(y)(0, 1) == Catch::Approx(0.5));
}

TEST_CASE("gather with repeated index accumulates gradient") {
    Tape t;
    Mat m = Mat::Ones(3, 2);
    Var leaf = t.leaf(m);
    Var g = t.gather_rows(leaf, {1, 1});
    Var loss = t.reduce_sum(g);
    t.backward(loss);
    REQUIRE(t.grad(leaf).row(1).isApprox(Mat::Constant(1, 2, 2.0).row(0)));
    REQUIRE(t.grad(leaf).row(0).isZero());
}

TEST_CASE("l2_squared gradient is 2x") {
    Tape t;
    Mat x(1, 1);
    x << 3;
    Var leaf = t.leaf(x);
    Var loss = t.l2_squared(leaf);
    t.backward(loss);
    REQUIRE(t.value(loss)(0, 0) == 9);
    REQUIRE(t.grad(leaf)(0, 0) == 6);
}

TEST_CASE("row_dot gradient is bilinear") {
    Tape t;
    Mat a(1, 2), b(1, 2);
    a << 1, 2;
    b << 3, 4;
    Var la = t.leaf(a), lb = t.leaf(b);
    Var loss = t.reduce_sum(t.row_dot(la, lb));
    t.backward(loss);
    REQUIRE(t.value(loss)(0, 0) == 11);
    REQUIRE(t.grad(la).isApprox(b));
    REQUIRE(t.grad(lb).isApprox(a));
}

TEST_CASE("backward requires a scalar loss") {
    Tape t;
    Var v = t.leaf(Mat::Ones(2, 2));
    REQUIRE_THROWS_AS(t.backward(v), ConfigError);
}

TEST_CASE("non-finite forward values raise") {
    Tape t;
    Mat big = Mat::Constant(1, 1, 1e308);
    REQUIRE_THROWS_AS(t.add(t.leaf(big), t.leaf(big)), NumericError);
}

TEST_CASE("shape mismatches identify the primitive") {
    Tape t;
    Var a = t.leaf(Mat::Ones(2, 3));
    Var b = t.leaf(Mat::Ones(2, 2));
    REQUIRE_THROWS_WITH(t.add(a, b), Catch::Matchers::ContainsSubstring("add"));
    REQUIRE_THROWS_WITH(t.matmul(a, a), Catch::Matchers::ContainsSubstring("matmul"));
}

TEST_CASE("every primitive passes finite-difference checks on random shapes") {
    Rng rng(42);
    auto shape = [&] { return static_cast<Eigen::Index>(uniform_int(rng, 1, 6)); };
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::Index n = shape(), m = shape(), k = shape();

        double err = primitive_grad_error(
            rng, [](Tape& t, const std::vector<Var>& v) { return t.matmul(v[0], v[1]); },
            {random_mat(rng, n, m), random_mat(rng, m, k)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng, [](Tape& t, const std::vector<Var>& v) { return t.matmul_nt(v[0], v[1]); },
            {random_mat(rng, n, m), random_mat(rng, k, m)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng, [](Tape& t, const std::vector<Var>& v) { return t.elementwise_mul(v[0], v[1]); },
            {random_mat(rng, n, m), random_mat(rng, n, m)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng,
            [](Tape& t, const std::vector<Var>& v) {
                return t.concat_cols({v[0], v[1]});
            },
            {random_mat(rng, n, m), random_mat(rng, n, k)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng, [](Tape& t, const std::vector<Var>& v) { return t.tanh_(v[0]); },
            {random_mat(rng, n, m)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng, [](Tape& t, const std::vector<Var>& v) { return t.sigmoid_(v[0]); },
            {random_mat(rng, n, m)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng, [](Tape& t, const std::vector<Var>& v) { return t.softplus_(v[0]); },
            {random_mat(rng, n, m)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng, [](Tape& t, const std::vector<Var>& v) { return t.softmax_vec(v[0]); },
            {random_mat(rng, 1, m)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng, [](Tape& t, const std::vector<Var>& v) { return t.row_dot(v[0], v[1]); },
            {random_mat(rng, n, m), random_mat(rng, n, m)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng, [](Tape& t, const std::vector<Var>& v) { return t.reduce_mean_rows(v[0]); },
            {random_mat(rng, n, m)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng, [](Tape& t, const std::vector<Var>& v) { return t.l2_squared(v[0]); },
            {random_mat(rng, n, m)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng, [](Tape& t, const std::vector<Var>& v) { return t.add_rowvec(v[0], v[1]); },
            {random_mat(rng, n, m), random_mat(rng, 1, m)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng, [](Tape& t, const std::vector<Var>& v) { return t.leaky_relu(v[0], 0.2); },
            {random_mat(rng, n, m) .array().abs().matrix() + Mat::Constant(n, m, 0.05)});
        REQUIRE(err <= 1e-5);

        std::vector<std::int64_t> idx;
        for (int i = 0; i < 2 * n; ++i) idx.push_back(uniform_int(rng, 0, n - 1));
        err = primitive_grad_error(
            rng, [idx](Tape& t, const std::vector<Var>& v) { return t.gather_rows(v[0], idx); },
            {random_mat(rng, n, m)});
        REQUIRE(err <= 1e-5);

        std::vector<std::int64_t> groups;
        for (int i = 0; i < n; ++i) groups.push_back(uniform_int(rng, 0, k - 1));
        err = primitive_grad_error(
            rng,
            [groups, k](Tape& t, const std::vector<Var>& v) {
                return t.scatter_sum_rows(v[0], groups, k);
            },
            {random_mat(rng, n, m)});
        REQUIRE(err <= 1e-5);

        Mat mask = random_mat(rng, n, m).unaryExpr([](double x) { return x > -0.2 ? 1.0 : 0.0; });
        err = primitive_grad_error(
            rng,
            [mask](Tape& t, const std::vector<Var>& v) { return t.dropout(v[0], mask, 0.8); },
            {random_mat(rng, n, m)});
        REQUIRE(err <= 1e-5);

        err = primitive_grad_error(
            rng,
            [](Tape& t, const std::vector<Var>& v) {
                return t.blend({v[0], v[1]}, t.softmax_vec(v[2]));
            },
            {random_mat(rng, n, m), random_mat(rng, n, m), random_mat(rng, 1, 2)});
        REQUIRE(err <= 1e-5);
    }
}

TEST_CASE("neighbor_sum matches gather/scatter and passes gradient checks") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        graph::NodeIndex rows = static_cast<graph::NodeIndex>(uniform_int(rng, 2, 8));
        graph::NodeIndex cols = static_cast<graph::NodeIndex>(uniform_int(rng, 2, 8));
        std::vector<std::pair<graph::NodeIndex, graph::NodeIndex>> edges;
        for (int e = 0; e < rows * 2; ++e)
            edges.push_back({static_cast<graph::NodeIndex>(uniform_int(rng, 0, rows - 1)),
                             static_cast<graph::NodeIndex>(uniform_int(rng, 0, cols - 1))});
        graph::MetaPathAdjacency adj;
        adj.adjacency = graph::build_csr(edges, rows, cols);
        adj.finalize();

        Mat x = random_mat(rng, cols, 3);
        // flattened edge plan equivalent
        std::vector<std::int64_t> srcs, dsts;
        for (graph::NodeIndex u = 0; u < rows; ++u)
            for (auto k : adj.adjacency.row(u)) {
                srcs.push_back(k);
                dsts.push_back(u);
            }
        Tape t;
        Var leaf = t.leaf(x);
        Var fused = t.neighbor_sum(leaf, &adj);
        Mat via_plan;
        if (srcs.empty()) {
            via_plan = Mat::Zero(rows, 3);
        } else {
            Var plan = t.scatter_sum_rows(t.gather_rows(leaf, srcs), dsts, rows);
            via_plan = t.value(plan);
        }
        REQUIRE(t.value(fused).isApprox(via_plan, 1e-14));

        for (bool normalize : {false, true}) {
            double err = primitive_grad_error(
                rng,
                [&adj, normalize](Tape& tp, const std::vector<Var>& v) {
                    return tp.neighbor_sum(v[0], &adj, normalize);
                },
                {x});
            REQUIRE(err <= 1e-5);
        }
    }
}

TEST_CASE("backward is linear in the upstream gradient") {
    Rng rng(5);
    Mat a = random_mat(rng, 3, 4), b = random_mat(rng, 4, 2);
    auto run = [&](double factor) {
        Tape t;
        Var la = t.leaf(a), lb = t.leaf(b);
        Var loss = t.scale(t.l2_squared(t.tanh_(t.matmul(la, lb))), factor);
        t.backward(loss);
        return std::pair<Mat, Mat>(t.grad(la), t.grad(lb));
    };
    auto [ga1, gb1] = run(1.0);
    auto [ga2, gb2] = run(2.0);
    REQUIRE((2.0 * ga1).isApprox(ga2, 1e-14));
    REQUIRE((2.0 * gb1).isApprox(gb2, 1e-14));
}

TEST_CASE("scatter of gathered rows with singleton groups round-trips") {
    Rng rng(6);
    Mat x = random_mat(rng, 5, 3);
    Tape t;
    Var leaf = t.leaf(x);
    std::vector<std::int64_t> perm{4, 2, 0, 1, 3};
    std::vector<std::int64_t> inverse(5);
    for (std::int64_t i = 0; i < 5; ++i) inverse[perm[i]] = i;
    Var round = t.scatter_sum_rows(t.gather_rows(leaf, perm), perm, 5);
    REQUIRE(t.value(round).isApprox(x, 1e-15));
}

TEST_CASE("finite_diff_check is exact for quadratics") {
    Rng rng(3);
    Mat x = random_mat(rng, 1, 3);
    std::vector<Mat*> params{&x};
    auto f = [&](bool want, std::vector<Mat>* grads) {
        double v = 2 * x(0, 0) * x(0, 0) + x(0, 1) * x(0, 1) + 0.5 * x(0, 2) * x(0, 2) +
                   x(0, 0) * x(0, 1);
        if (want) {
            Mat g(1, 3);
            g << 4 * x(0, 0) + x(0, 1), 2 * x(0, 1) + x(0, 0), x(0, 2);
            *grads = {g};
        }
        return v;
    };
    auto report = finite_diff_check(f, params, 1e-4, 200, rng);
    REQUIRE(report.coords_checked == 3);
    REQUIRE(report.max_rel_err <= 1e-9);
}

TEST_CASE("finite_diff_check on a tanh chain of depth 3") {
    Rng rng(8);
    Mat x = random_mat(rng, 2, 3);
    Mat w1 = random_mat(rng, 3, 3), w2 = random_mat(rng, 3, 3);
    std::vector<Mat*> params{&x, &w1, &w2};
    auto f = [&](bool want, std::vector<Mat>* grads) {
        Tape t;
        Var lx = t.leaf(x), lw1 = t.leaf(w1), lw2 = t.leaf(w2);
        Var h = t.tanh_(t.matmul(t.tanh_(t.matmul(t.tanh_(lx), lw1)), lw2));
        Var loss = t.l2_squared(h);
        if (want) {
            t.backward(loss);
            *grads = {t.grad(lx), t.grad(lw1), t.grad(lw2)};
        }
        return t.value(loss)(0, 0);
    };
    auto report = finite_diff_check(f, params, 1e-6, 200, rng);
    REQUIRE(report.max_rel_err <= 1e-6);
}

TEST_CASE("finite_diff_check rejects non-deterministic objectives") {
    Rng rng(4);
    Mat x = Mat::Ones(1, 2);
    std::vector<Mat*> params{&x};
    int calls = 0;
    auto f = [&](bool, std::vector<Mat>* grads) {
        if (grads) *grads = {Mat::Zero(1, 2)};
        return static_cast<double>(calls++);
    };
    REQUIRE_THROWS_AS(finite_diff_check(f, params, 1e-6, 10, rng), NumericError);
}
