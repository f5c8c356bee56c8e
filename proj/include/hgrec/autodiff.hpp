#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "hgrec/common.hpp"
#include "hgrec/graph.hpp"

namespace hgrec::ad {

using hgrec::Mat;

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense 64-bit matrices. One tape per forward pass;
// nodes are appended in topological order, backward walks them in reverse.
class Tape {
  public:
    bool check_finite = true;

    Var leaf(Mat value) { return push(std::move(value), {}, nullptr, /*leaf=*/true, "leaf"); }
    Var constant(Mat value) { return push(std::move(value), {}, nullptr, /*leaf=*/false, "constant"); }

    const Mat& value(Var v) const { return nodes_[v.id].value; }
    const Mat& grad(Var v) const { return nodes_[v.id].grad; }
    bool has_grad(Var v) const { return nodes_[v.id].grad.size() > 0; }
    std::size_t size() const { return nodes_.size(); }

    Var add(Var a, Var b) {
        require_same_shape(a, b, "add");
        return push(value(a) + value(b), {a, b},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        t.accum(n.parents[0], n.grad);
                        t.accum(n.parents[1], n.grad);
                    },
                    false, "add");
    }

    Var sub(Var a, Var b) {
        require_same_shape(a, b, "sub");
        return push(value(a) - value(b), {a, b},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        t.accum(n.parents[0], n.grad);
                        t.accum(n.parents[1], -n.grad);
                    },
                    false, "sub");
    }

    Var scale(Var a, double c) {
        return push(value(a) * c, {a},
                    [c](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        t.accum(n.parents[0], c * n.grad);
                    },
                    false, "scale");
    }

    Var matmul(Var a, Var b) {
        const Mat& va = value(a);
        const Mat& vb = value(b);
        if (va.cols() != vb.rows())
            throw DimensionError("matmul: " + shape_str(va) + " x " + shape_str(vb));
        return push(va * vb, {a, b},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        t.accum(n.parents[0], n.grad * t.value(Var{n.parents[1]}).transpose());
                        t.accum(n.parents[1], t.value(Var{n.parents[0]}).transpose() * n.grad);
                    },
                    false, "matmul");
    }

    // A * B^T; used to apply a weight matrix to row-major embeddings.
    Var matmul_nt(Var a, Var b) {
        const Mat& va = value(a);
        const Mat& vb = value(b);
        if (va.cols() != vb.cols())
            throw DimensionError("matmul_nt: " + shape_str(va) + " x " + shape_str(vb) + "^T");
        return push(va * vb.transpose(), {a, b},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        t.accum(n.parents[0], n.grad * t.value(Var{n.parents[1]}));
                        t.accum(n.parents[1], n.grad.transpose() * t.value(Var{n.parents[0]}));
                    },
                    false, "matmul_nt");
    }

    Var elementwise_mul(Var a, Var b) {
        require_same_shape(a, b, "elementwise_mul");
        return push(value(a).cwiseProduct(value(b)), {a, b},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        t.accum(n.parents[0], n.grad.cwiseProduct(t.value(Var{n.parents[1]})));
                        t.accum(n.parents[1], n.grad.cwiseProduct(t.value(Var{n.parents[0]})));
                    },
                    false, "elementwise_mul");
    }

    Var concat_cols(const std::vector<Var>& parts) {
        if (parts.empty()) throw ConfigError("concat_cols: no inputs");
        Eigen::Index rows = value(parts[0]).rows();
        Eigen::Index cols = 0;
        for (Var p : parts) {
            if (value(p).rows() != rows)
                throw DimensionError("concat_cols: ragged row counts");
            cols += value(p).cols();
        }
        Mat out(rows, cols);
        Eigen::Index at = 0;
        std::vector<Eigen::Index> widths;
        for (Var p : parts) {
            Eigen::Index w = value(p).cols();
            out.middleCols(at, w) = value(p);
            widths.push_back(w);
            at += w;
        }
        return push(std::move(out), parts,
                    [widths](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        Eigen::Index at = 0;
                        for (std::size_t i = 0; i < n.parents.size(); ++i) {
                            t.accum(n.parents[i], n.grad.middleCols(at, widths[i]));
                            at += widths[i];
                        }
                    },
                    false, "concat_cols");
    }

    Var tanh_(Var a) {
        return push(value(a).array().tanh().matrix(), {a},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        Mat d = (1.0 - n.value.array().square()).matrix();
                        t.accum(n.parents[0], n.grad.cwiseProduct(d));
                    },
                    false, "tanh");
    }

    Var sigmoid_(Var a) {
        Mat y = value(a).unaryExpr([](double x) { return stable_sigmoid(x); });
        return push(std::move(y), {a},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        Mat d = (n.value.array() * (1.0 - n.value.array())).matrix();
                        t.accum(n.parents[0], n.grad.cwiseProduct(d));
                    },
                    false, "sigmoid");
    }

    // softplus(x) = ln(1 + e^x); -ln sigmoid(x) == softplus(-x).
    Var softplus_(Var a) {
        Mat y = value(a).unaryExpr([](double x) {
            return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        });
        return push(std::move(y), {a},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        Mat d = t.value(Var{n.parents[0]}).unaryExpr([](double x) { return stable_sigmoid(x); });
                        t.accum(n.parents[0], n.grad.cwiseProduct(d));
                    },
                    false, "softplus");
    }

    Var leaky_relu(Var a, double alpha) {
        Mat y = value(a).unaryExpr([alpha](double x) { return x > 0 ? x : alpha * x; });
        return push(std::move(y), {a},
                    [alpha](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        const Mat& x = t.value(Var{n.parents[0]});
                        Mat d = x.unaryExpr([alpha](double v) { return v > 0 ? 1.0 : alpha; });
                        t.accum(n.parents[0], n.grad.cwiseProduct(d));
                    },
                    false, "leaky_relu");
    }

    // Softmax over a 1 x K row vector. Backward uses the Jacobian-vector
    // form dx = y .* (dy - <dy, y>).
    Var softmax_vec(Var a) {
        const Mat& x = value(a);
        if (x.rows() != 1)
            throw DimensionError("softmax_vec: expected a 1xK row vector, got " + shape_str(x));
        double mx = x.maxCoeff();
        Mat e = (x.array() - mx).exp().matrix();
        Mat y = e / e.sum();
        return push(std::move(y), {a},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        double inner = (n.grad.array() * n.value.array()).sum();
                        Mat dx = (n.value.array() * (n.grad.array() - inner)).matrix();
                        t.accum(n.parents[0], dx);
                    },
                    false, "softmax_vec");
    }

    Var gather_rows(Var a, std::vector<std::int64_t> index_list) {
        const Mat& x = value(a);
        Mat y(static_cast<Eigen::Index>(index_list.size()), x.cols());
        for (std::size_t i = 0; i < index_list.size(); ++i) {
            auto r = index_list[i];
            if (r < 0 || r >= x.rows())
                throw DataError("gather_rows: index " + std::to_string(r) + " out of range");
            y.row(static_cast<Eigen::Index>(i)) = x.row(r);
        }
        return push(std::move(y), {a},
                    [idx = std::move(index_list)](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        Mat& g = t.grad_ref(n.parents[0]);
                        for (std::size_t i = 0; i < idx.size(); ++i)
                            g.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
                    },
                    false, "gather_rows");
    }

    // Row i of the input is added into output row grouping[i].
    Var scatter_sum_rows(Var a, std::vector<std::int64_t> grouping, std::int64_t out_rows) {
        const Mat& x = value(a);
        if (static_cast<std::int64_t>(grouping.size()) != x.rows())
            throw DimensionError("scatter_sum_rows: grouping size " + std::to_string(grouping.size()) +
                                 " vs " + std::to_string(x.rows()) + " rows");
        Mat y = Mat::Zero(out_rows, x.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            auto g = grouping[static_cast<std::size_t>(i)];
            if (g < 0 || g >= out_rows)
                throw DataError("scatter_sum_rows: group " + std::to_string(g) + " out of range");
            y.row(g) += x.row(i);
        }
        return push(std::move(y), {a},
                    [grp = std::move(grouping)](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        Mat& g = t.grad_ref(n.parents[0]);
                        for (std::size_t i = 0; i < grp.size(); ++i)
                            g.row(static_cast<Eigen::Index>(i)) += n.grad.row(grp[i]);
                    },
                    false, "scatter_sum_rows");
    }

    // Fused gather+scatter over a meta-path adjacency: out.row(u) = sum of
    // in.row(k) over k in N_u, optionally divided by |N_u|. The adjacency
    // must outlive the tape.
    Var neighbor_sum(Var a, const graph::MetaPathAdjacency* adj, bool normalize = false) {
        const Mat& x = value(a);
        const graph::Csr& m = adj->adjacency;
        if (x.rows() != m.cols)
            throw DimensionError("neighbor_sum: embedding rows " + std::to_string(x.rows()) +
                                 " vs adjacency terminals " + std::to_string(m.cols));
        Mat y = Mat::Zero(m.rows, x.cols());
        for (graph::NodeIndex u = 0; u < m.rows; ++u) {
            auto cells = m.row(u);
            if (cells.empty()) continue;
            auto row = y.row(u);
            for (auto k : cells) row += x.row(k);
            if (normalize) row /= static_cast<double>(cells.size());
        }
        return push(std::move(y), {a},
                    [adj, normalize](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        const graph::Csr& rev = adj->adjacency_reversed;
                        const graph::Csr& fwd = adj->adjacency;
                        Mat scaled;
                        const Mat* up = &n.grad;
                        if (normalize) {
                            scaled = n.grad;
                            for (graph::NodeIndex u = 0; u < fwd.rows; ++u) {
                                auto deg = fwd.row(u).size();
                                if (deg > 0) scaled.row(u) /= static_cast<double>(deg);
                            }
                            up = &scaled;
                        }
                        Mat& g = t.grad_ref(n.parents[0]);
                        for (graph::NodeIndex k = 0; k < rev.rows; ++k) {
                            auto row = g.row(k);
                            for (auto u : rev.row(k)) row += up->row(u);
                        }
                    },
                    false, "neighbor_sum");
    }

    Var reduce_mean_rows(Var a) {
        const Mat& x = value(a);
        if (x.rows() == 0) throw DimensionError("reduce_mean_rows: empty input");
        Mat y = x.colwise().mean();
        return push(std::move(y), {a},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        const Mat& x = t.value(Var{n.parents[0]});
                        double inv = 1.0 / static_cast<double>(x.rows());
                        Mat d = Mat::Ones(x.rows(), 1) * (inv * n.grad);
                        t.accum(n.parents[0], d);
                    },
                    false, "reduce_mean_rows");
    }

    Var reduce_sum(Var a) {
        Mat y(1, 1);
        y(0, 0) = value(a).sum();
        return push(std::move(y), {a},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        const Mat& x = t.value(Var{n.parents[0]});
                        t.accum(n.parents[0], Mat::Constant(x.rows(), x.cols(), n.grad(0, 0)));
                    },
                    false, "reduce_sum");
    }

    // Per-row inner product of two equally shaped matrices -> N x 1.
    Var row_dot(Var a, Var b) {
        require_same_shape(a, b, "row_dot");
        const Mat& va = value(a);
        const Mat& vb = value(b);
        Mat y = va.cwiseProduct(vb).rowwise().sum();
        return push(std::move(y), {a, b},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        const Mat& va = t.value(Var{n.parents[0]});
                        const Mat& vb = t.value(Var{n.parents[1]});
                        t.accum(n.parents[0], (vb.array().colwise() * n.grad.col(0).array()).matrix());
                        t.accum(n.parents[1], (va.array().colwise() * n.grad.col(0).array()).matrix());
                    },
                    false, "row_dot");
    }

    Var l2_squared(Var a) {
        Mat y(1, 1);
        y(0, 0) = value(a).squaredNorm();
        return push(std::move(y), {a},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        t.accum(n.parents[0], 2.0 * n.grad(0, 0) * t.value(Var{n.parents[0]}));
                    },
                    false, "l2_squared");
    }

    // Inverted-scaling dropout with a precomputed 0/1 mask: kept entries are
    // divided by keep_prob, so evaluation mode is simply the identity.
    Var dropout(Var a, Mat mask, double keep_prob) {
        require_shape(a, mask.rows(), mask.cols(), "dropout mask");
        if (keep_prob <= 0.0 || keep_prob > 1.0)
            throw ConfigError("dropout: keep_prob must be in (0,1]");
        Mat y = value(a).cwiseProduct(mask) / keep_prob;
        return push(std::move(y), {a},
                    [m = std::move(mask), keep_prob](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        t.accum(n.parents[0], n.grad.cwiseProduct(m) / keep_prob);
                    },
                    false, "dropout");
    }

    // out = sum_k weights(0,k) * mats[k]; weights is a differentiable 1 x K node.
    Var blend(const std::vector<Var>& mats, Var weights) {
        const Mat& w = value(weights);
        if (w.rows() != 1 || static_cast<std::size_t>(w.cols()) != mats.size())
            throw ConfigError("blend: weight shape " + shape_str(w) + " vs " +
                              std::to_string(mats.size()) + " matrices");
        for (Var m : mats) require_same_shape(mats[0], m, "blend");
        Mat y = Mat::Zero(value(mats[0]).rows(), value(mats[0]).cols());
        for (std::size_t k = 0; k < mats.size(); ++k) y += w(0, k) * value(mats[k]);
        std::vector<Var> parents = mats;
        parents.push_back(weights);
        return push(std::move(y), parents,
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        int wid = n.parents.back();
                        const Mat& w = t.value(Var{wid});
                        Mat dw = Mat::Zero(1, w.cols());
                        for (Eigen::Index k = 0; k + 1 < static_cast<Eigen::Index>(n.parents.size()); ++k) {
                            const Mat& mk = t.value(Var{n.parents[k]});
                            t.accum(n.parents[k], w(0, k) * n.grad);
                            dw(0, k) = n.grad.cwiseProduct(mk).sum();
                        }
                        t.accum(wid, dw);
                    },
                    false, "blend");
    }

    // X + ones * b for a 1 x C bias row.
    Var add_rowvec(Var a, Var b) {
        const Mat& x = value(a);
        const Mat& v = value(b);
        if (v.rows() != 1 || v.cols() != x.cols())
            throw DimensionError("add_rowvec: " + shape_str(x) + " + " + shape_str(v));
        Mat y = x.rowwise() + v.row(0);
        return push(std::move(y), {a, b},
                    [](Tape& t, int self) {
                        auto& n = t.nodes_[self];
                        t.accum(n.parents[0], n.grad);
                        t.accum(n.parents[1], n.grad.colwise().sum());
                    },
                    false, "add_rowvec");
    }

    void backward(Var loss) {
        const Mat& lv = value(loss);
        if (lv.rows() != 1 || lv.cols() != 1)
            throw ConfigError("backward: loss must be scalar, got " + shape_str(lv));
        grad_ref(loss.id)(0, 0) = 1.0;
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.grad.size() == 0) continue;  // unreached from loss
            if (n.backward_fn) n.backward_fn(*this, i);
            if (!n.is_leaf && i != loss.id) n.grad.resize(0, 0);
        }
    }

  private:
    struct Node {
        Mat value;
        Mat grad;
        std::vector<int> parents;
        std::function<void(Tape&, int)> backward_fn;
        bool is_leaf = false;
        const char* op = "";
    };

    std::vector<Node> nodes_;

    static double stable_sigmoid(double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
    }

    static std::string shape_str(const Mat& m) {
        return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
    }

    void require_same_shape(Var a, Var b, const char* op) {
        const Mat& va = value(a);
        const Mat& vb = value(b);
        if (va.rows() != vb.rows() || va.cols() != vb.cols())
            throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(va) + " vs " + shape_str(vb));
    }

    void require_shape(Var a, Eigen::Index r, Eigen::Index c, const char* what) {
        const Mat& va = value(a);
        if (va.rows() != r || va.cols() != c)
            throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(va));
    }

    Mat& grad_ref(int id) {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        return n.grad;
    }

    template <typename Expr>
    void accum(int id, const Expr& delta) {
        grad_ref(id) += delta;
    }

    Var push(Mat value, std::vector<Var> parents, std::function<void(Tape&, int)> fn,
             bool is_leaf, const char* op) {
        if (check_finite && !value.allFinite())
            throw NumericError(std::string("non-finite values produced by '") + op + "'");
        Node n;
        n.value = std::move(value);
        n.backward_fn = std::move(fn);
        n.is_leaf = is_leaf;
        n.op = op;
        n.parents.reserve(parents.size());
        for (Var p : parents) n.parents.push_back(p.id);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    friend struct TapeAccess;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    int coords_checked = 0;
};

// Central-difference oracle. `f(want_grads, grads)` evaluates the objective at
// the current parameter values and, when asked, writes analytic gradients
// (same shapes as params). Samples at least min_coords coordinates.
inline GradCheckReport finite_diff_check(
    const std::function<double(bool, std::vector<Mat>*)>& f,
    const std::vector<Mat*>& params, double eps, int min_coords, Rng& rng) {
    if (eps <= 0) throw ConfigError("finite_diff_check: eps must be positive");

    std::vector<Mat> analytic;
    double loss0 = f(true, &analytic);
    double loss0b = f(false, nullptr);
    if (loss0 != loss0b)
        throw NumericError("finite_diff_check: objective is not deterministic (" +
                           std::to_string(loss0) + " vs " + std::to_string(loss0b) + ")");
    if (analytic.size() != params.size())
        throw ConfigError("finite_diff_check: gradient count mismatch");

    std::int64_t total = 0;
    for (const Mat* p : params) total += p->size();
    if (total == 0) throw ConfigError("finite_diff_check: no parameters");

    std::int64_t want = std::min<std::int64_t>(total, std::max(min_coords, 1));
    std::vector<std::int64_t> coords;
    if (want >= total) {
        coords.resize(total);
        std::iota(coords.begin(), coords.end(), 0);
    } else {
        std::vector<char> seen(total, 0);
        while (static_cast<std::int64_t>(coords.size()) < want) {
            auto c = uniform_int(rng, 0, total - 1);
            if (!seen[c]) {
                seen[c] = 1;
                coords.push_back(c);
            }
        }
    }

    GradCheckReport report;
    for (auto flat : coords) {
        std::int64_t rem = flat;
        std::size_t pi = 0;
        while (rem >= params[pi]->size()) rem -= params[pi++]->size();
        double* cell = params[pi]->data() + rem;
        double orig = *cell;

        *cell = orig + eps;
        double fp = f(false, nullptr);
        *cell = orig - eps;
        double fm = f(false, nullptr);
        *cell = orig;

        double numeric = (fp - fm) / (2 * eps);
        double an = analytic[pi].data()[rem];
        double denom = std::max({std::abs(an), std::abs(numeric), 1e-8});
        double rel = std::abs(an - numeric) / denom;
        report.max_rel_err = std::max(report.max_rel_err, rel);
        report.coords_checked++;
    }
    return report;
}

}  // namespace hgrec::ad
