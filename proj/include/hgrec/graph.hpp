#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hgrec/common.hpp"

namespace hgrec::graph {

using NodeTypeId = int;
using NodeIndex = std::int32_t;

struct NodeId {
    NodeTypeId type = 0;
    NodeIndex index = 0;
};

// Compressed sparse row boolean matrix. Column indices within a row are
// ascending and duplicate-free.
struct Csr {
    NodeIndex rows = 0;
    NodeIndex cols = 0;
    std::vector<std::int64_t> row_ptr;  // size rows+1, monotone
    std::vector<NodeIndex> col_idx;

    std::int64_t nnz() const { return static_cast<std::int64_t>(col_idx.size()); }

    std::span<const NodeIndex> row(NodeIndex r) const {
        return {col_idx.data() + row_ptr[r], col_idx.data() + row_ptr[r + 1]};
    }

    bool has(NodeIndex r, NodeIndex c) const {
        auto cells = row(r);
        return std::binary_search(cells.begin(), cells.end(), c);
    }
};

inline Csr build_csr(const std::vector<std::pair<NodeIndex, NodeIndex>>& edges,
                     NodeIndex src_count, NodeIndex dst_count) {
    if (src_count < 0 || dst_count < 0)
        throw ConfigError("build_csr: negative dimension");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        auto [s, d] = edges[i];
        if (s < 0 || s >= src_count || d < 0 || d >= dst_count)
            throw DataError("build_csr: edge " + std::to_string(i) + " (" + std::to_string(s) +
                            "," + std::to_string(d) + ") out of bounds " +
                            std::to_string(src_count) + "x" + std::to_string(dst_count));
    }
    auto sorted = edges;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    Csr m;
    m.rows = src_count;
    m.cols = dst_count;
    m.row_ptr.assign(static_cast<std::size_t>(src_count) + 1, 0);
    m.col_idx.reserve(sorted.size());
    for (auto [s, d] : sorted) m.row_ptr[static_cast<std::size_t>(s) + 1]++;
    for (NodeIndex r = 0; r < src_count; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    for (auto [s, d] : sorted) m.col_idx.push_back(d);
    return m;
}

inline Csr transpose(const Csr& a) {
    Csr t;
    t.rows = a.cols;
    t.cols = a.rows;
    t.row_ptr.assign(static_cast<std::size_t>(a.cols) + 1, 0);
    t.col_idx.resize(a.col_idx.size());
    for (NodeIndex c : a.col_idx) t.row_ptr[static_cast<std::size_t>(c) + 1]++;
    for (NodeIndex r = 0; r < t.rows; ++r) t.row_ptr[r + 1] += t.row_ptr[r];
    std::vector<std::int64_t> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
    for (NodeIndex r = 0; r < a.rows; ++r)
        for (NodeIndex c : a.row(r)) t.col_idx[cursor[c]++] = r;
    return t;
}

// Boolean product: (a*b)[i][j] = 1 iff some k with a[i][k] and b[k][j].
// Row-by-row expansion with a dense marker workspace.
inline Csr bool_multiply(const Csr& a, const Csr& b) {
    if (a.cols != b.rows)
        throw DimensionError("bool_multiply: inner dimensions " + std::to_string(a.cols) +
                             " vs " + std::to_string(b.rows));
    Csr c;
    c.rows = a.rows;
    c.cols = b.cols;
    c.row_ptr.assign(static_cast<std::size_t>(a.rows) + 1, 0);

    std::vector<char> marker(static_cast<std::size_t>(b.cols), 0);
    std::vector<NodeIndex> scratch;
    for (NodeIndex i = 0; i < a.rows; ++i) {
        scratch.clear();
        for (NodeIndex k : a.row(i))
            for (NodeIndex j : b.row(k))
                if (!marker[j]) {
                    marker[j] = 1;
                    scratch.push_back(j);
                }
        std::sort(scratch.begin(), scratch.end());
        for (NodeIndex j : scratch) {
            c.col_idx.push_back(j);
            marker[j] = 0;
        }
        c.row_ptr[i + 1] = static_cast<std::int64_t>(c.col_idx.size());
    }
    return c;
}

struct Relation {
    std::string name;
    NodeTypeId src_type = 0;
    NodeTypeId dst_type = 0;
    Csr edges;

    const Csr& reverse() const {
        if (!reversed_) reversed_ = std::make_shared<Csr>(transpose(edges));
        return *reversed_;
    }

  private:
    mutable std::shared_ptr<Csr> reversed_;
};

struct MetaPathStep {
    std::string relation;
    bool reversed = false;
};

struct MetaPath {
    std::string name;
    std::vector<MetaPathStep> steps;
};

struct MetaPathAdjacency {
    MetaPath meta_path;
    NodeTypeId anchor_type = 0;
    NodeTypeId terminal_type = 0;
    Csr adjacency;           // binarized; row u holds N_u sorted ascending
    Csr adjacency_reversed;  // transpose, kept for backward passes

    void finalize() { adjacency_reversed = transpose(adjacency); }
};

using RelationTable = std::map<std::string, Relation>;

struct ComposeOptions {
    bool exclude_self_in_neighbors = false;  // only meaningful for square paths
    std::int64_t max_neighbors_per_node = 0;  // 0 = unlimited; truncation keeps lowest indices
};

inline MetaPathAdjacency compose_metapath(const MetaPath& path, const RelationTable& relations,
                                          const ComposeOptions& opts = {}) {
    if (path.steps.empty()) throw ConfigError("compose_metapath: meta-path '" + path.name + "' has no steps");

    MetaPathAdjacency out;
    out.meta_path = path;
    bool first = true;
    NodeTypeId cur_type = 0;
    Csr acc;
    for (const auto& step : path.steps) {
        auto it = relations.find(step.relation);
        if (it == relations.end())
            throw ConfigError("compose_metapath: unknown relation '" + step.relation +
                              "' in meta-path '" + path.name + "'");
        const Relation& rel = it->second;
        NodeTypeId step_src = step.reversed ? rel.dst_type : rel.src_type;
        NodeTypeId step_dst = step.reversed ? rel.src_type : rel.dst_type;
        const Csr& m = step.reversed ? rel.reverse() : rel.edges;
        if (first) {
            out.anchor_type = step_src;
            acc = m;
            first = false;
        } else {
            if (cur_type != step_src)
                throw ConfigError("compose_metapath: type mismatch in '" + path.name +
                                  "' at step '" + step.relation + "': expected src type " +
                                  std::to_string(cur_type) + ", got " + std::to_string(step_src));
            acc = bool_multiply(acc, m);
        }
        cur_type = step_dst;
    }
    out.terminal_type = cur_type;

    if (opts.exclude_self_in_neighbors && acc.rows == acc.cols) {
        Csr filtered;
        filtered.rows = acc.rows;
        filtered.cols = acc.cols;
        filtered.row_ptr.assign(static_cast<std::size_t>(acc.rows) + 1, 0);
        for (NodeIndex r = 0; r < acc.rows; ++r) {
            for (NodeIndex c : acc.row(r))
                if (c != r) filtered.col_idx.push_back(c);
            filtered.row_ptr[r + 1] = static_cast<std::int64_t>(filtered.col_idx.size());
        }
        acc = std::move(filtered);
    }
    if (opts.max_neighbors_per_node > 0) {
        Csr capped;
        capped.rows = acc.rows;
        capped.cols = acc.cols;
        capped.row_ptr.assign(static_cast<std::size_t>(acc.rows) + 1, 0);
        for (NodeIndex r = 0; r < acc.rows; ++r) {
            auto cells = acc.row(r);
            auto keep = std::min<std::int64_t>(opts.max_neighbors_per_node,
                                               static_cast<std::int64_t>(cells.size()));
            capped.col_idx.insert(capped.col_idx.end(), cells.begin(), cells.begin() + keep);
            capped.row_ptr[r + 1] = static_cast<std::int64_t>(capped.col_idx.size());
        }
        acc = std::move(capped);
    }

    out.adjacency = std::move(acc);
    out.finalize();
    return out;
}

inline std::span<const NodeIndex> neighbors(const MetaPathAdjacency& adj, NodeIndex u) {
    if (u < 0 || u >= adj.adjacency.rows)
        throw DataError("neighbors: node " + std::to_string(u) + " out of range [0," +
                        std::to_string(adj.adjacency.rows) + ")");
    return adj.adjacency.row(u);
}

// Typed node universe plus named relations.
struct HeteroGraph {
    std::vector<std::string> type_names;
    std::vector<NodeIndex> type_counts;
    RelationTable relations;

    NodeTypeId type_id(const std::string& name) const {
        for (std::size_t i = 0; i < type_names.size(); ++i)
            if (type_names[i] == name) return static_cast<NodeTypeId>(i);
        throw ConfigError("unknown node type '" + name + "'");
    }
    NodeIndex count(NodeTypeId t) const { return type_counts.at(static_cast<std::size_t>(t)); }
};

// Meta-path parser over relation walks. Syntax: comma-free list of steps
// joined by '.', each step a relation name optionally prefixed with '~' for
// reverse traversal, e.g. "um.~um" (U-M then M-U).
inline MetaPath parse_metapath(const std::string& name, const std::string& walk) {
    MetaPath p;
    p.name = name;
    std::size_t start = 0;
    while (start <= walk.size()) {
        std::size_t dot = walk.find('.', start);
        std::string tok = walk.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (tok.empty()) throw ConfigError("meta-path '" + name + "': empty step in walk '" + walk + "'");
        MetaPathStep step;
        if (tok[0] == '~') {
            step.reversed = true;
            tok = tok.substr(1);
        }
        step.relation = tok;
        p.steps.push_back(step);
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return p;
}

}  // namespace hgrec::graph
