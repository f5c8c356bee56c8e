#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hgrec/common.hpp"
#include "hgrec/graph.hpp"

namespace hgrec::data {

using graph::NodeIndex;

struct ManifestRelation {
    std::string name;
    std::string src_type;
    std::string dst_type;
    std::string path;  // empty for synthesized relations
};

struct DatasetManifest {
    std::filesystem::path base_dir;
    std::vector<std::pair<std::string, std::int64_t>> node_types;  // count, -1 = auto
    std::vector<ManifestRelation> relations;
    std::string interaction_relation;
    double rating_threshold = 0.0;
    std::string movielens_dir;           // preset: expands u.data / u.item
    int synthesize_user_user = 0;        // min shared train items; 0 = off
};

// Flat text manifest:
//   node_type <name> <count-or-auto>
//   relation <name> <src> <dst> <path>
//   interaction <relation-name>
//   rating_threshold <float>
//   movielens <dir>                  (preset: user/movie/genre + um/mg)
//   synthesize_user_user <min-shared>
inline DatasetManifest parse_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("manifest: cannot open " + path.string());
    DatasetManifest m;
    m.base_dir = path.parent_path();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        std::string key;
        is >> key;
        auto fail = [&](const std::string& why) {
            throw DataError("manifest " + path.string() + ":" + std::to_string(lineno) + ": " + why);
        };
        if (key == "node_type") {
            std::string name, count;
            if (!(is >> name >> count)) fail("node_type needs <name> <count-or-auto>");
            m.node_types.push_back({name, count == "auto" ? -1 : std::stoll(count)});
        } else if (key == "relation") {
            ManifestRelation r;
            if (!(is >> r.name >> r.src_type >> r.dst_type >> r.path))
                fail("relation needs <name> <src> <dst> <path>");
            m.relations.push_back(r);
        } else if (key == "interaction") {
            if (!(is >> m.interaction_relation)) fail("interaction needs <relation-name>");
        } else if (key == "rating_threshold") {
            if (!(is >> m.rating_threshold)) fail("rating_threshold needs a float");
        } else if (key == "movielens") {
            if (!(is >> m.movielens_dir)) fail("movielens needs <dir>");
        } else if (key == "synthesize_user_user") {
            if (!(is >> m.synthesize_user_user) || m.synthesize_user_user < 1)
                fail("synthesize_user_user needs a positive integer");
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    return m;
}

// Raw string ids mapped to dense contiguous indices, one table per node type.
struct IdMaps {
    std::vector<std::vector<std::string>> raw;                 // per type, dense -> raw
    std::vector<std::map<std::string, NodeIndex>> to_dense;    // per type

    NodeIndex intern(graph::NodeTypeId type, const std::string& raw_id, bool allow_new) {
        auto& table = to_dense[type];
        auto it = table.find(raw_id);
        if (it != table.end()) return it->second;
        if (!allow_new)
            throw DataError("dangling id '" + raw_id + "' for fixed-count node type");
        auto idx = static_cast<NodeIndex>(raw[type].size());
        raw[type].push_back(raw_id);
        table[raw_id] = idx;
        return idx;
    }
};

struct LoadedDataset {
    graph::HeteroGraph graph;
    std::vector<std::vector<NodeIndex>> interactions;  // user -> sorted thresholded items
    std::string interaction_relation;
    graph::NodeTypeId user_type = 0, item_type = 0;
    IdMaps ids;
    int synthesize_user_user = 0;
    double rating_threshold = 0.0;
};

namespace detail {

struct RawEdge {
    std::string src, dst;
    double rating = 0;
    bool has_rating = false;
};

// `src<TAB>dst[<TAB>rating[<TAB>timestamp]]`
inline std::vector<RawEdge> read_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open relation file " + path.string());
    std::vector<RawEdge> edges;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        if (line.empty()) continue;
        std::istringstream is(line);
        RawEdge e;
        if (!(is >> e.src >> e.dst))
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed line");
        std::string rating;
        if (is >> rating) {
            try {
                e.rating = std::stod(rating);
                e.has_rating = true;
            } catch (const std::exception&) {
                throw DataError(path.string() + ":" + std::to_string(lineno) +
                                ": malformed rating '" + rating + "'");
            }
        }
        edges.push_back(std::move(e));
    }
    return edges;
}

}  // namespace detail

// Loads the manifest's relations into a dense-indexed heterogeneous graph.
// Interaction edges with rating below the threshold are dropped everywhere.
inline LoadedDataset load_dataset(const DatasetManifest& manifest) {
    DatasetManifest m = manifest;

    if (!m.movielens_dir.empty()) {
        // native MovieLens-100K layout: u.data ratings, u.item genre flags
        std::filesystem::path dir = m.base_dir / m.movielens_dir;
        m.node_types = {{"user", -1}, {"movie", -1}, {"genre", 19}};
        m.relations.clear();
        m.relations.push_back({"um", "user", "movie", (dir / "u.data").string()});
        m.relations.push_back({"mg", "movie", "genre", "@movielens_genres"});
        if (std::filesystem::exists(dir / "user_user.tsv"))
            m.relations.push_back({"uu", "user", "user", (dir / "user_user.tsv").string()});
        m.interaction_relation = "um";
    }

    if (m.node_types.empty()) throw DataError("manifest declares no node types");
    if (m.interaction_relation.empty()) throw DataError("manifest declares no interaction relation");

    LoadedDataset out;
    out.interaction_relation = m.interaction_relation;
    out.rating_threshold = m.rating_threshold;
    out.synthesize_user_user = m.synthesize_user_user;
    auto& g = out.graph;
    for (auto& [name, count] : m.node_types) {
        g.type_names.push_back(name);
        g.type_counts.push_back(count < 0 ? 0 : static_cast<NodeIndex>(count));
    }
    out.ids.raw.resize(g.type_names.size());
    out.ids.to_dense.resize(g.type_names.size());

    auto type_fixed = [&](graph::NodeTypeId t) {
        return m.node_types[static_cast<std::size_t>(t)].second >= 0;
    };

    // Fixed-count types get identity raw ids 0..count-1 up front.
    for (std::size_t t = 0; t < m.node_types.size(); ++t)
        if (m.node_types[t].second >= 0)
            for (std::int64_t i = 0; i < m.node_types[t].second; ++i)
                out.ids.intern(static_cast<graph::NodeTypeId>(t), std::to_string(i), true);

    struct PendingRelation {
        ManifestRelation spec;
        graph::NodeTypeId src, dst;
        std::vector<std::pair<NodeIndex, NodeIndex>> edges;
    };
    std::vector<PendingRelation> pending;

    for (const auto& r : m.relations) {
        PendingRelation p;
        p.spec = r;
        p.src = g.type_id(r.src_type);
        p.dst = g.type_id(r.dst_type);
        bool is_interaction = r.name == m.interaction_relation;

        if (r.path == "@movielens_genres") {
            std::filesystem::path dir = m.base_dir / m.movielens_dir;
            std::ifstream in(dir / "u.item");
            if (!in) throw DataError("cannot open " + (dir / "u.item").string());
            std::string line;
            int lineno = 0;
            while (std::getline(in, line)) {
                lineno++;
                std::vector<std::string> fields;
                std::size_t start = 0;
                while (true) {
                    auto bar = line.find('|', start);
                    fields.push_back(line.substr(start, bar == std::string::npos
                                                            ? std::string::npos
                                                            : bar - start));
                    if (bar == std::string::npos) break;
                    start = bar + 1;
                }
                if (fields.size() < 24)
                    throw DataError((dir / "u.item").string() + ":" + std::to_string(lineno) +
                                    ": malformed line");
                NodeIndex movie = out.ids.intern(p.src, fields[0], !type_fixed(p.src));
                // 19 flag columns at the tail; column 0 is the catch-all
                // "unknown" marker and is skipped, leaving 18 genres.
                std::size_t flags_at = fields.size() - 19;
                for (int gflag = 1; gflag < 19; ++gflag)
                    if (fields[flags_at + gflag] == "1")
                        p.edges.push_back({movie, static_cast<NodeIndex>(gflag)});
            }
        } else {
            for (const auto& e : detail::read_tsv(m.base_dir / r.path)) {
                if (is_interaction && e.has_rating && e.rating < m.rating_threshold) continue;
                NodeIndex s = out.ids.intern(p.src, e.src, !type_fixed(p.src));
                NodeIndex d = out.ids.intern(p.dst, e.dst, !type_fixed(p.dst));
                p.edges.push_back({s, d});
            }
        }
        pending.push_back(std::move(p));
    }

    for (std::size_t t = 0; t < g.type_counts.size(); ++t)
        if (m.node_types[t].second < 0)
            g.type_counts[t] = static_cast<NodeIndex>(out.ids.raw[t].size());

    bool saw_interaction = false;
    for (auto& p : pending) {
        graph::Relation rel;
        rel.name = p.spec.name;
        rel.src_type = p.src;
        rel.dst_type = p.dst;
        rel.edges = graph::build_csr(p.edges, g.count(p.src), g.count(p.dst));
        if (p.spec.name == m.interaction_relation) {
            saw_interaction = true;
            out.user_type = p.src;
            out.item_type = p.dst;
            out.interactions.assign(static_cast<std::size_t>(g.count(p.src)), {});
            for (NodeIndex u = 0; u < rel.edges.rows; ++u) {
                auto row = rel.edges.row(u);
                out.interactions[u].assign(row.begin(), row.end());
            }
        }
        g.relations[rel.name] = std::move(rel);
    }
    if (!saw_interaction)
        throw DataError("interaction relation '" + m.interaction_relation + "' not declared");
    return out;
}

struct InteractionSplit {
    std::vector<std::vector<NodeIndex>> train, validation, test;  // all sorted per user

    std::uint64_t hash() const {
        Fnv1a h;
        auto feed = [&](const std::vector<std::vector<NodeIndex>>& part) {
            h.feed_u64(part.size());
            for (const auto& row : part) {
                h.feed_u64(row.size());
                for (NodeIndex i : row) h.feed_u64(static_cast<std::uint64_t>(i));
            }
        };
        feed(train);
        feed(validation);
        feed(test);
        return h.digest();
    }
};

// Per-user stratified split: floor((1-ratio)*n) test items (never leaving
// train empty), then a validation carve of floor(val_fraction*train) from
// the train side, min 1 when at least two train items remain.
inline InteractionSplit split_interactions(const std::vector<std::vector<NodeIndex>>& interactions,
                                           double ratio, double val_fraction, std::uint64_t seed) {
    if (ratio <= 0 || ratio > 1) throw ConfigError("split_interactions: ratio must be in (0,1]");
    if (val_fraction < 0 || val_fraction >= 1)
        throw ConfigError("split_interactions: val_fraction must be in [0,1)");
    Rng rng(seed);
    InteractionSplit split;
    split.train.resize(interactions.size());
    split.validation.resize(interactions.size());
    split.test.resize(interactions.size());
    for (std::size_t u = 0; u < interactions.size(); ++u) {
        auto items = interactions[u];
        // Fisher-Yates with the shared stream keeps the split deterministic
        for (std::size_t i = items.size(); i > 1; --i)
            std::swap(items[i - 1], items[uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1)]);

        auto n = static_cast<std::int64_t>(items.size());
        // epsilon-compensated floor so ratio 0.8 with n=10 yields exactly 2
        auto frac_floor = [](double frac, std::int64_t count) {
            return static_cast<std::int64_t>(
                std::floor(frac * static_cast<double>(count) + 1e-9));
        };
        auto n_test = frac_floor(1.0 - ratio, n);
        if (n - n_test < 1) n_test = std::max<std::int64_t>(0, n - 1);
        auto n_train_side = n - n_test;
        std::int64_t n_val = 0;
        if (val_fraction > 0 && n_train_side >= 2)
            n_val = std::max<std::int64_t>(1, frac_floor(val_fraction, n_train_side));

        split.test[u].assign(items.begin(), items.begin() + n_test);
        split.validation[u].assign(items.begin() + n_test, items.begin() + n_test + n_val);
        split.train[u].assign(items.begin() + n_test + n_val, items.end());
        std::sort(split.test[u].begin(), split.test[u].end());
        std::sort(split.validation[u].begin(), split.validation[u].end());
        std::sort(split.train[u].begin(), split.train[u].end());
    }
    return split;
}

// Users sharing at least min_shared co-rated train items become neighbors.
// Built from the train side only so no test interaction leaks into the graph.
inline graph::Relation synthesize_user_user(const std::vector<std::vector<NodeIndex>>& train,
                                            graph::NodeTypeId user_type, NodeIndex n_items,
                                            int min_shared) {
    if (min_shared < 1) throw ConfigError("synthesize_user_user: min_shared must be >= 1");
    auto n_users = static_cast<NodeIndex>(train.size());
    std::vector<std::vector<NodeIndex>> item_users(static_cast<std::size_t>(n_items));
    for (NodeIndex u = 0; u < n_users; ++u)
        for (NodeIndex i : train[u]) item_users[i].push_back(u);

    std::vector<std::pair<NodeIndex, NodeIndex>> edges;
    std::vector<int> shared(static_cast<std::size_t>(n_users), 0);
    std::vector<NodeIndex> touched;
    for (NodeIndex u = 0; u < n_users; ++u) {
        touched.clear();
        for (NodeIndex i : train[u])
            for (NodeIndex v : item_users[i]) {
                if (v == u) continue;
                if (shared[v]++ == 0) touched.push_back(v);
            }
        for (NodeIndex v : touched) {
            if (shared[v] >= min_shared) edges.push_back({u, v});
            shared[v] = 0;
        }
    }
    graph::Relation rel;
    rel.name = "uu";
    rel.src_type = user_type;
    rel.dst_type = user_type;
    rel.edges = graph::build_csr(edges, n_users, n_users);
    return rel;
}

// Composes each meta-path over a relation table whose interaction relation is
// rebuilt from training interactions only.
inline std::vector<graph::MetaPathAdjacency> build_metapath_adjacencies(
    const graph::HeteroGraph& g, const std::string& interaction_relation,
    const std::vector<std::vector<NodeIndex>>& train,
    const std::vector<graph::MetaPath>& meta_paths, const graph::ComposeOptions& opts = {}) {
    graph::RelationTable table = g.relations;
    auto it = table.find(interaction_relation);
    if (it == table.end())
        throw ConfigError("build_metapath_adjacencies: unknown interaction relation '" +
                          interaction_relation + "'");
    std::vector<std::pair<NodeIndex, NodeIndex>> edges;
    for (std::size_t u = 0; u < train.size(); ++u)
        for (NodeIndex i : train[u]) edges.push_back({static_cast<NodeIndex>(u), i});
    graph::Relation train_only;  // fresh object so no cached transpose survives
    train_only.name = it->second.name;
    train_only.src_type = it->second.src_type;
    train_only.dst_type = it->second.dst_type;
    train_only.edges = graph::build_csr(edges, it->second.edges.rows, it->second.edges.cols);
    it->second = std::move(train_only);

    std::vector<graph::MetaPathAdjacency> out;
    for (const auto& p : meta_paths) out.push_back(graph::compose_metapath(p, table, opts));
    return out;
}

// ---- bundle serialization ----------------------------------------------

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw DataError("bundle: truncated stream");
    return v;
}
inline void write_str(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string read_str(std::istream& is) {
    auto n = read_u64(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw DataError("bundle: truncated stream");
    return s;
}
inline void write_csr(std::ostream& os, const graph::Csr& m) {
    write_u64(os, static_cast<std::uint64_t>(m.rows));
    write_u64(os, static_cast<std::uint64_t>(m.cols));
    write_u64(os, m.row_ptr.size());
    for (auto v : m.row_ptr) write_u64(os, static_cast<std::uint64_t>(v));
    write_u64(os, m.col_idx.size());
    for (auto v : m.col_idx) write_u64(os, static_cast<std::uint64_t>(v));
}
inline graph::Csr read_csr(std::istream& is) {
    graph::Csr m;
    m.rows = static_cast<NodeIndex>(read_u64(is));
    m.cols = static_cast<NodeIndex>(read_u64(is));
    m.row_ptr.resize(read_u64(is));
    for (auto& v : m.row_ptr) v = static_cast<std::int64_t>(read_u64(is));
    m.col_idx.resize(read_u64(is));
    for (auto& v : m.col_idx) v = static_cast<NodeIndex>(read_u64(is));
    return m;
}
inline void write_lists(std::ostream& os, const std::vector<std::vector<NodeIndex>>& lists) {
    write_u64(os, lists.size());
    for (const auto& row : lists) {
        write_u64(os, row.size());
        for (NodeIndex i : row) write_u64(os, static_cast<std::uint64_t>(i));
    }
}
inline std::vector<std::vector<NodeIndex>> read_lists(std::istream& is) {
    std::vector<std::vector<NodeIndex>> lists(read_u64(is));
    for (auto& row : lists) {
        row.resize(read_u64(is));
        for (auto& i : row) i = static_cast<NodeIndex>(read_u64(is));
    }
    return lists;
}

}  // namespace detail

// A prepared bundle: dense graph, id tables and the train/val/test split,
// plus a content hash over all of it.
struct PreparedBundle {
    graph::HeteroGraph graph;
    IdMaps ids;
    std::string interaction_relation;
    graph::NodeTypeId user_type = 0, item_type = 0;
    InteractionSplit split;
    std::uint64_t seed = 0;
    std::string notes;  // e.g. user-user synthesis method

    std::uint64_t content_hash() const {
        Fnv1a h;
        h.feed_u64(graph.type_names.size());
        for (std::size_t t = 0; t < graph.type_names.size(); ++t) {
            h.feed_str(graph.type_names[t]);
            h.feed_u64(static_cast<std::uint64_t>(graph.type_counts[t]));
        }
        for (const auto& [name, rel] : graph.relations) {
            h.feed_str(name);
            h.feed_u64(static_cast<std::uint64_t>(rel.src_type));
            h.feed_u64(static_cast<std::uint64_t>(rel.dst_type));
            for (auto v : rel.edges.row_ptr) h.feed_u64(static_cast<std::uint64_t>(v));
            for (auto v : rel.edges.col_idx) h.feed_u64(static_cast<std::uint64_t>(v));
        }
        h.feed_str(interaction_relation);
        h.feed_u64(seed);
        h.feed_u64(split.hash());
        return h.digest();
    }
};

inline void save_bundle(const PreparedBundle& b, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream bin(dir / "bundle.bin", std::ios::binary);
    if (!bin) throw DataError("cannot write " + (dir / "bundle.bin").string());
    using namespace detail;
    write_u64(bin, 0x48475242u);  // "HGRB"
    write_u64(bin, 1);            // format version
    write_u64(bin, b.graph.type_names.size());
    for (std::size_t t = 0; t < b.graph.type_names.size(); ++t) {
        write_str(bin, b.graph.type_names[t]);
        write_u64(bin, static_cast<std::uint64_t>(b.graph.type_counts[t]));
        write_u64(bin, b.ids.raw[t].size());
        for (const auto& s : b.ids.raw[t]) write_str(bin, s);
    }
    write_u64(bin, b.graph.relations.size());
    for (const auto& [name, rel] : b.graph.relations) {
        write_str(bin, name);
        write_u64(bin, static_cast<std::uint64_t>(rel.src_type));
        write_u64(bin, static_cast<std::uint64_t>(rel.dst_type));
        write_csr(bin, rel.edges);
    }
    write_str(bin, b.interaction_relation);
    write_u64(bin, static_cast<std::uint64_t>(b.user_type));
    write_u64(bin, static_cast<std::uint64_t>(b.item_type));
    write_u64(bin, b.seed);
    write_str(bin, b.notes);
    write_lists(bin, b.split.train);
    write_lists(bin, b.split.validation);
    write_lists(bin, b.split.test);

    std::ofstream txt(dir / "bundle.txt");
    txt << "content_hash " << std::hex << b.content_hash() << std::dec << "\n";
    txt << "seed " << b.seed << "\n";
    txt << "interaction " << b.interaction_relation << "\n";
    if (!b.notes.empty()) txt << "notes " << b.notes << "\n";
    for (std::size_t t = 0; t < b.graph.type_names.size(); ++t)
        txt << "node_type " << b.graph.type_names[t] << " " << b.graph.type_counts[t] << "\n";
    for (const auto& [name, rel] : b.graph.relations)
        txt << "relation " << name << " " << b.graph.type_names[rel.src_type] << " "
            << b.graph.type_names[rel.dst_type] << " nnz=" << rel.edges.nnz() << "\n";
    std::size_t tr = 0, va = 0, te = 0;
    for (const auto& r : b.split.train) tr += r.size();
    for (const auto& r : b.split.validation) va += r.size();
    for (const auto& r : b.split.test) te += r.size();
    txt << "split train=" << tr << " validation=" << va << " test=" << te << "\n";
}

inline PreparedBundle load_bundle(const std::filesystem::path& dir) {
    std::ifstream bin(dir / "bundle.bin", std::ios::binary);
    if (!bin) throw DataError("cannot open bundle " + (dir / "bundle.bin").string());
    using namespace detail;
    if (read_u64(bin) != 0x48475242u) throw DataError("bundle: bad magic");
    if (read_u64(bin) != 1) throw DataError("bundle: unsupported version");
    PreparedBundle b;
    auto ntypes = read_u64(bin);
    b.ids.raw.resize(ntypes);
    b.ids.to_dense.resize(ntypes);
    for (std::uint64_t t = 0; t < ntypes; ++t) {
        b.graph.type_names.push_back(read_str(bin));
        b.graph.type_counts.push_back(static_cast<NodeIndex>(read_u64(bin)));
        auto nids = read_u64(bin);
        for (std::uint64_t i = 0; i < nids; ++i) {
            std::string raw = read_str(bin);
            b.ids.to_dense[t][raw] = static_cast<NodeIndex>(b.ids.raw[t].size());
            b.ids.raw[t].push_back(raw);
        }
    }
    auto nrels = read_u64(bin);
    for (std::uint64_t r = 0; r < nrels; ++r) {
        graph::Relation rel;
        rel.name = read_str(bin);
        rel.src_type = static_cast<graph::NodeTypeId>(read_u64(bin));
        rel.dst_type = static_cast<graph::NodeTypeId>(read_u64(bin));
        rel.edges = read_csr(bin);
        b.graph.relations[rel.name] = std::move(rel);
    }
    b.interaction_relation = read_str(bin);
    b.user_type = static_cast<graph::NodeTypeId>(read_u64(bin));
    b.item_type = static_cast<graph::NodeTypeId>(read_u64(bin));
    b.seed = read_u64(bin);
    b.notes = read_str(bin);
    b.split.train = read_lists(bin);
    b.split.validation = read_lists(bin);
    b.split.test = read_lists(bin);
    return b;
}

// Full preparation: load, split, optionally synthesize the user-user
// relation from the train side.
inline PreparedBundle prepare_bundle(const DatasetManifest& manifest, std::uint64_t seed,
                                     double ratio = 0.8, double val_fraction = 0.1) {
    LoadedDataset ds = load_dataset(manifest);
    PreparedBundle b;
    b.split = split_interactions(ds.interactions, ratio, val_fraction, seed);
    b.graph = std::move(ds.graph);
    b.ids = std::move(ds.ids);
    b.interaction_relation = ds.interaction_relation;
    b.user_type = ds.user_type;
    b.item_type = ds.item_type;
    b.seed = seed;
    if (ds.synthesize_user_user > 0 && b.graph.relations.find("uu") == b.graph.relations.end()) {
        b.graph.relations["uu"] = synthesize_user_user(
            b.split.train, b.user_type, b.graph.count(b.item_type), ds.synthesize_user_user);
        b.notes = "uu synthesized: co-rating min_shared=" +
                  std::to_string(ds.synthesize_user_user) + " (train side only)";
    }
    return b;
}

}  // namespace hgrec::data
