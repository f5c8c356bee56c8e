#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hgrec/common.hpp"
#include "hgrec/model.hpp"

namespace hgrec::checkpoint {

// Binary layout, little-endian throughout:
//   magic "HGRC" | version u32 | d u32 | L u32 | d_a u32 | K1 u32 | K2 u32
//   | n_users u64 | n_items u64
//   | all parameter tensors as f64 in declaration order, row-major
//   | learned fusion weights (K1 doubles, then K2 doubles)
// A sidecar text manifest (<path>.manifest.txt) lists every tensor with its
// shape and byte offset. BPR-MF checkpoints use L = d_a = K1 = K2 = 0 and
// carry only the two embedding tables.

constexpr std::uint32_t kVersion = 1;

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw DataError("checkpoint: truncated header");
    return v;
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw DataError("checkpoint: truncated header");
    return v;
}
inline void write_mat(std::ostream& os, const Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            double v = m(r, c);
            os.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
}
inline void read_mat(std::istream& is, Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            double v = 0;
            is.read(reinterpret_cast<char*>(&v), sizeof v);
            if (!is) throw DataError("checkpoint: truncated tensor data");
            m(r, c) = v;
        }
}

}  // namespace detail

struct CheckpointHeader {
    std::uint32_t d = 0, L = 0, d_a = 0, k_user = 0, k_item = 0;
    std::uint64_t n_users = 0, n_items = 0;

    bool is_bprmf() const { return L == 0; }
};

inline void save_hgrec(const std::filesystem::path& path, model::HgrecParams& params,
                       const model::ModelConfig& cfg, const std::vector<double>& user_weights,
                       const std::vector<double>& item_weights) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot write " + path.string());
    os.write("HGRC", 4);
    detail::write_u32(os, kVersion);
    detail::write_u32(os, static_cast<std::uint32_t>(cfg.d));
    detail::write_u32(os, static_cast<std::uint32_t>(cfg.L));
    detail::write_u32(os, static_cast<std::uint32_t>(cfg.d_a));
    detail::write_u32(os, static_cast<std::uint32_t>(params.user_side.w1.size()));
    detail::write_u32(os, static_cast<std::uint32_t>(params.item_side.w1.size()));
    detail::write_u64(os, static_cast<std::uint64_t>(params.user_embeddings.rows()));
    detail::write_u64(os, static_cast<std::uint64_t>(params.item_embeddings.rows()));

    std::ofstream manifest(path.string() + ".manifest.txt");
    std::uint64_t offset = 4 + 6 * 4 + 2 * 8;
    params.for_each_tensor([&](const std::string& name, Mat& m) {
        manifest << name << " " << m.rows() << "x" << m.cols() << " offset=" << offset << "\n";
        detail::write_mat(os, m);
        offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
    });
    for (double w : user_weights) os.write(reinterpret_cast<const char*>(&w), sizeof w);
    manifest << "fusion_weights.user 1x" << user_weights.size() << " offset=" << offset << "\n";
    offset += user_weights.size() * sizeof(double);
    for (double w : item_weights) os.write(reinterpret_cast<const char*>(&w), sizeof w);
    manifest << "fusion_weights.item 1x" << item_weights.size() << " offset=" << offset << "\n";
    if (!os) throw DataError("checkpoint: write failed for " + path.string());
}

inline void save_bprmf(const std::filesystem::path& path, model::BprMfParams& params, int d) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot write " + path.string());
    os.write("HGRC", 4);
    detail::write_u32(os, kVersion);
    detail::write_u32(os, static_cast<std::uint32_t>(d));
    detail::write_u32(os, 0);  // L
    detail::write_u32(os, 0);  // d_a
    detail::write_u32(os, 0);  // K1
    detail::write_u32(os, 0);  // K2
    detail::write_u64(os, static_cast<std::uint64_t>(params.user_embeddings.rows()));
    detail::write_u64(os, static_cast<std::uint64_t>(params.item_embeddings.rows()));
    std::ofstream manifest(path.string() + ".manifest.txt");
    std::uint64_t offset = 4 + 6 * 4 + 2 * 8;
    params.for_each_tensor([&](const std::string& name, Mat& m) {
        manifest << name << " " << m.rows() << "x" << m.cols() << " offset=" << offset << "\n";
        detail::write_mat(os, m);
        offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
    });
    if (!os) throw DataError("checkpoint: write failed for " + path.string());
}

inline CheckpointHeader read_header(std::istream& is, const std::string& what) {
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "HGRC")
        throw DataError("checkpoint " + what + ": bad magic");
    auto version = detail::read_u32(is);
    if (version != kVersion)
        throw DataError("checkpoint " + what + ": unsupported version " + std::to_string(version));
    CheckpointHeader h;
    h.d = detail::read_u32(is);
    h.L = detail::read_u32(is);
    h.d_a = detail::read_u32(is);
    h.k_user = detail::read_u32(is);
    h.k_item = detail::read_u32(is);
    h.n_users = detail::read_u64(is);
    h.n_items = detail::read_u64(is);
    return h;
}

inline CheckpointHeader peek_header(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open " + path.string());
    return read_header(is, path.string());
}

struct LoadedHgrec {
    CheckpointHeader header;
    model::ModelConfig cfg;  // d, L, d_a filled from the header
    model::HgrecParams params;
    std::vector<double> user_weights, item_weights;
};

inline LoadedHgrec load_hgrec(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open " + path.string());
    LoadedHgrec out;
    out.header = read_header(is, path.string());
    const auto& h = out.header;
    if (h.is_bprmf()) throw DataError("checkpoint " + path.string() + ": holds a BPR-MF model");
    out.cfg.d = static_cast<int>(h.d);
    out.cfg.L = static_cast<int>(h.L);
    out.cfg.d_a = static_cast<int>(h.d_a);

    auto& p = out.params;
    int fw = out.cfg.fused_width();
    p.user_embeddings.resize(static_cast<Eigen::Index>(h.n_users), h.d);
    p.item_embeddings.resize(static_cast<Eigen::Index>(h.n_items), h.d);
    auto shape_side = [&](model::SideParams& s, std::uint32_t k_count) {
        s.w1.resize(k_count);
        s.w2.resize(k_count);
        for (std::uint32_t k = 0; k < k_count; ++k)
            for (std::uint32_t l = 0; l < h.L; ++l) {
                s.w1[k].emplace_back(h.d, h.d);
                s.w2[k].emplace_back(h.d, h.d);
            }
        s.fusion.w.resize(h.d_a, fw);
        s.fusion.b.resize(1, h.d_a);
        s.fusion.q.resize(h.d_a, 1);
    };
    shape_side(p.user_side, h.k_user);
    shape_side(p.item_side, h.k_item);
    p.for_each_tensor([&](const std::string&, Mat& m) { detail::read_mat(is, m); });

    out.user_weights.resize(h.k_user);
    out.item_weights.resize(h.k_item);
    for (double& w : out.user_weights) is.read(reinterpret_cast<char*>(&w), sizeof w);
    for (double& w : out.item_weights) is.read(reinterpret_cast<char*>(&w), sizeof w);
    if (!is) throw DataError("checkpoint " + path.string() + ": truncated fusion weights");
    return out;
}

struct LoadedBprMf {
    CheckpointHeader header;
    model::BprMfParams params;
};

inline LoadedBprMf load_bprmf(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open " + path.string());
    LoadedBprMf out;
    out.header = read_header(is, path.string());
    if (!out.header.is_bprmf())
        throw DataError("checkpoint " + path.string() + ": holds an HGRec model");
    out.params.user_embeddings.resize(static_cast<Eigen::Index>(out.header.n_users), out.header.d);
    out.params.item_embeddings.resize(static_cast<Eigen::Index>(out.header.n_items), out.header.d);
    out.params.for_each_tensor([&](const std::string&, Mat& m) { detail::read_mat(is, m); });
    return out;
}

}  // namespace hgrec::checkpoint
