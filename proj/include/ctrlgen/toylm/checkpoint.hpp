#pragma once

// Binary checkpoint container:
//
//   magic "CGLMCKPT" | u32 version
//   u32 n_meta  { str key, str value }*
//   u32 n_vocab { u8 kind, str name }*
//   i32 vocab_size, context_window, d_model, d_hidden, n_blocks, n_heads
//   u64 n_weights, f64 weights[n_weights]
//
// Strings are u32 length + bytes. Integers and doubles are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "ctrlgen/toylm/model.hpp"

namespace ctrlgen {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'C', 'G', 'L', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using Metadata = std::map<std::string, std::string>;

struct Checkpoint {
    ModelParams params;
    Metadata metadata;
};

namespace detail {

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_str(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error("checkpoint", "truncated checkpoint");
    return v;
}

inline std::string get_str(std::istream& in) {
    const auto n = get<std::uint32_t>(in);
    if (n > (1U << 24)) throw Error("checkpoint", "implausible string length in checkpoint");
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw Error("checkpoint", "truncated checkpoint");
    return s;
}

}  // namespace detail

inline void save_checkpoint(const ModelParams& p, const std::filesystem::path& path, const Metadata& meta = {}) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + path.string());
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::put<std::uint32_t>(out, kCheckpointVersion);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
        detail::put_str(out, k);
        detail::put_str(out, v);
    }
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.vocab.size()));
    for (std::size_t i = 0; i < p.vocab.size(); ++i) {
        detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(p.vocab.kinds()[i]));
        detail::put_str(out, p.vocab.names()[i]);
    }
    for (int v : {p.shape.vocab_size, p.shape.context_window, p.shape.d_model, p.shape.d_hidden, p.shape.n_blocks,
                  p.shape.n_heads}) {
        detail::put<std::int32_t>(out, v);
    }
    detail::put<std::uint64_t>(out, p.weights.size());
    out.write(reinterpret_cast<const char*>(p.weights.data()),
              static_cast<std::streamsize>(p.weights.size() * sizeof(double)));
    if (!out) throw Error("io", "failed writing " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot read " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
        throw Error("checkpoint", path.string() + " is not a checkpoint");
    }
    if (detail::get<std::uint32_t>(in) != kCheckpointVersion) throw Error("checkpoint", "unsupported version");
    Checkpoint ck;
    const auto n_meta = detail::get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        std::string k = detail::get_str(in);
        ck.metadata[k] = detail::get_str(in);
    }
    const auto n_vocab = detail::get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_vocab; ++i) {
        const auto kind = detail::get<std::uint8_t>(in);
        if (kind > static_cast<std::uint8_t>(TokenKind::prompt_word)) throw Error("checkpoint", "bad token kind");
        ck.params.vocab.add(detail::get_str(in), static_cast<TokenKind>(kind));
    }
    ModelShape& s = ck.params.shape;
    s.vocab_size = detail::get<std::int32_t>(in);
    s.context_window = detail::get<std::int32_t>(in);
    s.d_model = detail::get<std::int32_t>(in);
    s.d_hidden = detail::get<std::int32_t>(in);
    s.n_blocks = detail::get<std::int32_t>(in);
    s.n_heads = detail::get<std::int32_t>(in);
    validate_shape(s);
    const auto n_w = detail::get<std::uint64_t>(in);
    if (n_w != ParamLayout::of(s).total || s.vocab_size != static_cast<int>(n_vocab)) {
        throw Error("checkpoint", "weight count does not match the shape descriptor");
    }
    ck.params.weights.resize(n_w);
    in.read(reinterpret_cast<char*>(ck.params.weights.data()), static_cast<std::streamsize>(n_w * sizeof(double)));
    if (!in) throw Error("checkpoint", "truncated checkpoint");
    return ck;
}

}  // namespace ctrlgen
