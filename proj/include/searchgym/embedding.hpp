#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchgym/errors.hpp"
#include "searchgym/remote.hpp"
#include "searchgym/text.hpp"

namespace searchgym {

struct EmbeddingVector {
    std::vector<float> values;
    bool normalized = false;

    std::size_t dim() const noexcept { return values.size(); }
    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

enum class EmbedderKind { hash, remote };

struct EmbedderConfig {
    EmbedderKind kind = EmbedderKind::hash;
    std::size_t dim = 768;
    std::optional<std::string> endpoint;
    std::chrono::milliseconds timeout = std::chrono::seconds(30);
    std::size_t max_batch = 64;

    void validate() const {
        if (dim < 8) throw InvalidConfigError("embedding dim must be at least 8");
        if (max_batch < 1) throw InvalidConfigError("max_batch must be at least 1");
        if (kind == EmbedderKind::remote && !endpoint) throw InvalidConfigError("remote embedder needs an endpoint");
        if (endpoint && !is_well_formed_endpoint(*endpoint)) {
            throw InvalidConfigError("malformed endpoint: " + *endpoint);
        }
    }
};

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = kFnvOffsetBasis;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= kFnvPrime;
    }
    return h;
}

/// Words for the hash embedder: maximal runs of ASCII alphanumerics (and
/// non-ASCII bytes, so UTF-8 words stay whole), lowercased.
inline std::vector<std::string> hash_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        const bool word_char = (u >= 0x80) || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
        if (word_char) {
            current.push_back(ascii_lower(c));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

/// Scales to unit L2 norm in place; a zero vector stays zero and unflagged.
inline void normalize_in_place(EmbeddingVector& v) {
    double sq = 0.0;
    for (float x : v.values) sq += static_cast<double>(x) * x;
    if (sq == 0.0) {
        v.normalized = false;
        return;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (float& x : v.values) x = static_cast<float>(x * inv);
    v.normalized = true;
}

/// Signed feature hashing of the word multiset, before normalization.
/// bucket = fnv1a64(word) mod dim; sign = -1 iff bit 63 of the hash is set.
inline std::vector<double> hash_accumulate(std::string_view text, std::size_t dim) {
    std::vector<double> acc(dim, 0.0);
    for (const auto& w : hash_words(text)) {
        const std::uint64_t h = fnv1a64(w);
        acc[h % dim] += (h >> 63) == 0 ? 1.0 : -1.0;
    }
    return acc;
}

inline EmbeddingVector hash_embed(std::string_view text, std::size_t dim) {
    const auto acc = hash_accumulate(text, dim);
    EmbeddingVector v;
    v.values.assign(acc.begin(), acc.end());
    normalize_in_place(v);
    return v;
}

namespace detail {

inline std::vector<EmbeddingVector> remote_embed(std::span<const std::string> texts, const EmbedderConfig& config) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += config.max_batch) {
        const std::size_t end = std::min(texts.size(), start + config.max_batch);
        nlohmann::json body;
        body["texts"] = nlohmann::json::array();
        for (std::size_t i = start; i < end; ++i) body["texts"].push_back(texts[i]);
        const auto reply = post_json_ok(*config.endpoint, "/embed", body, config.timeout);
        auto it = reply.find("vectors");
        if (it == reply.end() || !it->is_array()) throw RemoteUnavailableError("embed reply lacks \"vectors\"");
        if (it->size() != end - start) throw RemoteUnavailableError("embed reply has wrong vector count");
        for (const auto& row : *it) {
            if (!row.is_array()) throw RemoteUnavailableError("embed reply vector is not an array");
            if (row.size() != config.dim) throw DimensionMismatchError(config.dim, row.size());
            EmbeddingVector v;
            v.values.reserve(row.size());
            for (const auto& x : row) {
                if (!x.is_number()) throw RemoteUnavailableError("embed reply holds a non-number");
                v.values.push_back(x.get<float>());
            }
            normalize_in_place(v);
            out.push_back(std::move(v));
        }
    }
    return out;
}

}  // namespace detail

/// Order-preserving batch embedding; any failure aborts the whole batch.
inline std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts, const EmbedderConfig& config) {
    config.validate();
    if (config.kind == EmbedderKind::remote) return detail::remote_embed(texts, config);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(hash_embed(t, config.dim));
    return out;
}

inline EmbeddingVector embed(std::string_view text, const EmbedderConfig& config) {
    const std::string owned(text);
    return embed_batch(std::span<const std::string>(&owned, 1), config).front();
}

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) throw DimensionMismatchError(a.dim(), b.dim());
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += static_cast<double>(a.values[i]) * b.values[i];
    return s;
}

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) throw DimensionMismatchError(a.dim(), b.dim());
    double ab = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double x = a.values[i];
        const double y = b.values[i];
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if (aa == 0.0 || bb == 0.0) throw ZeroVectorError();
    const double c = ab / (std::sqrt(aa) * std::sqrt(bb));
    return std::clamp(c, -1.0, 1.0);
}

}  // namespace searchgym
