#pragma once

// Two-stage search: exact dense top-M retrieval, rerank to top-K, previews.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchgym/corpus.hpp"
#include "searchgym/embedding.hpp"
#include "searchgym/errors.hpp"
#include "searchgym/remote.hpp"
#include "searchgym/text.hpp"

namespace searchgym {

struct IndexEntry {
    std::string doc_id;
    EmbeddingVector vector;

    friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

/// Immutable once built; safe to query from many threads.
class VectorIndex {
public:
    VectorIndex(EmbedderConfig embedder, std::vector<IndexEntry> entries,
                std::shared_ptr<const std::vector<Document>> corpus)
        : embedder_(std::move(embedder)), entries_(std::move(entries)), corpus_(std::move(corpus)) {
        if (!corpus_) throw InvalidConfigError("index needs a corpus");
        if (entries_.size() != corpus_->size()) {
            throw FormatError(0, "index has " + std::to_string(entries_.size()) + " entries for a corpus of " +
                                     std::to_string(corpus_->size()) + " documents");
        }
        by_id_.reserve(corpus_->size());
        for (std::size_t i = 0; i < corpus_->size(); ++i) by_id_.emplace((*corpus_)[i].doc_id, i);
        std::unordered_set<std::string_view> seen;
        for (const auto& e : entries_) {
            if (e.vector.dim() != embedder_.dim) throw DimensionMismatchError(embedder_.dim, e.vector.dim());
            if (!by_id_.contains(e.doc_id)) throw DanglingReferenceError(e.doc_id);
            if (!seen.insert(e.doc_id).second) throw DuplicateIdError(e.doc_id);
        }
    }

    std::size_t dim() const noexcept { return embedder_.dim; }
    std::size_t size() const noexcept { return entries_.size(); }
    const EmbedderConfig& embedder() const noexcept { return embedder_; }
    const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
    const std::vector<Document>& corpus() const noexcept { return *corpus_; }

    const Document* find(std::string_view doc_id) const {
        auto it = by_id_.find(std::string(doc_id));
        return it == by_id_.end() ? nullptr : &(*corpus_)[it->second];
    }

    const Document& document(std::string_view doc_id) const {
        const Document* d = find(doc_id);
        if (!d) throw DanglingReferenceError(std::string(doc_id));
        return *d;
    }

private:
    EmbedderConfig embedder_;
    std::vector<IndexEntry> entries_;
    std::shared_ptr<const std::vector<Document>> corpus_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

enum class RerankerKind { lexical, remote };

struct PipelineConfig {
    std::size_t top_m = 15;
    std::size_t top_k = 10;
    std::size_t preview_chars = 150;
    RerankerKind reranker = RerankerKind::lexical;
    std::optional<std::string> endpoint;
    std::chrono::milliseconds timeout = std::chrono::seconds(30);

    void validate() const {
        if (top_k < 1 || top_k > top_m) throw InvalidConfigError("require 1 <= top_k <= top_m");
        if (preview_chars < 1) throw InvalidConfigError("preview_chars must be at least 1");
        if (reranker == RerankerKind::remote && !endpoint) throw InvalidConfigError("remote reranker needs an endpoint");
        if (endpoint && !is_well_formed_endpoint(*endpoint)) {
            throw InvalidConfigError("malformed endpoint: " + *endpoint);
        }
    }
};

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;

    friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

struct SearchResult {
    std::string doc_id;
    std::string title;
    std::string preview;
    double score = 0.0;

    friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

/// Descending score, ascending doc_id on ties.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) noexcept {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
}

/// Text fed to the embedder and the reranker for a document.
inline std::string indexing_text(const Document& doc) { return doc.title + "\n" + doc.text; }

inline std::string make_preview(std::string_view text, std::size_t n) { return std::string(utf8::prefix(text, n)); }

inline std::string preview_source(const Document& doc) { return doc.text.empty() ? doc.title : doc.text; }

/// Embeds every document. Either returns a complete index or throws.
inline VectorIndex build_index(std::shared_ptr<const std::vector<Document>> corpus, const EmbedderConfig& config) {
    if (!corpus || corpus->empty()) throw EmptyCorpusError();
    std::vector<std::string> texts;
    texts.reserve(corpus->size());
    for (const auto& d : *corpus) texts.push_back(indexing_text(d));
    auto vectors = embed_batch(texts, config);
    std::vector<IndexEntry> entries;
    entries.reserve(corpus->size());
    for (std::size_t i = 0; i < corpus->size(); ++i) entries.push_back({(*corpus)[i].doc_id, std::move(vectors[i])});
    return VectorIndex(config, std::move(entries), std::move(corpus));
}

inline VectorIndex build_index(std::vector<Document> corpus, const EmbedderConfig& config) {
    return build_index(std::make_shared<const std::vector<Document>>(std::move(corpus)), config);
}

/// Exact top-m by cosine similarity. Zero vectors score 0 against everything.
inline std::vector<ScoredDoc> dense_topm(const VectorIndex& index, std::string_view query, std::size_t m) {
    if (trim_ascii(query).empty()) throw EmptyQueryError();
    if (m < 1) throw InvalidConfigError("m must be at least 1");
    const EmbeddingVector q = embed(query, index.embedder());
    if (q.dim() != index.dim()) throw DimensionMismatchError(index.dim(), q.dim());

    std::vector<std::pair<std::size_t, double>> sparse;
    for (std::size_t i = 0; i < q.values.size(); ++i) {
        if (q.values[i] != 0.0F) sparse.emplace_back(i, static_cast<double>(q.values[i]));
    }
    std::vector<ScoredDoc> scored;
    scored.reserve(index.size());
    for (const auto& e : index.entries()) {
        double s = 0.0;
        if (e.vector.normalized) {
            for (const auto& [i, x] : sparse) s += x * e.vector.values[i];
        }
        scored.push_back({e.doc_id, s});
    }
    const std::size_t keep = std::min(m, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), ranks_before);
    scored.resize(keep);
    return scored;
}

/// Fraction of unique normalized query terms present in the document.
inline double lexical_overlap(const std::vector<std::string>& query_terms, const Document& doc) {
    if (query_terms.empty()) return 0.0;
    const auto doc_terms_list = normalized_terms(indexing_text(doc));
    const std::unordered_set<std::string> doc_terms(doc_terms_list.begin(), doc_terms_list.end());
    std::size_t hits = 0;
    for (const auto& t : query_terms) hits += doc_terms.contains(t) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(query_terms.size());
}

namespace detail {

inline std::vector<double> remote_rerank_scores(std::string_view query, std::span<const Document> candidates,
                                                const PipelineConfig& config) {
    constexpr std::size_t kBatch = 64;
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (std::size_t start = 0; start < candidates.size(); start += kBatch) {
        const std::size_t end = std::min(candidates.size(), start + kBatch);
        nlohmann::json body;
        body["query"] = std::string(query);
        body["documents"] = nlohmann::json::array();
        for (std::size_t i = start; i < end; ++i) {
            body["documents"].push_back({{"doc_id", candidates[i].doc_id}, {"text", indexing_text(candidates[i])}});
        }
        const auto reply = post_json_ok(*config.endpoint, "/rerank", body, config.timeout);
        auto it = reply.find("scores");
        if (it == reply.end() || !it->is_array() || it->size() != end - start) {
            throw RemoteUnavailableError("rerank reply lacks aligned \"scores\"");
        }
        for (const auto& s : *it) {
            if (!s.is_number()) throw RemoteUnavailableError("rerank reply holds a non-number");
            scores.push_back(s.get<double>());
        }
    }
    return scores;
}

}  // namespace detail

inline std::vector<ScoredDoc> rerank(std::string_view query, std::span<const Document> candidates,
                                     const PipelineConfig& config) {
    std::vector<ScoredDoc> out;
    out.reserve(candidates.size());
    if (config.reranker == RerankerKind::remote) {
        const auto scores = detail::remote_rerank_scores(query, candidates, config);
        for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back({candidates[i].doc_id, scores[i]});
    } else {
        const auto terms = normalized_terms(query);
        for (const auto& d : candidates) out.push_back({d.doc_id, lexical_overlap(terms, d)});
    }
    std::sort(out.begin(), out.end(), ranks_before);
    return out;
}

/// Stage outputs kept for inspection; `results` is what callers serve.
struct PipelineTrace {
    std::vector<ScoredDoc> candidates;
    std::vector<SearchResult> results;
};

inline PipelineTrace search_pipeline_traced(const VectorIndex& index, std::string_view query,
                                            const PipelineConfig& config) {
    config.validate();
    PipelineTrace trace;
    trace.candidates = dense_topm(index, query, config.top_m);
    std::vector<Document> docs;
    docs.reserve(trace.candidates.size());
    for (const auto& c : trace.candidates) docs.push_back(index.document(c.doc_id));
    auto ranked = rerank(query, docs, config);
    if (ranked.size() > config.top_k) ranked.resize(config.top_k);
    trace.results.reserve(ranked.size());
    for (auto& r : ranked) {
        const Document& d = index.document(r.doc_id);
        trace.results.push_back({r.doc_id, d.title, make_preview(preview_source(d), config.preview_chars), r.score});
    }
    return trace;
}

inline std::vector<SearchResult> search_pipeline(const VectorIndex& index, std::string_view query,
                                                 const PipelineConfig& config) {
    return search_pipeline_traced(index, query, config).results;
}

// ---------------------------------------------------------------------------
// Index file: "SGIX1", u32 dim, u32 count, then per entry a u32-length-prefixed
// doc_id and `dim` little-endian float32 values, then a u32-length-prefixed
// JSON trailer {"embedder","endpoint","corpus"} naming how to rebuild queries.

inline constexpr std::string_view kIndexMagic = "SGIX1";

struct IndexFileMeta {
    EmbedderConfig embedder;
    std::string corpus_path;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw FormatError(0, "truncated index file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

inline std::string get_bytes(std::string_view in, std::size_t& pos, std::size_t n) {
    if (pos + n > in.size()) throw FormatError(0, "truncated index file");
    std::string out(in.substr(pos, n));
    pos += n;
    return out;
}

}  // namespace detail

inline std::string serialize_index(const VectorIndex& index, const std::string& corpus_path) {
    std::string out(kIndexMagic);
    detail::put_u32(out, static_cast<std::uint32_t>(index.dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(index.size()));
    for (const auto& e : index.entries()) {
        detail::put_u32(out, static_cast<std::uint32_t>(e.doc_id.size()));
        out += e.doc_id;
        for (float x : e.vector.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(x));
    }
    nlohmann::ordered_json meta;
    meta["embedder"] = index.embedder().kind == EmbedderKind::hash ? "hash" : "remote";
    meta["endpoint"] = index.embedder().endpoint ? nlohmann::ordered_json(*index.embedder().endpoint)
                                                 : nlohmann::ordered_json(nullptr);
    meta["corpus"] = corpus_path;
    const std::string trailer = meta.dump();
    detail::put_u32(out, static_cast<std::uint32_t>(trailer.size()));
    out += trailer;
    return out;
}

struct ParsedIndex {
    IndexFileMeta meta;
    std::vector<IndexEntry> entries;
};

inline ParsedIndex parse_index(std::string_view bytes) {
    if (bytes.substr(0, kIndexMagic.size()) != kIndexMagic) throw FormatError(0, "not an index file (bad magic)");
    std::size_t pos = kIndexMagic.size();
    ParsedIndex parsed;
    const std::uint32_t dim = detail::get_u32(bytes, pos);
    const std::uint32_t count = detail::get_u32(bytes, pos);
    if (dim < 8) throw FormatError(0, "index dim below 8");
    parsed.entries.reserve(std::min<std::size_t>(count, bytes.size() / (4ULL * dim + 4)));
    for (std::uint32_t i = 0; i < count; ++i) {
        IndexEntry e;
        e.doc_id = detail::get_bytes(bytes, pos, detail::get_u32(bytes, pos));
        e.vector.values.resize(dim);
        bool nonzero = false;
        for (auto& x : e.vector.values) {
            x = std::bit_cast<float>(detail::get_u32(bytes, pos));
            nonzero = nonzero || x != 0.0F;
        }
        e.vector.normalized = nonzero;
        parsed.entries.push_back(std::move(e));
    }
    const std::string trailer = detail::get_bytes(bytes, pos, detail::get_u32(bytes, pos));
    if (pos != bytes.size()) throw FormatError(0, "trailing bytes after index trailer");
    auto meta = nlohmann::json::parse(trailer, nullptr, false);
    if (meta.is_discarded() || !meta.is_object()) throw FormatError(0, "bad index trailer");
    const auto kind = meta.value("embedder", std::string{});
    if (kind != "hash" && kind != "remote") throw FormatError(0, "unknown embedder kind in index");
    parsed.meta.embedder.kind = kind == "hash" ? EmbedderKind::hash : EmbedderKind::remote;
    parsed.meta.embedder.dim = dim;
    if (meta.contains("endpoint") && meta["endpoint"].is_string()) {
        parsed.meta.embedder.endpoint = meta["endpoint"].get<std::string>();
    }
    if (!meta.contains("corpus") || !meta["corpus"].is_string()) throw FormatError(0, "index trailer lacks corpus");
    parsed.meta.corpus_path = meta["corpus"].get<std::string>();
    return parsed;
}

/// Writes via a temporary sibling and rename so readers never see a partial file.
inline void write_index_file(const std::filesystem::path& path, const VectorIndex& index,
                             const std::string& corpus_path) {
    const std::string bytes = serialize_index(index, corpus_path);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename index into place: " + path.string());
    }
}

inline ParsedIndex read_index_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_index(bytes);
}

/// Loads an index file and the corpus it names (or `corpus_override`).
inline VectorIndex load_index(const std::filesystem::path& path,
                              const std::optional<std::filesystem::path>& corpus_override = std::nullopt) {
    auto parsed = read_index_file(path);
    auto corpus = std::make_shared<const std::vector<Document>>(
        load_corpus(corpus_override ? *corpus_override : std::filesystem::path(parsed.meta.corpus_path)));
    return VectorIndex(parsed.meta.embedder, std::move(parsed.entries), std::move(corpus));
}

}  // namespace searchgym
