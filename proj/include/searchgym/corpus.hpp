#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchgym/errors.hpp"

namespace searchgym {

struct Document {
    std::string doc_id;
    std::string title;
    std::string text;

    friend bool operator==(const Document&, const Document&) = default;
};

struct QaSample {
    std::string sample_id;
    std::string question;
    std::string gold_answer;
    std::vector<std::string> answer_aliases;
    int hop_count = 2;
    std::vector<std::string> supporting_doc_ids;

    friend bool operator==(const QaSample&, const QaSample&) = default;
};

inline constexpr std::array<int, 3> kHopClasses{2, 3, 4};

/// Target size and per-class fractions for a hop-stratified subset.
struct HopMix {
    std::size_t total = 0;
    double fraction_2hop = 0.0;
    double fraction_3hop = 0.0;
    double fraction_4hop = 0.0;

    /// Exact ratios from per-class counts, e.g. {7000, 2150, 1175}.
    static HopMix from_counts(std::size_t n2, std::size_t n3, std::size_t n4) {
        const std::size_t total = n2 + n3 + n4;
        if (total == 0) return HopMix{0, 1.0, 0.0, 0.0};
        const auto t = static_cast<double>(total);
        return HopMix{total, static_cast<double>(n2) / t, static_cast<double>(n3) / t,
                      static_cast<double>(n4) / t};
    }

    void validate() const {
        const std::array<double, 3> f{fraction_2hop, fraction_3hop, fraction_4hop};
        for (double x : f) {
            if (!(x >= 0.0)) throw InvalidConfigError("hop fractions must be non-negative");
        }
        if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw InvalidConfigError("hop fractions must sum to 1");
    }
};

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw FormatError(line, std::string("missing key \"") + key + "\"");
    return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key, std::size_t line) {
    const auto& v = require_key(obj, key, line);
    if (!v.is_string()) throw FormatError(line, std::string("key \"") + key + "\" must be a string");
    return v.get<std::string>();
}

inline std::vector<std::string> require_string_list(const nlohmann::json& obj, const char* key, std::size_t line) {
    const auto& v = require_key(obj, key, line);
    if (!v.is_array()) throw FormatError(line, std::string("key \"") + key + "\" must be an array");
    std::vector<std::string> out;
    out.reserve(v.size());
    for (const auto& item : v) {
        if (!item.is_string()) throw FormatError(line, std::string("key \"") + key + "\" must hold strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

/// Calls `fn(json, line_no)` for each non-blank line of a JSONL stream.
template <typename Fn>
void for_each_jsonl(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto parsed = nlohmann::json::parse(line, nullptr, false);
        if (parsed.is_discarded()) throw FormatError(line_no, "invalid JSON");
        if (!parsed.is_object()) throw FormatError(line_no, "expected a JSON object");
        fn(parsed, line_no);
    }
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

}  // namespace detail

inline std::vector<Document> read_corpus(std::istream& in) {
    std::vector<Document> docs;
    std::unordered_set<std::string> ids;
    detail::for_each_jsonl(in, [&](const nlohmann::json& obj, std::size_t line) {
        Document doc{detail::require_string(obj, "doc_id", line), detail::require_string(obj, "title", line),
                     detail::require_string(obj, "text", line)};
        if (doc.doc_id.empty()) throw FormatError(line, "doc_id must be non-empty");
        if (doc.text.empty() && doc.title.empty()) throw FormatError(line, "title and text are both empty");
        if (!ids.insert(doc.doc_id).second) throw DuplicateIdError(doc.doc_id);
        docs.push_back(std::move(doc));
    });
    return docs;
}

inline std::vector<Document> load_corpus(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_corpus(in);
}

inline void write_corpus(std::ostream& out, const std::vector<Document>& docs) {
    for (const auto& d : docs) {
        nlohmann::ordered_json obj;
        obj["doc_id"] = d.doc_id;
        obj["title"] = d.title;
        obj["text"] = d.text;
        out << obj.dump() << '\n';
    }
}

/// Non-fatal findings: title-only stub documents.
inline std::vector<std::string> corpus_warnings(const std::vector<Document>& docs) {
    std::vector<std::string> warnings;
    for (const auto& d : docs) {
        if (d.text.empty()) warnings.push_back("document " + d.doc_id + " has empty text (title-only stub)");
    }
    return warnings;
}

/// `corpus == nullptr` skips the supporting-document check.
inline std::vector<QaSample> read_dataset(std::istream& in, const std::vector<Document>* corpus) {
    std::unordered_set<std::string_view> doc_ids;
    if (corpus) {
        doc_ids.reserve(corpus->size());
        for (const auto& d : *corpus) doc_ids.insert(d.doc_id);
    }

    std::vector<QaSample> samples;
    std::unordered_set<std::string> sample_ids;
    detail::for_each_jsonl(in, [&](const nlohmann::json& obj, std::size_t line) {
        QaSample s;
        s.sample_id = detail::require_string(obj, "sample_id", line);
        s.question = detail::require_string(obj, "question", line);
        s.gold_answer = detail::require_string(obj, "gold_answer", line);
        s.answer_aliases = detail::require_string_list(obj, "answer_aliases", line);
        const auto& hop = detail::require_key(obj, "hop_count", line);
        if (!hop.is_number_integer()) throw FormatError(line, "hop_count must be an integer");
        const auto hops = hop.get<std::int64_t>();
        if (hops < 2 || hops > 4) throw FormatError(line, "hop_count must be 2, 3 or 4");
        s.hop_count = static_cast<int>(hops);
        s.supporting_doc_ids = detail::require_string_list(obj, "supporting_doc_ids", line);
        if (s.sample_id.empty()) throw FormatError(line, "sample_id must be non-empty");
        if (s.supporting_doc_ids.empty()) throw FormatError(line, "supporting_doc_ids must be non-empty");
        for (const auto& id : s.supporting_doc_ids) {
            if (corpus && !doc_ids.contains(id)) throw DanglingReferenceError(id);
        }
        if (!sample_ids.insert(s.sample_id).second) throw DuplicateIdError(s.sample_id);
        samples.push_back(std::move(s));
    });
    return samples;
}

inline std::vector<QaSample> read_dataset(std::istream& in, const std::vector<Document>& corpus) {
    return read_dataset(in, &corpus);
}

inline std::vector<QaSample> load_dataset(const std::filesystem::path& path, const std::vector<Document>& corpus) {
    auto in = detail::open_input(path);
    return read_dataset(in, &corpus);
}

/// Schema checks only; supporting doc ids are not resolved.
inline std::vector<QaSample> load_dataset_unverified(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_dataset(in, nullptr);
}

inline void write_dataset(std::ostream& out, const std::vector<QaSample>& samples) {
    for (const auto& s : samples) {
        nlohmann::ordered_json obj;
        obj["sample_id"] = s.sample_id;
        obj["question"] = s.question;
        obj["gold_answer"] = s.gold_answer;
        obj["answer_aliases"] = s.answer_aliases;
        obj["hop_count"] = s.hop_count;
        obj["supporting_doc_ids"] = s.supporting_doc_ids;
        out << obj.dump() << '\n';
    }
}

/// Largest-remainder apportionment of `mix.total` over the hop classes.
/// Remainder ties go to the smaller hop count.
inline std::array<std::size_t, 3> hop_class_counts(const HopMix& mix) {
    mix.validate();
    const std::array<double, 3> fractions{mix.fraction_2hop, mix.fraction_3hop, mix.fraction_4hop};
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double quota = static_cast<double>(mix.total) * fractions[i];
        counts[i] = static_cast<std::size_t>(std::floor(quota));
        remainders[i] = quota - std::floor(quota);
        assigned += counts[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    for (std::size_t k = 0; assigned < mix.total; k = (k + 1) % 3) {
        ++counts[order[k]];
        ++assigned;
    }
    return counts;
}

namespace detail {

/// Fisher-Yates with an explicit bounded draw so results do not depend on
/// the standard library's distribution implementation.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::uint64_t bound = i;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t draw = rng();
        while (draw >= limit) draw = rng();
        std::swap(items[i - 1], items[static_cast<std::size_t>(draw % bound)]);
    }
}

}  // namespace detail

/// Seeded, hop-stratified subset. Selection runs over the pool sorted by
/// sample_id, so the result does not depend on the pool's order.
inline std::vector<QaSample> sample_by_hops(const std::vector<QaSample>& pool, const HopMix& mix,
                                            std::uint64_t seed) {
    if (mix.total == 0) return {};
    const auto targets = hop_class_counts(mix);

    std::vector<const QaSample*> sorted;
    sorted.reserve(pool.size());
    for (const auto& s : pool) sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(),
              [](const QaSample* a, const QaSample* b) { return a->sample_id < b->sample_id; });
    sorted.erase(std::unique(sorted.begin(), sorted.end(),
                             [](const QaSample* a, const QaSample* b) { return a->sample_id == b->sample_id; }),
                 sorted.end());

    std::vector<QaSample> out;
    out.reserve(mix.total);
    for (std::size_t c = 0; c < kHopClasses.size(); ++c) {
        const int hops = kHopClasses[c];
        std::vector<const QaSample*> members;
        for (const QaSample* s : sorted) {
            if (s->hop_count == hops) members.push_back(s);
        }
        if (members.size() < targets[c]) throw InsufficientPoolError(hops, targets[c], members.size());
        detail::seeded_shuffle(members, seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(hops)));
        for (std::size_t i = 0; i < targets[c]; ++i) out.push_back(*members[i]);
    }
    return out;
}

}  // namespace searchgym
