#pragma once

// Deterministic synthetic corpora and multi-hop datasets for tests, demos and
// smoke runs. Every document title is made of words that occur nowhere else,
// so a title query finds its document at rank 1.

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "searchgym/corpus.hpp"

namespace searchgym {

struct SyntheticWorld {
    std::vector<Document> corpus;
    std::vector<QaSample> samples;
};

namespace detail {

inline constexpr std::string_view kConsonants = "bdfgklmnprstvz";
inline constexpr std::string_view kVowels = "aeiou";

/// Three consonant-vowel syllables; a bijection on [0, 70^3).
inline std::string syllable_word(std::uint64_t n) {
    constexpr std::uint64_t kSyllables = 14 * 5;
    std::string w;
    for (int i = 0; i < 3; ++i) {
        const std::uint64_t s = n % kSyllables;
        n /= kSyllables;
        w.push_back(kConsonants[s / 5]);
        w.push_back(kVowels[s % 5]);
    }
    return w;
}

inline std::string capitalized(std::string w) {
    if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
}

inline constexpr std::array<std::string_view, 40> kFiller{
    "was",     "born",    "in",      "located", "near",    "known",   "for",    "its",
    "large",   "small",   "old",     "new",     "region",  "founded", "by",     "during",
    "century", "people",  "work",    "famous",  "built",   "after",   "before", "many",
    "first",   "second",  "later",   "became",  "part",    "of",      "with",   "several",
    "local",   "history", "records", "show",    "that",    "it",      "has",    "been"};

inline std::string padded_id(char prefix, std::size_t n) {
    std::string digits = std::to_string(n);
    if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
    return prefix + digits;
}

inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

}  // namespace detail

inline std::string synthetic_filler(std::mt19937_64& rng, std::size_t words) {
    std::string s;
    for (std::size_t i = 0; i < words; ++i) {
        if (i) s += ' ';
        s += detail::kFiller[detail::bounded(rng, detail::kFiller.size())];
    }
    return s;
}

/// `n_docs` documents ("d00000"...) and `n_samples` samples with hop counts
/// cycling 2, 3, 4. The last supporting document of each sample states the answer.
inline SyntheticWorld make_synthetic_world(std::size_t n_docs, std::size_t n_samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SyntheticWorld world;
    world.corpus.reserve(n_docs);
    constexpr std::uint64_t kSpace = 70ULL * 70 * 70;
    const std::uint64_t offset = seed % kSpace;
    for (std::size_t i = 0; i < n_docs; ++i) {
        const std::string id = detail::padded_id('d', i);
        // Consecutive codes: no title word repeats across documents.
        const std::string first = detail::syllable_word((offset + 2 * i) % kSpace);
        const std::string second = detail::syllable_word((offset + 2 * i + 1) % kSpace);
        std::string title = detail::capitalized(first) + " " + detail::capitalized(second);
        // The body opens with the title so dense search on it finds the document.
        std::string text = title + " " + synthetic_filler(rng, 20 + detail::bounded(rng, 20)) + ".";
        Document doc{id, std::move(title), std::move(text)};
        world.corpus.push_back(std::move(doc));
    }
    if (n_docs < 4) return world;

    world.samples.reserve(n_samples);
    for (std::size_t j = 0; j < n_samples; ++j) {
        QaSample s;
        const std::string id = detail::padded_id('q', j);
        s.sample_id = id;
        s.hop_count = static_cast<int>(2 + j % 3);
        while (s.supporting_doc_ids.size() < static_cast<std::size_t>(s.hop_count)) {
            const auto& candidate = world.corpus[detail::bounded(rng, n_docs)].doc_id;
            if (std::find(s.supporting_doc_ids.begin(), s.supporting_doc_ids.end(), candidate) ==
                s.supporting_doc_ids.end()) {
                s.supporting_doc_ids.push_back(candidate);
            }
        }
        s.gold_answer = detail::capitalized(detail::syllable_word((offset + 7 * j + 3) % kSpace) + "x");
        s.answer_aliases = {s.gold_answer + " " + "Prime"};
        s.question = "Starting from " + world.corpus[std::stoul(s.supporting_doc_ids.front().substr(1))].title +
                     ", which name does the chain of " + std::to_string(s.hop_count) + " linked records lead to?";
        world.samples.push_back(std::move(s));
    }
    // Plant answers in the final hop documents.
    for (const auto& s : world.samples) {
        auto& doc = world.corpus[std::stoul(s.supporting_doc_ids.back().substr(1))];
        doc.text += " It is associated with " + s.gold_answer + ".";
    }
    return world;
}

}  // namespace searchgym
