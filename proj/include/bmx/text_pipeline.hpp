#pragma once

/** \file text_pipeline.hpp
 *  \brief Text to token-sequence transformation shared by indexing and querying.
 *
 * The pipeline runs, in order: segmentation, lowercasing, stopword removal,
 * stemming, and a second stopword pass over the stems. Stemming is iterated
 * to a fixed point so that feeding the output back through the pipeline
 * reproduces it unchanged.
 *
 * All functions here are pure; a PipelineConfig may be shared across threads.
 */

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace bmx {

enum class Stemmer { none, porter_english };
enum class TokenSplitter { unicode_words, whitespace };

using StopwordSet = std::set<std::string, std::less<>>;

/// The built-in English stopword list (see data/english_stopwords.txt).
[[nodiscard]] const StopwordSet& english_stopwords();

/// Reads one stopword per line; blank lines and lines starting with '#' are skipped.
[[nodiscard]] StopwordSet load_stopword_file(const std::string& path);

struct PipelineConfig {
    bool lowercase = true;
    bool strip_punctuation = true;
    StopwordSet stopwords = english_stopwords();
    Stemmer stemmer = Stemmer::porter_english;
    TokenSplitter token_splitter = TokenSplitter::unicode_words;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// 64-bit fingerprint of every field of the config. Stable across runs and platforms.
[[nodiscard]] std::uint64_t fingerprint(const PipelineConfig& config);

[[nodiscard]] Stemmer parse_stemmer(std::string_view name);
[[nodiscard]] TokenSplitter parse_token_splitter(std::string_view name);
[[nodiscard]] std::string_view to_string(Stemmer stemmer);
[[nodiscard]] std::string_view to_string(TokenSplitter splitter);

struct TokenSeq {
    std::vector<std::string> tokens;

    [[nodiscard]] std::size_t length() const noexcept { return tokens.size(); }
    [[nodiscard]] bool empty() const noexcept { return tokens.empty(); }

    friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

[[nodiscard]] TokenSeq tokenize(std::string_view text, const PipelineConfig& config);

/// Single application of the original Porter (1980) suffix-stripping algorithm.
/// Expects lowercase ASCII input; other bytes are treated as consonants.
[[nodiscard]] std::string porter_stem(std::string_view word);

} // namespace bmx
