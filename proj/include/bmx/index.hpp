#pragma once

/** \file index.hpp
 *  \brief Immutable inverted index with the corpus statistics every scorer needs.
 *
 * Postings are stored in one flat array, grouped by term (terms sorted
 * lexicographically) and sorted by internal doc id within each term.
 * Internal doc ids are dense and follow ingestion order.
 *
 * Thread-safety: an InvertedIndex is never mutated after construction and
 * may be shared by any number of concurrent readers.
 */

#include "bmx/text_pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bmx {

using DocId = std::uint32_t;

struct Posting {
    DocId doc_id = 0;
    std::uint32_t tf = 0; ///< occurrences of the term in the document, always >= 1

    friend bool operator==(const Posting&, const Posting&) = default;
};

struct Document {
    std::string external_id;
    std::string text;
};

namespace detail {
struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
};
template <class V>
using StringMap = std::unordered_map<std::string, V, StringHash, std::equal_to<>>;
} // namespace detail

class InvertedIndex {
public:
    InvertedIndex() = default;

    [[nodiscard]] std::size_t doc_count() const noexcept { return doc_lengths_.size(); }
    [[nodiscard]] bool empty() const noexcept { return doc_lengths_.empty(); }
    /// 0 for an empty corpus; callers must not divide by it in that case.
    [[nodiscard]] double avg_doc_length() const noexcept { return avg_doc_length_; }
    [[nodiscard]] std::uint64_t total_length() const noexcept { return total_length_; }
    [[nodiscard]] std::span<const std::uint32_t> doc_lengths() const noexcept { return doc_lengths_; }
    [[nodiscard]] std::uint32_t doc_length(DocId doc) const { return doc_lengths_.at(doc); }

    [[nodiscard]] std::size_t vocabulary_size() const noexcept { return terms_.size(); }
    [[nodiscard]] std::size_t posting_count() const noexcept { return postings_.size(); }
    /// Sorted term dictionary.
    [[nodiscard]] const std::vector<std::string>& terms() const noexcept { return terms_; }
    [[nodiscard]] std::optional<std::uint32_t> term_id(std::string_view term) const;
    [[nodiscard]] std::span<const Posting> postings(std::string_view term) const;
    [[nodiscard]] std::span<const Posting> postings_by_id(std::uint32_t term_id) const;
    /// Number of documents containing the term (l in the IDF formula).
    [[nodiscard]] std::size_t doc_frequency(std::string_view term) const { return postings(term).size(); }
    /// Occurrences of `term` in `doc` (0 if absent). Binary search over the postings.
    [[nodiscard]] std::uint32_t term_frequency(std::string_view term, DocId doc) const;

    [[nodiscard]] const std::string& external_id(DocId doc) const { return external_ids_.at(doc); }
    [[nodiscard]] std::optional<DocId> internal_id(std::string_view external) const;

    [[nodiscard]] std::uint64_t pipeline_fingerprint() const noexcept { return pipeline_fingerprint_; }

    /// Throws DataError naming the first violated structural invariant.
    void check_invariants() const;

    friend bool operator==(const InvertedIndex& a, const InvertedIndex& b);

private:
    friend class IndexBuilder;
    friend InvertedIndex load_index(const std::filesystem::path& path);

    void rebuild_lookup_tables();

    std::vector<std::string> terms_;
    std::vector<std::uint64_t> term_offsets_{0}; ///< size vocabulary_size()+1
    std::vector<Posting> postings_;
    std::vector<std::uint32_t> doc_lengths_;
    std::vector<std::string> external_ids_;
    std::uint64_t total_length_ = 0;
    double avg_doc_length_ = 0.0;
    std::uint64_t pipeline_fingerprint_ = 0;

    detail::StringMap<std::uint32_t> term_lookup_;
    detail::StringMap<DocId> id_lookup_;
};

/// Incremental construction from already-tokenized documents, in ingestion order.
class IndexBuilder {
public:
    explicit IndexBuilder(std::uint64_t pipeline_fingerprint) : fingerprint_(pipeline_fingerprint) {}

    /// Throws DataError if `external_id` was already added.
    DocId add(std::string external_id, const TokenSeq& tokens);

    /// Consumes the builder.
    [[nodiscard]] InvertedIndex finish() &&;

private:
    std::uint64_t fingerprint_;
    detail::StringMap<std::vector<Posting>> postings_;
    detail::StringMap<DocId> ids_;
    std::vector<std::string> external_ids_;
    std::vector<std::uint32_t> doc_lengths_;
};

struct BuildOptions {
    /// Worker threads used for tokenization; the index is identical for any value.
    unsigned threads = 1;
};

[[nodiscard]] InvertedIndex build_index(std::span<const Document> docs, const PipelineConfig& config,
                                        const BuildOptions& options = {});

/// Single-file binary format, see docs/index_format.md.
void save_index(const InvertedIndex& index, const std::filesystem::path& path, bool overwrite = false);
[[nodiscard]] InvertedIndex load_index(const std::filesystem::path& path);

/// Reads a BEIR-style corpus JSONL (`_id`, optional `title`, `text`). Title and
/// text are joined with a single space, title first.
[[nodiscard]] std::vector<Document> read_corpus_jsonl(const std::filesystem::path& path);

inline constexpr std::uint32_t kIndexFormatVersion = 1;

} // namespace bmx
