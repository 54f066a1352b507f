#pragma once

/** \file retrieval.hpp
 *  \brief Exhaustive top-k search and weighted query augmentation (WQA).
 *
 * Candidates are the union of the postings of the query tokens; every
 * candidate is scored and results are ordered by score descending, then by
 * internal doc id ascending.
 */

#include "bmx/index.hpp"
#include "bmx/scoring.hpp"
#include "bmx/text_pipeline.hpp"

#include <string>
#include <vector>

namespace bmx {

struct ScoredHit {
    std::string external_id;
    DocId internal_id = 0;
    double score = 0.0;

    friend bool operator==(const ScoredHit&, const ScoredHit&) = default;
};

/// The result order: score descending, internal id ascending.
[[nodiscard]] inline bool ranks_before(const ScoredHit& a, const ScoredHit& b) noexcept {
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.internal_id < b.internal_id;
}

struct WeightedQuery {
    std::string text;
    double weight = 0.5;
};

struct AugmentedQuerySet {
    std::string original;
    std::vector<WeightedQuery> augmented;

    /// Throws ConfigError if a weight lies outside [0,1].
    void validate() const;
};

inline constexpr double kDefaultAugmentationWeight = 0.5;

/// Scores of every candidate of one query, indexed by internal doc id.
/// `scores[d]` is meaningful only for d in `candidates` (and 0 elsewhere).
struct CandidateScores {
    std::vector<double> scores;
    std::vector<DocId> candidates; ///< ascending
};

/// Accumulates the scores of all token-matching documents in one pass over the
/// postings. Every score equals score_document() bit for bit.
[[nodiscard]] CandidateScores score_candidates(const QueryPlan& plan, const InvertedIndex& index,
                                               const ScorerConfig& config);

/// Search front end bound to one index, pipeline and scorer configuration.
class Searcher {
public:
    /// Throws ConfigError if the pipeline fingerprint differs from the one the
    /// index was built with, or the scorer parameters are invalid.
    Searcher(const InvertedIndex& index, PipelineConfig pipeline, ScorerConfig scorer);

    /// Throws ContractViolation for k == 0. Empty or unmatched queries give [].
    [[nodiscard]] std::vector<ScoredHit> search(std::string_view query, std::size_t k) const;

    /// score(D, Q) + sum_i w_i * score(D, Q_i) over the union of candidates,
    /// ranked once. Zero-weight augmentations are ignored.
    [[nodiscard]] std::vector<ScoredHit> search_wqa(const AugmentedQuerySet& queries, std::size_t k) const;

    /// Candidate scores of one query string (normalized if configured).
    [[nodiscard]] CandidateScores score_query(std::string_view query) const;

    [[nodiscard]] const InvertedIndex& index() const noexcept { return *index_; }
    [[nodiscard]] const ScorerConfig& scorer() const noexcept { return scorer_; }
    [[nodiscard]] const PipelineConfig& pipeline() const noexcept { return pipeline_; }

private:
    [[nodiscard]] std::vector<ScoredHit> top_k(const CandidateScores& scored, std::size_t k) const;

    const InvertedIndex* index_;
    PipelineConfig pipeline_;
    ScorerConfig scorer_;
};

[[nodiscard]] std::vector<ScoredHit> search_topk(std::string_view query, std::size_t k, const InvertedIndex& index,
                                                 const PipelineConfig& pipeline, const ScorerConfig& scorer);

[[nodiscard]] std::vector<ScoredHit> search_wqa(const AugmentedQuerySet& queries, std::size_t k,
                                                const InvertedIndex& index, const PipelineConfig& pipeline,
                                                const ScorerConfig& scorer);

} // namespace bmx
