#pragma once

/** \file scoring.hpp
 *  \brief Ranking functions: BMX, five BM25 kernels, score normalization,
 *  and the per-query entropy/similarity statistics BMX needs.
 *
 * BMX score of a document D for query tokens q_1..q_m:
 *
 *   sum_i  IDF(q_i) * F(q_i,D)(alpha+1) / (F(q_i,D) + alpha*|D|/avgdl + alpha*Ebar)
 *        + beta * E(q_i) * S(Q,D)
 *
 *   IDF(q)   = ln((n - l + 0.5)/(l + 0.5) + 1)
 *   E~(q)    = -sum_j p_j ln p_j,  p_j = sigmoid(F(q, D_j)) over documents containing q
 *   E(q_i)   = E~(q_i) / max_k E~(q_k)          (0 for every token if the max is 0)
 *   Ebar     = mean of E(q_i) over the m token occurrences
 *   S(Q,D)   = |unique query tokens present in D| / m
 *
 * The sum runs over all m token occurrences, so repeated query tokens count
 * once per occurrence. Every score is evaluated in a fixed order (term-frequency
 * part over i, then similarity part over i) so the per-document scorer and the
 * accumulating search path produce bit-identical doubles.
 *
 * Logarithms are natural everywhere.
 */

#include "bmx/error.hpp"
#include "bmx/index.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bmx {

enum class Algorithm { bmx, bm25 };
enum class Bm25Kernel { robertson, atire, bm25plus, bm25l, lucene };

[[nodiscard]] Algorithm parse_algorithm(std::string_view name);
[[nodiscard]] Bm25Kernel parse_kernel(std::string_view name);
[[nodiscard]] std::string_view to_string(Algorithm algo);
[[nodiscard]] std::string_view to_string(Bm25Kernel kernel);

struct BmxParams {
    double alpha = 1.0;
    double beta = 0.0;

    /// Throws ConfigError unless alpha > 0 and beta >= 0.
    void validate() const;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    /// Lower-bound shift for bm25l/bm25plus. Defaults to 0.5 (bm25l) or 1.0 (bm25plus).
    std::optional<double> delta;
    Bm25Kernel kernel = Bm25Kernel::robertson;

    [[nodiscard]] double effective_delta() const noexcept;
    /// Throws ConfigError unless k1 >= 0, b in [0,1], delta >= 0.
    void validate() const;
};

/// ln((n - l + 0.5)/(l + 0.5) + 1). Throws ContractViolation if l > n or n == 0.
[[nodiscard]] double idf(std::size_t doc_frequency, std::size_t doc_count);

/// -p ln p with p = sigmoid(tf): the entropy contributed by one posting.
[[nodiscard]] double posting_entropy(double tf) noexcept;

[[nodiscard]] double token_raw_entropy(std::span<const Posting> postings) noexcept;

/// max(min(1.5, avgdl/100), 0.5). Throws ContractViolation unless avgdl > 0.
[[nodiscard]] double default_alpha(double avg_doc_length);

/// 1 / ln(1 + n). Throws ContractViolation for n == 0.
[[nodiscard]] double default_beta(std::size_t doc_count);

struct QueryTerm {
    std::string token;
    std::optional<std::uint32_t> term_id; ///< nullopt when the token is not indexed
    std::size_t doc_frequency = 0;
    double idf = 0.0;
    double raw_entropy = 0.0;
    double norm_entropy = 0.0;
};

/// Per-query statistics, computed once per unique token and shared by every
/// occurrence of that token.
class QueryPlan {
public:
    /// Number of token occurrences (m).
    [[nodiscard]] std::size_t size() const noexcept { return occurrence_terms_.size(); }
    [[nodiscard]] bool empty() const noexcept { return occurrence_terms_.empty(); }

    [[nodiscard]] const std::vector<QueryTerm>& unique_terms() const noexcept { return terms_; }
    /// The unique term behind occurrence i.
    [[nodiscard]] const QueryTerm& term(std::size_t occurrence) const { return terms_.at(occurrence_terms_.at(occurrence)); }
    [[nodiscard]] std::span<const std::size_t> occurrence_terms() const noexcept { return occurrence_terms_; }

    [[nodiscard]] double avg_entropy() const noexcept { return avg_entropy_; }
    [[nodiscard]] const InvertedIndex* source() const noexcept { return source_; }

private:
    friend QueryPlan build_query_plan(const TokenSeq& query_tokens, const InvertedIndex& index);

    std::vector<QueryTerm> terms_;
    std::vector<std::size_t> occurrence_terms_;
    double avg_entropy_ = 0.0;
    const InvertedIndex* source_ = nullptr;
};

/// Throws ContractViolation for an empty index. An empty token sequence gives m = 0.
[[nodiscard]] QueryPlan build_query_plan(const TokenSeq& query_tokens, const InvertedIndex& index);

/// |unique query tokens contained in `doc_tokens`| / m. Throws ContractViolation for m = 0.
template <class TokenSet>
[[nodiscard]] double similarity(const QueryPlan& plan, const TokenSet& doc_tokens);

/// Similarity against an indexed document, read from the postings.
[[nodiscard]] double similarity(const QueryPlan& plan, const InvertedIndex& index, DocId doc);

// Single-posting building blocks shared by the per-document scorers and the
// accumulating search path.

[[nodiscard]] inline double bmx_tf_component(double idf, double tf, double relative_length, double alpha,
                                             double avg_entropy) noexcept {
    return idf * (tf * (alpha + 1.0)) / (tf + alpha * relative_length + alpha * avg_entropy);
}

/// IDF as defined by the given BM25 kernel.
[[nodiscard]] double kernel_idf(Bm25Kernel kernel, std::size_t doc_frequency, std::size_t doc_count);

/// Term-frequency component of the given BM25 kernel (for tf >= 1).
[[nodiscard]] double kernel_tf(const Bm25Params& params, double tf, double relative_length) noexcept;

/// beta * E(q_i) * S summed over occurrences, in occurrence order.
[[nodiscard]] double bmx_similarity_part(const QueryPlan& plan, double beta, double similarity) noexcept;

/// Throws ContractViolation if the plan was built against a different index
/// or the document id is out of range.
[[nodiscard]] double bmx_score(DocId doc, const QueryPlan& plan, const InvertedIndex& index, const BmxParams& params);
[[nodiscard]] double bm25_score(DocId doc, const QueryPlan& plan, const InvertedIndex& index,
                                const Bm25Params& params);

/// Estimated upper bound of a query's score: m * (ln(1 + (n - 0.5)/1.5) + 1) for
/// BMX, m * ln(1 + (n - 0.5)/1.5) for BM25.
[[nodiscard]] double max_score_estimate(std::size_t m, std::size_t n, Algorithm algo);

/// raw / max_estimate. Not clamped: the estimate can be exceeded.
[[nodiscard]] double normalize_score(double raw, double max_estimate);

/// Algorithm selection plus optional parameter overrides. Unset alpha/beta
/// resolve to default_alpha/default_beta from the index statistics.
struct ScorerConfig {
    Algorithm algo = Algorithm::bmx;
    std::optional<double> alpha;
    std::optional<double> beta;
    Bm25Params bm25;
    bool normalize = false;
};

[[nodiscard]] BmxParams resolve_bmx_params(const ScorerConfig& config, const InvertedIndex& index);

/// Score of one document under `config` (normalized when config.normalize is set).
[[nodiscard]] double score_document(DocId doc, const QueryPlan& plan, const InvertedIndex& index,
                                    const ScorerConfig& config);

template <class TokenSet>
double similarity(const QueryPlan& plan, const TokenSet& doc_tokens) {
    if (plan.empty()) {
        throw ContractViolation("similarity: query has no tokens");
    }
    std::size_t shared = 0;
    for (const auto& t : plan.unique_terms()) {
        if (doc_tokens.contains(t.token)) {
            ++shared;
        }
    }
    return static_cast<double>(shared) / static_cast<double>(plan.size());
}

} // namespace bmx
