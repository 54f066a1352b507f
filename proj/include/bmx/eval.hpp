#pragma once

/** \file eval.hpp
 *  \brief BEIR-format datasets, NDCG@k / recall@k, and evaluation runs with timing.
 *
 * Directory layout: corpus.jsonl, queries.jsonl and a qrels TSV
 * (query-id, corpus-id, score; an optional header line is skipped).
 */

#include "bmx/augmentation.hpp"
#include "bmx/index.hpp"
#include "bmx/retrieval.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bmx {

/// query id -> (doc id -> relevance grade >= 0)
using QueryJudgments = std::map<std::string, int, std::less<>>;
using Qrels = std::map<std::string, QueryJudgments, std::less<>>;

struct Query {
    std::string id;
    std::string text;
};

struct BeirDataset {
    std::string name;
    std::vector<Document> corpus;
    std::vector<Query> queries;
    Qrels qrels;                       ///< only judgments whose query and doc ids resolve
    std::vector<std::string> warnings; ///< dangling ids and other skipped input
};

[[nodiscard]] std::vector<Query> read_queries_jsonl(const std::filesystem::path& path);

/// Reads a qrels file. Grades must be non-negative integers.
[[nodiscard]] Qrels read_qrels(const std::filesystem::path& path);

/// Loads <dir>/corpus.jsonl, <dir>/queries.jsonl and the qrels file
/// (default <dir>/qrels/test.tsv). Throws DataError naming the missing file
/// or the malformed line.
[[nodiscard]] BeirDataset load_beir_dataset(const std::filesystem::path& dir,
                                            const std::optional<std::filesystem::path>& qrels_path = std::nullopt);

enum class Gain { exponential, linear };

/// DCG@k / IDCG@k with gain 2^g - 1 (or g) and discount 1/log2(rank + 1).
/// nullopt when the query has no positive judgment. Throws ContractViolation for k == 0.
[[nodiscard]] std::optional<double> ndcg_at_k(std::span<const std::string> ranked, const QueryJudgments& judged,
                                              std::size_t k, Gain gain = Gain::exponential);

/// |relevant in top k| / |relevant|, relevant meaning grade >= 1.
[[nodiscard]] std::optional<double> recall_at_k(std::span<const std::string> ranked, const QueryJudgments& judged,
                                                std::size_t k);

struct EvalOptions {
    PipelineConfig pipeline;
    ScorerConfig scorer;
    std::size_t k = 10;
    Gain gain = Gain::exponential;
    unsigned threads = 0; ///< 0 = hardware concurrency
    bool single_thread = false;
    const AugmentationMap* augmentations = nullptr; ///< enables WQA when set
    double default_weight = kDefaultAugmentationWeight;
};

struct QueryResult {
    std::string query_id;
    double ndcg = 0.0;
    double recall = 0.0;
    double search_ms = 0.0;
    std::optional<std::string> error;
};

struct EvalRun {
    std::string dataset;
    Algorithm algo = Algorithm::bmx;
    ScorerConfig scorer;        ///< as configured
    BmxParams resolved_bmx;     ///< alpha/beta after default resolution
    std::uint64_t pipeline_fingerprint = 0;
    std::size_t k = 10;
    bool wqa = false;

    std::vector<QueryResult> per_query; ///< evaluated and failed queries, in input order
    std::size_t evaluated = 0;
    std::size_t failures = 0;
    double ndcg_mean = 0.0;
    double recall_mean = 0.0;

    double index_seconds = 0.0;
    double search_seconds = 0.0;
    double search_ms_mean = 0.0;
};

/// Builds the index from the dataset corpus, then evaluates every judged query.
[[nodiscard]] EvalRun run_eval(const BeirDataset& dataset, const EvalOptions& options);

/// Evaluates against an index already built from the dataset corpus.
[[nodiscard]] EvalRun run_eval(const BeirDataset& dataset, const InvertedIndex& index, const EvalOptions& options,
                               double index_seconds = 0.0);

/// Metrics (no timing) as pretty-printed JSON.
[[nodiscard]] std::string eval_json(const EvalRun& run);

/// CSV with header dataset,algo,index_s,search_ms_mean. Throws DataError
/// ("no queries evaluated") if a run evaluated nothing.
[[nodiscard]] std::string timing_csv(std::span<const EvalRun> runs);
[[nodiscard]] std::string timing_table(std::span<const EvalRun> runs);

/// Display name of the scorer, e.g. "bmx" or "bm25-robertson".
[[nodiscard]] std::string algo_label(const ScorerConfig& scorer);

} // namespace bmx
