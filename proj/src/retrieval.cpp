#include "bmx/retrieval.hpp"

#include "bmx/error.hpp"

#include <algorithm>
#include <sstream>

namespace bmx {

void AugmentedQuerySet::validate() const {
    for (std::size_t i = 0; i < augmented.size(); ++i) {
        const double w = augmented[i].weight;
        if (!(w >= 0.0 && w <= 1.0)) {
            std::ostringstream msg;
            msg << "augmentation weight " << w << " for augmented query " << i << " is outside [0,1]";
            throw ConfigError(msg.str());
        }
    }
}

CandidateScores score_candidates(const QueryPlan& plan, const InvertedIndex& index, const ScorerConfig& config) {
    if (plan.source() != &index) {
        throw ContractViolation("query plan was built against a different index");
    }
    CandidateScores out;
    out.scores.assign(index.doc_count(), 0.0);
    if (plan.empty()) {
        return out;
    }

    const auto& terms = plan.unique_terms();
    std::vector<std::uint32_t> matched(index.doc_count(), 0);
    for (const auto& term : terms) {
        if (!term.term_id) {
            continue;
        }
        for (const auto& p : index.postings_by_id(*term.term_id)) {
            if (matched[p.doc_id]++ == 0) {
                out.candidates.push_back(p.doc_id);
            }
        }
    }
    if (out.candidates.empty()) {
        return out;
    }
    std::sort(out.candidates.begin(), out.candidates.end());

    const double avgdl = index.avg_doc_length();
    const auto lengths = index.doc_lengths();
    auto& acc = out.scores;

    if (config.algo == Algorithm::bmx) {
        const auto params = resolve_bmx_params(config, index);
        for (auto slot : plan.occurrence_terms()) {
            const auto& term = terms[slot];
            if (!term.term_id) {
                continue;
            }
            for (const auto& p : index.postings_by_id(*term.term_id)) {
                const double rel = static_cast<double>(lengths[p.doc_id]) / avgdl;
                acc[p.doc_id] += bmx_tf_component(term.idf, static_cast<double>(p.tf), rel, params.alpha,
                                                  plan.avg_entropy());
            }
        }
        const double m = static_cast<double>(plan.size());
        for (auto d : out.candidates) {
            acc[d] += bmx_similarity_part(plan, params.beta, static_cast<double>(matched[d]) / m);
        }
    } else {
        config.bm25.validate();
        for (auto slot : plan.occurrence_terms()) {
            const auto& term = terms[slot];
            if (!term.term_id) {
                continue;
            }
            const double w = kernel_idf(config.bm25.kernel, term.doc_frequency, index.doc_count());
            for (const auto& p : index.postings_by_id(*term.term_id)) {
                const double rel = static_cast<double>(lengths[p.doc_id]) / avgdl;
                acc[p.doc_id] += w * kernel_tf(config.bm25, static_cast<double>(p.tf), rel);
            }
        }
    }

    if (config.normalize) {
        const double max = max_score_estimate(plan.size(), index.doc_count(), config.algo);
        for (auto d : out.candidates) {
            acc[d] = normalize_score(acc[d], max);
        }
    }
    return out;
}

Searcher::Searcher(const InvertedIndex& index, PipelineConfig pipeline, ScorerConfig scorer)
    : index_(&index), pipeline_(std::move(pipeline)), scorer_(std::move(scorer)) {
    if (fingerprint(pipeline_) != index.pipeline_fingerprint()) {
        std::ostringstream msg;
        msg << "text pipeline mismatch: index was built with pipeline fingerprint " << std::hex
            << index.pipeline_fingerprint() << ", search configured with " << fingerprint(pipeline_);
        throw ConfigError(msg.str());
    }
    if (scorer_.algo == Algorithm::bmx) {
        BmxParams explicit_params;
        explicit_params.alpha = scorer_.alpha.value_or(1.0);
        explicit_params.beta = scorer_.beta.value_or(0.0);
        explicit_params.validate();
    } else {
        scorer_.bm25.validate();
    }
}

CandidateScores Searcher::score_query(std::string_view query) const {
    if (index_->empty()) {
        return {};
    }
    const auto plan = build_query_plan(tokenize(query, pipeline_), *index_);
    return score_candidates(plan, *index_, scorer_);
}

std::vector<ScoredHit> Searcher::top_k(const CandidateScores& scored, std::size_t k) const {
    std::vector<ScoredHit> hits;
    hits.reserve(scored.candidates.size());
    for (auto d : scored.candidates) {
        hits.push_back({{}, d, scored.scores[d]});
    }
    const auto keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), ranks_before);
    hits.resize(keep);
    for (auto& h : hits) {
        h.external_id = index_->external_id(h.internal_id);
    }
    return hits;
}

std::vector<ScoredHit> Searcher::search(std::string_view query, std::size_t k) const {
    if (k == 0) {
        throw ContractViolation("search: k must be >= 1");
    }
    return top_k(score_query(query), k);
}

std::vector<ScoredHit> Searcher::search_wqa(const AugmentedQuerySet& queries, std::size_t k) const {
    if (k == 0) {
        throw ContractViolation("search: k must be >= 1");
    }
    queries.validate();
    auto combined = score_query(queries.original);
    if (index_->empty()) {
        return {};
    }

    std::vector<char> seen(index_->doc_count(), 0);
    for (auto d : combined.candidates) {
        seen[d] = 1;
    }
    bool grew = false;
    for (const auto& aug : queries.augmented) {
        if (aug.weight == 0.0) {
            continue;
        }
        const auto part = score_query(aug.text);
        for (auto d : part.candidates) {
            combined.scores[d] += aug.weight * part.scores[d];
            if (!seen[d]) {
                seen[d] = 1;
                combined.candidates.push_back(d);
                grew = true;
            }
        }
    }
    if (grew) {
        std::sort(combined.candidates.begin(), combined.candidates.end());
    }
    return top_k(combined, k);
}

std::vector<ScoredHit> search_topk(std::string_view query, std::size_t k, const InvertedIndex& index,
                                   const PipelineConfig& pipeline, const ScorerConfig& scorer) {
    return Searcher(index, pipeline, scorer).search(query, k);
}

std::vector<ScoredHit> search_wqa(const AugmentedQuerySet& queries, std::size_t k, const InvertedIndex& index,
                                  const PipelineConfig& pipeline, const ScorerConfig& scorer) {
    return Searcher(index, pipeline, scorer).search_wqa(queries, k);
}

} // namespace bmx
