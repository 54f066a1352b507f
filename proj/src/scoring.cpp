#include "bmx/scoring.hpp"

#include "bmx/error.hpp"

#include <algorithm>
#include <unordered_map>

namespace bmx {

Algorithm parse_algorithm(std::string_view name) {
    if (name == "bmx") {
        return Algorithm::bmx;
    }
    if (name == "bm25") {
        return Algorithm::bm25;
    }
    throw ConfigError("unknown algorithm '" + std::string(name) + "' (expected bmx|bm25)");
}

Bm25Kernel parse_kernel(std::string_view name) {
    if (name == "robertson") {
        return Bm25Kernel::robertson;
    }
    if (name == "atire") {
        return Bm25Kernel::atire;
    }
    if (name == "bm25plus" || name == "bm25+") {
        return Bm25Kernel::bm25plus;
    }
    if (name == "bm25l") {
        return Bm25Kernel::bm25l;
    }
    if (name == "lucene") {
        return Bm25Kernel::lucene;
    }
    throw ConfigError("unknown kernel '" + std::string(name) + "' (expected robertson|atire|bm25plus|bm25l|lucene)");
}

std::string_view to_string(Algorithm algo) { return algo == Algorithm::bmx ? "bmx" : "bm25"; }

std::string_view to_string(Bm25Kernel kernel) {
    switch (kernel) {
    case Bm25Kernel::robertson: return "robertson";
    case Bm25Kernel::atire: return "atire";
    case Bm25Kernel::bm25plus: return "bm25plus";
    case Bm25Kernel::bm25l: return "bm25l";
    case Bm25Kernel::lucene: return "lucene";
    }
    return "robertson";
}

void BmxParams::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw ConfigError("alpha must be > 0, got " + std::to_string(alpha));
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw ConfigError("beta must be >= 0, got " + std::to_string(beta));
    }
}

double Bm25Params::effective_delta() const noexcept {
    if (delta) {
        return *delta;
    }
    return kernel == Bm25Kernel::bm25l ? 0.5 : 1.0;
}

void Bm25Params::validate() const {
    if (!(k1 >= 0.0) || !std::isfinite(k1)) {
        throw ConfigError("k1 must be >= 0, got " + std::to_string(k1));
    }
    if (!(b >= 0.0 && b <= 1.0)) {
        throw ConfigError("b must be in [0,1], got " + std::to_string(b));
    }
    if (delta && (!(*delta >= 0.0) || !std::isfinite(*delta))) {
        throw ConfigError("delta must be >= 0, got " + std::to_string(*delta));
    }
}

double idf(std::size_t l, std::size_t n) {
    if (n == 0) {
        throw ContractViolation("idf: empty corpus");
    }
    if (l > n) {
        throw ContractViolation("idf: document frequency " + std::to_string(l) + " exceeds corpus size " +
                                std::to_string(n));
    }
    const double nd = static_cast<double>(n);
    const double ld = static_cast<double>(l);
    return std::log((nd - ld + 0.5) / (ld + 0.5) + 1.0);
}

double posting_entropy(double tf) noexcept {
    // -p ln p with ln p = -ln(1 + e^-tf); stays accurate as p -> 1.
    const double tail = std::exp(-tf);
    const double p = 1.0 / (1.0 + tail);
    return p * std::log1p(tail);
}

double token_raw_entropy(std::span<const Posting> postings) noexcept {
    double sum = 0.0;
    for (const auto& posting : postings) {
        sum += posting_entropy(static_cast<double>(posting.tf));
    }
    return sum;
}

double default_alpha(double avgdl) {
    if (!(avgdl > 0.0)) {
        throw ContractViolation("default_alpha: avgdl must be > 0");
    }
    return std::max(std::min(1.5, avgdl / 100.0), 0.5);
}

double default_beta(std::size_t n) {
    if (n == 0) {
        throw ContractViolation("default_beta: empty corpus");
    }
    return 1.0 / std::log(1.0 + static_cast<double>(n));
}

QueryPlan build_query_plan(const TokenSeq& query_tokens, const InvertedIndex& index) {
    if (index.empty()) {
        throw ContractViolation("build_query_plan: index is empty");
    }
    QueryPlan plan;
    plan.source_ = &index;

    std::unordered_map<std::string_view, std::size_t> slot_of;
    plan.occurrence_terms_.reserve(query_tokens.length());
    plan.terms_.reserve(query_tokens.length());
    for (const auto& token : query_tokens.tokens) {
        auto [it, inserted] = slot_of.emplace(token, plan.terms_.size());
        if (inserted) {
            QueryTerm term;
            term.token = token;
            term.term_id = index.term_id(token);
            if (term.term_id) {
                const auto list = index.postings_by_id(*term.term_id);
                term.doc_frequency = list.size();
                term.raw_entropy = token_raw_entropy(list);
            }
            term.idf = idf(term.doc_frequency, index.doc_count());
            plan.terms_.push_back(std::move(term));
        }
        plan.occurrence_terms_.push_back(it->second);
    }

    double max_raw = 0.0;
    for (const auto& t : plan.terms_) {
        max_raw = std::max(max_raw, t.raw_entropy);
    }
    if (max_raw > 0.0) {
        for (auto& t : plan.terms_) {
            t.norm_entropy = t.raw_entropy / max_raw;
        }
    }

    if (!plan.occurrence_terms_.empty()) {
        double sum = 0.0;
        for (auto slot : plan.occurrence_terms_) {
            sum += plan.terms_[slot].norm_entropy;
        }
        plan.avg_entropy_ = sum / static_cast<double>(plan.occurrence_terms_.size());
    }
    return plan;
}

double similarity(const QueryPlan& plan, const InvertedIndex& index, DocId doc) {
    if (plan.empty()) {
        throw ContractViolation("similarity: query has no tokens");
    }
    std::size_t shared = 0;
    for (const auto& t : plan.unique_terms()) {
        if (t.term_id && index.term_frequency(t.token, doc) > 0) {
            ++shared;
        }
    }
    return static_cast<double>(shared) / static_cast<double>(plan.size());
}

double kernel_idf(Bm25Kernel kernel, std::size_t l, std::size_t n) {
    const double nd = static_cast<double>(n);
    const double ld = static_cast<double>(l);
    switch (kernel) {
    case Bm25Kernel::robertson:
    case Bm25Kernel::lucene:
        return idf(l, n);
    case Bm25Kernel::atire:
        return std::log(nd / ld);
    case Bm25Kernel::bm25l:
        return std::log((nd + 1.0) / (ld + 0.5));
    case Bm25Kernel::bm25plus:
        return std::log((nd + 1.0) / ld);
    }
    return idf(l, n);
}

double kernel_tf(const Bm25Params& p, double tf, double relative_length) noexcept {
    const double length_norm = 1.0 - p.b + p.b * relative_length;
    switch (p.kernel) {
    case Bm25Kernel::robertson:
    case Bm25Kernel::atire:
        return tf * (p.k1 + 1.0) / (tf + p.k1 * length_norm);
    case Bm25Kernel::lucene:
        return tf / (tf + p.k1 * length_norm);
    case Bm25Kernel::bm25l: {
        const double delta = p.effective_delta();
        const double c = tf / length_norm;
        return (p.k1 + 1.0) * (c + delta) / (p.k1 + c + delta);
    }
    case Bm25Kernel::bm25plus:
        return tf * (p.k1 + 1.0) / (p.k1 * length_norm + tf) + p.effective_delta();
    }
    return 0.0;
}

double bmx_similarity_part(const QueryPlan& plan, double beta, double sim) noexcept {
    double sum = 0.0;
    for (auto slot : plan.occurrence_terms()) {
        sum += beta * plan.unique_terms()[slot].norm_entropy * sim;
    }
    return sum;
}

namespace {

void check_plan(DocId doc, const QueryPlan& plan, const InvertedIndex& index) {
    if (plan.source() != &index) {
        throw ContractViolation("query plan was built against a different index");
    }
    if (doc >= index.doc_count()) {
        throw ContractViolation("doc id " + std::to_string(doc) + " out of range");
    }
}

} // namespace

double bmx_score(DocId doc, const QueryPlan& plan, const InvertedIndex& index, const BmxParams& params) {
    check_plan(doc, plan, index);
    if (plan.empty()) {
        return 0.0;
    }
    // avgdl > 0 whenever some query token occurs in the corpus; otherwise all tf are 0.
    const double avgdl = index.avg_doc_length();
    double tf_part = 0.0;
    std::size_t shared = 0;
    std::vector<std::uint32_t> tf_of(plan.unique_terms().size(), 0);
    for (std::size_t t = 0; t < plan.unique_terms().size(); ++t) {
        const auto& term = plan.unique_terms()[t];
        if (term.term_id) {
            tf_of[t] = index.term_frequency(term.token, doc);
            if (tf_of[t] > 0) {
                ++shared;
            }
        }
    }
    if (shared == 0) {
        return bmx_similarity_part(plan, params.beta, 0.0);
    }
    const double relative_length = static_cast<double>(index.doc_length(doc)) / avgdl;
    for (auto slot : plan.occurrence_terms()) {
        if (tf_of[slot] > 0) {
            tf_part += bmx_tf_component(plan.unique_terms()[slot].idf, static_cast<double>(tf_of[slot]),
                                        relative_length, params.alpha, plan.avg_entropy());
        }
    }
    const double sim = static_cast<double>(shared) / static_cast<double>(plan.size());
    return tf_part + bmx_similarity_part(plan, params.beta, sim);
}

double bm25_score(DocId doc, const QueryPlan& plan, const InvertedIndex& index, const Bm25Params& params) {
    check_plan(doc, plan, index);
    double score = 0.0;
    const double avgdl = index.avg_doc_length();
    for (auto slot : plan.occurrence_terms()) {
        const auto& term = plan.unique_terms()[slot];
        if (!term.term_id) {
            continue;
        }
        const auto tf = index.term_frequency(term.token, doc);
        if (tf == 0) {
            continue;
        }
        const double relative_length = static_cast<double>(index.doc_length(doc)) / avgdl;
        score += kernel_idf(params.kernel, term.doc_frequency, index.doc_count()) *
                 kernel_tf(params, static_cast<double>(tf), relative_length);
    }
    return score;
}

double max_score_estimate(std::size_t m, std::size_t n, Algorithm algo) {
    if (m == 0 || n == 0) {
        throw ContractViolation("max_score_estimate: requires m >= 1 and n >= 1");
    }
    const double max_idf = std::log(1.0 + (static_cast<double>(n) - 0.5) / 1.5);
    const double per_token = algo == Algorithm::bmx ? max_idf + 1.0 : max_idf;
    return static_cast<double>(m) * per_token;
}

double normalize_score(double raw, double max_estimate) {
    if (!(max_estimate > 0.0)) {
        throw ContractViolation("normalize_score: max estimate must be > 0");
    }
    return raw / max_estimate;
}

BmxParams resolve_bmx_params(const ScorerConfig& config, const InvertedIndex& index) {
    BmxParams params;
    params.alpha = config.alpha ? *config.alpha : default_alpha(index.avg_doc_length());
    params.beta = config.beta ? *config.beta : default_beta(index.doc_count());
    params.validate();
    return params;
}

double score_document(DocId doc, const QueryPlan& plan, const InvertedIndex& index, const ScorerConfig& config) {
    double raw = 0.0;
    if (config.algo == Algorithm::bmx) {
        raw = bmx_score(doc, plan, index, resolve_bmx_params(config, index));
    } else {
        config.bm25.validate();
        raw = bm25_score(doc, plan, index, config.bm25);
    }
    if (!config.normalize || plan.empty()) {
        return raw;
    }
    return normalize_score(raw, max_score_estimate(plan.size(), index.doc_count(), config.algo));
}

} // namespace bmx
