#include "bmx/index.hpp"

#include "bmx/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>

namespace bmx {

namespace {

std::string string_field(const nlohmann::json& record, const char* key) {
    const auto it = record.find(key);
    if (it == record.end() || it->is_null()) {
        return {};
    }
    return it->is_string() ? it->get<std::string>() : it->dump();
}

} // namespace

std::optional<std::uint32_t> InvertedIndex::term_id(std::string_view term) const {
    const auto it = term_lookup_.find(term);
    if (it == term_lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::span<const Posting> InvertedIndex::postings_by_id(std::uint32_t id) const {
    const auto begin = term_offsets_.at(id);
    const auto end = term_offsets_.at(id + 1);
    return std::span<const Posting>(postings_).subspan(begin, end - begin);
}

std::span<const Posting> InvertedIndex::postings(std::string_view term) const {
    const auto id = term_id(term);
    if (!id) {
        return {};
    }
    return postings_by_id(*id);
}

std::uint32_t InvertedIndex::term_frequency(std::string_view term, DocId doc) const {
    const auto list = postings(term);
    const auto it = std::lower_bound(list.begin(), list.end(), doc,
                                     [](const Posting& p, DocId d) { return p.doc_id < d; });
    return (it != list.end() && it->doc_id == doc) ? it->tf : 0;
}

std::optional<DocId> InvertedIndex::internal_id(std::string_view external) const {
    const auto it = id_lookup_.find(external);
    if (it == id_lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void InvertedIndex::rebuild_lookup_tables() {
    term_lookup_.clear();
    term_lookup_.reserve(terms_.size());
    for (std::uint32_t i = 0; i < terms_.size(); ++i) {
        term_lookup_.emplace(terms_[i], i);
    }
    id_lookup_.clear();
    id_lookup_.reserve(external_ids_.size());
    for (DocId i = 0; i < external_ids_.size(); ++i) {
        id_lookup_.emplace(external_ids_[i], i);
    }
}

void InvertedIndex::check_invariants() const {
    const auto n = doc_count();
    if (external_ids_.size() != n) {
        throw DataError("index invariant: id map size differs from document count");
    }
    if (id_lookup_.size() != n) {
        throw DataError("index invariant: duplicate external ids");
    }
    if (term_offsets_.size() != terms_.size() + 1 || term_offsets_.front() != 0 ||
        term_offsets_.back() != postings_.size()) {
        throw DataError("index invariant: term offsets do not cover the postings array");
    }
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        if (t > 0 && !(terms_[t - 1] < terms_[t])) {
            throw DataError("index invariant: term dictionary not strictly sorted at '" + terms_[t] + "'");
        }
        if (term_offsets_[t + 1] <= term_offsets_[t]) {
            throw DataError("index invariant: empty postings for term '" + terms_[t] + "'");
        }
        const auto list = postings_by_id(static_cast<std::uint32_t>(t));
        if (list.size() > n) {
            throw DataError("index invariant: doc frequency exceeds n for '" + terms_[t] + "'");
        }
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (list[i].tf < 1) {
                throw DataError("index invariant: zero term frequency for '" + terms_[t] + "'");
            }
            if (list[i].doc_id >= n) {
                throw DataError("index invariant: doc id out of range for '" + terms_[t] + "'");
            }
            if (i > 0 && list[i].doc_id <= list[i - 1].doc_id) {
                throw DataError("index invariant: postings not strictly increasing for '" + terms_[t] + "'");
            }
        }
    }
    const auto total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), std::uint64_t{0});
    if (total != total_length_) {
        throw DataError("index invariant: stored total length differs from sum of document lengths");
    }
    const double expected_avg = n == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(n);
    if (std::abs(expected_avg - avg_doc_length_) > 1e-9) {
        throw DataError("index invariant: avgdl differs from sum(doc_lengths)/n");
    }
    std::uint64_t tf_total = 0;
    for (const auto& p : postings_) {
        tf_total += p.tf;
    }
    if (tf_total != total_length_) {
        throw DataError("index invariant: postings term frequencies do not sum to the corpus length");
    }
}

bool operator==(const InvertedIndex& a, const InvertedIndex& b) {
    return a.terms_ == b.terms_ && a.term_offsets_ == b.term_offsets_ && a.postings_ == b.postings_ &&
           a.doc_lengths_ == b.doc_lengths_ && a.external_ids_ == b.external_ids_ &&
           a.total_length_ == b.total_length_ && a.avg_doc_length_ == b.avg_doc_length_ &&
           a.pipeline_fingerprint_ == b.pipeline_fingerprint_;
}

DocId IndexBuilder::add(std::string external_id, const TokenSeq& tokens) {
    const auto doc = static_cast<DocId>(external_ids_.size());
    if (!ids_.emplace(external_id, doc).second) {
        throw DataError("duplicate document id: '" + external_id + "'");
    }
    external_ids_.push_back(std::move(external_id));
    doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.length()));

    // Documents arrive in increasing id order, so appending keeps postings sorted.
    for (const auto& token : tokens.tokens) {
        auto it = postings_.find(token);
        if (it == postings_.end()) {
            it = postings_.emplace(token, std::vector<Posting>{}).first;
        }
        auto& list = it->second;
        if (!list.empty() && list.back().doc_id == doc) {
            ++list.back().tf;
        } else {
            list.push_back({doc, 1});
        }
    }
    return doc;
}

InvertedIndex IndexBuilder::finish() && {
    InvertedIndex index;
    index.pipeline_fingerprint_ = fingerprint_;
    index.external_ids_ = std::move(external_ids_);
    index.doc_lengths_ = std::move(doc_lengths_);
    index.total_length_ = std::accumulate(index.doc_lengths_.begin(), index.doc_lengths_.end(), std::uint64_t{0});
    index.avg_doc_length_ = index.doc_lengths_.empty()
                                ? 0.0
                                : static_cast<double>(index.total_length_) / static_cast<double>(index.doc_lengths_.size());

    std::vector<std::pair<std::string, std::vector<Posting>>> sorted;
    sorted.reserve(postings_.size());
    for (auto& [term, list] : postings_) {
        sorted.emplace_back(term, std::move(list));
    }
    postings_.clear();
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::size_t total = 0;
    for (const auto& entry : sorted) {
        total += entry.second.size();
    }
    index.terms_.reserve(sorted.size());
    index.term_offsets_.reserve(sorted.size() + 1);
    index.postings_.reserve(total);
    index.term_offsets_.assign(1, 0);
    for (auto& [term, list] : sorted) {
        index.terms_.push_back(std::move(term));
        index.postings_.insert(index.postings_.end(), list.begin(), list.end());
        index.term_offsets_.push_back(index.postings_.size());
    }
    index.rebuild_lookup_tables();
    return index;
}

InvertedIndex build_index(std::span<const Document> docs, const PipelineConfig& config, const BuildOptions& options) {
    std::vector<TokenSeq> tokenized(docs.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(docs.size())));
    if (workers <= 1) {
        for (std::size_t i = 0; i < docs.size(); ++i) {
            tokenized[i] = tokenize(docs[i].text, config);
        }
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < docs.size(); i += workers) {
                    tokenized[i] = tokenize(docs[i].text, config);
                }
            });
        }
    }

    IndexBuilder builder(fingerprint(config));
    for (std::size_t i = 0; i < docs.size(); ++i) {
        builder.add(docs[i].external_id, tokenized[i]);
        tokenized[i] = {};
    }
    return std::move(builder).finish();
}

std::vector<Document> read_corpus_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot read corpus file: " + path.string());
    }
    std::vector<Document> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        if (!record.is_object() || !record.contains("_id")) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": record without '_id'");
        }
        const auto& id_field = record["_id"];
        std::string id = id_field.is_string() ? id_field.get<std::string>() : id_field.dump();
        std::string title = string_field(record, "title");
        std::string text = string_field(record, "text");
        docs.push_back({std::move(id), title.empty() ? std::move(text) : title + " " + text});
    }
    return docs;
}

} // namespace bmx
