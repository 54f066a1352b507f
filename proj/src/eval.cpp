#include "bmx/eval.hpp"

#include "bmx/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

namespace bmx {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    const char sep = line.find('\t') != std::string_view::npos ? '\t' : ' ';
    std::size_t start = 0;
    while (start <= line.size()) {
        auto end = line.find(sep, start);
        if (end == std::string_view::npos) {
            end = line.size();
        }
        if (end > start) {
            fields.push_back(line.substr(start, end - start));
        }
        start = end + 1;
    }
    return fields;
}

std::optional<long long> parse_int(std::string_view s) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

} // namespace

std::vector<Query> read_queries_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot read queries file: " + path.string());
    }
    std::vector<Query> queries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("_id")) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected a JSON object with '_id'");
        }
        const auto& id = j["_id"];
        const auto text = j.find("text");
        queries.push_back({id.is_string() ? id.get<std::string>() : id.dump(),
                           (text != j.end() && text->is_string()) ? text->get<std::string>() : std::string{}});
    }
    return queries;
}

Qrels read_qrels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot read qrels file: " + path.string());
    }
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        const auto fields = split_fields(line);
        // 3 columns (BEIR) or 4 columns (TREC: qid iter docid grade).
        if (fields.size() != 3 && fields.size() != 4) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 3 or 4 columns, found " +
                            std::to_string(fields.size()));
        }
        const auto grade = parse_int(fields.back());
        if (!grade) {
            if (line_no == 1) {
                continue; // header
            }
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": relevance grade '" +
                            std::string(fields.back()) + "' is not an integer");
        }
        if (*grade < 0) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": negative relevance grade");
        }
        const auto doc = fields.size() == 3 ? fields[1] : fields[2];
        qrels[std::string(fields[0])][std::string(doc)] = static_cast<int>(*grade);
    }
    return qrels;
}

BeirDataset load_beir_dataset(const std::filesystem::path& dir, const std::optional<std::filesystem::path>& qrels_path) {
    if (!std::filesystem::is_directory(dir)) {
        throw DataError("dataset directory not found: " + dir.string());
    }
    BeirDataset ds;
    ds.name = std::filesystem::absolute(dir).lexically_normal().filename().string();
    if (ds.name.empty()) {
        ds.name = std::filesystem::absolute(dir).lexically_normal().parent_path().filename().string();
    }

    const auto corpus_path = dir / "corpus.jsonl";
    const auto queries_path = dir / "queries.jsonl";
    const auto qrels_file = qrels_path.value_or(dir / "qrels" / "test.tsv");
    for (const auto& p : {corpus_path, queries_path, qrels_file}) {
        if (!std::filesystem::exists(p)) {
            throw DataError("missing dataset file: " + p.string());
        }
    }
    ds.corpus = read_corpus_jsonl(corpus_path);
    ds.queries = read_queries_jsonl(queries_path);
    const auto raw = read_qrels(qrels_file);

    std::set<std::string_view> doc_ids;
    for (const auto& d : ds.corpus) {
        doc_ids.insert(d.external_id);
    }
    std::set<std::string_view> query_ids;
    for (const auto& q : ds.queries) {
        query_ids.insert(q.id);
    }
    for (const auto& [qid, judged] : raw) {
        if (!query_ids.contains(qid)) {
            ds.warnings.push_back("qrels reference unknown query id '" + qid + "'; skipped");
            continue;
        }
        for (const auto& [doc, grade] : judged) {
            if (!doc_ids.contains(doc)) {
                ds.warnings.push_back("qrels for query '" + qid + "' reference unknown doc id '" + doc +
                                      "'; skipped");
                continue;
            }
            ds.qrels[qid][doc] = grade;
        }
    }
    return ds;
}

std::optional<double> ndcg_at_k(std::span<const std::string> ranked, const QueryJudgments& judged, std::size_t k,
                                Gain gain) {
    if (k == 0) {
        throw ContractViolation("ndcg_at_k: k must be >= 1");
    }
    auto gain_of = [gain](int g) { return gain == Gain::exponential ? std::exp2(g) - 1.0 : static_cast<double>(g); };

    std::vector<int> grades;
    for (const auto& [doc, g] : judged) {
        if (g > 0) {
            grades.push_back(g);
        }
    }
    if (grades.empty()) {
        return std::nullopt;
    }
    std::sort(grades.begin(), grades.end(), std::greater<>());

    double ideal = 0.0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
        ideal += gain_of(grades[i]) / std::log2(static_cast<double>(i) + 2.0);
    }
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        const auto it = judged.find(ranked[i]);
        if (it != judged.end() && it->second > 0) {
            dcg += gain_of(it->second) / std::log2(static_cast<double>(i) + 2.0);
        }
    }
    return dcg / ideal;
}

std::optional<double> recall_at_k(std::span<const std::string> ranked, const QueryJudgments& judged, std::size_t k) {
    std::size_t relevant = 0;
    for (const auto& [doc, g] : judged) {
        if (g >= 1) {
            ++relevant;
        }
    }
    if (relevant == 0) {
        return std::nullopt;
    }
    std::size_t found = 0;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        const auto it = judged.find(ranked[i]);
        if (it != judged.end() && it->second >= 1) {
            ++found;
        }
    }
    return static_cast<double>(found) / static_cast<double>(relevant);
}

std::string algo_label(const ScorerConfig& scorer) {
    if (scorer.algo == Algorithm::bmx) {
        return "bmx";
    }
    return "bm25-" + std::string(to_string(scorer.bm25.kernel));
}

EvalRun run_eval(const BeirDataset& dataset, const EvalOptions& options) {
    const auto start = Clock::now();
    const auto index = build_index(dataset.corpus, options.pipeline,
                                   BuildOptions{options.single_thread ? 1u : options.threads});
    return run_eval(dataset, index, options, seconds_since(start));
}

EvalRun run_eval(const BeirDataset& dataset, const InvertedIndex& index, const EvalOptions& options,
                 double index_seconds) {
    if (options.k == 0) {
        throw ConfigError("k must be >= 1");
    }
    const Searcher searcher(index, options.pipeline, options.scorer);

    EvalRun run;
    run.dataset = dataset.name;
    run.algo = options.scorer.algo;
    run.scorer = options.scorer;
    run.pipeline_fingerprint = index.pipeline_fingerprint();
    run.k = options.k;
    run.wqa = options.augmentations != nullptr;
    run.index_seconds = index_seconds;
    if (options.scorer.algo == Algorithm::bmx && index.avg_doc_length() > 0.0) {
        run.resolved_bmx = resolve_bmx_params(options.scorer, index);
    }

    // Only queries with at least one positive judgment are evaluated.
    std::vector<const Query*> todo;
    for (const auto& q : dataset.queries) {
        const auto it = dataset.qrels.find(q.id);
        if (it == dataset.qrels.end()) {
            continue;
        }
        if (std::any_of(it->second.begin(), it->second.end(), [](const auto& e) { return e.second > 0; })) {
            todo.push_back(&q);
        }
    }

    std::vector<QueryResult> results(todo.size());
    auto evaluate = [&](std::size_t i) {
        const auto& q = *todo[i];
        auto& r = results[i];
        r.query_id = q.id;
        try {
            const auto t0 = Clock::now();
            std::vector<ScoredHit> hits;
            if (options.augmentations != nullptr) {
                const auto rec = options.augmentations->find(q.text);
                const AugmentationRecord* record = rec == options.augmentations->end() ? nullptr : &rec->second;
                hits = searcher.search_wqa(make_query_set(q.text, record, options.default_weight), options.k);
            } else {
                hits = searcher.search(q.text, options.k);
            }
            r.search_ms = seconds_since(t0) * 1000.0;
            std::vector<std::string> ranked;
            ranked.reserve(hits.size());
            for (auto& h : hits) {
                ranked.push_back(std::move(h.external_id));
            }
            const auto& judged = dataset.qrels.find(q.id)->second;
            r.ndcg = ndcg_at_k(ranked, judged, options.k, options.gain).value_or(0.0);
            r.recall = recall_at_k(ranked, judged, options.k).value_or(0.0);
        } catch (const std::exception& e) {
            r.error = e.what();
        }
    };

    const auto search_start = Clock::now();
    unsigned workers = options.single_thread ? 1u
                                             : (options.threads == 0 ? std::thread::hardware_concurrency()
                                                                     : options.threads);
    workers = static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(todo.size(), 1)));
    if (workers == 1) {
        for (std::size_t i = 0; i < todo.size(); ++i) {
            evaluate(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (auto i = next++; i < todo.size(); i = next++) {
                    evaluate(i);
                }
            });
        }
    }
    run.search_seconds = seconds_since(search_start);

    double ndcg_sum = 0.0;
    double recall_sum = 0.0;
    double ms_sum = 0.0;
    for (const auto& r : results) {
        if (r.error) {
            ++run.failures;
            continue;
        }
        ++run.evaluated;
        ndcg_sum += r.ndcg;
        recall_sum += r.recall;
        ms_sum += r.search_ms;
    }
    if (run.evaluated > 0) {
        const auto n = static_cast<double>(run.evaluated);
        run.ndcg_mean = ndcg_sum / n;
        run.recall_mean = recall_sum / n;
        run.search_ms_mean = ms_sum / n;
    }
    run.per_query = std::move(results);
    return run;
}

std::string eval_json(const EvalRun& run) {
    const auto k = std::to_string(run.k);
    json j;
    j["dataset"] = run.dataset;
    j["algo"] = algo_label(run.scorer);
    json params;
    if (run.algo == Algorithm::bmx) {
        params["alpha"] = run.resolved_bmx.alpha;
        params["beta"] = run.resolved_bmx.beta;
    } else {
        params["k1"] = run.scorer.bm25.k1;
        params["b"] = run.scorer.bm25.b;
        if (run.scorer.bm25.kernel == Bm25Kernel::bm25l || run.scorer.bm25.kernel == Bm25Kernel::bm25plus) {
            params["delta"] = run.scorer.bm25.effective_delta();
        }
    }
    j["params"] = params;
    j["normalize"] = run.scorer.normalize;
    j["wqa"] = run.wqa;
    std::ostringstream fp;
    fp << std::hex << std::setw(16) << std::setfill('0') << run.pipeline_fingerprint;
    j["pipeline_fingerprint"] = fp.str();
    j["k"] = run.k;
    j["queries_evaluated"] = run.evaluated;
    j["failures"] = run.failures;
    j["ndcg@" + k] = run.ndcg_mean;
    j["recall@" + k] = run.recall_mean;
    json per = json::array();
    for (const auto& r : run.per_query) {
        json q;
        q["query_id"] = r.query_id;
        if (r.error) {
            q["error"] = *r.error;
        } else {
            q["ndcg@" + k] = r.ndcg;
            q["recall@" + k] = r.recall;
        }
        per.push_back(std::move(q));
    }
    j["per_query"] = std::move(per);
    return j.dump(2) + "\n";
}

std::string timing_csv(std::span<const EvalRun> runs) {
    std::ostringstream out;
    out << "dataset,algo,index_s,search_ms_mean\n";
    for (const auto& r : runs) {
        if (r.evaluated == 0) {
            throw DataError("no queries evaluated");
        }
        out << r.dataset << ',' << algo_label(r.scorer) << ',' << std::fixed << std::setprecision(6)
            << r.index_seconds << ',' << std::setprecision(6) << r.search_ms_mean << '\n';
        out.unsetf(std::ios::floatfield);
    }
    return out.str();
}

std::string timing_table(std::span<const EvalRun> runs) {
    std::ostringstream out;
    out << std::left << std::setw(16) << "dataset" << std::setw(18) << "algo" << std::right << std::setw(12)
        << "index [s]" << std::setw(18) << "search [ms/q]" << '\n';
    for (const auto& r : runs) {
        if (r.evaluated == 0) {
            throw DataError("no queries evaluated");
        }
        out << std::left << std::setw(16) << r.dataset << std::setw(18) << algo_label(r.scorer) << std::right
            << std::fixed << std::setprecision(3) << std::setw(12) << r.index_seconds << std::setw(18)
            << r.search_ms_mean << '\n';
        out.unsetf(std::ios::floatfield);
    }
    return out.str();
}

} // namespace bmx
