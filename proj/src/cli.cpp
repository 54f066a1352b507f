#include "bmx/cli.hpp"

#include "bmx/error.hpp"
#include "bmx/eval.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace bmx {

namespace {

using Clock = std::chrono::steady_clock;

struct GlobalOptions {
    std::string algo = "bmx";
    std::string kernel = "robertson";
    double alpha = 0.0;
    double beta = 0.0;
    double k1 = 1.2;
    double b = 0.75;
    double delta = 0.0;
    bool normalize = false;

    bool lowercase = true;
    bool strip_punctuation = true;
    std::string stopwords = "english";
    std::string stemmer = "porter-english";
    std::string splitter = "unicode-words";

    unsigned threads = 0;
    bool single_thread = false;
    std::size_t k = 10;
    double weight = kDefaultAugmentationWeight;

    CLI::Option* alpha_opt = nullptr;
    CLI::Option* beta_opt = nullptr;
    CLI::Option* delta_opt = nullptr;

    [[nodiscard]] PipelineConfig pipeline() const {
        PipelineConfig p;
        p.lowercase = lowercase;
        p.strip_punctuation = strip_punctuation;
        if (stopwords == "none") {
            p.stopwords.clear();
        } else if (stopwords != "english") {
            p.stopwords = load_stopword_file(stopwords);
        }
        p.stemmer = parse_stemmer(stemmer);
        p.token_splitter = parse_token_splitter(splitter);
        return p;
    }

    [[nodiscard]] ScorerConfig scorer() const {
        ScorerConfig s;
        s.algo = parse_algorithm(algo);
        s.bm25.kernel = parse_kernel(kernel);
        s.bm25.k1 = k1;
        s.bm25.b = b;
        if (delta_opt->count() > 0) {
            s.bm25.delta = delta;
        }
        if (alpha_opt->count() > 0) {
            s.alpha = alpha;
        }
        if (beta_opt->count() > 0) {
            s.beta = beta;
        }
        s.normalize = normalize;
        if (s.algo == Algorithm::bmx) {
            BmxParams check;
            check.alpha = s.alpha.value_or(1.0);
            check.beta = s.beta.value_or(0.0);
            check.validate();
        } else {
            s.bm25.validate();
        }
        return s;
    }

    [[nodiscard]] unsigned worker_threads() const { return single_thread ? 1u : threads; }

    void check_k() const {
        if (k == 0) {
            throw ConfigError("-k must be >= 1");
        }
        if (!(weight >= 0.0 && weight <= 1.0)) {
            throw ConfigError("--weight must be in [0,1]");
        }
    }
};

std::string format_score(double v) {
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) {
        err << "warning: " << w << '\n';
    }
}

/// BEIR queries.jsonl when the file ends in .jsonl, otherwise one query per line.
std::vector<Query> read_query_file(const std::filesystem::path& path) {
    if (path.extension() == ".jsonl") {
        return read_queries_jsonl(path);
    }
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot read queries file: " + path.string());
    }
    std::vector<Query> queries;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        queries.push_back({std::to_string(queries.size() + 1), line});
    }
    return queries;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot open output file for writing: " + path.string());
    }
    out << text;
    if (!out) {
        throw DataError("I/O error while writing " + path.string());
    }
}

std::vector<double> parse_grid(const std::string& text, const char* name) {
    std::vector<double> values;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw ConfigError(std::string("invalid value '") + item + "' in " + name);
        }
    }
    if (values.empty()) {
        throw ConfigError(std::string(name) + " must list at least one value");
    }
    return values;
}

std::string grid_label(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

/// Deterministic stand-in for an LLM: `size` numbered variants of the query.
std::string synthetic_reply(const ChatRequest& request, std::size_t size) {
    StubTransport echo;
    const auto echoed = nlohmann::json::parse(echo.complete(request));
    const auto query = echoed.at("query").get<std::string>();
    AugmentationRecord out;
    out.query = query;
    for (std::size_t i = 1; i <= size; ++i) {
        out.augmented_queries.push_back(query + " variant " + std::to_string(i));
    }
    return to_jsonl_line(out);
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliContext& context) {
    CLI::App app{"bmx: lexical search with BMX and BM25 ranking", "bmx"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a config file (key = value, [section] for subcommands)");

    GlobalOptions g;
    app.add_option("--algo", g.algo, "Ranking algorithm: bmx | bm25")->capture_default_str();
    app.add_option("--kernel", g.kernel, "BM25 kernel: robertson | atire | bm25plus | bm25l | lucene")
        ->capture_default_str();
    g.alpha_opt = app.add_option("--alpha", g.alpha, "BMX alpha (default: from avgdl)");
    g.beta_opt = app.add_option("--beta", g.beta, "BMX beta (default: 1/ln(1+n))");
    app.add_option("--k1", g.k1, "BM25 k1")->capture_default_str();
    app.add_option("--b", g.b, "BM25 b")->capture_default_str();
    g.delta_opt = app.add_option("--delta", g.delta, "BM25L/BM25+ delta (default 0.5 / 1.0)");
    app.add_flag("--normalize", g.normalize, "Divide scores by the estimated query maximum");
    app.add_option("--lowercase", g.lowercase, "Lowercase tokens (true|false)")->capture_default_str();
    app.add_option("--strip-punctuation", g.strip_punctuation, "Drop punctuation (true|false)")
        ->capture_default_str();
    app.add_option("--stopwords", g.stopwords, "english | none | path to a one-word-per-line file")
        ->capture_default_str();
    app.add_option("--stemmer", g.stemmer, "none | porter-english")->capture_default_str();
    app.add_option("--splitter", g.splitter, "unicode-words | whitespace")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
    app.add_flag("--single-thread", g.single_thread, "Run indexing and search on one thread");
    app.add_option("-k,--top-k", g.k, "Results per query")->capture_default_str();
    app.add_option("--weight", g.weight, "Default weight of augmented queries")->capture_default_str();

    // index
    auto* index_cmd = app.add_subcommand("index", "Build an index from a corpus JSONL file")->fallthrough();
    std::string corpus_path;
    std::string index_out;
    bool force = false;
    index_cmd->add_option("corpus", corpus_path, "corpus.jsonl (_id, title, text)")->required();
    index_cmd->add_option("-o,--output", index_out, "Index file to write")->required();
    index_cmd->add_flag("--force", force, "Overwrite an existing index file");

    // search
    auto* search_cmd = app.add_subcommand("search", "Search an index")->fallthrough();
    std::string index_path;
    std::string query_text;
    std::string queries_path;
    std::string wqa_path;
    std::string format = "tsv";
    search_cmd->add_option("index", index_path, "Index file")->required();
    auto* q_opt = search_cmd->add_option("-q,--query", query_text, "Query string");
    auto* qs_opt = search_cmd->add_option("--queries", queries_path, "Query file (.jsonl or one per line)");
    q_opt->excludes(qs_opt);
    search_cmd->add_option("--wqa", wqa_path, "Augmentations JSONL for weighted query augmentation");
    search_cmd->add_option("--format", format, "tsv | json")->capture_default_str();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate on a BEIR-format dataset")->fallthrough();
    std::string dataset_dir;
    std::string qrels_path;
    std::string eval_out;
    std::string gain = "exponential";
    bool compare = false;
    eval_cmd->add_option("dataset", dataset_dir, "Dataset directory")->required();
    eval_cmd->add_option("--qrels", qrels_path, "Qrels TSV (default <dataset>/qrels/test.tsv)");
    eval_cmd->add_option("-o,--output", eval_out, "Directory for results JSON and timing CSV");
    eval_cmd->add_option("--wqa", wqa_path, "Augmentations JSONL for weighted query augmentation");
    eval_cmd->add_option("--gain", gain, "NDCG gain: exponential | linear")->capture_default_str();
    eval_cmd->add_flag("--compare", compare, "Also run the BM25 baseline and report both");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "NDCG grid over BMX alpha and beta")->fallthrough();
    std::string alphas = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
    std::string betas = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
    std::string sweep_out;
    sweep_cmd->add_option("dataset", dataset_dir, "Dataset directory")->required();
    sweep_cmd->add_option("--qrels", qrels_path, "Qrels TSV (default <dataset>/qrels/test.tsv)");
    sweep_cmd->add_option("--alphas", alphas, "Comma-separated alpha values")->capture_default_str();
    sweep_cmd->add_option("--betas", betas, "Comma-separated beta values")->capture_default_str();
    sweep_cmd->add_option("-o,--output", sweep_out, "CSV file (default: stdout)");

    // augment
    auto* aug_cmd = app.add_subcommand("augment", "Generate augmented queries with an LLM")->fallthrough();
    std::string aug_queries;
    std::string aug_out;
    std::size_t size = 10;
    bool stub = false;
    std::string stub_reply;
    std::string capture_prompts;
    EndpointConfig endpoint;
    long long backoff_ms = endpoint.initial_backoff.count();
    aug_cmd->add_option("queries", aug_queries, "Query file (.jsonl or one per line)")->required();
    aug_cmd->add_option("-o,--output", aug_out, "Augmentations JSONL to write")->required();
    aug_cmd->add_option("--size", size, "Augmented queries per query")->capture_default_str();
    aug_cmd->add_option("--endpoint", endpoint.base_url, "Chat-completions base URL, e.g. https://host/v1");
    aug_cmd->add_option("--model", endpoint.model, "Model name")->capture_default_str();
    aug_cmd->add_option("--api-key-env", endpoint.api_key_env, "Environment variable holding the API key")
        ->capture_default_str();
    aug_cmd->add_option("--temperature", endpoint.temperature, "Sampling temperature")->capture_default_str();
    aug_cmd->add_option("--concurrency", endpoint.concurrency, "Parallel requests")->capture_default_str();
    aug_cmd->add_option("--retries", endpoint.max_attempts, "Attempts per query")->capture_default_str();
    aug_cmd->add_option("--backoff-ms", backoff_ms, "Initial retry delay in milliseconds")->capture_default_str();
    aug_cmd->add_flag("--stub", stub, "Use an offline stub instead of the endpoint");
    aug_cmd->add_option("--stub-reply", stub_reply, "With --stub: file whose content is returned as the reply");
    aug_cmd->add_option("--capture-prompts", capture_prompts, "With --stub: write every rendered prompt here");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        if (app.get_subcommands().empty()) {
            err << "run 'bmx --help' for usage\n";
        }
        return kExitConfig;
    }

    try {
        g.check_k();
        if (index_cmd->parsed()) {
            const auto pipeline = g.pipeline();
            const auto start = Clock::now();
            const auto docs = read_corpus_jsonl(corpus_path);
            const auto index = build_index(docs, pipeline, BuildOptions{g.worker_threads()});
            save_index(index, index_out, force);
            const double secs = std::chrono::duration<double>(Clock::now() - start).count();
            out << "n=" << index.doc_count() << " avgdl=" << index.avg_doc_length()
                << " vocab=" << index.vocabulary_size() << " build_s=" << std::fixed << std::setprecision(3) << secs
                << '\n';
            return kExitOk;
        }

        if (search_cmd->parsed()) {
            if (q_opt->count() == 0 && qs_opt->count() == 0) {
                throw ConfigError("search needs --query or --queries");
            }
            if (format != "tsv" && format != "json") {
                throw ConfigError("unknown format '" + format + "' (expected tsv|json)");
            }
            const auto index = load_index(index_path);
            const Searcher searcher(index, g.pipeline(), g.scorer());
            std::optional<AugmentationFile> augmentations;
            if (!wqa_path.empty()) {
                augmentations = load_augmentations(wqa_path);
                if (!augmentations->errors.empty()) {
                    err << "warning: " << augmentations->error_summary() << '\n';
                }
            }
            const auto queries = q_opt->count() > 0 ? std::vector<Query>{{"1", query_text}}
                                                    : read_query_file(queries_path);
            nlohmann::json json_out = nlohmann::json::array();
            for (const auto& q : queries) {
                std::vector<ScoredHit> hits;
                if (augmentations) {
                    const auto it = augmentations->records.find(q.text);
                    const auto* record = it == augmentations->records.end() ? nullptr : &it->second;
                    hits = searcher.search_wqa(make_query_set(q.text, record, g.weight), g.k);
                } else {
                    hits = searcher.search(q.text, g.k);
                }
                if (format == "tsv") {
                    for (std::size_t r = 0; r < hits.size(); ++r) {
                        out << q.id << '\t' << (r + 1) << '\t' << hits[r].external_id << '\t'
                            << format_score(hits[r].score) << '\n';
                    }
                } else {
                    nlohmann::json entry;
                    entry["query_id"] = q.id;
                    entry["query"] = q.text;
                    entry["hits"] = nlohmann::json::array();
                    for (const auto& h : hits) {
                        entry["hits"].push_back({{"doc_id", h.external_id}, {"score", h.score}});
                    }
                    json_out.push_back(std::move(entry));
                }
            }
            if (format == "json") {
                out << json_out.dump(2) << '\n';
            }
            return augmentations && !augmentations->errors.empty() ? kExitPartial : kExitOk;
        }

        if (eval_cmd->parsed() || sweep_cmd->parsed()) {
            const auto pipeline = g.pipeline();
            auto scorer = g.scorer();
            std::optional<std::filesystem::path> qrels;
            if (!qrels_path.empty()) {
                qrels = qrels_path;
            }
            const auto dataset = load_beir_dataset(dataset_dir, qrels);
            print_warnings(err, dataset.warnings);

            EvalOptions options;
            options.pipeline = pipeline;
            options.k = g.k;
            options.threads = g.threads;
            options.single_thread = g.single_thread;
            options.default_weight = g.weight;
            if (gain == "exponential") {
                options.gain = Gain::exponential;
            } else if (gain == "linear") {
                options.gain = Gain::linear;
            } else {
                throw ConfigError("unknown gain '" + gain + "' (expected exponential|linear)");
            }

            const auto start = Clock::now();
            const auto index = build_index(dataset.corpus, pipeline, BuildOptions{g.worker_threads()});
            const double index_s = std::chrono::duration<double>(Clock::now() - start).count();

            if (sweep_cmd->parsed()) {
                const auto alpha_grid = parse_grid(alphas, "--alphas");
                const auto beta_grid = parse_grid(betas, "--betas");
                std::ostringstream csv;
                csv << "params";
                for (double a : alpha_grid) {
                    csv << ",alpha=" << grid_label(a);
                }
                csv << '\n';
                std::size_t failures = 0;
                for (double bv : beta_grid) {
                    csv << "beta=" << grid_label(bv);
                    for (double a : alpha_grid) {
                        options.scorer = ScorerConfig{};
                        options.scorer.alpha = a;
                        options.scorer.beta = bv;
                        const auto run = run_eval(dataset, index, options, index_s);
                        failures += run.failures;
                        if (run.evaluated == 0) {
                            throw DataError("no queries evaluated");
                        }
                        csv << ',' << std::fixed << std::setprecision(2) << run.ndcg_mean * 100.0;
                        csv.unsetf(std::ios::floatfield);
                    }
                    csv << '\n';
                }
                if (sweep_out.empty()) {
                    out << csv.str();
                } else {
                    write_text_file(sweep_out, csv.str());
                    out << "wrote " << sweep_out << '\n';
                }
                return failures > 0 ? kExitPartial : kExitOk;
            }

            std::optional<AugmentationFile> augmentations;
            if (!wqa_path.empty()) {
                augmentations = load_augmentations(wqa_path);
                if (!augmentations->errors.empty()) {
                    err << "warning: " << augmentations->error_summary() << '\n';
                }
                options.augmentations = &augmentations->records;
            }

            std::vector<ScorerConfig> scorers{scorer};
            if (compare) {
                ScorerConfig other = scorer;
                other.algo = scorer.algo == Algorithm::bmx ? Algorithm::bm25 : Algorithm::bmx;
                scorers.push_back(other);
            }
            std::vector<EvalRun> runs;
            for (const auto& s : scorers) {
                options.scorer = s;
                runs.push_back(run_eval(dataset, index, options, index_s));
            }

            std::size_t failures = 0;
            for (const auto& run : runs) {
                failures += run.failures;
                out << "dataset=" << run.dataset << " algo=" << algo_label(run.scorer) << std::fixed
                    << std::setprecision(4) << " ndcg@" << run.k << '=' << run.ndcg_mean << " recall@" << run.k
                    << '=' << run.recall_mean << " queries=" << run.evaluated << " failures=" << run.failures
                    << '\n';
                out.unsetf(std::ios::floatfield);
                for (const auto& q : run.per_query) {
                    if (q.error) {
                        err << "query " << q.query_id << " failed: " << *q.error << '\n';
                    }
                }
            }
            out << timing_table(runs);
            if (!eval_out.empty()) {
                std::filesystem::create_directories(eval_out);
                for (const auto& run : runs) {
                    write_text_file(std::filesystem::path(eval_out) / ("results-" + algo_label(run.scorer) + ".json"),
                                    eval_json(run));
                }
                write_text_file(std::filesystem::path(eval_out) / "timing.csv", timing_csv(runs));
            }
            if (failures > 0) {
                return kExitPartial;
            }
            return augmentations && !augmentations->errors.empty() ? kExitPartial : kExitOk;
        }

        if (aug_cmd->parsed()) {
            if (size == 0) {
                throw ConfigError("--size must be >= 1");
            }
            endpoint.initial_backoff = std::chrono::milliseconds(std::max<long long>(0, backoff_ms));
            const auto queries = read_query_file(aug_queries);
            std::vector<std::string> texts;
            for (const auto& q : queries) {
                texts.push_back(q.text);
            }

            std::unique_ptr<ChatTransport> owned;
            StubTransport* stub_transport = nullptr;
            ChatTransport* transport = context.transport;
            if (transport == nullptr && stub) {
                StubTransport::Responder responder;
                if (!stub_reply.empty()) {
                    std::ifstream in(stub_reply);
                    if (!in) {
                        throw DataError("cannot read stub reply file: " + stub_reply);
                    }
                    std::string reply((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
                    responder = [reply](const ChatRequest&) { return reply; };
                } else {
                    responder = [size](const ChatRequest& r) { return synthetic_reply(r, size); };
                }
                auto s = std::make_unique<StubTransport>(std::move(responder));
                stub_transport = s.get();
                owned = std::move(s);
                transport = owned.get();
            }
            if (!capture_prompts.empty() && stub_transport == nullptr) {
                throw ConfigError("--capture-prompts requires --stub");
            }
            if (transport == nullptr) {
                owned = make_http_transport(endpoint);
                transport = owned.get();
            }

            const auto result = generate_augmentations(texts, size, *transport, endpoint);
            save_augmentations(aug_out, result.records);
            print_warnings(err, result.warnings);
            if (stub_transport != nullptr && !capture_prompts.empty()) {
                std::string dump;
                for (const auto& p : stub_transport->prompts()) {
                    dump += p;
                    dump += "\n\x1e\n"; // record separator between prompts
                }
                write_text_file(capture_prompts, dump);
            }
            for (const auto& r : result.records) {
                if (r.error) {
                    err << "query '" << r.query << "' failed: " << *r.error << '\n';
                }
            }
            out << "wrote " << result.records.size() << " record(s) to " << aug_out << " (" << result.failures
                << " failed)\n";
            return result.failures > 0 ? kExitPartial : kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::logic_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitConfig;
}

} // namespace bmx
