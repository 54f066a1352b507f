#include "bmx/augmentation.hpp"

#include "bmx/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace bmx {

namespace {

using nlohmann::json;

constexpr std::string_view kPromptTemplate =
    "You are an intelligent query augmentation tool. Your task is to augment each query with {size} similar "
    "queries and output JSONL format, like {\"query\": \"original query\", \"augmented_queries\": [\"augmented "
    "query 1\", \"augmented query 2\", ...]}\n"
    "\n"
    "Input query: {query}\n"
    "\n"
    "Output:";

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// Validates one decoded record; returns an error message or nullopt.
std::optional<std::string> decode_record(const json& j, AugmentationRecord& out) {
    if (!j.is_object()) {
        return "not a JSON object";
    }
    const auto q = j.find("query");
    if (q == j.end() || !q->is_string()) {
        return "missing string field 'query'";
    }
    const auto aq = j.find("augmented_queries");
    if (aq == j.end() || !aq->is_array()) {
        return "missing array field 'augmented_queries'";
    }
    out.query = q->get<std::string>();
    out.augmented_queries.clear();
    for (const auto& item : *aq) {
        if (!item.is_string()) {
            return "'augmented_queries' must contain only strings";
        }
        const auto text = item.get<std::string>();
        if (trim(text).empty()) {
            return "'augmented_queries' contains an empty string";
        }
        out.augmented_queries.push_back(text);
    }
    out.weights.reset();
    if (const auto w = j.find("weights"); w != j.end() && !w->is_null()) {
        if (!w->is_array() || w->size() != out.augmented_queries.size()) {
            return "'weights' must be an array with one number per augmented query";
        }
        std::vector<double> weights;
        for (const auto& item : *w) {
            if (!item.is_number()) {
                return "'weights' must contain only numbers";
            }
            const double v = item.get<double>();
            if (!(v >= 0.0 && v <= 1.0)) {
                return "weight " + item.dump() + " is outside [0,1]";
            }
            weights.push_back(v);
        }
        out.weights = std::move(weights);
    }
    out.error.reset();
    if (const auto e = j.find("error"); e != j.end() && e->is_string()) {
        out.error = e->get<std::string>();
    }
    return std::nullopt;
}

struct Url {
    std::string origin; ///< scheme://host[:port]
    std::string path;   ///< without trailing slash
};

Url split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint URL must start with http:// or https://: '" + url + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    Url out;
    out.origin = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') {
        out.path.pop_back();
    }
    return out;
}

} // namespace

std::string AugmentationFile::error_summary() const {
    if (errors.empty()) {
        return {};
    }
    std::ostringstream msg;
    msg << errors.size() << " malformed augmentation line(s); first at line " << errors.front().line << ": "
        << errors.front().message;
    return msg.str();
}

AugmentationFile load_augmentations(const std::filesystem::path& path, bool strict) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot read augmentation file: " + path.string());
    }
    AugmentationFile out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        AugmentationRecord record;
        std::optional<std::string> problem;
        try {
            problem = decode_record(json::parse(line), record);
        } catch (const json::parse_error&) {
            problem = "invalid JSON";
        }
        if (problem) {
            if (strict) {
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + *problem);
            }
            out.errors.push_back({line_no, *problem});
            continue;
        }
        auto key = record.query;
        out.records.insert_or_assign(std::move(key), std::move(record));
    }
    return out;
}

std::string to_jsonl_line(const AugmentationRecord& record) {
    json j;
    j["query"] = record.query;
    j["augmented_queries"] = record.augmented_queries;
    if (record.weights) {
        j["weights"] = *record.weights;
    }
    if (record.error) {
        j["error"] = *record.error;
    }
    return j.dump();
}

void save_augmentations(const std::filesystem::path& path, const std::vector<AugmentationRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot open augmentation file for writing: " + path.string());
    }
    for (const auto& r : records) {
        out << to_jsonl_line(r) << '\n';
    }
    if (!out) {
        throw DataError("I/O error while writing " + path.string());
    }
}

AugmentedQuerySet make_query_set(std::string original, const AugmentationRecord* record, double default_weight) {
    AugmentedQuerySet set;
    set.original = std::move(original);
    if (record != nullptr) {
        for (std::size_t i = 0; i < record->augmented_queries.size(); ++i) {
            const double w = record->weights ? (*record->weights)[i] : default_weight;
            set.augmented.push_back({record->augmented_queries[i], w});
        }
    }
    set.validate();
    return set;
}

std::string_view augmentation_prompt_template() noexcept { return kPromptTemplate; }

std::string render_prompt(std::string_view query, std::size_t size) {
    std::string out;
    std::string_view rest = kPromptTemplate;
    while (!rest.empty()) {
        if (rest.starts_with("{size}")) {
            out += std::to_string(size);
            rest.remove_prefix(6);
        } else if (rest.starts_with("{query}")) {
            out += query;
            rest.remove_prefix(7);
        } else {
            out += rest.front();
            rest.remove_prefix(1);
        }
    }
    return out;
}

std::optional<AugmentationRecord> parse_augmentation_reply(std::string_view reply, std::string_view query) {
    auto accept = [&](const json& j) -> std::optional<AugmentationRecord> {
        AugmentationRecord record;
        if (decode_record(j, record)) {
            return std::nullopt;
        }
        record.query = std::string(query);
        record.error.reset();
        return record;
    };

    const auto whole = trim(reply);
    if (auto j = json::parse(whole, nullptr, false); !j.is_discarded()) {
        if (auto r = accept(j)) {
            return r;
        }
    }
    std::size_t start = 0;
    while (start <= whole.size()) {
        const auto end = std::min(whole.find('\n', start), whole.size());
        const auto line = trim(whole.substr(start, end - start));
        if (!line.empty() && !line.starts_with("```")) {
            if (auto j = json::parse(line, nullptr, false); !j.is_discarded()) {
                if (auto r = accept(j)) {
                    return r;
                }
            }
        }
        start = end + 1;
    }
    return std::nullopt;
}

HttpTransport::HttpTransport(const EndpointConfig& config, std::string api_key)
    : api_key_(std::move(api_key)), timeout_(config.timeout) {
    auto url = split_url(config.base_url);
    origin_ = std::move(url.origin);
    path_ = std::move(url.path) + "/chat/completions";
}

std::string HttpTransport::complete(const ChatRequest& request) {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    json body;
    body["model"] = request.model;
    body["temperature"] = request.temperature;
    body["messages"] = json::array({json{{"role", "user"}, {"content", request.prompt}}});
    httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};

    const auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportError("request to " + origin_ + path_ + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
    }
    const auto reply = json::parse(res->body, nullptr, false);
    try {
        if (!reply.is_discarded()) {
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        }
    } catch (const json::exception&) {
    }
    throw TransportError("endpoint reply is not a chat-completion object");
}

StubTransport::StubTransport()
    : responder_([](const ChatRequest& request) {
          // The prompt ends with "Input query: <query>\n\nOutput:".
          const auto& p = request.prompt;
          const auto begin = p.rfind("Input query: ");
          const auto end = p.rfind("\n\nOutput:");
          std::string query;
          if (begin != std::string::npos && end != std::string::npos && end >= begin + 13) {
              query = p.substr(begin + 13, end - begin - 13);
          }
          return json{{"query", query}, {"augmented_queries", json::array()}}.dump();
      }) {}

std::string StubTransport::complete(const ChatRequest& request) {
    {
        std::lock_guard lock(mutex_);
        prompts_.push_back(request.prompt);
    }
    return responder_(request);
}

std::vector<std::string> StubTransport::prompts() const {
    std::lock_guard lock(mutex_);
    return prompts_;
}

std::unique_ptr<ChatTransport> make_http_transport(const EndpointConfig& config) {
    if (config.base_url.empty()) {
        throw ConfigError("no LLM endpoint configured (offline mode). Set 'augment.endpoint' in the config file "
                          "or pass --endpoint, or load pre-generated augmentations with --wqa <file.jsonl>");
    }
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw ConfigError("no API credential found: set the environment variable " + config.api_key_env +
                          ", use --stub for a dry run, or load pre-generated augmentations with --wqa <file.jsonl>");
    }
    return std::make_unique<HttpTransport>(config, key);
}

GenerationResult generate_augmentations(const std::vector<std::string>& queries, std::size_t size,
                                        ChatTransport& transport, const EndpointConfig& config, const SleepFn& sleep) {
    if (size == 0) {
        throw ConfigError("augmentation size must be >= 1");
    }
    const SleepFn pause = sleep ? sleep : SleepFn([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); });
    const unsigned attempts = std::max(1u, config.max_attempts);

    GenerationResult result;
    result.records.resize(queries.size());
    std::vector<std::string> warnings(queries.size());

    auto run_one = [&](std::size_t i) {
        const auto& query = queries[i];
        ChatRequest request{config.model, render_prompt(query, size), config.temperature};
        auto& record = result.records[i];
        record.query = query;

        std::optional<std::string> reply;
        std::string last_error;
        auto backoff = config.initial_backoff;
        for (unsigned attempt = 1; attempt <= attempts && !reply; ++attempt) {
            try {
                reply = transport.complete(request);
            } catch (const TransportError& e) {
                last_error = e.what();
                if (attempt < attempts) {
                    pause(backoff);
                    backoff *= 2;
                }
            } catch (const std::exception& e) {
                record.error = std::string("transport error: ") + e.what();
                return;
            }
        }
        if (!reply) {
            record.error = "transport failed after " + std::to_string(attempts) + " attempts: " + last_error;
            return;
        }
        auto parsed = parse_augmentation_reply(*reply, query);
        if (!parsed) {
            record.error = "unparseable reply from endpoint";
            return;
        }
        record = std::move(*parsed);
        if (record.augmented_queries.size() < size) {
            warnings[i] = "query '" + query + "': got " + std::to_string(record.augmented_queries.size()) +
                          " augmentations, requested " + std::to_string(size);
        }
    };

    const auto workers = std::min<std::size_t>(std::max(1u, config.concurrency), queries.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < queries.size(); ++i) {
            run_one(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (auto i = next++; i < queries.size(); i = next++) {
                    run_one(i);
                }
            });
        }
    }

    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (result.records[i].error) {
            ++result.failures;
        }
        if (!warnings[i].empty()) {
            result.warnings.push_back(std::move(warnings[i]));
        }
    }
    return result;
}

} // namespace bmx
