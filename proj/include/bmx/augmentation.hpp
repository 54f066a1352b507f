#pragma once

/** \file augmentation.hpp
 *  \brief Augmented-query records: JSONL persistence and generation through
 *  an LLM chat-completion endpoint.
 *
 * Record format, one JSON object per line:
 *
 *   {"query": "original query", "augmented_queries": ["q1", "q2", ...]}
 *
 * Optional keys: "weights" (one number in [0,1] per augmented query) and
 * "error" (set on records whose generation failed).
 */

#include "bmx/retrieval.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bmx {

struct AugmentationRecord {
    std::string query;
    std::vector<std::string> augmented_queries;
    std::optional<std::vector<double>> weights;
    std::optional<std::string> error;

    friend bool operator==(const AugmentationRecord&, const AugmentationRecord&) = default;
};

using AugmentationMap = std::map<std::string, AugmentationRecord, std::less<>>;

struct LineError {
    std::size_t line = 0;
    std::string message;
};

struct AugmentationFile {
    AugmentationMap records;
    std::vector<LineError> errors;

    /// One-line summary of the failed lines, empty if none failed.
    [[nodiscard]] std::string error_summary() const;
};

/// Reads an augmentation JSONL file. Malformed lines are collected in
/// `errors` and skipped; with `strict` the first one throws DataError.
/// Throws DataError if the file cannot be read.
[[nodiscard]] AugmentationFile load_augmentations(const std::filesystem::path& path, bool strict = false);

void save_augmentations(const std::filesystem::path& path, const std::vector<AugmentationRecord>& records);

[[nodiscard]] std::string to_jsonl_line(const AugmentationRecord& record);

/// Original query plus its augmentations, each weighted by the record's own
/// weight if present and `default_weight` otherwise.
[[nodiscard]] AugmentedQuerySet make_query_set(std::string original, const AugmentationRecord* record,
                                               double default_weight = kDefaultAugmentationWeight);

/// The augmentation prompt with {size} and {query} unsubstituted.
[[nodiscard]] std::string_view augmentation_prompt_template() noexcept;
[[nodiscard]] std::string render_prompt(std::string_view query, std::size_t size);

/// Extracts the first valid record from a model reply, which may be a single
/// JSON object or JSONL (optionally inside a code fence). The returned
/// record's `query` is always `query`.
[[nodiscard]] std::optional<AugmentationRecord> parse_augmentation_reply(std::string_view reply,
                                                                         std::string_view query);

struct ChatRequest {
    std::string model;
    std::string prompt;
    double temperature = 0.0;
};

/// Retryable failure (network, HTTP status, malformed envelope).
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    /// Returns the assistant message text. Throws TransportError on failure.
    /// Must be safe to call from several threads at once.
    virtual std::string complete(const ChatRequest& request) = 0;
};

struct EndpointConfig {
    std::string base_url; ///< e.g. https://api.openai.com/v1; empty means offline
    std::string model = "gpt-4";
    std::string api_key_env = "BMX_LLM_API_KEY";
    double temperature = 0.0;
    unsigned concurrency = 4;
    unsigned max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::seconds timeout{60};
};

/// POSTs OpenAI-style {model, messages, temperature} to <base_url>/chat/completions.
class HttpTransport final : public ChatTransport {
public:
    HttpTransport(const EndpointConfig& config, std::string api_key);
    std::string complete(const ChatRequest& request) override;

private:
    std::string origin_;
    std::string path_;
    std::string api_key_;
    std::chrono::seconds timeout_;
};

/// In-process transport for tests and dry runs; remembers every prompt.
class StubTransport final : public ChatTransport {
public:
    using Responder = std::function<std::string(const ChatRequest&)>;

    explicit StubTransport(Responder responder) : responder_(std::move(responder)) {}
    /// Replies with an empty-augmentation record echoing the query.
    StubTransport();

    std::string complete(const ChatRequest& request) override;
    [[nodiscard]] std::vector<std::string> prompts() const;

private:
    Responder responder_;
    mutable std::mutex mutex_;
    std::vector<std::string> prompts_;
};

/// Throws ConfigError with guidance when no endpoint or credential is configured.
[[nodiscard]] std::unique_ptr<ChatTransport> make_http_transport(const EndpointConfig& config);

struct GenerationResult {
    std::vector<AugmentationRecord> records; ///< same order as the input queries
    std::vector<std::string> warnings;
    std::size_t failures = 0;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

/// One request per query with bounded concurrency. Transport failures are
/// retried with exponential backoff; a query that still fails, or whose reply
/// cannot be parsed, yields a record with `error` set.
[[nodiscard]] GenerationResult generate_augmentations(const std::vector<std::string>& queries, std::size_t size,
                                                      ChatTransport& transport, const EndpointConfig& config,
                                                      const SleepFn& sleep = {});

} // namespace bmx
