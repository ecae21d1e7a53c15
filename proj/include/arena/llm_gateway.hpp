#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "arena/canonical_json.hpp"
#include "arena/chrono.hpp"

namespace arena {

class MockModel;

struct ModelSpec {
  std::string spec_id;
  std::string provider;
  std::string model_name;
  double temperature = 0.0;
  int max_tokens = 1024;
  int timeout_s = 60;
  /// Last date covered by the model's training data, when known.
  std::optional<Date> knowledge_cutoff;

  void validate() const;
};

struct ChatRequest {
  std::string system;
  std::string user;
  std::string spec_id;
  /// Prompt template that produced the request. Recorded, not hashed.
  std::string template_id;
};

struct TokenCounts {
  int prompt = 0;
  int completion = 0;
};

struct ChatResponse {
  std::string text;
  std::string finish_reason;
  std::int64_t latency_ms = 0;
  TokenCounts tokens;
};

struct ChatExchange {
  ChatRequest request;
  ChatResponse response;
  std::string request_hash;
  int attempts = 1;
};

/// SHA-256 (hex) over the canonical form of {system, user, spec_id}.
std::string request_hash(const ChatRequest& request);

Json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const Json& obj);
Json to_json(const ChatExchange& exchange);
ChatExchange exchange_from_json(const Json& obj);

/// What the agent pipeline talks to: one request in, one exchange out.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatExchange complete(const ChatRequest& request) = 0;
};

struct ProviderProfile {
  std::string name;
  std::string base_url;
  std::string auth_env_var;
  /// "openai", "generic" or "mock".
  std::string wire_dialect;
  /// Rule file for the mock dialect.
  std::optional<std::filesystem::path> script;
};

Json to_json(const ProviderProfile& profile);
ProviderProfile provider_profile_from_json(const Json& obj);

/// Outcome of one provider attempt. status 0 means no HTTP response.
struct TransportResult {
  int status = 0;
  ChatResponse response;
  std::string error;
};

/// One attempt against one provider; swappable for tests.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResult send(const ProviderProfile& profile, const ModelSpec& spec, const ChatRequest& request,
                               const std::string& api_key) = 0;
};

/// HTTP transport speaking the openai and generic dialects.
std::unique_ptr<Transport> make_http_transport();

enum class LlmMode { Live, Replay };
std::string_view to_string(LlmMode mode);
LlmMode llm_mode_from(std::string_view text);

struct GatewayOptions {
  LlmMode mode = LlmMode::Live;
  int max_concurrency = 4;
  int max_attempts = 3;
  std::vector<std::chrono::milliseconds> backoff{std::chrono::seconds{1}, std::chrono::seconds{2},
                                                 std::chrono::seconds{4}};
  /// Directory receiving cassettes/<run_id>.jsonl as calls are recorded.
  std::optional<std::filesystem::path> cassette_dir;
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Provider-agnostic chat completion with retries, bounded parallelism and
/// record/replay. Thread-safe.
class LlmGateway {
 public:
  explicit LlmGateway(GatewayOptions options = {}, std::unique_ptr<Transport> transport = nullptr);

  void register_provider(ProviderProfile profile);
  void register_model(ModelSpec spec);
  bool has_model(const std::string& spec_id) const;
  ModelSpec model(const std::string& spec_id) const;
  std::vector<ModelSpec> models() const;

  LlmMode mode() const { return options_.mode; }

  /// Live: up to max_attempts with backoff on retryable failures, then the
  /// exchange is recorded. Replay: cassette lookup; a miss is CassetteMiss.
  ChatExchange complete(const ChatRequest& request, const ModelSpec& spec, const std::string& run_id = "");

  /// A ChatClient bound to one model and run.
  std::unique_ptr<ChatClient> session(const ModelSpec& spec, std::string run_id);

  std::size_t cassette_import(const std::filesystem::path& path);
  /// Writes every exchange recorded under `run_id` to `path` as JSONL.
  std::size_t cassette_export(const std::string& run_id, const std::filesystem::path& path) const;
  std::size_t cassette_size() const;

  int peak_in_flight() const { return peak_in_flight_.load(); }

 private:
  ChatExchange call_provider(const ChatRequest& request, const ModelSpec& spec);
  void record(const ChatExchange& exchange, const std::string& run_id);

  GatewayOptions options_;
  std::unique_ptr<Transport> transport_;
  std::counting_semaphore<1024> slots_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_in_flight_{0};

  mutable std::mutex mu_;
  std::map<std::string, ProviderProfile> providers_;
  std::map<std::string, std::shared_ptr<const MockModel>> mocks_;
  std::map<std::string, ModelSpec> models_;
  std::map<std::string, ChatExchange> cassette_;
  std::map<std::string, std::vector<std::string>> recorded_by_run_;
  std::mutex write_mu_;
};

}  // namespace arena
