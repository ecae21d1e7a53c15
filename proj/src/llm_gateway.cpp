#include "arena/llm_gateway.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include "arena/error.hpp"
#include "arena/mock_model.hpp"

namespace arena {
namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::Internal, "sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }

class Slot {
 public:
  Slot(std::counting_semaphore<1024>& sem, std::atomic<int>& in_flight, std::atomic<int>& peak)
      : sem_(sem), in_flight_(in_flight) {
    sem_.acquire();
    const int now = ++in_flight_;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
  }
  ~Slot() {
    --in_flight_;
    sem_.release();
  }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
  std::atomic<int>& in_flight_;
};

class GatewaySession : public ChatClient {
 public:
  GatewaySession(LlmGateway& gateway, ModelSpec spec, std::string run_id)
      : gateway_(gateway), spec_(std::move(spec)), run_id_(std::move(run_id)) {}

  ChatExchange complete(const ChatRequest& request) override {
    ChatRequest bound = request;
    bound.spec_id = spec_.spec_id;
    return gateway_.complete(bound, spec_, run_id_);
  }

 private:
  LlmGateway& gateway_;
  ModelSpec spec_;
  std::string run_id_;
};

}  // namespace

void ModelSpec::validate() const {
  if (spec_id.empty()) fail(ErrorCode::ValidationFailed, "model spec_id is empty");
  if (provider.empty()) fail(ErrorCode::ValidationFailed, "model provider is empty");
  if (!(temperature >= 0.0)) fail(ErrorCode::ValidationFailed, "temperature must be >= 0");
  if (max_tokens <= 0) fail(ErrorCode::ValidationFailed, "max_tokens must be positive");
  if (timeout_s <= 0) fail(ErrorCode::ValidationFailed, "timeout_s must be positive");
}

std::string request_hash(const ChatRequest& request) {
  const Json canon{{"spec_id", request.spec_id}, {"system", request.system}, {"user", request.user}};
  return sha256_hex(canonical(canon));
}

Json to_json(const ModelSpec& s) {
  return Json{{"spec_id", s.spec_id},
              {"provider", s.provider},
              {"model_name", s.model_name},
              {"temperature", s.temperature},
              {"max_tokens", s.max_tokens},
              {"timeout_s", s.timeout_s},
              {"knowledge_cutoff", s.knowledge_cutoff ? Json(format_date(*s.knowledge_cutoff)) : Json(nullptr)}};
}

ModelSpec model_spec_from_json(const Json& obj) {
  ModelSpec s;
  s.spec_id = require_string(obj, "spec_id");
  s.provider = require_string(obj, "provider");
  s.model_name = obj.value("model_name", s.spec_id);
  if (auto it = obj.find("temperature"); it != obj.end() && !it->is_null()) {
    if (!it->is_number()) fail(ErrorCode::ValidationFailed, "temperature must be a number");
    s.temperature = it->get<double>();
  }
  if (obj.contains("max_tokens")) s.max_tokens = static_cast<int>(require_int(obj, "max_tokens"));
  if (obj.contains("timeout_s")) s.timeout_s = static_cast<int>(require_int(obj, "timeout_s"));
  if (auto it = obj.find("knowledge_cutoff"); it != obj.end() && !it->is_null()) {
    s.knowledge_cutoff = require_date(obj, "knowledge_cutoff");
  }
  s.validate();
  return s;
}

Json to_json(const ChatExchange& x) {
  return Json{{"request", {{"system", x.request.system}, {"user", x.request.user}, {"spec_id", x.request.spec_id}}},
              {"template_id", x.request.template_id},
              {"response",
               {{"text", x.response.text},
                {"finish_reason", x.response.finish_reason},
                {"latency_ms", x.response.latency_ms},
                {"token_counts", {{"prompt", x.response.tokens.prompt}, {"completion", x.response.tokens.completion}}}}},
              {"request_hash", x.request_hash}};
}

ChatExchange exchange_from_json(const Json& obj) {
  ChatExchange x;
  const Json& req = require(obj, "request");
  x.request.system = require_string(req, "system");
  x.request.user = require_string(req, "user");
  x.request.spec_id = require_string(req, "spec_id");
  x.request.template_id = obj.value("template_id", "");
  const Json& resp = require(obj, "response");
  x.response.text = require_string(resp, "text");
  x.response.finish_reason = resp.value("finish_reason", "");
  x.response.latency_ms = resp.value("latency_ms", std::int64_t{0});
  if (auto tc = resp.find("token_counts"); tc != resp.end() && tc->is_object()) {
    x.response.tokens.prompt = tc->value("prompt", 0);
    x.response.tokens.completion = tc->value("completion", 0);
  }
  x.request_hash = require_string(obj, "request_hash");
  if (x.request_hash != request_hash(x.request)) fail(ErrorCode::CorruptCassette, "request_hash does not match request");
  return x;
}

Json to_json(const ProviderProfile& p) {
  return Json{{"name", p.name},
              {"base_url", p.base_url},
              {"auth_env_var", p.auth_env_var},
              {"wire_dialect", p.wire_dialect},
              {"script", p.script ? Json(p.script->string()) : Json(nullptr)}};
}

ProviderProfile provider_profile_from_json(const Json& obj) {
  ProviderProfile p;
  p.name = require_string(obj, "name");
  p.base_url = obj.value("base_url", "");
  p.auth_env_var = obj.value("auth_env_var", "");
  p.wire_dialect = require_string(obj, "wire_dialect");
  if (auto it = obj.find("script"); it != obj.end() && !it->is_null()) p.script = it->get<std::string>();
  if (p.wire_dialect != "openai" && p.wire_dialect != "generic" && p.wire_dialect != "mock") {
    fail(ErrorCode::BadConfig, "unknown wire_dialect " + p.wire_dialect);
  }
  if (p.wire_dialect != "mock" && p.base_url.empty()) fail(ErrorCode::BadConfig, "provider " + p.name + " needs base_url");
  return p;
}

std::string_view to_string(LlmMode mode) { return mode == LlmMode::Live ? "live" : "replay"; }

LlmMode llm_mode_from(std::string_view text) {
  if (text == "live") return LlmMode::Live;
  if (text == "replay") return LlmMode::Replay;
  fail(ErrorCode::BadConfig, "llm mode must be live or replay");
}

LlmGateway::LlmGateway(GatewayOptions options, std::unique_ptr<Transport> transport)
    : options_(std::move(options)),
      transport_(transport ? std::move(transport) : make_http_transport()),
      slots_(std::max(1, options_.max_concurrency)) {
  if (options_.max_concurrency <= 0 || options_.max_concurrency > 1024) {
    fail(ErrorCode::BadConfig, "max_concurrency must be in [1, 1024]");
  }
  if (options_.max_attempts <= 0) fail(ErrorCode::BadConfig, "max_attempts must be positive");
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void LlmGateway::register_provider(ProviderProfile profile) {
  std::lock_guard lock(mu_);
  if (providers_.contains(profile.name)) fail(ErrorCode::DuplicateProvider, "provider " + profile.name + " exists");
  if (profile.wire_dialect == "mock") {
    mocks_[profile.name] = std::make_shared<const MockModel>(profile.script ? MockModel::from_file(*profile.script)
                                                                             : MockModel{});
  }
  providers_.emplace(profile.name, std::move(profile));
}

void LlmGateway::register_model(ModelSpec spec) {
  spec.validate();
  std::lock_guard lock(mu_);
  models_.insert_or_assign(spec.spec_id, std::move(spec));
}

bool LlmGateway::has_model(const std::string& spec_id) const {
  std::lock_guard lock(mu_);
  return models_.contains(spec_id);
}

ModelSpec LlmGateway::model(const std::string& spec_id) const {
  std::lock_guard lock(mu_);
  auto it = models_.find(spec_id);
  if (it == models_.end()) fail(ErrorCode::UnknownModel, "unknown model spec " + spec_id);
  return it->second;
}

std::vector<ModelSpec> LlmGateway::models() const {
  std::lock_guard lock(mu_);
  std::vector<ModelSpec> out;
  for (const auto& [id, s] : models_) out.push_back(s);
  return out;
}

std::unique_ptr<ChatClient> LlmGateway::session(const ModelSpec& spec, std::string run_id) {
  return std::make_unique<GatewaySession>(*this, spec, std::move(run_id));
}

ChatExchange LlmGateway::complete(const ChatRequest& request, const ModelSpec& spec, const std::string& run_id) {
  ChatRequest req = request;
  req.spec_id = spec.spec_id;
  const std::string hash = request_hash(req);

  if (options_.mode == LlmMode::Replay) {
    std::lock_guard lock(mu_);
    auto it = cassette_.find(hash);
    if (it == cassette_.end()) {
      fail(ErrorCode::CassetteMiss, "no recorded response for request " + hash + " (" + req.template_id + ")");
    }
    ChatExchange hit = it->second;
    hit.request.template_id = req.template_id;
    return hit;
  }

  ChatExchange exchange = call_provider(req, spec);
  exchange.request_hash = hash;
  record(exchange, run_id);
  return exchange;
}

ChatExchange LlmGateway::call_provider(const ChatRequest& request, const ModelSpec& spec) {
  ProviderProfile profile;
  std::shared_ptr<const MockModel> mock;
  {
    std::lock_guard lock(mu_);
    auto it = providers_.find(spec.provider);
    if (it == providers_.end()) fail(ErrorCode::LlmUnavailable, "provider " + spec.provider + " is not registered");
    profile = it->second;
    if (auto m = mocks_.find(profile.name); m != mocks_.end()) mock = m->second;
  }

  ChatExchange exchange;
  exchange.request = request;

  if (profile.wire_dialect == "mock") {
    Slot slot(slots_, in_flight_, peak_in_flight_);
    exchange.response.text = mock->respond(request);
    exchange.response.finish_reason = "stop";
    return exchange;
  }

  std::string api_key;
  if (!profile.auth_env_var.empty()) {
    const char* key = std::getenv(profile.auth_env_var.c_str());
    if (key == nullptr || *key == '\0') {
      fail(ErrorCode::LlmUnavailable, "credentials: environment variable " + profile.auth_env_var + " is not set");
    }
    api_key = key;
  }

  std::string last_error;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    TransportResult result;
    const auto started = std::chrono::steady_clock::now();
    {
      Slot slot(slots_, in_flight_, peak_in_flight_);
      result = transport_->send(profile, spec, request, api_key);
    }
    if (result.status == 200) {
      exchange.response = std::move(result.response);
      exchange.response.latency_ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
      exchange.attempts = attempt;
      spdlog::debug("llm call {} via {} succeeded after {} attempt(s)", request.template_id, profile.name, attempt);
      return exchange;
    }
    last_error = result.status == 0 ? result.error : "HTTP " + std::to_string(result.status);
    if (!retryable(result.status)) break;
    spdlog::warn("llm call via {} failed (attempt {}/{}): {}", profile.name, attempt, options_.max_attempts,
                 last_error);
    if (attempt < options_.max_attempts) {
      const auto idx = std::min<std::size_t>(attempt - 1, options_.backoff.size() - 1);
      options_.sleep(options_.backoff.empty() ? std::chrono::milliseconds{0} : options_.backoff[idx]);
    }
  }
  fail(ErrorCode::LlmUnavailable, "provider " + profile.name + " unavailable: " + last_error);
}

void LlmGateway::record(const ChatExchange& exchange, const std::string& run_id) {
  {
    std::lock_guard lock(mu_);
    cassette_.insert_or_assign(exchange.request_hash, exchange);
    auto& hashes = recorded_by_run_[run_id];
    if (std::find(hashes.begin(), hashes.end(), exchange.request_hash) == hashes.end()) {
      hashes.push_back(exchange.request_hash);
    }
  }
  if (options_.cassette_dir && !run_id.empty()) {
    std::lock_guard lock(write_mu_);
    std::filesystem::create_directories(*options_.cassette_dir);
    std::ofstream out(*options_.cassette_dir / (run_id + ".jsonl"), std::ios::app);
    out << canonical(to_json(exchange)) << "\n";
    if (!out) spdlog::error("could not append to cassette for run {}", run_id);
  }
}

std::size_t LlmGateway::cassette_import(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::CorruptCassette, "cannot open cassette " + path.string());
  std::vector<ChatExchange> parsed;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      parsed.push_back(exchange_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      fail(ErrorCode::CorruptCassette, "cassette " + path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::lock_guard lock(mu_);
  std::set<std::string> distinct;
  for (auto& x : parsed) {
    distinct.insert(x.request_hash);
    cassette_.insert_or_assign(x.request_hash, std::move(x));
  }
  return distinct.size();
}

std::size_t LlmGateway::cassette_export(const std::string& run_id, const std::filesystem::path& path) const {
  std::lock_guard lock(mu_);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  std::size_t n = 0;
  if (auto it = recorded_by_run_.find(run_id); it != recorded_by_run_.end()) {
    for (const auto& hash : it->second) {
      out << canonical(to_json(cassette_.at(hash))) << "\n";
      ++n;
    }
  }
  if (!out) fail(ErrorCode::StorageFailure, "cannot write cassette " + path.string());
  return n;
}

std::size_t LlmGateway::cassette_size() const {
  std::lock_guard lock(mu_);
  return cassette_.size();
}

}  // namespace arena
