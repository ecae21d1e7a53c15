#include <httplib.h>

#include "arena/error.hpp"
#include "arena/llm_gateway.hpp"
#include "arena/market_provider.hpp"

namespace arena {
namespace {

std::string join_path(const std::string& base, std::string_view suffix) {
  std::string out = base;
  if (!out.empty() && out.back() == '/') out.pop_back();
  out += suffix;
  return out;
}

class HttpTransport : public Transport {
 public:
  TransportResult send(const ProviderProfile& profile, const ModelSpec& spec, const ChatRequest& request,
                       const std::string& api_key) override {
    TransportResult out;
    UrlParts url;
    try {
      url = split_url(profile.base_url);
    } catch (const Error& e) {
      out.error = e.what();
      return out;
    }
    httplib::Client client(url.origin);
    client.set_connection_timeout(spec.timeout_s, 0);
    client.set_read_timeout(spec.timeout_s, 0);
    client.set_write_timeout(spec.timeout_s, 0);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    Json body;
    std::string path;
    if (profile.wire_dialect == "openai") {
      path = join_path(url.path, "/chat/completions");
      body = {{"model", spec.model_name},
              {"temperature", spec.temperature},
              {"max_tokens", spec.max_tokens},
              {"messages",
               Json::array({{{"role", "system"}, {"content", request.system}},
                            {{"role", "user"}, {"content", request.user}}})}};
    } else {
      path = url.path;
      body = {{"model", spec.model_name},
              {"temperature", spec.temperature},
              {"max_tokens", spec.max_tokens},
              {"prompt", request.system + "\n\n" + request.user}};
    }

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      out.error = "transport error: " + httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    if (res->status != 200) return out;

    const Json parsed = Json::parse(res->body, nullptr, false);
    try {
      if (parsed.is_discarded()) throw std::runtime_error("response body is not JSON");
      if (profile.wire_dialect == "openai") {
        const Json& choice = parsed.at("choices").at(0);
        out.response.text = choice.at("message").at("content").get<std::string>();
        out.response.finish_reason = choice.value("finish_reason", "");
        if (auto usage = parsed.find("usage"); usage != parsed.end() && usage->is_object()) {
          out.response.tokens.prompt = usage->value("prompt_tokens", 0);
          out.response.tokens.completion = usage->value("completion_tokens", 0);
        }
      } else {
        out.response.text = parsed.at("response").get<std::string>();
        out.response.finish_reason = parsed.value("finish_reason", "stop");
      }
    } catch (const std::exception& e) {
      // A garbled 200 is treated like a dropped connection: retryable.
      out.status = 0;
      out.error = std::string("malformed provider response: ") + e.what();
    }
    return out;
  }
};

}  // namespace

std::unique_ptr<Transport> make_http_transport() { return std::make_unique<HttpTransport>(); }

}  // namespace arena
