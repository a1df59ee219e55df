#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <semaphore>
#include <thread>

#include "remote_backend.hpp"

namespace attackdet {

namespace {

constexpr const char* kChatCompletionsPath = "/v1/chat/completions";

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) {
    raise(Errc::ConfigError, "endpoint must include a scheme: \"" + url + "\"");
  }
  const std::size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, kChatCompletionsPath};
  std::string path = url.substr(slash);
  if (path == "/") path = kChatCompletionsPath;
  return {url.substr(0, slash), std::move(path)};
}

bool timeout_error(httplib::Error err) {
  return err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
         err == httplib::Error::Write;
}

class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(BackendConfig config)
      : Backend(std::move(config)),
        endpoint_(split_endpoint(config_.endpoint)),
        in_flight_(std::max(config_.max_in_flight, 1)) {}

  std::string invoke(const PromptRequest& request) override {
    in_flight_.acquire();
    struct Release {
      std::counting_semaphore<>& sem;
      ~Release() { sem.release(); }
    } release{in_flight_};

    httplib::Headers headers;
    if (!config_.auth_env.empty()) {
      const char* token = std::getenv(config_.auth_env.c_str());
      if (token == nullptr || *token == '\0') {
        raise(Errc::AuthMissing, "environment variable " + config_.auth_env + " is not set");
      }
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    nlohmann::json body;
    body["model"] = config_.model_name;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.rendered}}});
    body["temperature"] = 0;
    const std::string payload = body.dump();

    httplib::Error last_error = httplib::Error::Success;
    int last_status = 0;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      if (attempt > 0) {
        const auto backoff = std::min(std::chrono::milliseconds(50 * (1 << (attempt - 1))),
                                      std::chrono::milliseconds(500));
        std::this_thread::sleep_for(backoff);
      }
      httplib::Client client(endpoint_.origin);
      client.set_connection_timeout(config_.timeout);
      client.set_read_timeout(config_.timeout);
      client.set_write_timeout(config_.timeout);
      auto res = client.Post(endpoint_.path, headers, payload, "application/json");
      if (!res) {
        last_error = res.error();
        continue;
      }
      last_status = res->status;
      if (res->status == 200) return extract_content(res->body);
      if (res->status == 429 || res->status >= 500) continue;  // transient
      raise(Errc::BackendUnavailable,
            "HTTP " + std::to_string(res->status) + " from " + endpoint_.origin);
    }
    if (last_status != 0) {
      raise(Errc::BackendUnavailable, "HTTP " + std::to_string(last_status) + " from " +
                                          endpoint_.origin + " after " +
                                          std::to_string(config_.retries + 1) + " attempts");
    }
    if (timeout_error(last_error)) {
      raise(Errc::Timeout, "no reply from " + endpoint_.origin + " within " +
                               std::to_string(config_.timeout.count()) + " ms");
    }
    raise(Errc::BackendUnavailable,
          endpoint_.origin + ": " + httplib::to_string(last_error));
  }

 private:
  static std::string extract_content(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      raise(Errc::MalformedReply, std::string("backend response is not JSON: ") + e.what());
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty() ||
        !j["choices"][0].contains("message") || !j["choices"][0]["message"].contains("content") ||
        !j["choices"][0]["message"]["content"].is_string()) {
      raise(Errc::MalformedReply, "backend response lacks choices[0].message.content");
    }
    return j["choices"][0]["message"]["content"].get<std::string>();
  }

  Endpoint endpoint_;
  std::counting_semaphore<> in_flight_;
};

}  // namespace

std::unique_ptr<Backend> make_remote_backend(const BackendConfig& config) {
  return std::make_unique<RemoteBackend>(config);
}

}  // namespace attackdet
