#include <cstdlib>
#include <string>

#include "httplib.h"
#include "langsup/enrichment.hpp"

namespace langsup {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw_validation("endpoint must be an absolute URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpTransport final : public LlmTransport {
 public:
  explicit HttpTransport(const EnrichmentConfig& config)
      : endpoint_(split_url(config.endpoint)),
        api_key_env_(config.api_key_env),
        auth_header_(config.auth_header) {}

  std::string complete(const ChatRequest& request) override {
    httplib::Headers headers;
    if (!api_key_env_.empty()) {
      const char* key = std::getenv(api_key_env_.c_str());
      if (key == nullptr || *key == '\0')
        throw TransportError("auth: environment variable " + api_key_env_ + " is not set", false);
      headers.emplace(auth_header_, std::string("Bearer ") + key);
    }

    httplib::Client client(endpoint_.origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    auto res = client.Post(endpoint_.path, headers, chat_request_body(request), "application/json");
    if (!res)
      throw TransportError("POST " + endpoint_.origin + endpoint_.path + ": " + httplib::to_string(res.error()),
                           true);
    if (res->status == 401 || res->status == 403)
      throw TransportError("auth: endpoint returned HTTP " + std::to_string(res->status), false);
    if (res->status < 200 || res->status >= 300)
      throw TransportError("endpoint returned HTTP " + std::to_string(res->status),
                           res->status == 429 || res->status >= 500);
    return parse_chat_response(res->body);
  }

 private:
  Endpoint endpoint_;
  std::string api_key_env_;
  std::string auth_header_;
};

}  // namespace

std::unique_ptr<LlmTransport> make_http_transport(const EnrichmentConfig& config) {
  return std::make_unique<HttpTransport>(config);
}

}  // namespace langsup
