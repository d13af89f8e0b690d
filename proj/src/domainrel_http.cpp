#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <memory>

#include "attnsel/domainrel.hpp"

namespace attnsel::domainrel {

HttpFetcher make_http_fetcher(const std::string& endpoint, std::chrono::milliseconds timeout) {
  auto client = std::make_shared<httplib::Client>(endpoint);
  client->set_follow_location(true);
  client->set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout));
  client->set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout));
  client->set_default_headers({{"Accept", "application/json"}});
  return [client](const std::string& path_and_query) -> HttpResponse {
    auto res = client->Get(path_and_query);
    if (!res) return {0, {}};
    return {res->status, res->body};
  };
}

}  // namespace attnsel::domainrel
