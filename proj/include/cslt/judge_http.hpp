#pragma once

// HTTP transport for the judge client, split out so tests that stub the
// transport do not pull in cpp-httplib.

#include <httplib.h>

#include "cslt/judge.hpp"

namespace cslt {

struct ParsedEndpoint {
  std::string scheme;
  std::string host;
  int port = 80;
  std::string path = "/";
};

inline ParsedEndpoint parse_endpoint(const std::string& url) {
  ParsedEndpoint out;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("judge endpoint needs a scheme: " + url);
  out.scheme = url.substr(0, scheme_end);
  if (out.scheme != "http" && out.scheme != "https")
    throw ConfigError("unsupported judge endpoint scheme: " + out.scheme);
  out.port = out.scheme == "https" ? 443 : 80;

  std::string rest = url.substr(scheme_end + 3);
  auto path_start = rest.find('/');
  std::string authority = path_start == std::string::npos ? rest : rest.substr(0, path_start);
  if (path_start != std::string::npos) out.path = rest.substr(path_start);
  auto colon = authority.rfind(':');
  if (colon != std::string::npos) {
    out.host = authority.substr(0, colon);
    out.port = std::stoi(authority.substr(colon + 1));
  } else {
    out.host = authority;
  }
  if (out.host.empty()) throw ConfigError("judge endpoint has no host: " + url);
  return out;
}

// The credential comes from the environment, never from config snapshots.
inline JudgeTransport make_http_transport(const JudgeConfig& cfg) {
  ParsedEndpoint ep = parse_endpoint(cfg.endpoint);
  std::string api_key;
  if (const char* key = std::getenv(cfg.api_key_env.c_str())) api_key = key;
  return [ep, api_key](const std::string& body) -> HttpResult {
    httplib::Client client(ep.host, ep.port);
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = client.Post(ep.path, headers, body, "application/json");
    if (!res) return {0, "transport error"};
    return {res->status, res->body};
  };
}

}  // namespace cslt
