// Copyright 2026 The Persona Agent Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// HTTP transport for model completions and embeddings. This is the only
// translation unit that talks to model endpoints over the network.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <fmt/format.h>

#include "json.hpp"
#include "persona/embedding.h"
#include "persona/gateway.h"

namespace persona {
namespace {

using json = nlohmann::json;

constexpr std::string_view kDefaultBaseUrl = "https://api.openai.com";

struct Target {
  std::string scheme_host_port;
  std::string path_prefix;
};

// Splits "http://host:port/some/prefix" into the client origin and a path
// prefix. A trailing "/v1" is kept so both ".../v1" and bare hosts work.
Target split_url(std::string_view url) {
  auto scheme_end = url.find("://");
  std::size_t host_begin = scheme_end == std::string_view::npos ? 0 : scheme_end + 3;
  auto slash = url.find('/', host_begin);
  Target t;
  t.scheme_host_port = std::string(url.substr(0, slash));
  t.path_prefix = slash == std::string_view::npos ? "" : std::string(url.substr(slash));
  while (!t.path_prefix.empty() && t.path_prefix.back() == '/') t.path_prefix.pop_back();
  if (!t.path_prefix.ends_with("/v1")) t.path_prefix += "/v1";
  return t;
}

std::string wire_model_name(const std::string& name) {
  for (std::string_view prefix : {"openai/", "ollama_chat/", "ollama/"}) {
    if (name.starts_with(prefix)) return name.substr(prefix.size());
  }
  return name;
}

GatewayError transport_failure(httplib::Error err, const std::string& url) {
  auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                  ? GatewayErrorKind::kTimeout
                  : GatewayErrorKind::kTransport;
  return GatewayError(kind, fmt::format("request to {} failed: {}", url,
                                        httplib::to_string(err)));
}

json post_json(const ModelEndpoint& endpoint, Seconds timeout,
               const std::string& route, const json& body) {
  Target target = split_url(endpoint.base_url.value_or(std::string(kDefaultBaseUrl)));
  httplib::Client client(target.scheme_host_port);
  auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout).count();
  client.set_connection_timeout(usec / 1000000, usec % 1000000);
  client.set_read_timeout(usec / 1000000, usec % 1000000);
  client.set_write_timeout(usec / 1000000, usec % 1000000);

  httplib::Headers headers;
  if (endpoint.api_key && !endpoint.api_key->empty()) {
    headers.emplace("Authorization", "Bearer " + *endpoint.api_key);
  }
  std::string path = target.path_prefix + route;
  std::string url = target.scheme_host_port + path;
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw transport_failure(res.error(), url);
  if (res->status == 408 || res->status == 429 || res->status >= 500) {
    throw GatewayError(GatewayErrorKind::kTransport,
                       fmt::format("{} returned HTTP {}", url, res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw GatewayError(GatewayErrorKind::kProtocol,
                       fmt::format("{} returned HTTP {}", url, res->status));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception&) {
    throw GatewayError(GatewayErrorKind::kProtocol,
                       fmt::format("{} returned a body that is not JSON", url));
  }
}

}  // namespace

HttpBackend::HttpBackend(ModelEndpoint endpoint, Seconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {}

CompletionResult HttpBackend::complete(const CompletionRequest& req) {
  json body = {
      {"model", wire_model_name(endpoint_.model_name)},
      {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})},
      {"max_tokens", req.max_tokens},
      {"temperature", req.temperature},
      {"stream", false},
  };
  auto start = std::chrono::steady_clock::now();
  json reply = post_json(endpoint_, timeout_, "/chat/completions", body);

  CompletionResult result;
  try {
    result.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw GatewayError(GatewayErrorKind::kProtocol,
                       "completion body has no choices[0].message.content");
  }
  if (reply.contains("usage") && reply["usage"].is_object()) {
    result.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
    result.usage.completion_tokens = reply["usage"].value("completion_tokens", 0);
  }
  result.latency = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - start);
  return result;
}

HttpEmbedder::HttpEmbedder(ModelEndpoint endpoint, std::size_t dimension,
                           Seconds timeout)
    : endpoint_(std::move(endpoint)), dimension_(dimension), timeout_(timeout) {}

EmbeddingVector HttpEmbedder::embed_text(std::string_view text) const {
  json body = {{"model", wire_model_name(endpoint_.model_name)},
               {"input", std::string(text)}};
  json reply = post_json(endpoint_, timeout_, "/embeddings", body);
  EmbeddingVector v;
  try {
    v.values = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception&) {
    throw GatewayError(GatewayErrorKind::kProtocol,
                       "embedding body has no data[0].embedding");
  }
  return v;
}

}  // namespace persona
