/*
 * Copyright 2026 The ordiag Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ordiag/chat_client.hpp"

#include <cstdlib>

#include "httplib.h"
#include "json.hpp"

namespace ordiag {

using Json = nlohmann::json;

void ModelEndpoint::validate() const {
  if (model_id.empty()) fail(ErrorKind::Validation, "endpoint model_id is empty");
  if (max_concurrency < 1) fail(ErrorKind::Validation, "max_concurrency must be at least 1");
  if (!(request_timeout_s > 0.0)) fail(ErrorKind::Validation, "request timeout must be positive");
  if (rate_limit_per_minute < 0.0) fail(ErrorKind::Validation, "rate limit must be nonnegative");
}

std::string request_body_json(const ChatRequest& request) {
  Json body;
  body["model"] = request.model;
  body["messages"] = Json::array();
  for (const ChatMessage& m : request.messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }
  body["temperature"] = request.temperature;
  if (request.seed) body["seed"] = *request.seed;
  return body.dump();
}

std::string extract_completion_text(const std::string& response_body) {
  Json j;
  try {
    j = Json::parse(response_body);
  } catch (const Json::parse_error& e) {
    throw EndpointError(std::string("malformed completion body: ") + e.what(), false);
  }
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    throw EndpointError("completion body has no choices", false);
  }
  const Json& first = (*choices)[0];
  if (auto msg = first.find("message"); msg != first.end() && msg->contains("content") &&
                                        (*msg)["content"].is_string()) {
    return (*msg)["content"].get<std::string>();
  }
  if (auto text = first.find("text"); text != first.end() && text->is_string()) return text->get<std::string>();
  throw EndpointError("first choice carries no text", false);
}

HttpChatClient::HttpChatClient(ModelEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  endpoint_.validate();
  const std::string& url = endpoint_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorKind::Validation, "base_url needs a scheme: '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(endpoint_.request_timeout_s);
  const auto usecs = static_cast<time_t>((endpoint_.request_timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!endpoint_.auth_env.empty()) {
    if (const char* key = std::getenv(endpoint_.auth_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  auto res = client.Post(path_prefix_ + "/chat/completions", headers, request_body_json(request),
                         "application/json");
  if (!res) {
    throw EndpointError("request to " + scheme_host_port_ + " failed: " + httplib::to_string(res.error()), true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw EndpointError("endpoint returned HTTP " + std::to_string(res->status), true);
  }
  if (res->status != 200) {
    throw EndpointError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200),
                        false);
  }
  return extract_completion_text(res->body);
}

}  // namespace ordiag
