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

#pragma once

// Chat-completion transport. The wire format is the widely deployed one:
//
//   POST {base_url}/chat/completions
//   {"model": ..., "messages": [{"role": ..., "content": ...}],
//    "temperature": ..., "seed": ...}
//
// and the reply text is taken from choices[0].message.content (or
// choices[0].text for completion-style servers).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ordiag/error.hpp"

namespace ordiag {

struct ModelEndpoint {
  std::string base_url;
  std::string model_id;
  // Name of the environment variable holding the API key. The key itself is
  // read at request time and never stored.
  std::string auth_env;
  double request_timeout_s = 60.0;
  int max_concurrency = 4;
  double rate_limit_per_minute = 0.0;  // 0 disables rate limiting

  void validate() const;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
};

// Endpoint failure; transient ones (timeouts, connection errors, HTTP 429
// and 5xx) are retried by the annotator.
class EndpointError : public Error {
 public:
  EndpointError(const std::string& message, bool transient)
      : Error(ErrorKind::Endpoint, message), transient_(transient) {}
  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Must be safe to call from several threads at once.
  virtual std::string complete(const ChatRequest& request) = 0;
};

std::string request_body_json(const ChatRequest& request);
// Throws EndpointError(non-transient) on malformed bodies.
std::string extract_completion_text(const std::string& response_body);

class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(ModelEndpoint endpoint);
  std::string complete(const ChatRequest& request) override;

 private:
  ModelEndpoint endpoint_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

}  // namespace ordiag
