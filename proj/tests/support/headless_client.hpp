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

#include <optional>
#include <string>

#include "httplib.h"
#include "json.hpp"

namespace ordiag::testing {

// Scripted annotator driving the human-test HTTP API the way a browser
// client would.
class HeadlessClient {
 public:
  explicit HeadlessClient(int port) : http_("127.0.0.1", port) {}

  struct Reply {
    int status = 0;
    nlohmann::json body;
  };

  Reply get(const std::string& path) { return wrap(http_.Get(path)); }
  Reply post(const std::string& path, const nlohmann::json& body) {
    return wrap(http_.Post(path, body.dump(), "application/json"));
  }

  std::string open(const std::string& annotator, const std::string& task) {
    const Reply r = post("/session", {{"annotator_id", annotator}, {"task_id", task}});
    if (r.status != 200) throw std::runtime_error("open failed: " + r.body.dump());
    return r.body["session_id"];
  }

  // Answers every item with `answer(item_id)` and fixed elapsed_ms; returns
  // the positions (1-based, counted before the break) at which a round
  // break was shown.
  template <typename Answer>
  std::vector<int> complete(const std::string& session_id, Answer answer) {
    std::vector<int> breaks;
    int answered = 0;
    for (;;) {
      const Reply next = get("/session/" + session_id + "/next");
      if (next.status != 200) throw std::runtime_error("next failed: " + next.body.dump());
      if (next.body["round_break"].get<bool>()) breaks.push_back(answered);
      if (next.body["item_id"].is_null()) return breaks;
      const std::string item = next.body["item_id"];
      const Reply ack = post("/session/" + session_id + "/label",
                             {{"item_id", item}, {"level", answer(item)}, {"elapsed_ms", 1000}});
      if (ack.status != 200) throw std::runtime_error("label failed: " + ack.body.dump());
      ++answered;
    }
  }

 private:
  static Reply wrap(const httplib::Result& res) {
    if (!res) throw std::runtime_error("no response: " + httplib::to_string(res.error()));
    Reply r;
    r.status = res->status;
    r.body = res->body.empty() ? nlohmann::json() : nlohmann::json::parse(res->body);
    return r;
  }

  httplib::Client http_;
};

}  // namespace ordiag::testing
