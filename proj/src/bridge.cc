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

#include "persona/bridge.h"

#include <algorithm>
#include <system_error>

#include <fmt/format.h>

#include "json.hpp"
#include "util/socket.h"

namespace persona {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(BridgeErrorKind kind) {
  switch (kind) {
    case BridgeErrorKind::kStartup: return "startup";
    case BridgeErrorKind::kConnection: return "connection";
    case BridgeErrorKind::kTimeout: return "timeout";
    case BridgeErrorKind::kProtocol: return "protocol";
  }
  return "unknown";
}

std::string_view to_string(MessageType type) {
  switch (type) {
    case MessageType::kCommand: return "command";
    case MessageType::kStatus: return "status";
    case MessageType::kFeedback: return "feedback";
  }
  return "unknown";
}

BridgeMessage BridgeMessage::command(std::string text) {
  return {MessageType::kCommand, std::move(text), {}, {}};
}

BridgeMessage BridgeMessage::status(std::string state) {
  return {MessageType::kStatus, std::move(state), {}, {}};
}

BridgeMessage BridgeMessage::feedback(std::vector<std::string> logs,
                                      std::vector<std::string> errors) {
  return {MessageType::kFeedback, {}, std::move(logs), std::move(errors)};
}

std::string encode_message(const BridgeMessage& msg) {
  ordered_json j;
  j["msgType"] = to_string(msg.type);
  if (msg.type == MessageType::kFeedback) {
    ordered_json data;
    data["logs"] = msg.logs;
    data["errors"] = msg.errors;
    j["data"] = std::move(data);
  } else {
    j["data"] = msg.text;
  }
  return j.dump();
}

namespace {

[[noreturn]] void malformed(std::string_view payload, const std::string& why) {
  throw BridgeError(BridgeErrorKind::kProtocol,
                    fmt::format("malformed message from environment: {}", why),
                    std::string(payload));
}

std::vector<std::string> string_list(const json& data, const char* key,
                                     std::string_view payload) {
  auto it = data.find(key);
  if (it == data.end() || !it->is_array()) {
    malformed(payload, fmt::format("feedback lacks a \"{}\" list", key));
  }
  std::vector<std::string> out;
  for (const auto& item : *it) {
    if (!item.is_string()) malformed(payload, fmt::format("\"{}\" holds a non-string", key));
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

BridgeMessage decode_message(std::string_view payload) {
  auto j = json::parse(payload, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) malformed(payload, "not a JSON object");
  auto type = j.find("msgType");
  if (type == j.end() || !type->is_string()) malformed(payload, "missing msgType");
  auto data = j.find("data");
  if (data == j.end()) malformed(payload, "missing data");
  const auto t = type->get<std::string>();
  if (t == "command" || t == "status") {
    if (!data->is_string()) malformed(payload, t + " data must be a string");
    return t == "command" ? BridgeMessage::command(data->get<std::string>())
                          : BridgeMessage::status(data->get<std::string>());
  }
  if (t == "feedback") {
    if (!data->is_object()) malformed(payload, "feedback data must be an object");
    return BridgeMessage::feedback(string_list(*data, "logs", payload),
                                   string_list(*data, "errors", payload));
  }
  malformed(payload, fmt::format("unknown msgType '{}'", t));
}

std::string encode_outbound(const OutboundFrame& frame) {
  if (frame.kind == OutboundKind::kGetStatus) return std::string(kGetStatusText);
  return std::string(kActionPrefix) + frame.payload;
}

OutboundFrame decode_outbound(std::string_view text) {
  if (text == kGetStatusText) return OutboundFrame::get_status();
  if (text.substr(0, kActionPrefix.size()) == kActionPrefix) {
    return OutboundFrame::action(std::string(text.substr(kActionPrefix.size())));
  }
  throw BridgeError(BridgeErrorKind::kProtocol,
                    "outbound frame is neither GetStatus nor ACTION:", std::string(text));
}

std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) {
    throw BridgeError(BridgeErrorKind::kProtocol,
                      fmt::format("frame of {} bytes exceeds the {} byte limit",
                                  payload.size(), kMaxFrameBytes));
  }
  auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(payload);
  return out;
}

namespace {

std::uint32_t read_length(const char* p) {
  auto b = reinterpret_cast<const unsigned char*>(p);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

}  // namespace

std::string decode_frame(std::string_view frame) {
  if (frame.size() < 4) {
    throw BridgeError(BridgeErrorKind::kProtocol, "frame shorter than its length prefix",
                      std::string(frame));
  }
  auto n = read_length(frame.data());
  if (n > kMaxFrameBytes || frame.size() - 4 != n) {
    throw BridgeError(BridgeErrorKind::kProtocol,
                      fmt::format("length prefix {} does not match {} payload bytes", n,
                                  frame.size() - 4),
                      std::string(frame));
  }
  return std::string(frame.substr(4));
}

void write_frame(const util::Socket& s, std::string_view payload) {
  util::send_all(s, encode_frame(payload));
}

std::optional<std::string> read_frame(const util::Socket& s) {
  char prefix[4];
  if (!util::recv_exact(s, prefix, 4)) return std::nullopt;
  auto n = read_length(prefix);
  if (n > kMaxFrameBytes) {
    throw BridgeError(BridgeErrorKind::kProtocol,
                      fmt::format("incoming frame of {} bytes exceeds the limit", n));
  }
  std::string payload(n, '\0');
  if (n > 0 && !util::recv_exact(s, payload.data(), n)) {
    throw BridgeError(BridgeErrorKind::kConnection, "peer closed mid-frame");
  }
  return payload;
}

void Transcript::record(Direction direction, std::string payload) {
  std::lock_guard lock(mu_);
  entries_.push_back({direction, std::move(payload)});
}

std::vector<TranscriptEntry> Transcript::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::vector<std::string> check_conformance(const std::vector<TranscriptEntry>& entries) {
  std::vector<std::string> violations;
  bool awaiting_reply = false;
  MessageType awaiting = MessageType::kStatus;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    switch (e.direction) {
      case Direction::kTimeout:
        awaiting_reply = false;
        break;
      case Direction::kToEnvironment: {
        OutboundFrame frame;
        try {
          frame = decode_outbound(e.payload);
        } catch (const BridgeError&) {
          violations.push_back(fmt::format("#{}: outbound frame is neither GetStatus nor ACTION:", i));
          break;
        }
        if (awaiting_reply) {
          violations.push_back(fmt::format("#{}: sent a request while awaiting {}", i,
                                           to_string(awaiting)));
        }
        awaiting_reply = true;
        awaiting = frame.kind == OutboundKind::kGetStatus ? MessageType::kStatus
                                                          : MessageType::kFeedback;
        break;
      }
      case Direction::kToAgent: {
        BridgeMessage msg;
        try {
          msg = decode_message(e.payload);
        } catch (const BridgeError& err) {
          violations.push_back(fmt::format("#{}: {}", i, err.what()));
          break;
        }
        if (awaiting_reply && msg.type == awaiting) awaiting_reply = false;
        break;
      }
    }
  }
  return violations;
}

BridgeTimeouts BridgeTimeouts::from(const Tuning& tuning) {
  return {tuning.status_timeout, tuning.action_timeout};
}

BridgeServer::BridgeServer(BridgeTimeouts timeouts) : timeouts_(timeouts) {}

BridgeServer::~BridgeServer() { close(); }

void BridgeServer::serve(const std::string& host, int port) {
  if (listener_ || conn_) {
    throw BridgeError(BridgeErrorKind::kStartup, "bridge is already serving");
  }
  try {
    listener_ = std::make_unique<util::Socket>(util::listen_tcp(host, port));
    port_ = util::local_port(*listener_);
    host_ = host;
  } catch (const std::system_error& e) {
    listener_.reset();
    throw BridgeError(BridgeErrorKind::kStartup,
                      fmt::format("bridge cannot listen on {}:{}: {}", host, port, e.what()));
  }
}

void BridgeServer::accept_environment(Seconds timeout) {
  if (!listener_) throw BridgeError(BridgeErrorKind::kStartup, "bridge is not serving");
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(timeout);
  std::optional<util::Socket> client;
  try {
    client = util::accept_client(*listener_, timeout.count() < 0
                                                 ? std::chrono::milliseconds(-1)
                                                 : ms);
  } catch (const std::system_error& e) {
    throw BridgeError(BridgeErrorKind::kConnection, e.what());
  }
  if (!client) {
    throw BridgeError(BridgeErrorKind::kTimeout,
                      fmt::format("no environment connected to {}:{} within {:.1f}s", host_,
                                  port_, timeout.count()));
  }
  conn_ = std::make_unique<util::Socket>(std::move(*client));
  // One environment per run: later connection attempts are refused.
  listener_->close();
  listener_.reset();
  reader_ = std::thread([this] { reader_loop(); });
}

void BridgeServer::reader_loop() {
  while (true) {
    std::optional<std::string> frame;
    std::string reason;
    try {
      frame = read_frame(*conn_);
      if (!frame) reason = "environment closed the connection";
    } catch (const std::exception& e) {
      reason = fmt::format("environment connection lost: {}", e.what());
    }
    if (!frame) {
      std::lock_guard lock(mu_);
      disconnected_ = true;
      disconnect_reason_ = reason;
      cv_.notify_all();
      return;
    }
    if (transcript_) transcript_->record(Direction::kToAgent, *frame);
    std::lock_guard lock(mu_);
    auto seq = ++arrivals_;
    try {
      auto msg = decode_message(*frame);
      int* owed = msg.type == MessageType::kStatus     ? &owed_statuses_
                  : msg.type == MessageType::kFeedback ? &owed_feedbacks_
                                                       : nullptr;
      bool stale = owed && *owed > 0;
      if (stale) --*owed;
      queue(msg.type).push_back({seq, std::move(msg), stale});
    } catch (const BridgeError&) {
      malformed_.emplace_back(seq, std::move(*frame));
    }
    cv_.notify_all();
  }
}

std::deque<BridgeServer::Queued>& BridgeServer::queue(MessageType type) {
  switch (type) {
    case MessageType::kCommand: return commands_;
    case MessageType::kStatus: return statuses_;
    case MessageType::kFeedback: break;
  }
  return feedbacks_;
}

const std::deque<BridgeServer::Queued>& BridgeServer::queue(MessageType type) const {
  return const_cast<BridgeServer*>(this)->queue(type);
}

void BridgeServer::send(const std::string& payload) {
  if (!conn_) throw BridgeError(BridgeErrorKind::kConnection, "no environment connected");
  {
    std::lock_guard lock(mu_);
    if (disconnected_) throw BridgeError(BridgeErrorKind::kConnection, disconnect_reason_);
  }
  // Recorded first: the reply can arrive before write_frame returns.
  if (transcript_) transcript_->record(Direction::kToEnvironment, payload);
  try {
    write_frame(*conn_, payload);
  } catch (const std::system_error& e) {
    throw BridgeError(BridgeErrorKind::kConnection,
                      fmt::format("cannot send to environment: {}", e.what()));
  }
}

BridgeMessage BridgeServer::await(MessageType wanted, std::uint64_t since,
                                  Seconds timeout, const char* what) {
  std::unique_lock lock(mu_);
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout);
  bool expired = false;
  while (true) {
    for (auto it = malformed_.begin(); it != malformed_.end(); ++it) {
      if (it->first <= since) continue;
      auto raw = std::move(it->second);
      malformed_.erase(it);
      try {
        decode_message(raw);
      } catch (const BridgeError& e) {
        throw BridgeError(BridgeErrorKind::kProtocol, e.what(), raw);
      }
    }
    auto& q = queue(wanted);
    auto hit = std::find_if(q.begin(), q.end(),
                            [&](const Queued& m) { return m.seq > since && !m.stale; });
    if (hit != q.end()) {
      auto msg = std::move(hit->msg);
      q.erase(hit);
      return msg;
    }
    if (wanted != MessageType::kCommand) {
      auto other = wanted == MessageType::kStatus ? MessageType::kFeedback : MessageType::kStatus;
      for (const auto& m : queue(other)) {
        if (m.seq > since && !m.stale) {
          // Left in its queue: buffered messages are never dropped.
          throw BridgeError(BridgeErrorKind::kProtocol,
                            fmt::format("environment answered {} with a {} message", what,
                                        to_string(other)),
                            encode_message(m.msg));
        }
      }
    }
    if (disconnected_) throw BridgeError(BridgeErrorKind::kConnection, disconnect_reason_);
    if (expired) {
      if (wanted == MessageType::kStatus) ++owed_statuses_;
      if (wanted == MessageType::kFeedback) ++owed_feedbacks_;
      if (transcript_) transcript_->record(Direction::kTimeout, what);
      throw BridgeError(BridgeErrorKind::kTimeout,
                        fmt::format("no {} response within {:.1f}s", what, timeout.count()));
    }
    if (timeout.count() < 0) {
      cv_.wait(lock);
    } else if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
      // Checked once more so a reply that raced the deadline still wins.
      expired = true;
    }
  }
}

std::string BridgeServer::get_command(Seconds timeout) {
  return await(MessageType::kCommand, 0, timeout, "command").text;
}

std::string BridgeServer::get_status() {
  std::lock_guard call(call_mu_);
  std::uint64_t since;
  {
    std::lock_guard lock(mu_);
    since = arrivals_;
  }
  send(std::string(kGetStatusText));
  return await(MessageType::kStatus, since, timeouts_.status, "GetStatus").text;
}

ExecutionFeedback BridgeServer::act_and_feedback(const std::string& payload) {
  std::lock_guard call(call_mu_);
  std::uint64_t since;
  {
    std::lock_guard lock(mu_);
    since = arrivals_;
  }
  send(encode_outbound(OutboundFrame::action(payload)));
  auto msg = await(MessageType::kFeedback, since, timeouts_.action, "ACTION");
  ExecutionFeedback fb;
  fb.logs = std::move(msg.logs);
  fb.errors = std::move(msg.errors);
  return fb;
}

std::size_t BridgeServer::buffered_count(MessageType type) const {
  std::lock_guard lock(mu_);
  return queue(type).size();
}

bool BridgeServer::connected() const {
  std::lock_guard lock(mu_);
  return conn_ != nullptr && !disconnected_;
}

void BridgeServer::set_transcript(std::shared_ptr<Transcript> transcript) {
  transcript_ = std::move(transcript);
}

void BridgeServer::close() {
  if (conn_) conn_->shutdown();
  if (reader_.joinable()) reader_.join();
  if (conn_) conn_->close();
  if (listener_) listener_->close();
}

EnvChannel::EnvChannel(std::unique_ptr<util::Socket> socket) : socket_(std::move(socket)) {}
EnvChannel::EnvChannel(EnvChannel&&) noexcept = default;
EnvChannel& EnvChannel::operator=(EnvChannel&&) noexcept = default;
EnvChannel::~EnvChannel() = default;

EnvChannel EnvChannel::connect(const std::string& host, int port, Seconds retry_for) {
  try {
    return EnvChannel(std::make_unique<util::Socket>(util::connect_tcp(
        host, port, std::chrono::duration_cast<std::chrono::milliseconds>(retry_for))));
  } catch (const std::system_error& e) {
    throw BridgeError(BridgeErrorKind::kConnection, e.what());
  }
}

void EnvChannel::send(const BridgeMessage& msg) { send_raw(encode_message(msg)); }

void EnvChannel::send_raw(std::string_view payload) {
  if (!socket_ || !socket_->valid()) {
    throw BridgeError(BridgeErrorKind::kConnection, "channel is closed");
  }
  try {
    write_frame(*socket_, payload);
  } catch (const std::system_error& e) {
    throw BridgeError(BridgeErrorKind::kConnection, e.what());
  }
}

std::optional<std::string> EnvChannel::receive(Seconds timeout) {
  if (!socket_ || !socket_->valid()) return std::nullopt;
  try {
    if (timeout.count() >= 0 &&
        !util::wait_readable(*socket_, std::chrono::duration_cast<std::chrono::milliseconds>(timeout))) {
      return std::nullopt;
    }
    return read_frame(*socket_);
  } catch (const std::system_error&) {
    return std::nullopt;
  }
}

void EnvChannel::close() {
  if (socket_) socket_->close();
}

}  // namespace persona
