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

// Agent <-> environment transport. docs/protocol.md is the normative
// description of the bytes on the wire.
//
// Every frame is a 4-byte big-endian length followed by that many bytes of
// UTF-8. Environment-to-agent frames hold a JSON envelope
//   {"msgType": "command" | "status" | "feedback", "data": ...}
// and agent-to-environment frames hold the bare text `GetStatus` or
// `ACTION:<payload>`.

#ifndef PERSONA_BRIDGE_H_
#define PERSONA_BRIDGE_H_

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "persona/config.h"
#include "persona/error.h"
#include "persona/feedback.h"

namespace persona {

namespace util {
class Socket;
}

inline constexpr std::size_t kMaxFrameBytes = 16u << 20;

enum class BridgeErrorKind { kStartup, kConnection, kTimeout, kProtocol };

std::string_view to_string(BridgeErrorKind kind);

class BridgeError : public Error {
 public:
  BridgeError(BridgeErrorKind kind, const std::string& what, std::string raw = {})
      : Error(what), kind_(kind), raw_(std::move(raw)) {}

  BridgeErrorKind kind() const { return kind_; }
  // Offending frame payload for protocol errors.
  const std::string& raw() const { return raw_; }

 private:
  BridgeErrorKind kind_;
  std::string raw_;
};

enum class MessageType { kCommand, kStatus, kFeedback };

std::string_view to_string(MessageType type);

// Inbound message. `text` carries the command or status payload; feedback
// uses `logs` and `errors`.
struct BridgeMessage {
  MessageType type = MessageType::kCommand;
  std::string text;
  std::vector<std::string> logs;
  std::vector<std::string> errors;

  static BridgeMessage command(std::string text);
  static BridgeMessage status(std::string state);
  static BridgeMessage feedback(std::vector<std::string> logs,
                                std::vector<std::string> errors);

  bool operator==(const BridgeMessage&) const = default;
};

std::string encode_message(const BridgeMessage& msg);
// Throws BridgeError(kProtocol) carrying the text.
BridgeMessage decode_message(std::string_view payload);

enum class OutboundKind { kGetStatus, kAction };

struct OutboundFrame {
  OutboundKind kind = OutboundKind::kGetStatus;
  // For actions, the serialized payload after the `ACTION:` prefix.
  std::string payload;

  static OutboundFrame get_status() { return {OutboundKind::kGetStatus, {}}; }
  static OutboundFrame action(std::string payload) {
    return {OutboundKind::kAction, std::move(payload)};
  }

  bool operator==(const OutboundFrame&) const = default;
};

inline constexpr std::string_view kGetStatusText = "GetStatus";
inline constexpr std::string_view kActionPrefix = "ACTION:";

std::string encode_outbound(const OutboundFrame& frame);
OutboundFrame decode_outbound(std::string_view text);

// Length prefix plus payload. Throws BridgeError(kProtocol) above
// kMaxFrameBytes.
std::string encode_frame(std::string_view payload);
// Inverse of encode_frame for a complete buffer.
std::string decode_frame(std::string_view frame);

// Blocking frame I/O. read_frame returns nullopt on orderly EOF.
void write_frame(const util::Socket& s, std::string_view payload);
std::optional<std::string> read_frame(const util::Socket& s);

enum class Direction { kToEnvironment, kToAgent, kTimeout };

struct TranscriptEntry {
  Direction direction;
  std::string payload;
};

// Ordered record of frames seen by one bridge, for conformance checks.
class Transcript {
 public:
  void record(Direction direction, std::string payload);
  std::vector<TranscriptEntry> entries() const;

 private:
  mutable std::mutex mu_;
  std::vector<TranscriptEntry> entries_;
};

// Returns one line per violation of the framing vocabulary or of strict
// request/response alternation. Empty means conformant.
std::vector<std::string> check_conformance(const std::vector<TranscriptEntry>& entries);

struct BridgeTimeouts {
  Seconds status{30.0};
  Seconds action{120.0};

  static BridgeTimeouts from(const Tuning& tuning);
};

// Agent side. Listens, accepts one environment, then closes the listener so
// further connection attempts are refused. A reader thread sorts inbound
// messages into one queue per type.
class BridgeServer {
 public:
  explicit BridgeServer(BridgeTimeouts timeouts = {});
  ~BridgeServer();
  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  // Port 0 picks an ephemeral port. Throws BridgeError(kStartup).
  void serve(const std::string& host, int port);
  int port() const { return port_; }

  // Blocks until the environment connects. A negative timeout waits
  // forever; expiry throws BridgeError(kTimeout).
  void accept_environment(Seconds timeout = Seconds(-1));

  // Next command, buffered ones first. A negative timeout waits forever.
  std::string get_command(Seconds timeout = Seconds(-1));
  std::string get_status();
  // Sends `ACTION:<payload>` and waits for feedback. timed_out is false and
  // post_state is empty on this path.
  ExecutionFeedback act_and_feedback(const std::string& payload);

  std::size_t buffered_count(MessageType type) const;
  bool connected() const;
  void set_transcript(std::shared_ptr<Transcript> transcript);
  void close();

 private:
  struct Queued {
    std::uint64_t seq;
    BridgeMessage msg;
    // The late answer to a request that already timed out. Kept, never
    // handed to a newer request.
    bool stale = false;
  };

  void reader_loop();
  void send(const std::string& payload);
  BridgeMessage await(MessageType wanted, std::uint64_t since, Seconds timeout,
                      const char* what);
  std::deque<Queued>& queue(MessageType type);
  const std::deque<Queued>& queue(MessageType type) const;

  BridgeTimeouts timeouts_;
  std::unique_ptr<util::Socket> listener_;
  std::unique_ptr<util::Socket> conn_;
  std::string host_;
  int port_ = 0;
  std::thread reader_;
  std::shared_ptr<Transcript> transcript_;

  // Serializes request/response pairs.
  std::mutex call_mu_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Queued> commands_, statuses_, feedbacks_;
  std::deque<std::pair<std::uint64_t, std::string>> malformed_;
  std::uint64_t arrivals_ = 0;
  // Timed-out requests whose replies have not arrived yet; replies come in
  // request order, so the next ones of that type belong to them.
  int owed_statuses_ = 0;
  int owed_feedbacks_ = 0;
  bool disconnected_ = false;
  std::string disconnect_reason_;
};

// Environment side of the same protocol.
class EnvChannel {
 public:
  // Retries refused connections for `retry_for`.
  static EnvChannel connect(const std::string& host, int port,
                            Seconds retry_for = Seconds(5.0));
  EnvChannel(EnvChannel&&) noexcept;
  EnvChannel& operator=(EnvChannel&&) noexcept;
  ~EnvChannel();

  void send(const BridgeMessage& msg);
  // Raw payload, for tests that need malformed frames.
  void send_raw(std::string_view payload);
  // nullopt when the agent has closed the connection or on timeout; a
  // negative timeout waits forever.
  std::optional<std::string> receive(Seconds timeout = Seconds(-1));
  void close();

 private:
  explicit EnvChannel(std::unique_ptr<util::Socket> socket);
  std::unique_ptr<util::Socket> socket_;
};

}  // namespace persona

#endif  // PERSONA_BRIDGE_H_
