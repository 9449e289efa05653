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

// Minimal blocking TCP over POSIX sockets.

#ifndef PERSONA_UTIL_SOCKET_H_
#define PERSONA_UTIL_SOCKET_H_

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace persona::util {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release();
  void close();
  // Unblocks any thread sitting in recv on this socket.
  void shutdown();

 private:
  int fd_ = -1;
};

// Throws std::system_error naming host:port.
Socket listen_tcp(const std::string& host, int port, int backlog = 1);
int local_port(const Socket& s);

// Waits up to `timeout` for a client; nullopt on timeout. A negative
// timeout waits forever.
std::optional<Socket> accept_client(const Socket& listener,
                                    std::chrono::milliseconds timeout);

// Retries refused connections until `retry_for` elapses.
Socket connect_tcp(const std::string& host, int port,
                   std::chrono::milliseconds retry_for);

// Both throw std::system_error on failure.
void send_all(const Socket& s, std::string_view data);
// false on orderly EOF before any byte was read.
bool recv_exact(const Socket& s, char* buf, std::size_t n);

// True when data (or EOF) is ready within `timeout`.
bool wait_readable(const Socket& s, std::chrono::milliseconds timeout);

}  // namespace persona::util

#endif  // PERSONA_UTIL_SOCKET_H_
