#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "pyrolens/backends.hpp"
#include "pyrolens/wire.hpp"

namespace pyrolens {

/// Newline-framed byte stream over a file descriptor pair.
class LineTransport {
 public:
  /// Takes ownership of both descriptors (they may be the same socket).
  LineTransport(int read_fd, int write_fd);
  ~LineTransport();
  LineTransport(const LineTransport&) = delete;
  LineTransport& operator=(const LineTransport&) = delete;

  /// Appends '\n'. BackendUnavailable when the peer is gone.
  void write_line(const std::string& line);
  /// Next line without its terminator; nothing on EOF. Timeout when `timeout` elapses first.
  std::optional<std::string> read_line(std::optional<std::chrono::milliseconds> timeout = std::nullopt);
  /// Stops further writes; the peer sees EOF.
  void close_write();
  /// Unblocks a pending read_line, which then reports EOF.
  void shutdown();

  /// Called with every line sent (outgoing = true) or received.
  std::function<void(const std::string& line, bool outgoing)> observer;

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

/// Exchanges hello messages and returns the peer's descriptor.
Capabilities handshake(LineTransport& transport, std::chrono::milliseconds timeout);

struct ProcessOptions {
  std::chrono::milliseconds handshake_timeout{10'000};
  /// Per-request deadline; unset waits forever.
  std::optional<std::chrono::milliseconds> request_timeout;
  /// Lines sent and received, prefixed "> " and "< ", in wire order.
  std::vector<std::string>* transcript = nullptr;
};

/// Backend living in a child process, reached over its stdin/stdout.
/// Requests may be in flight concurrently up to the advertised capacity;
/// responses are matched to requests by id.
class SubprocessBackend final : public Detector, public Classifier {
 public:
  /// Spawns `/bin/sh -c command` and performs the handshake.
  static std::unique_ptr<SubprocessBackend> launch(const std::string& command, ProcessOptions options = {});

  ~SubprocessBackend() override;

  Capabilities capabilities() const override { return caps_; }
  std::vector<Detection> detect(const Image& img, const RegionHint& hint) override;
  Classification classify(const GrayImage& crop, const RegionHint& hint) override;

 private:
  SubprocessBackend(int pid, std::unique_ptr<LineTransport> transport, ProcessOptions options);

  wire::Response roundtrip(std::uint64_t id, const std::string& request);
  void reader_loop();
  void record(const std::string& line, bool outgoing);

  struct Pending {
    std::optional<wire::Response> response;
    std::exception_ptr error;
  };

  int pid_;
  std::unique_ptr<LineTransport> transport_;
  ProcessOptions options_;
  Capabilities caps_;

  std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::uint64_t, Pending> pending_;
  /// Timed-out ids whose late replies are dropped.
  std::set<std::uint64_t> abandoned_;
  std::uint64_t next_id_ = 1;
  int in_flight_ = 0;
  std::exception_ptr fatal_;
  std::mutex write_mutex_;
  std::mutex transcript_mutex_;
  std::jthread reader_;
};

}  // namespace pyrolens
