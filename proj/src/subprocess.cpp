#include "pyrolens/subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>

#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

namespace pyrolens {

using namespace std::chrono_literals;

LineTransport::LineTransport(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

LineTransport::~LineTransport() {
  ::close(read_fd_);
  if (write_fd_ != read_fd_) ::close(write_fd_);
}

void LineTransport::write_line(const std::string& line) {
  if (observer) observer(line, true);
  std::string framed = line;
  framed += '\n';
  std::size_t off = 0;
  while (off < framed.size()) {
    ssize_t n = ::send(write_fd_, framed.data() + off, framed.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == ENOTSOCK) n = ::write(write_fd_, framed.data() + off, framed.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendUnavailable(std::string("write to backend failed: ") + std::strerror(errno), line);
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> LineTransport::read_line(std::optional<std::chrono::milliseconds> timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout.value_or(0ms);
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (observer) observer(line, false);
      return line;
    }
    int wait_ms = -1;
    if (timeout) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left <= 0ms) throw Timeout("backend did not answer within " + std::to_string(timeout->count()) + " ms");
      wait_ms = static_cast<int>(left.count());
    }
    pollfd pfd{read_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, wait_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw BackendUnavailable(std::string("poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[65536];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == ECONNRESET) return std::nullopt;
      throw BackendUnavailable(std::string("read from backend failed: ") + std::strerror(errno));
    }
    if (n == 0) return std::nullopt;
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void LineTransport::shutdown() { ::shutdown(read_fd_, SHUT_RDWR); }

void LineTransport::close_write() {
  if (::shutdown(write_fd_, SHUT_WR) < 0 && errno == ENOTSOCK) {
    ::close(write_fd_);
  }
}

Capabilities handshake(LineTransport& transport, std::chrono::milliseconds timeout) {
  transport.write_line(wire::encode_hello());
  const auto line = transport.read_line(timeout);
  if (!line) throw BackendUnavailable("backend closed the stream during handshake");
  const auto r = wire::parse_response(*line);
  if (r.id != 0) throw MalformedResponse("handshake reply carries id " + std::to_string(r.id), *line);
  return wire::decode_hello(r);
}

// ---------------------------------------------------------------------------

std::unique_ptr<SubprocessBackend> SubprocessBackend::launch(const std::string& command, ProcessOptions options) {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) < 0)
    throw BackendUnavailable(std::string("socketpair failed: ") + std::strerror(errno));
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw BackendUnavailable(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(sv[1]);
  auto transport = std::make_unique<LineTransport>(sv[0], sv[0]);
  std::unique_ptr<SubprocessBackend> backend(new SubprocessBackend(pid, std::move(transport), options));
  if (options.transcript != nullptr) {
    backend->transport_->observer = [b = backend.get()](const std::string& line, bool outgoing) {
      b->record(line, outgoing);
    };
  }
  backend->caps_ = handshake(*backend->transport_, options.handshake_timeout);
  backend->reader_ = std::jthread([b = backend.get()] { b->reader_loop(); });
  return backend;
}

SubprocessBackend::SubprocessBackend(int pid, std::unique_ptr<LineTransport> transport, ProcessOptions options)
    : pid_(pid), transport_(std::move(transport)), options_(options) {}

SubprocessBackend::~SubprocessBackend() {
  transport_->close_write();
  int status = 0;
  bool exited = false;
  for (int i = 0; i < 200 && !exited; ++i) {
    exited = ::waitpid(pid_, &status, WNOHANG) == pid_;
    if (!exited) std::this_thread::sleep_for(10ms);
  }
  if (!exited) {
    ::kill(-pid_, SIGKILL);
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
  }
  // Wakes the reader.
  transport_->shutdown();
  if (reader_.joinable()) reader_.join();
}

void SubprocessBackend::record(const std::string& line, bool outgoing) {
  if (options_.transcript == nullptr) return;
  std::lock_guard lock(transcript_mutex_);
  options_.transcript->push_back((outgoing ? "> " : "< ") + line);
}

void SubprocessBackend::reader_loop() {
  for (;;) {
    std::optional<std::string> line;
    try {
      line = transport_->read_line();
      if (!line) throw BackendUnavailable("backend process closed its output");
      auto r = wire::parse_response(*line);
      std::lock_guard lock(mutex_);
      if (abandoned_.erase(r.id) > 0) continue;
      const auto it = pending_.find(r.id);
      if (it == pending_.end() || it->second.response)
        throw MalformedResponse("response for unknown request id " + std::to_string(r.id), *line);
      it->second.response = std::move(r);
      cv_.notify_all();
    } catch (...) {
      std::lock_guard lock(mutex_);
      fatal_ = std::current_exception();
      cv_.notify_all();
      return;
    }
  }
}

wire::Response SubprocessBackend::roundtrip(std::uint64_t id, const std::string& request) {
  std::unique_lock lock(mutex_);
  auto release = [&] {
    pending_.erase(id);
    --in_flight_;
    cv_.notify_all();
  };
  {
    lock.unlock();
    try {
      std::lock_guard wlock(write_mutex_);
      transport_->write_line(request);
    } catch (...) {
      lock.lock();
      release();
      throw;
    }
    lock.lock();
  }
  auto done = [&] {
    const auto& p = pending_.at(id);
    return p.response.has_value() || fatal_ != nullptr;
  };
  if (options_.request_timeout) {
    if (!cv_.wait_for(lock, *options_.request_timeout, done)) {
      release();
      abandoned_.insert(id);
      throw Timeout("request " + std::to_string(id) + " timed out after " +
                    std::to_string(options_.request_timeout->count()) + " ms");
    }
  } else {
    cv_.wait(lock, done);
  }
  auto& p = pending_.at(id);
  if (p.response) {
    wire::Response r = std::move(*p.response);
    release();
    return r;
  }
  const auto err = fatal_;
  release();
  std::rethrow_exception(err);
}

namespace {

std::uint64_t acquire_slot(std::unique_lock<std::mutex>& lock, std::condition_variable& cv, int& in_flight,
                           int capacity, std::exception_ptr& fatal, std::uint64_t& next_id) {
  cv.wait(lock, [&] { return fatal != nullptr || in_flight < capacity; });
  if (fatal) std::rethrow_exception(fatal);
  ++in_flight;
  return next_id++;
}

}  // namespace

std::vector<Detection> SubprocessBackend::detect(const Image& img, const RegionHint&) {
  if (!caps_.can_detect) throw BackendError(caps_.name + ": backend does not offer detect");
  std::uint64_t id = 0;
  {
    std::unique_lock lock(mutex_);
    id = acquire_slot(lock, cv_, in_flight_, caps_.capacity, fatal_, next_id_);
    pending_[id];
  }
  return wire::decode_detections(roundtrip(id, wire::encode_detect(id, img)));
}

Classification SubprocessBackend::classify(const GrayImage& crop, const RegionHint&) {
  if (!caps_.can_classify) throw BackendError(caps_.name + ": backend does not offer classify");
  std::uint64_t id = 0;
  {
    std::unique_lock lock(mutex_);
    id = acquire_slot(lock, cv_, in_flight_, caps_.capacity, fatal_, next_id_);
    pending_[id];
  }
  return wire::decode_classification(roundtrip(id, wire::encode_classify(id, crop)));
}

}  // namespace pyrolens
