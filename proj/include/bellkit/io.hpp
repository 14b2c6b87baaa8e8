#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <utility>
#include <vector>

#include "bellkit/error.hpp"

namespace bellkit::io {

/// Raised when a read does not complete before its deadline.
class Timeout : public Error {
 public:
  using Error::Error;
};

/// Raised when the peer has gone away mid-write.
class ChannelClosed : public Error {
 public:
  using Error::Error;
};

/// Raised when a peer sends a line longer than kMaxLineBytes.
class LineTooLong : public Error {
 public:
  using Error::Error;
};

inline constexpr std::size_t kMaxLineBytes = std::size_t{1} << 20;

/// Newline-delimited text channel.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  /// Sends `line` followed by '\n'.
  virtual void write_line(std::string_view line) = 0;
  /// Next line without its terminator; nullopt at end of stream. Throws
  /// Timeout when nothing arrives within `timeout`.
  virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
};

/// Line channel over a pair of file descriptors (a pipe pair or one socket).
class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd);
  ~FdChannel() override;
  FdChannel(FdChannel&&) noexcept;
  FdChannel& operator=(FdChannel&&) = delete;
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void write_line(std::string_view line) override;
  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override;
  /// Closes the write side so the peer sees end of input.
  void close_write();

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
  bool eof_ = false;
};

/// Two connected channels (a Unix socket pair), for in-process peers.
std::pair<FdChannel, FdChannel> channel_pair();

/// Child process speaking over stdin/stdout. stderr is inherited. The
/// child is killed if still running at destruction.
class Subprocess {
 public:
  explicit Subprocess(const std::vector<std::string>& argv);
  ~Subprocess();
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  FdChannel& channel() { return *channel_; }
  /// Waits up to `timeout` for exit; returns the exit status, or nullopt
  /// if the child is still running (it is then killed).
  std::optional<int> wait(std::chrono::milliseconds timeout);
  void kill();

 private:
  pid_t pid_ = -1;
  std::unique_ptr<FdChannel> channel_;
};

struct CaptureResult {
  int exit_code = -1;  // -1 if killed by a signal or timed out
  bool timed_out = false;
  bool overflow = false;  // stdout exceeded max_bytes; the child was killed
  std::string out;
};

/// Runs argv with stdin from /dev/null and collects stdout.
CaptureResult run_capture(const std::vector<std::string>& argv, std::chrono::milliseconds timeout,
                          std::size_t max_bytes = std::size_t{1} << 28);

/// Splits a command line on whitespace (no quoting).
std::vector<std::string> split_command(std::string_view command);

/// Connects to "host:port".
FdChannel connect_tcp(const std::string& address);

class TcpListener {
 public:
  /// Binds 127.0.0.1:port; port 0 picks a free port.
  explicit TcpListener(std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  FdChannel accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

}  // namespace bellkit::io
