#pragma once

#include <condition_variable>
#include <deque>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "avgrl/env.hpp"

namespace avgrl::env {

// Raised on malformed messages, dimension mismatches or peer timeouts.
// The harness maps it to a "faulted" run, distinct from divergence.
class EnvProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One UTF-8 JSON object per line in each direction.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void write_line(const std::string& line) = 0;
  // nullopt on EOF or timeout.
  virtual std::optional<std::string> read_line() = 0;
};

class StreamTransport final : public LineTransport {
 public:
  StreamTransport(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  void write_line(const std::string& line) override;
  std::optional<std::string> read_line() override;

 private:
  std::istream& in_;
  std::ostream& out_;
};

// In-process duplex channel; make_pair() returns the two connected ends.
class QueueTransport final : public LineTransport {
 public:
  static std::pair<std::unique_ptr<QueueTransport>,
                   std::unique_ptr<QueueTransport>>
  make_pair(int timeout_ms = 5000);

  void write_line(const std::string& line) override;
  std::optional<std::string> read_line() override;

 private:
  struct Channel {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::string> lines;
    bool closed = false;
  };
  QueueTransport(std::shared_ptr<Channel> rx, std::shared_ptr<Channel> tx,
                 int timeout_ms)
      : rx_(std::move(rx)), tx_(std::move(tx)), timeout_ms_(timeout_ms) {}

  std::shared_ptr<Channel> rx_;
  std::shared_ptr<Channel> tx_;
  int timeout_ms_;

 public:
  ~QueueTransport() override;
};

// Spawns `argv` and speaks the protocol over its stdin/stdout.
class SubprocessTransport final : public LineTransport {
 public:
  explicit SubprocessTransport(const std::vector<std::string>& argv,
                               int timeout_ms = 30000);
  ~SubprocessTransport() override;

  void write_line(const std::string& line) override;
  std::optional<std::string> read_line() override;

 private:
  int child_pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  int timeout_ms_;
  std::string buffer_;
};

// Serves `env` over the transport until a close op or EOF. One outstanding
// request at a time; unknown request fields are ignored.
void serve(Env& env, LineTransport& transport);

// Client side: behaves like a built-in env, backed by a protocol peer.
class ProtocolClientEnv final : public Env {
 public:
  explicit ProtocolClientEnv(std::unique_ptr<LineTransport> transport);
  ~ProtocolClientEnv() override;

  int obs_dim() const override { return obs_dim_; }
  int act_dim() const override { return act_dim_; }
  std::string name() const override { return "protocol"; }
  Vector reset(Rng& rng) override;
  EnvStep step(const Vector& action) override;

 private:
  std::unique_ptr<LineTransport> transport_;
  int obs_dim_ = 0;
  int act_dim_ = 0;
};

}  // namespace avgrl::env
