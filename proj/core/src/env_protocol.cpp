#include "avgrl/env_protocol.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <csignal>
#include <cstring>

#include "json.hpp"

namespace avgrl::env {

using nlohmann::json;

void StreamTransport::write_line(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
}

std::optional<std::string> StreamTransport::read_line() {
  std::string line;
  if (!std::getline(in_, line)) return std::nullopt;
  return line;
}

std::pair<std::unique_ptr<QueueTransport>, std::unique_ptr<QueueTransport>>
QueueTransport::make_pair(int timeout_ms) {
  auto a_to_b = std::make_shared<Channel>();
  auto b_to_a = std::make_shared<Channel>();
  std::unique_ptr<QueueTransport> a(
      new QueueTransport(b_to_a, a_to_b, timeout_ms));
  std::unique_ptr<QueueTransport> b(
      new QueueTransport(a_to_b, b_to_a, timeout_ms));
  return {std::move(a), std::move(b)};
}

void QueueTransport::write_line(const std::string& line) {
  {
    std::lock_guard lock(tx_->mutex);
    tx_->lines.push_back(line);
  }
  tx_->cv.notify_one();
}

std::optional<std::string> QueueTransport::read_line() {
  std::unique_lock lock(rx_->mutex);
  const bool got = rx_->cv.wait_for(
      lock, std::chrono::milliseconds(timeout_ms_),
      [&] { return !rx_->lines.empty() || rx_->closed; });
  if (!got || rx_->lines.empty()) return std::nullopt;
  std::string line = std::move(rx_->lines.front());
  rx_->lines.pop_front();
  return line;
}

QueueTransport::~QueueTransport() {
  {
    std::lock_guard lock(tx_->mutex);
    tx_->closed = true;
  }
  tx_->cv.notify_all();
}

SubprocessTransport::SubprocessTransport(const std::vector<std::string>& argv,
                                         int timeout_ms)
    : timeout_ms_(timeout_ms) {
  if (argv.empty())
    throw EnvProtocolError("subprocess transport: empty command");
  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0)
    throw EnvProtocolError("subprocess transport: pipe() failed");

  const pid_t pid = fork();
  if (pid < 0) throw EnvProtocolError("subprocess transport: fork() failed");
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }
  child_pid_ = pid;
  to_child_ = to_child[1];
  from_child_ = from_child[0];
  close(to_child[0]);
  close(from_child[1]);
}

SubprocessTransport::~SubprocessTransport() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (child_pid_ > 0) {
    int status = 0;
    // Give the child a moment to exit on its own after stdin closes.
    for (int i = 0; i < 50; ++i) {
      if (waitpid(child_pid_, &status, WNOHANG) == child_pid_) return;
      usleep(10000);
    }
    kill(child_pid_, SIGKILL);
    waitpid(child_pid_, &status, 0);
  }
}

void SubprocessTransport::write_line(const std::string& line) {
  std::string payload = line;
  payload.push_back('\n');
  std::size_t written = 0;
  while (written < payload.size()) {
    const ssize_t n =
        write(to_child_, payload.data() + written, payload.size() - written);
    if (n <= 0) throw EnvProtocolError("subprocess transport: write failed");
    written += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> SubprocessTransport::read_line() {
  while (true) {
    const auto newline = buffer_.find('\n');
    if (newline != std::string::npos) {
      std::string line = buffer_.substr(0, newline);
      buffer_.erase(0, newline + 1);
      return line;
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, timeout_ms_);
    if (ready <= 0) return std::nullopt;  // timeout or error
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n <= 0) return std::nullopt;  // EOF
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

namespace {

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector json_to_vector(const json& arr) {
  if (!arr.is_array()) throw EnvProtocolError("protocol: expected array");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  return v;
}

}  // namespace

void serve(Env& environment, LineTransport& transport) {
  Rng rng(0);
  while (true) {
    const auto line = transport.read_line();
    if (!line.has_value()) return;  // peer went away
    json reply;
    try {
      const json request = json::parse(*line);
      const std::string op = request.at("op").get<std::string>();
      if (op == "spec") {
        reply["obs_dim"] = environment.obs_dim();
        reply["act_dim"] = environment.act_dim();
      } else if (op == "reset") {
        if (request.contains("seed"))
          rng = Rng(request.at("seed").get<std::uint64_t>());
        reply["obs"] = vector_to_json(environment.reset(rng));
      } else if (op == "step") {
        const Vector action = json_to_vector(request.at("action"));
        if (action.size() != environment.act_dim())
          throw EnvProtocolError("step: action dimension mismatch");
        const EnvStep s = environment.step(action);
        reply["obs"] = vector_to_json(s.observation);
        reply["reward"] = s.reward;
        reply["terminal"] = s.terminal;
        reply["truncated"] = s.truncated;
      } else if (op == "close") {
        reply["ok"] = true;
        transport.write_line(reply.dump());
        return;
      } else {
        reply["error"] = "unknown op: " + op;
      }
    } catch (const std::exception& e) {
      reply = json{{"error", e.what()}};
    }
    transport.write_line(reply.dump());
  }
}

ProtocolClientEnv::ProtocolClientEnv(std::unique_ptr<LineTransport> transport)
    : transport_(std::move(transport)) {
  transport_->write_line(json{{"op", "spec"}}.dump());
  const auto line = transport_->read_line();
  if (!line.has_value())
    throw EnvProtocolError("protocol client: no reply to spec request");
  json reply;
  try {
    reply = json::parse(*line);
  } catch (const std::exception&) {
    throw EnvProtocolError("protocol client: malformed spec reply");
  }
  if (reply.contains("error"))
    throw EnvProtocolError("protocol peer error: " +
                           reply["error"].get<std::string>());
  obs_dim_ = reply.at("obs_dim").get<int>();
  act_dim_ = reply.at("act_dim").get<int>();
  if (obs_dim_ < 1 || act_dim_ < 1)
    throw EnvProtocolError("protocol client: invalid spec dims");
}

ProtocolClientEnv::~ProtocolClientEnv() {
  try {
    transport_->write_line(json{{"op", "close"}}.dump());
    transport_->read_line();
  } catch (...) {
    // Peer already gone; nothing to clean up.
  }
}

Vector ProtocolClientEnv::reset(Rng& rng) {
  json request{{"op", "reset"}, {"seed", rng.next_u64()}};
  transport_->write_line(request.dump());
  const auto line = transport_->read_line();
  if (!line.has_value())
    throw EnvProtocolError("protocol client: reset timed out");
  json reply;
  try {
    reply = json::parse(*line);
  } catch (const std::exception&) {
    throw EnvProtocolError("protocol client: malformed reset reply");
  }
  if (reply.contains("error"))
    throw EnvProtocolError("protocol peer error: " +
                           reply["error"].get<std::string>());
  Vector obs = json_to_vector(reply.at("obs"));
  if (obs.size() != obs_dim_)
    throw EnvProtocolError("protocol client: reset observation dim mismatch");
  return obs;
}

EnvStep ProtocolClientEnv::step(const Vector& action) {
  if (action.size() != act_dim_)
    throw EnvProtocolError("protocol client: action dim mismatch");
  json request{{"op", "step"}, {"action", vector_to_json(action)}};
  transport_->write_line(request.dump());
  const auto line = transport_->read_line();
  if (!line.has_value())
    throw EnvProtocolError("protocol client: step timed out");
  json reply;
  try {
    reply = json::parse(*line);
  } catch (const std::exception&) {
    throw EnvProtocolError("protocol client: malformed step reply");
  }
  if (reply.contains("error"))
    throw EnvProtocolError("protocol peer error: " +
                           reply["error"].get<std::string>());
  EnvStep out;
  out.observation = json_to_vector(reply.at("obs"));
  if (out.observation.size() != obs_dim_)
    throw EnvProtocolError("protocol client: step observation dim mismatch");
  out.reward = reply.at("reward").get<double>();
  out.terminal = reply.at("terminal").get<bool>();
  out.truncated = reply.at("truncated").get<bool>();
  return out;
}

}  // namespace avgrl::env
