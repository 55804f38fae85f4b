#include "codeseq/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <mutex>

#include <json.hpp>

extern char** environ;

namespace codeseq {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now().time_since_epoch()).count();
}

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

bool write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

std::optional<ExecStatus> status_from_wire(std::string_view s) {
  if (s == "ok") return ExecStatus::Ok;
  if (s == "error") return ExecStatus::Error;
  if (s == "timeout") return ExecStatus::Timeout;
  if (s == "output_cap_exceeded") return ExecStatus::OutputCapExceeded;
  return std::nullopt;
}

}  // namespace

const char* to_string(ExecStatus status) {
  switch (status) {
    case ExecStatus::Ok: return "ok";
    case ExecStatus::Error: return "error";
    case ExecStatus::Timeout: return "timeout";
    case ExecStatus::OutputCapExceeded: return "output_cap_exceeded";
  }
  return "unknown";
}

std::string encode_request(const ExecRequest& request, std::uint64_t id) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["code"] = request.code;
  j["stdin"] = request.stdin_data;
  j["time_limit_ms"] = request.limits.time_limit_ms;
  j["memory_limit_mb"] = request.limits.memory_limit_mb;
  j["output_cap_bytes"] = request.limits.output_cap_bytes;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

ExecResult decode_response(std::string_view line, std::uint64_t expected_id) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw SandboxProtocolError("response is not a JSON object");
  try {
    const auto status_text = j.at("status").get<std::string>();
    if (status_text == "protocol_error") {
      throw SandboxProtocolError("runner rejected request: " + j.value("error_message", std::string("?")));
    }
    if (!j.at("id").is_number_unsigned() || j.at("id").get<std::uint64_t>() != expected_id) {
      throw SandboxProtocolError("response id does not match request " + std::to_string(expected_id));
    }
    auto status = status_from_wire(status_text);
    if (!status) throw SandboxProtocolError("unknown status '" + status_text + "'");

    ExecResult result;
    result.status = *status;
    result.stdout_text = j.at("stdout").get<std::string>();
    if (j.contains("error_message") && !j["error_message"].is_null()) {
      result.error_message = j["error_message"].get<std::string>();
    }
    if (j.contains("error_line") && !j["error_line"].is_null()) result.error_line = j["error_line"].get<std::int64_t>();
    result.wall_ms = j.at("wall_ms").get<std::int64_t>();
    if (result.status == ExecStatus::Error && !result.error_message) {
      throw SandboxProtocolError("error response without error_message");
    }
    return result;
  } catch (const nlohmann::json::exception& e) {
    throw SandboxProtocolError(std::string("malformed response: ") + e.what());
  }
}

SubprocessSandbox::SubprocessSandbox(SubprocessSandboxConfig config) : config_(std::move(config)) {
  ignore_sigpipe();
  if (!std::filesystem::exists(config_.runner)) {
    throw SandboxUnavailable("sandbox runner not found: " + config_.runner.string());
  }
}

SubprocessSandbox::~SubprocessSandbox() { stop(false); }

void SubprocessSandbox::start() {
  int in_pipe[2], out_pipe[2], exec_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw SandboxUnavailable("pipe failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw SandboxUnavailable("pipe failed");
  }
  if (::pipe2(exec_pipe, O_CLOEXEC) != 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw SandboxUnavailable("pipe failed");
  }

  std::vector<std::string> env_storage;
  for (const auto& name : config_.env_allowlist) {
    if (const char* value = std::getenv(name.c_str())) env_storage.push_back(name + "=" + value);
  }
  std::vector<char*> envp;
  for (auto& e : env_storage) envp.push_back(e.data());
  envp.push_back(nullptr);
  std::string path = config_.runner.string();
  char* argv[] = {path.data(), nullptr};

  pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], exec_pipe[0], exec_pipe[1]}) ::close(fd);
    throw SandboxUnavailable("fork failed");
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execve(path.c_str(), argv, envp.data());
    int err = errno;
    (void)!::write(exec_pipe[1], &err, sizeof err);
    ::_exit(127);
  }

  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(exec_pipe[1]);
  int child_errno = 0;
  ssize_t n;
  do {
    n = ::read(exec_pipe[0], &child_errno, sizeof child_errno);
  } while (n < 0 && errno == EINTR);
  ::close(exec_pipe[0]);
  if (n > 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::waitpid(pid, nullptr, 0);
    throw SandboxUnavailable("cannot exec sandbox runner " + path + ": " + std::strerror(child_errno));
  }

  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
  ++sessions_started_;
}

void SubprocessSandbox::stop(bool kill_now) {
  if (pid_ <= 0) return;
  if (to_child_ >= 0) ::close(to_child_);
  to_child_ = -1;
  if (kill_now) {
    ::kill(pid_, SIGKILL);
  } else {
    // End of input asks the runner to exit; give it a moment before killing.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
        pid_ = -1;
        break;
      }
      ::usleep(10'000);
    }
    if (pid_ > 0) ::kill(pid_, SIGKILL);
  }
  if (pid_ > 0) ::waitpid(pid_, nullptr, 0);
  pid_ = -1;
  if (from_child_ >= 0) ::close(from_child_);
  from_child_ = -1;
  buffer_.clear();
}

std::optional<std::string> SubprocessSandbox::read_line(std::int64_t deadline_ms, bool& eof) {
  eof = false;
  while (true) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const std::int64_t remaining = deadline_ms - now_ms();
    if (remaining <= 0) return std::nullopt;
    pollfd pfd{from_child_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(remaining));
    if (rc < 0) {
      if (errno == EINTR) continue;
      eof = true;
      return std::nullopt;
    }
    if (rc == 0) return std::nullopt;
    char chunk[65536];
    ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      eof = true;
      return std::nullopt;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

ExecResult SubprocessSandbox::execute(const ExecRequest& request) {
  if (request.limits.time_limit_ms <= 0 || request.limits.memory_limit_mb <= 0 || request.limits.output_cap_bytes <= 0) {
    throw std::invalid_argument("sandbox limits must be strictly positive");
  }
  if (pid_ <= 0) start();

  const std::uint64_t id = next_id_++;
  const std::int64_t started = now_ms();
  if (!write_all(to_child_, encode_request(request, id))) {
    // The runner died between requests; one fresh session gets the request.
    stop(true);
    start();
    if (!write_all(to_child_, encode_request(request, id))) {
      stop(true);
      throw SandboxUnavailable("sandbox runner does not accept requests");
    }
  }

  bool eof = false;
  auto line = read_line(started + request.limits.time_limit_ms + config_.kill_grace_ms, eof);
  if (!line) {
    const std::int64_t elapsed = now_ms() - started;
    stop(true);
    if (eof) {
      ExecResult crashed;
      crashed.status = ExecStatus::Error;
      crashed.error_message = "sandbox runner exited unexpectedly";
      crashed.wall_ms = elapsed;
      return crashed;
    }
    ExecResult timed_out;
    timed_out.status = ExecStatus::Timeout;
    timed_out.error_message = "killed after " + std::to_string(elapsed) + " ms";
    timed_out.wall_ms = elapsed;
    return timed_out;
  }

  try {
    return decode_response(*line, id);
  } catch (const SandboxProtocolError&) {
    stop(true);
    throw;
  }
}

SandboxFactory subprocess_sandbox_factory(SubprocessSandboxConfig config) {
  return [config]() -> std::unique_ptr<SandboxClient> { return std::make_unique<SubprocessSandbox>(config); };
}

}  // namespace codeseq
