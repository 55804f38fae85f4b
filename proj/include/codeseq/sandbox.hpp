#pragma once

#include <sys/types.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace codeseq {

struct ExecLimits {
  int time_limit_ms = 5000;
  int memory_limit_mb = 256;
  int output_cap_bytes = 64 * 1024;
};

struct ExecRequest {
  std::string code;
  std::string stdin_data;
  ExecLimits limits;
};

enum class ExecStatus { Ok, Error, Timeout, OutputCapExceeded };

const char* to_string(ExecStatus status);

struct ExecResult {
  ExecStatus status = ExecStatus::Ok;
  std::string stdout_text;
  std::optional<std::string> error_message;
  std::optional<std::int64_t> error_line;
  std::int64_t wall_ms = 0;
};

class SandboxUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SandboxProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Executes solution code. One client serves one caller at a time.
class SandboxClient {
 public:
  virtual ~SandboxClient() = default;
  virtual ExecResult execute(const ExecRequest& request) = 0;
};

using SandboxFactory = std::function<std::unique_ptr<SandboxClient>()>;

// Wire format, one JSON object per line in each direction. See
// docs/sandbox_protocol.md.
std::string encode_request(const ExecRequest& request, std::uint64_t id);
/// Throws SandboxProtocolError on malformed lines, id mismatch, or a
/// protocol_error status from the runner.
ExecResult decode_response(std::string_view line, std::uint64_t expected_id);

struct SubprocessSandboxConfig {
  std::filesystem::path runner;
  /// Environment variables passed through to the runner; everything else is
  /// dropped.
  std::vector<std::string> env_allowlist = {"PATH", "LANG", "LC_ALL", "TZ"};
  /// Added to the request's time limit before the runner is killed.
  int kill_grace_ms = 1000;
};

/// Runs the sandbox runner as a child process speaking the line protocol.
/// The session is restarted after a kill or crash.
class SubprocessSandbox : public SandboxClient {
 public:
  explicit SubprocessSandbox(SubprocessSandboxConfig config);
  ~SubprocessSandbox() override;

  SubprocessSandbox(const SubprocessSandbox&) = delete;
  SubprocessSandbox& operator=(const SubprocessSandbox&) = delete;

  ExecResult execute(const ExecRequest& request) override;

  /// Number of runner processes started so far.
  int sessions_started() const { return sessions_started_; }
  bool running() const { return pid_ > 0; }

 private:
  void start();
  void stop(bool kill_now);
  /// Reads one line or returns nullopt at the deadline or on EOF.
  std::optional<std::string> read_line(std::int64_t deadline_ms, bool& eof);

  SubprocessSandboxConfig config_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 1;
  int sessions_started_ = 0;
};

SandboxFactory subprocess_sandbox_factory(SubprocessSandboxConfig config);

}  // namespace codeseq
