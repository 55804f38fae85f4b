#include <gtest/gtest.h>

#include "codeseq/checkpoint.hpp"
#include "codeseq/json_io.hpp"
#include "codeseq/sandbox.hpp"
#include "scenario.hpp"

namespace codeseq {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

const fs::path kRunner = fs::path(CODESEQ_FIXTURE_DIR) / "mini_runner.py";

SubprocessSandboxConfig runner() {
  SubprocessSandboxConfig c;
  c.runner = kRunner;
  return c;
}

ExecRequest request(std::string code, std::string stdin_data = "", int time_limit_ms = 5000) {
  ExecRequest r;
  r.code = std::move(code);
  r.stdin_data = std::move(stdin_data);
  r.limits.time_limit_ms = time_limit_ms;
  return r;
}

fs::path fake_runner(const TempDir& dir, const std::string& name, const std::string& body) {
  const fs::path path = dir / name;
  write_file_atomic(path, "#!" CODESEQ_PYTHON "\nimport json, sys\n" + body);
  fs::permissions(path, fs::perms::owner_all);
  return path;
}

TEST(Protocol, EncodeRequest) {
  ExecRequest r = request("print(1)\n", "3\n", 200);
  const auto j = Json::parse(encode_request(r, 7));
  EXPECT_EQ(j.at("id"), 7);
  EXPECT_EQ(j.at("code"), "print(1)\n");
  EXPECT_EQ(j.at("stdin"), "3\n");
  EXPECT_EQ(j.at("time_limit_ms"), 200);
  EXPECT_EQ(j.at("memory_limit_mb"), 256);
  EXPECT_EQ(j.at("output_cap_bytes"), 65536);
  const std::string line = encode_request(r, 7);
  EXPECT_EQ(line.find('\n'), line.size() - 1);
}

TEST(Protocol, DecodeResponse) {
  auto ok = decode_response(R"({"id": 3, "status": "ok", "stdout": "55\n", "error_message": null,
                                "error_line": null, "wall_ms": 4})",
                            3);
  EXPECT_EQ(ok.status, ExecStatus::Ok);
  EXPECT_EQ(ok.stdout_text, "55\n");
  EXPECT_EQ(ok.wall_ms, 4);

  auto err = decode_response(
      R"({"id": 4, "status": "error", "stdout": "", "error_message": "NameError", "error_line": 2, "wall_ms": 1})", 4);
  EXPECT_EQ(err.status, ExecStatus::Error);
  EXPECT_EQ(err.error_line, 2);

  EXPECT_THROW(decode_response(R"({"id": 5, "status": "ok", "stdout": "", "wall_ms": 1})", 6), SandboxProtocolError);
  EXPECT_THROW(decode_response("not json", 1), SandboxProtocolError);
  EXPECT_THROW(decode_response(R"({"id": 1, "status": "weird", "stdout": "", "wall_ms": 1})", 1),
               SandboxProtocolError);
  EXPECT_THROW(decode_response(R"({"id": null, "status": "protocol_error", "error_message": "bad"})", 1),
               SandboxProtocolError);
  EXPECT_THROW(decode_response(R"({"id": 1, "status": "error", "stdout": "", "wall_ms": 1})", 1),
               SandboxProtocolError);
}

TEST(SubprocessSandbox, FibonacciMatchesOracle) {
  SubprocessSandbox sandbox(runner());
  const std::string code =
      "n = int(input())\n"
      "a, b = 0, 1\n"
      "for _ in range(n):\n"
      "    a, b = b, a + b\n"
      "print(a)\n";
  std::uint64_t a = 0, b = 1;
  for (int n = 0; n <= 20; ++n) {
    auto r = sandbox.execute(request(code, std::to_string(n)));
    ASSERT_EQ(r.status, ExecStatus::Ok) << r.error_message.value_or("");
    EXPECT_EQ(r.stdout_text, std::to_string(a) + "\n");
    const std::uint64_t next = a + b;
    a = b;
    b = next;
  }
  EXPECT_EQ(sandbox.sessions_started(), 1);
}

TEST(SubprocessSandbox, BlockedBuiltinNamesItself) {
  SubprocessSandbox sandbox(runner());
  auto r = sandbox.execute(request("eval(\"1+1\")\n"));
  EXPECT_EQ(r.status, ExecStatus::Error);
  ASSERT_TRUE(r.error_message);
  EXPECT_NE(r.error_message->find("eval"), std::string::npos);
  EXPECT_EQ(r.error_line, 1);
}

TEST(SubprocessSandbox, RunnerTimeout) {
  SubprocessSandbox sandbox(runner());
  const auto started = std::chrono::steady_clock::now();
  auto r = sandbox.execute(request("while True:\n    pass\n", "", 200));
  const auto elapsed = std::chrono::steady_clock::now() - started;
  EXPECT_EQ(r.status, ExecStatus::Timeout);
  EXPECT_GE(r.wall_ms, 200);
  EXPECT_LT(elapsed, std::chrono::seconds(2));
  // The session survives a runner-side timeout.
  EXPECT_EQ(sandbox.execute(request("print(7)\n")).stdout_text, "7\n");
}

TEST(SubprocessSandbox, StdinIsPassedExactly) {
  SubprocessSandbox sandbox(runner());
  auto r = sandbox.execute(request("import sys\nprint(repr(sys.stdin.read()))\n", "a \n\nb"));
  EXPECT_EQ(r.stdout_text, "'a \\n\\nb'\n");
}

TEST(SubprocessSandbox, NoStateLeaksBetweenRequests) {
  SubprocessSandbox sandbox(runner());
  sandbox.execute(request("import math\nmath.pi = 3\nLEAK = 1\n"));
  auto r = sandbox.execute(request("import math\nprint(math.pi > 3, 'LEAK' in globals())\n"));
  EXPECT_EQ(r.stdout_text, "True False\n");
}

TEST(SubprocessSandbox, HungRunnerIsKilledAndRestarted) {
  TempDir dir;
  // Answers the first request normally, then stops responding.
  const auto path = fake_runner(dir, "hang.py",
                                "import time\n"
                                "first = True\n"
                                "for line in sys.stdin:\n"
                                "    req = json.loads(line)\n"
                                "    if not first:\n"
                                "        time.sleep(60)\n"
                                "    first = False\n"
                                "    print(json.dumps({'id': req['id'], 'status': 'ok', 'stdout': 'x', 'error_message': None, 'error_line': None, 'wall_ms': 0}), flush=True)\n");
  SubprocessSandboxConfig c;
  c.runner = path;
  c.kill_grace_ms = 100;
  SubprocessSandbox sandbox(c);
  EXPECT_EQ(sandbox.execute(request("a", "", 100)).status, ExecStatus::Ok);
  auto r = sandbox.execute(request("b", "", 100));
  EXPECT_EQ(r.status, ExecStatus::Timeout);
  EXPECT_FALSE(sandbox.running());
  EXPECT_EQ(sandbox.execute(request("c", "", 100)).status, ExecStatus::Ok);
  EXPECT_EQ(sandbox.sessions_started(), 2);
}

TEST(SubprocessSandbox, CrashedRunnerIsAnErrorThenRestarts) {
  TempDir dir;
  const auto path = fake_runner(dir, "crash.py",
                                "line = sys.stdin.readline()\n"
                                "req = json.loads(line)\n"
                                "if req['code'] == 'crash':\n"
                                "    sys.exit(3)\n"
                                "print(json.dumps({'id': req['id'], 'status': 'ok', 'stdout': 'fine', 'error_message': None, 'error_line': None, 'wall_ms': 0}), flush=True)\n");
  SubprocessSandboxConfig c;
  c.runner = path;
  SubprocessSandbox sandbox(c);
  auto r = sandbox.execute(request("crash"));
  EXPECT_EQ(r.status, ExecStatus::Error);
  EXPECT_EQ(sandbox.execute(request("ok")).stdout_text, "fine");
  EXPECT_EQ(sandbox.sessions_started(), 2);
}

TEST(SubprocessSandbox, IdMismatchIsProtocolError) {
  TempDir dir;
  const auto path = fake_runner(dir, "liar.py",
                                "for line in sys.stdin:\n"
                                "    req = json.loads(line)\n"
                                "    print(json.dumps({'id': req['id'] + 100, 'status': 'ok', 'stdout': '', 'error_message': None, 'error_line': None, 'wall_ms': 0}), flush=True)\n");
  SubprocessSandboxConfig c;
  c.runner = path;
  SubprocessSandbox sandbox(c);
  EXPECT_THROW(sandbox.execute(request("x")), SandboxProtocolError);
}

TEST(SubprocessSandbox, EnvironmentIsScrubbed) {
  ::setenv("CODESEQ_SECRET_FOR_TEST", "leak", 1);
  TempDir dir;
  const auto path = fake_runner(dir, "env.py",
                                "import os\n"
                                "for line in sys.stdin:\n"
                                "    req = json.loads(line)\n"
                                "    out = os.environ.get('CODESEQ_SECRET_FOR_TEST', 'absent')\n"
                                "    print(json.dumps({'id': req['id'], 'status': 'ok', 'stdout': out, 'error_message': None, 'error_line': None, 'wall_ms': 0}), flush=True)\n");
  SubprocessSandboxConfig c;
  c.runner = path;
  SubprocessSandbox sandbox(c);
  EXPECT_EQ(sandbox.execute(request("x")).stdout_text, "absent");
}

TEST(SubprocessSandbox, MissingRunnerIsUnavailable) {
  SubprocessSandboxConfig c;
  c.runner = "/nonexistent/runner";
  EXPECT_THROW(SubprocessSandbox{c}, SandboxUnavailable);
}

}  // namespace
}  // namespace codeseq
