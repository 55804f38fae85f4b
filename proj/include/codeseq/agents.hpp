#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace codeseq {

enum class AgentRole { Working, Guiding };

/// One per prompt used by the pipeline and the evaluation harness.
enum class TemplateId { Sufficiency, ProblemGen, DirectSolve, FirstSolution, FailureReason, Correction, NextNumber };

inline constexpr TemplateId kAllTemplates[] = {
    TemplateId::Sufficiency, TemplateId::ProblemGen,    TemplateId::DirectSolve, TemplateId::FirstSolution,
    TemplateId::FailureReason, TemplateId::Correction, TemplateId::NextNumber,
};

const char* to_string(AgentRole role);
const char* to_string(TemplateId id);
std::optional<AgentRole> role_from_string(std::string_view name);
std::optional<TemplateId> template_from_string(std::string_view name);
/// File stem under the prompt directory, e.g. "problem_gen".
const char* template_file_stem(TemplateId id);

using Bindings = std::map<std::string, std::string>;

class AgentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transient failure reported by a backend; the client retries these.
class TransportError : public AgentError {
 public:
  using AgentError::AgentError;
};

class TransportExhausted : public AgentError {
 public:
  TransportExhausted(const std::string& what, int attempts) : AgentError(what), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

class TemplateBindingMissing : public AgentError {
 public:
  TemplateBindingMissing(TemplateId id, std::string placeholder);
  const std::string& placeholder() const { return placeholder_; }

 private:
  std::string placeholder_;
};

class ScriptMiss : public AgentError {
 public:
  using AgentError::AgentError;
};

/// A reply that could not be parsed into the structure its template asks for.
class AgentParseError : public AgentError {
 public:
  AgentParseError(const std::string& what, std::string raw_reply) : AgentError(what), raw_reply_(std::move(raw_reply)) {}
  const std::string& raw_reply() const { return raw_reply_; }

 private:
  std::string raw_reply_;
};

/// Prompt body with `{{name}}` placeholders.
struct PromptTemplate {
  TemplateId id = TemplateId::Sufficiency;
  std::string body;
  std::string reply_grammar;

  std::vector<std::string> placeholders() const;
  /// Throws TemplateBindingMissing for the first unbound placeholder.
  std::string render(const Bindings& bindings) const;
};

class TemplateRegistry {
 public:
  /// Loads `<stem>.txt` for every template id found in `dir`. A first line of
  /// the form `#! reply: ...` is the reply grammar and is not part of the body.
  static TemplateRegistry load(const std::filesystem::path& dir);

  void add(PromptTemplate tmpl);
  bool contains(TemplateId id) const { return templates_.count(id) != 0; }
  const PromptTemplate& get(TemplateId id) const;

 private:
  std::map<TemplateId, PromptTemplate> templates_;
};

/// Hex SHA-256 of the bindings serialized as sorted-key JSON.
std::string bindings_digest(const Bindings& bindings);

struct ChatRequest {
  AgentRole role = AgentRole::Working;
  TemplateId template_id = TemplateId::Sufficiency;
  const Bindings* bindings = nullptr;
  std::string digest;
  std::string text;
  double temperature = 0.0;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Returns the reply text. Throws TransportError for retryable failures.
  virtual std::string send(const ChatRequest& request) = 0;
};

struct ChatExchange {
  AgentRole role = AgentRole::Working;
  TemplateId template_id = TemplateId::Sufficiency;
  Bindings bindings;
  std::string request_text;
  std::string reply_text;
  std::int64_t latency_ms = 0;
  int attempt = 0;
  std::optional<std::string> error;
};

/// Append-only record of every client call. Thread-safe.
class AuditLog {
 public:
  AuditLog() = default;
  /// Also appends one JSON line per exchange to `path`.
  explicit AuditLog(const std::filesystem::path& path, bool keep_in_memory = false);

  void append(const ChatExchange& exchange);
  std::vector<ChatExchange> snapshot() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::optional<std::ofstream> file_;
  bool keep_in_memory_ = true;
  std::vector<ChatExchange> exchanges_;
  std::size_t count_ = 0;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{8000};

  std::chrono::milliseconds delay_before(int retry) const;
};

struct AgentClientConfig {
  RetryPolicy retry;
  int max_concurrent_requests = 4;
  /// Per-template sampling temperature; missing ids use 0.
  std::map<TemplateId, double> temperatures = default_temperatures();
  /// Used for ProblemGen/FirstSolution when resampling.
  double resample_temperature = 0.9;

  static std::map<TemplateId, double> default_temperatures();
};

class AgentClient {
 public:
  struct CallOptions {
    std::optional<double> temperature;
  };

  AgentClient(std::shared_ptr<const TemplateRegistry> registry, AgentClientConfig config,
              std::shared_ptr<AuditLog> audit = nullptr);

  void bind(AgentRole role, std::shared_ptr<ChatBackend> backend);
  bool bound(AgentRole role) const;

  /// Renders the template, sends it with retries and exponential backoff,
  /// records the exchange, and returns the raw reply.
  std::string complete(AgentRole role, TemplateId id, const Bindings& bindings, CallOptions options = {});

  std::string render(TemplateId id, const Bindings& bindings) const;

  const AgentClientConfig& config() const { return config_; }
  const TemplateRegistry& registry() const { return *registry_; }
  AuditLog& audit() { return *audit_; }

  /// Backend sends performed so far, counting retried attempts.
  std::uint64_t send_count() const { return send_count_.load(); }

  void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) { sleep_ = std::move(sleeper); }

 private:
  std::shared_ptr<const TemplateRegistry> registry_;
  AgentClientConfig config_;
  std::shared_ptr<AuditLog> audit_;
  std::map<AgentRole, std::shared_ptr<ChatBackend>> backends_;
  std::function<void(std::chrono::milliseconds)> sleep_;
  std::atomic<std::uint64_t> send_count_{0};

  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  int in_flight_ = 0;
};

struct ScriptKey {
  TemplateId template_id = TemplateId::Sufficiency;
  std::string digest;

  auto operator<=>(const ScriptKey&) const = default;
};

struct ScriptedReply {
  std::string text;
  /// When set, the reply is a transport failure carrying this message.
  std::optional<std::string> transport_error;
};

/// Deterministic offline backend: replies are consumed in order per
/// (template, bindings digest) key.
class MockBackend : public ChatBackend {
 public:
  MockBackend() = default;
  explicit MockBackend(std::map<ScriptKey, std::vector<ScriptedReply>> script);

  /// Script file: {"entries": [{"template": "ProblemGen", "bindings": {...}
  /// or "digest": "...", "replies": ["text", {"transport_error": "..."}]}]}
  static std::shared_ptr<MockBackend> load(const std::filesystem::path& path);
  static std::shared_ptr<MockBackend> from_json_text(std::string_view text);

  void add(TemplateId id, const Bindings& bindings, std::vector<ScriptedReply> replies);
  void add(ScriptKey key, std::vector<ScriptedReply> replies);

  std::string send(const ChatRequest& request) override;

  std::size_t remaining() const;

 private:
  mutable std::mutex mutex_;
  std::map<ScriptKey, std::deque<ScriptedReply>> queues_;
};

/// Serializes a script in the format accepted by MockBackend::load.
class ScriptWriter {
 public:
  void add(TemplateId id, const Bindings& bindings, std::vector<ScriptedReply> replies);
  std::string to_json_text() const;
  void write(const std::filesystem::path& path) const;

 private:
  struct Entry {
    TemplateId id;
    Bindings bindings;
    std::vector<ScriptedReply> replies;
  };
  std::vector<Entry> entries_;
};

struct HttpBackendConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env;  // environment variable holding the key; may be empty
  std::chrono::seconds timeout{120};
};

/// OpenAI-compatible chat completions endpoint.
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  std::string send(const ChatRequest& request) override;

 private:
  HttpBackendConfig config_;
  std::string api_key_;
};

}  // namespace codeseq
