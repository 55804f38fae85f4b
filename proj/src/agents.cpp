#include "codeseq/agents.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "codeseq/json_io.hpp"
#include "codeseq/text.hpp"

namespace codeseq {

namespace {

struct TemplateName {
  TemplateId id;
  const char* name;
  const char* stem;
};

constexpr TemplateName kTemplateNames[] = {
    {TemplateId::Sufficiency, "Sufficiency", "sufficiency"},
    {TemplateId::ProblemGen, "ProblemGen", "problem_gen"},
    {TemplateId::DirectSolve, "DirectSolve", "direct_solve"},
    {TemplateId::FirstSolution, "FirstSolution", "first_solution"},
    {TemplateId::FailureReason, "FailureReason", "failure_reason"},
    {TemplateId::Correction, "Correction", "correction"},
    {TemplateId::NextNumber, "NextNumber", "next_number"},
};

bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Calls `on_text` for literal spans and `on_placeholder` for {{name}} spans.
template <typename OnText, typename OnPlaceholder>
void scan_template(std::string_view body, OnText on_text, OnPlaceholder on_placeholder) {
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto open = body.find("{{", pos);
    if (open == std::string_view::npos) break;
    auto close = body.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    auto name = body.substr(open + 2, close - open - 2);
    if (name.empty() || !std::all_of(name.begin(), name.end(), is_name_char)) {
      on_text(body.substr(pos, open + 2 - pos));
      pos = open + 2;
      continue;
    }
    on_text(body.substr(pos, open - pos));
    on_placeholder(name);
    pos = close + 2;
  }
  on_text(body.substr(pos));
}

class SlotGuard {
 public:
  SlotGuard(std::mutex& m, std::condition_variable& cv, int& in_flight, int cap) : m_(m), cv_(cv), in_flight_(in_flight) {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return in_flight_ < cap; });
    ++in_flight_;
  }
  ~SlotGuard() {
    {
      std::lock_guard lock(m_);
      --in_flight_;
    }
    cv_.notify_one();
  }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::mutex& m_;
  std::condition_variable& cv_;
  int& in_flight_;
};

}  // namespace

const char* to_string(AgentRole role) { return role == AgentRole::Working ? "Working" : "Guiding"; }

const char* to_string(TemplateId id) {
  for (const auto& t : kTemplateNames) {
    if (t.id == id) return t.name;
  }
  return "Unknown";
}

const char* template_file_stem(TemplateId id) {
  for (const auto& t : kTemplateNames) {
    if (t.id == id) return t.stem;
  }
  return "unknown";
}

std::optional<AgentRole> role_from_string(std::string_view name) {
  if (name == "Working" || name == "working") return AgentRole::Working;
  if (name == "Guiding" || name == "guiding") return AgentRole::Guiding;
  return std::nullopt;
}

std::optional<TemplateId> template_from_string(std::string_view name) {
  for (const auto& t : kTemplateNames) {
    if (name == t.name || name == t.stem) return t.id;
  }
  return std::nullopt;
}

TemplateBindingMissing::TemplateBindingMissing(TemplateId id, std::string placeholder)
    : AgentError(std::string("template ") + to_string(id) + " has no binding for '" + placeholder + "'"),
      placeholder_(std::move(placeholder)) {}

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> names;
  scan_template(body, [](std::string_view) {}, [&](std::string_view name) {
    if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
  });
  return names;
}

std::string PromptTemplate::render(const Bindings& bindings) const {
  for (const auto& name : placeholders()) {
    if (!bindings.count(name)) throw TemplateBindingMissing(id, name);
  }
  std::string out;
  scan_template(body, [&](std::string_view text) { out.append(text); },
                [&](std::string_view name) { out.append(bindings.at(std::string(name))); });
  return out;
}

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw AgentError("prompt directory not found: " + dir.string());
  }
  TemplateRegistry registry;
  for (TemplateId id : kAllTemplates) {
    auto path = dir / (std::string(template_file_stem(id)) + ".txt");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();

    PromptTemplate tmpl;
    tmpl.id = id;
    const std::string marker = "#! reply:";
    if (text.rfind(marker, 0) == 0) {
      auto nl = text.find('\n');
      tmpl.reply_grammar = std::string(trim(std::string_view(text).substr(marker.size(), nl - marker.size())));
      text = nl == std::string::npos ? std::string() : text.substr(nl + 1);
    }
    tmpl.body = std::move(text);
    registry.add(std::move(tmpl));
  }
  return registry;
}

void TemplateRegistry::add(PromptTemplate tmpl) { templates_[tmpl.id] = std::move(tmpl); }

const PromptTemplate& TemplateRegistry::get(TemplateId id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw AgentError(std::string("template not registered: ") + to_string(id));
  return it->second;
}

std::string bindings_digest(const Bindings& bindings) {
  // std::map iterates in key order, so the dump is canonical.
  const std::string canonical = nlohmann::json(bindings).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  unsigned char hash[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(canonical.data(), canonical.size(), hash, &length, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    hex.push_back(kHex[hash[i] >> 4]);
    hex.push_back(kHex[hash[i] & 0xF]);
  }
  return hex;
}

AuditLog::AuditLog(const std::filesystem::path& path, bool keep_in_memory) : keep_in_memory_(keep_in_memory) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  file_.emplace(path, std::ios::app);
  if (!*file_) throw std::runtime_error("cannot open audit log: " + path.string());
}

void AuditLog::append(const ChatExchange& exchange) {
  std::lock_guard lock(mutex_);
  ++count_;
  if (file_) {
    *file_ << dump_json_line(to_json(exchange)) << '\n';
    file_->flush();
  }
  if (keep_in_memory_) exchanges_.push_back(exchange);
}

std::vector<ChatExchange> AuditLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return exchanges_;
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mutex_);
  return count_;
}

std::chrono::milliseconds RetryPolicy::delay_before(int retry) const {
  const double scaled = static_cast<double>(initial_delay.count()) * std::pow(multiplier, retry - 1);
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::min(scaled, static_cast<double>(max_delay.count()))));
}

std::map<TemplateId, double> AgentClientConfig::default_temperatures() {
  return {
      {TemplateId::Sufficiency, 0.0},   {TemplateId::ProblemGen, 0.2}, {TemplateId::DirectSolve, 0.0},
      {TemplateId::FirstSolution, 0.2}, {TemplateId::FailureReason, 0.0}, {TemplateId::Correction, 0.2},
      {TemplateId::NextNumber, 0.0},
  };
}

AgentClient::AgentClient(std::shared_ptr<const TemplateRegistry> registry, AgentClientConfig config,
                         std::shared_ptr<AuditLog> audit)
    : registry_(std::move(registry)),
      config_(std::move(config)),
      audit_(audit ? std::move(audit) : std::make_shared<AuditLog>()),
      sleep_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (!registry_) throw std::invalid_argument("AgentClient: null template registry");
  if (config_.max_concurrent_requests < 1) throw std::invalid_argument("max_concurrent_requests must be >= 1");
  if (config_.retry.max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
}

void AgentClient::bind(AgentRole role, std::shared_ptr<ChatBackend> backend) { backends_[role] = std::move(backend); }

bool AgentClient::bound(AgentRole role) const { return backends_.count(role) != 0; }

std::string AgentClient::render(TemplateId id, const Bindings& bindings) const {
  return registry_->get(id).render(bindings);
}

std::string AgentClient::complete(AgentRole role, TemplateId id, const Bindings& bindings, CallOptions options) {
  auto backend_it = backends_.find(role);
  if (backend_it == backends_.end()) throw AgentError(std::string("no backend bound for role ") + to_string(role));

  ChatRequest request;
  request.role = role;
  request.template_id = id;
  request.bindings = &bindings;
  request.text = render(id, bindings);
  request.digest = bindings_digest(bindings);
  if (options.temperature) {
    request.temperature = *options.temperature;
  } else if (auto t = config_.temperatures.find(id); t != config_.temperatures.end()) {
    request.temperature = t->second;
  }

  ChatExchange exchange;
  exchange.role = role;
  exchange.template_id = id;
  exchange.bindings = bindings;
  exchange.request_text = request.text;

  const auto started = std::chrono::steady_clock::now();
  auto finish = [&] {
    exchange.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
    audit_->append(exchange);
  };

  std::string last_error;
  for (int attempt = 1; attempt <= config_.retry.max_retries + 1; ++attempt) {
    if (attempt > 1) sleep_(config_.retry.delay_before(attempt - 1));
    exchange.attempt = attempt;
    try {
      SlotGuard slot(slots_mutex_, slots_cv_, in_flight_, config_.max_concurrent_requests);
      ++send_count_;
      exchange.reply_text = backend_it->second->send(request);
      finish();
      return exchange.reply_text;
    } catch (const TransportError& e) {
      last_error = e.what();
    } catch (const std::exception& e) {
      exchange.error = e.what();
      finish();
      throw;
    }
  }
  exchange.error = "transport exhausted: " + last_error;
  finish();
  throw TransportExhausted(std::string(to_string(id)) + ": transport failed after " + std::to_string(exchange.attempt) +
                               " attempts: " + last_error,
                           exchange.attempt);
}

}  // namespace codeseq
