#include <fstream>
#include <sstream>

#include <json.hpp>

#include "codeseq/agents.hpp"

namespace codeseq {

MockBackend::MockBackend(std::map<ScriptKey, std::vector<ScriptedReply>> script) {
  for (auto& [key, replies] : script) add(key, std::move(replies));
}

std::shared_ptr<MockBackend> MockBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open mock script: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return from_json_text(buffer.str());
  } catch (const std::exception& e) {
    throw std::runtime_error("mock script " + path.string() + ": " + e.what());
  }
}

std::shared_ptr<MockBackend> MockBackend::from_json_text(std::string_view text) {
  const auto doc = nlohmann::json::parse(text);
  auto backend = std::make_shared<MockBackend>();
  for (const auto& entry : doc.at("entries")) {
    const auto name = entry.at("template").get<std::string>();
    auto id = template_from_string(name);
    if (!id) throw std::runtime_error("unknown template '" + name + "'");

    ScriptKey key{*id, {}};
    if (entry.contains("digest")) {
      key.digest = entry.at("digest").get<std::string>();
    } else {
      key.digest = bindings_digest(entry.at("bindings").get<Bindings>());
    }

    std::vector<ScriptedReply> replies;
    for (const auto& reply : entry.at("replies")) {
      if (reply.is_string()) {
        replies.push_back(ScriptedReply{reply.get<std::string>(), std::nullopt});
      } else {
        replies.push_back(ScriptedReply{{}, reply.at("transport_error").get<std::string>()});
      }
    }
    backend->add(std::move(key), std::move(replies));
  }
  return backend;
}

void MockBackend::add(TemplateId id, const Bindings& bindings, std::vector<ScriptedReply> replies) {
  add(ScriptKey{id, bindings_digest(bindings)}, std::move(replies));
}

void MockBackend::add(ScriptKey key, std::vector<ScriptedReply> replies) {
  std::lock_guard lock(mutex_);
  auto& queue = queues_[std::move(key)];
  for (auto& r : replies) queue.push_back(std::move(r));
}

std::string MockBackend::send(const ChatRequest& request) {
  ScriptedReply reply;
  {
    std::lock_guard lock(mutex_);
    auto it = queues_.find(ScriptKey{request.template_id, request.digest});
    if (it == queues_.end() || it->second.empty()) {
      throw ScriptMiss(std::string("no scripted reply for ") + to_string(request.template_id) + " digest " +
                       request.digest + (it == queues_.end() ? " (unknown key)" : " (queue exhausted)"));
    }
    reply = std::move(it->second.front());
    it->second.pop_front();
  }
  if (reply.transport_error) throw TransportError(*reply.transport_error);
  return reply.text;
}

std::size_t MockBackend::remaining() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& [key, queue] : queues_) n += queue.size();
  return n;
}

void ScriptWriter::add(TemplateId id, const Bindings& bindings, std::vector<ScriptedReply> replies) {
  entries_.push_back(Entry{id, bindings, std::move(replies)});
}

std::string ScriptWriter::to_json_text() const {
  nlohmann::ordered_json doc;
  doc["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : entries_) {
    nlohmann::ordered_json entry;
    entry["template"] = to_string(e.id);
    entry["bindings"] = e.bindings;
    entry["replies"] = nlohmann::ordered_json::array();
    for (const auto& r : e.replies) {
      if (r.transport_error) {
        entry["replies"].push_back({{"transport_error", *r.transport_error}});
      } else {
        entry["replies"].push_back(r.text);
      }
    }
    doc["entries"].push_back(std::move(entry));
  }
  return doc.dump(1);
}

void ScriptWriter::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write mock script: " + path.string());
  out << to_json_text() << '\n';
}

}  // namespace codeseq
