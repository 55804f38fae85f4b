#include "codeseq/checkpoint.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "codeseq/json_io.hpp"

namespace codeseq {

namespace fs = std::filesystem;

namespace {

constexpr const char* kStateFile = "state.json";

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json state_to_json(const SequenceState& s) {
  return Json{{"sequence_id", s.sequence_id.str()},
              {"stage", to_string(s.stage)},
              {"rejected_at", s.rejected_at ? Json(to_string(*s.rejected_at)) : Json(nullptr)},
              {"reject_reason", s.reject_reason ? Json(*s.reject_reason) : Json(nullptr)},
              {"artifacts", s.artifacts},
              {"timestamps", s.timestamps}};
}

Stage stage_field(const Json& j) {
  auto stage = stage_from_string(j.get<std::string>());
  if (!stage) throw std::runtime_error("unknown stage " + j.get<std::string>());
  return *stage;
}

SequenceState state_from_json(const Json& j) {
  SequenceState s;
  s.sequence_id = SequenceId(j.at("sequence_id").get<std::string>());
  s.stage = stage_field(j.at("stage"));
  if (!j.at("rejected_at").is_null()) s.rejected_at = stage_field(j.at("rejected_at"));
  if (!j.at("reject_reason").is_null()) s.reject_reason = j.at("reject_reason").get<std::string>();
  s.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
  s.timestamps = j.at("timestamps").get<std::map<std::string, std::string>>();
  return s;
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view text) {
  if (fs::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream current;
    current << in.rdbuf();
    if (in && current.str() == text) return;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());

  static std::atomic<unsigned> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::Ingested: return "Ingested";
    case Stage::Filtered: return "Filtered";
    case Stage::ProblemValidated: return "ProblemValidated";
    case Stage::Solved: return "Solved";
    case Stage::Exhausted: return "Exhausted";
    case Stage::Rejected: return "Rejected";
  }
  return "?";
}

std::optional<Stage> stage_from_string(std::string_view name) {
  for (auto s : {Stage::Ingested, Stage::Filtered, Stage::ProblemValidated, Stage::Solved, Stage::Exhausted,
                 Stage::Rejected}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

bool is_terminal(Stage stage) {
  return stage == Stage::Solved || stage == Stage::Exhausted || stage == Stage::Rejected;
}

bool transition_allowed(Stage from, Stage to) {
  if (is_terminal(from)) return false;
  if (to == Stage::Rejected) return true;
  switch (from) {
    case Stage::Ingested: return to == Stage::Filtered;
    case Stage::Filtered: return to == Stage::ProblemValidated;
    case Stage::ProblemValidated: return to == Stage::Solved || to == Stage::Exhausted;
    default: return false;
  }
}

CheckpointStore::CheckpointStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "sequences");
}

fs::path CheckpointStore::dir(const SequenceId& id) const { return root_ / "sequences" / id.str(); }

std::optional<SequenceState> CheckpointStore::load_state(const SequenceId& id) const {
  const fs::path path = dir(id) / kStateFile;
  if (!fs::exists(path)) return std::nullopt;
  SequenceState state;
  try {
    state = state_from_json(Json::parse(read_file(path)));
  } catch (const std::exception& e) {
    throw CheckpointCorrupt(path.string() + ": " + e.what());
  }
  if (state.sequence_id != id) {
    throw CheckpointCorrupt(path.string() + ": records " + state.sequence_id.str() + " instead of " + id.str());
  }
  for (const auto& [stage, file] : state.artifacts) {
    if (!fs::exists(dir(id) / file)) {
      throw CheckpointCorrupt(path.string() + ": artifact " + file + " for stage " + stage + " is missing");
    }
  }
  return state;
}

std::vector<SequenceId> CheckpointStore::list() const {
  std::vector<SequenceId> ids;
  for (const auto& item : fs::directory_iterator(root_ / "sequences")) {
    if (!item.is_directory()) continue;
    auto id = SequenceId::try_parse(item.path().filename().string());
    if (id && fs::exists(item.path() / kStateFile)) ids.push_back(*id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void CheckpointStore::write_artifact(const SequenceId& id, const std::string& name, std::string_view text) const {
  write_file_atomic(dir(id) / name, text);
}

std::string CheckpointStore::read_artifact(const SequenceId& id, const std::string& name) const {
  try {
    return read_file(dir(id) / name);
  } catch (const std::exception& e) {
    throw CheckpointCorrupt(e.what());
  }
}

void CheckpointStore::save_state(const SequenceState& state) const {
  write_file_atomic(dir(state.sequence_id) / kStateFile, dump_json(state_to_json(state)));
}

SequenceState CheckpointStore::create(const SequenceId& id, const std::string& entry_artifact) const {
  if (fs::exists(dir(id) / kStateFile)) throw InvalidTransition(id.str() + " already has a checkpoint");
  SequenceState state;
  state.sequence_id = id;
  state.stage = Stage::Ingested;
  state.artifacts[to_string(Stage::Ingested)] = entry_artifact;
  state.timestamps[to_string(Stage::Ingested)] = utc_now();
  save_state(state);
  return state;
}

SequenceState CheckpointStore::advance(SequenceState state, Stage to, std::optional<std::string> artifact) const {
  if (!transition_allowed(state.stage, to) || to == Stage::Rejected) {
    throw InvalidTransition(state.sequence_id.str() + ": " + to_string(state.stage) + " -> " + to_string(to));
  }
  state.stage = to;
  if (artifact) state.artifacts[to_string(to)] = *artifact;
  state.timestamps[to_string(to)] = utc_now();
  save_state(state);
  return state;
}

SequenceState CheckpointStore::reject(SequenceState state, std::string reason,
                                      std::optional<std::string> artifact) const {
  if (!transition_allowed(state.stage, Stage::Rejected)) {
    throw InvalidTransition(state.sequence_id.str() + ": " + to_string(state.stage) + " -> Rejected");
  }
  state.rejected_at = state.stage;
  state.stage = Stage::Rejected;
  state.reject_reason = std::move(reason);
  if (artifact) state.artifacts[to_string(Stage::Rejected)] = *artifact;
  state.timestamps[to_string(Stage::Rejected)] = utc_now();
  save_state(state);
  return state;
}

}  // namespace codeseq
