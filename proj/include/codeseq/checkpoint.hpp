#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "codeseq/sequence.hpp"

namespace codeseq {

/// Writes via a temporary file and rename. Leaves the file untouched when it
/// already holds exactly `text`.
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

std::string read_file(const std::filesystem::path& path);

enum class Stage { Ingested, Filtered, ProblemValidated, Solved, Exhausted, Rejected };

const char* to_string(Stage stage);
std::optional<Stage> stage_from_string(std::string_view name);
bool is_terminal(Stage stage);
/// Whether `to` may follow `from` in the pipeline order.
bool transition_allowed(Stage from, Stage to);

struct SequenceState {
  SequenceId sequence_id;
  Stage stage = Stage::Ingested;
  /// Stage the sequence was in when it was rejected.
  std::optional<Stage> rejected_at;
  std::optional<std::string> reject_reason;
  /// Stage name -> artifact file name inside the sequence directory.
  std::map<std::string, std::string> artifacts;
  /// Stage name -> UTC time the stage was reached.
  std::map<std::string, std::string> timestamps;

  bool operator==(const SequenceState&) const = default;
};

class CheckpointCorrupt : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidTransition : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// One directory per sequence holding state.json plus one file per artifact.
/// Safe for concurrent use on distinct sequence ids.
class CheckpointStore {
 public:
  explicit CheckpointStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path dir(const SequenceId& id) const;

  /// nullopt when no state has been committed. Throws CheckpointCorrupt when
  /// state.json or an artifact it names is missing or unreadable.
  std::optional<SequenceState> load_state(const SequenceId& id) const;

  /// Every committed sequence id, sorted.
  std::vector<SequenceId> list() const;

  void write_artifact(const SequenceId& id, const std::string& name, std::string_view text) const;
  std::string read_artifact(const SequenceId& id, const std::string& name) const;

  /// Creates the Ingested state. Throws InvalidTransition if one exists.
  SequenceState create(const SequenceId& id, const std::string& entry_artifact) const;
  /// Moves to `to`, recording `artifact` under the new stage's name.
  SequenceState advance(SequenceState state, Stage to, std::optional<std::string> artifact = std::nullopt) const;
  SequenceState reject(SequenceState state, std::string reason,
                       std::optional<std::string> artifact = std::nullopt) const;

  /// Top-level file outside the per-sequence directories.
  std::filesystem::path global_file(const std::string& name) const { return root_ / name; }

 private:
  void save_state(const SequenceState& state) const;

  std::filesystem::path root_;
};

}  // namespace codeseq
