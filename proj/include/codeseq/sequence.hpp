#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace codeseq {

using BigInt = boost::multiprecision::cpp_int;

/// Parses a decimal integer with an optional leading '-'. Returns nullopt on
/// anything else (including '+', whitespace, or an empty string).
std::optional<BigInt> parse_bigint(std::string_view text);

/// OEIS identifier: 'A' followed by exactly six decimal digits.
class SequenceId {
 public:
  SequenceId() = default;

  /// Throws std::invalid_argument when `text` is not a well-formed identifier.
  explicit SequenceId(std::string_view text);

  static bool is_valid(std::string_view text);
  static std::optional<SequenceId> try_parse(std::string_view text);

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  auto operator<=>(const SequenceId&) const = default;

 private:
  std::string value_;
};

/// Standalone A-numbers in `text`, in order of appearance.
std::vector<SequenceId> find_sequence_ids(std::string_view text);

/// One tagged line kept verbatim because the parser does not model its tag.
struct RawLine {
  char tag = '\0';
  std::string text;

  bool operator==(const RawLine&) const = default;
};

struct SequenceEntry {
  SequenceId id;
  std::vector<BigInt> terms;
  std::int64_t offset = 0;
  bool offset_declared = false;  // a %O line was present
  // Second component of %O: index of the first term with |a(n)| > 1.
  std::optional<std::int64_t> first_large_index;
  std::optional<std::string> identification;
  std::string name;
  std::vector<std::string> formulas;
  std::vector<std::string> examples;
  std::vector<std::string> programs;
  std::vector<std::string> crossref_lines;
  std::vector<SequenceId> crossrefs;
  std::vector<std::string> keywords;
  std::string source_url;
  std::vector<RawLine> raw;
  // Number of terms carried by each %S/%T/%U line, in order.
  std::vector<std::size_t> term_segments;

  /// Count of tagged lines this entry accounts for.
  std::size_t tagged_line_count() const;

  /// Term at sequence index `n` (respecting offset), if scraped.
  const BigInt* term_at(const BigInt& n) const;

  bool operator==(const SequenceEntry&) const = default;
};

struct BfileEntry {
  std::int64_t index = 0;
  BigInt value;

  bool operator==(const BfileEntry&) const = default;
};

class IngestError : public std::runtime_error {
 public:
  enum class Kind { MalformedLine, MissingTerms, NonContiguousIndex, MalformedPair, OverlapMismatch };

  IngestError(Kind kind, std::size_t line, std::string token, const std::string& what);

  Kind kind() const { return kind_; }
  /// 1-based line number within the parsed text; 0 when not line-specific.
  std::size_t line() const { return line_; }
  const std::string& token() const { return token_; }

 private:
  Kind kind_;
  std::size_t line_;
  std::string token_;
};

const char* to_string(IngestError::Kind kind);

/// Parses one record in the OEIS internal format (%I %S %T %U %N ...).
/// Lines starting with '#' and blank lines are ignored.
SequenceEntry parse_internal_format(std::string_view text);

/// Outcome of parsing one record out of a concatenated file.
struct RecordResult {
  std::size_t first_line = 0;  // 1-based line in the whole file
  std::optional<SequenceEntry> entry;
  std::optional<IngestError> error;
};

/// Splits blank-line separated records and parses each independently.
std::vector<RecordResult> parse_internal_file(std::string_view text);

/// Canonical internal-format text; reparsing yields an equal entry.
std::string serialize_internal_format(const SequenceEntry& entry);

std::vector<BfileEntry> parse_bfile(std::string_view text);

/// Extends `entry` with b-file terms. Values on the overlap must agree.
SequenceEntry merge_bfile(const SequenceEntry& entry, const std::vector<BfileEntry>& pairs);

}  // namespace codeseq
