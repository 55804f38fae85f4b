#include "codeseq/sequence.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "codeseq/text.hpp"

namespace codeseq {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::optional<std::int64_t> parse_i64(std::string_view text) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

[[noreturn]] void malformed(std::size_t line, std::string token, const std::string& why) {
  std::ostringstream msg;
  msg << "line " << line << ": " << why;
  if (!token.empty()) msg << " ('" << token << "')";
  throw IngestError(IngestError::Kind::MalformedLine, line, std::move(token), msg.str());
}

std::string join_terms(const std::vector<BigInt>& terms, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i != begin) out += ',';
    out += terms[i].str();
  }
  return out;
}

}  // namespace

std::vector<SequenceId> find_sequence_ids(std::string_view text) {
  std::vector<SequenceId> ids;
  for (std::size_t i = 0; i + 7 <= text.size(); ++i) {
    if (text[i] != 'A') continue;
    if (i > 0 && std::isalnum(static_cast<unsigned char>(text[i - 1]))) continue;
    if (!std::all_of(text.begin() + i + 1, text.begin() + i + 7, is_digit)) continue;
    if (i + 7 < text.size() && std::isalnum(static_cast<unsigned char>(text[i + 7]))) continue;
    ids.emplace_back(text.substr(i, 7));
    i += 6;
  }
  return ids;
}

std::optional<BigInt> parse_bigint(std::string_view text) {
  std::size_t start = (!text.empty() && text.front() == '-') ? 1 : 0;
  if (start == text.size()) return std::nullopt;
  if (!std::all_of(text.begin() + start, text.end(), is_digit)) return std::nullopt;
  return BigInt(std::string(text));
}

SequenceId::SequenceId(std::string_view text) {
  if (!is_valid(text)) throw std::invalid_argument("malformed sequence id: '" + std::string(text) + "'");
  value_ = std::string(text);
}

bool SequenceId::is_valid(std::string_view text) {
  return text.size() == 7 && text[0] == 'A' && std::all_of(text.begin() + 1, text.end(), is_digit);
}

std::optional<SequenceId> SequenceId::try_parse(std::string_view text) {
  if (!is_valid(text)) return std::nullopt;
  return SequenceId(text);
}

std::size_t SequenceEntry::tagged_line_count() const {
  std::size_t n = term_segments.size();
  n += identification ? 1 : 0;
  n += name.empty() ? 0 : 1;
  n += formulas.size() + examples.size() + programs.size() + crossref_lines.size();
  n += keywords.empty() ? 0 : 1;
  n += offset_declared ? 1 : 0;
  n += raw.size();
  return n;
}

const BigInt* SequenceEntry::term_at(const BigInt& n) const {
  BigInt pos = n - offset;
  if (pos < 0 || pos >= terms.size()) return nullptr;
  return &terms[static_cast<std::size_t>(pos)];
}

IngestError::IngestError(Kind kind, std::size_t line, std::string token, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what),
      kind_(kind),
      line_(line),
      token_(std::move(token)) {}

const char* to_string(IngestError::Kind kind) {
  switch (kind) {
    case IngestError::Kind::MalformedLine: return "MalformedLine";
    case IngestError::Kind::MissingTerms: return "MissingTerms";
    case IngestError::Kind::NonContiguousIndex: return "NonContiguousIndex";
    case IngestError::Kind::MalformedPair: return "MalformedPair";
    case IngestError::Kind::OverlapMismatch: return "OverlapMismatch";
  }
  return "Unknown";
}

SequenceEntry parse_internal_format(std::string_view text) {
  SequenceEntry entry;
  char last_term_tag = '\0';
  std::size_t line_no = 0;

  for (std::string_view line : split_lines(text)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || line.front() == '#') continue;

    if (line.size() < 10 || line[0] != '%' || !std::isalpha(static_cast<unsigned char>(line[1])) ||
        line[2] != ' ') {
      malformed(line_no, std::string(line.substr(0, 10)), "not a tagged line");
    }
    const char tag = line[1];
    const std::string_view id_text = line.substr(3, 7);
    if (!SequenceId::is_valid(id_text)) malformed(line_no, std::string(id_text), "bad sequence id");
    if (entry.id.empty()) {
      entry.id = SequenceId(id_text);
    } else if (entry.id.str() != id_text) {
      malformed(line_no, std::string(id_text), "id differs from record id " + entry.id.str());
    }
    if (line.size() > 10 && line[10] != ' ') malformed(line_no, std::string(line.substr(3, 8)), "bad sequence id");
    const std::string_view rest = line.size() > 11 ? line.substr(11) : std::string_view{};

    switch (tag) {
      case 'I':
        if (entry.identification) malformed(line_no, "%I", "duplicate line");
        entry.identification = std::string(rest);
        break;
      case 'S':
      case 'T':
      case 'U': {
        const char expected = last_term_tag == '\0' ? 'S' : last_term_tag == 'S' ? 'T' : last_term_tag == 'T' ? 'U' : '?';
        if (tag != expected) malformed(line_no, std::string("%") + tag, "term lines out of order");
        last_term_tag = tag;
        auto tokens = split(rest, ',');
        // A continued line ends with a trailing comma.
        if (tokens.size() > 1 && trim(tokens.back()).empty()) tokens.pop_back();
        std::size_t count = 0;
        for (auto token : tokens) {
          auto value = parse_bigint(trim(token));
          if (!value) malformed(line_no, std::string(trim(token)), "unparseable integer");
          entry.terms.push_back(std::move(*value));
          ++count;
        }
        entry.term_segments.push_back(count);
        break;
      }
      case 'N':
        if (!entry.name.empty()) malformed(line_no, "%N", "duplicate line");
        if (trim(rest).empty()) malformed(line_no, "%N", "empty name");
        entry.name = std::string(rest);
        break;
      case 'F': entry.formulas.emplace_back(rest); break;
      case 'e': entry.examples.emplace_back(rest); break;
      case 'o': entry.programs.emplace_back(rest); break;
      case 'Y':
        entry.crossref_lines.emplace_back(rest);
        for (auto& id : find_sequence_ids(rest)) {
          if (id != entry.id && std::find(entry.crossrefs.begin(), entry.crossrefs.end(), id) == entry.crossrefs.end()) {
            entry.crossrefs.push_back(std::move(id));
          }
        }
        break;
      case 'K': {
        if (!entry.keywords.empty()) malformed(line_no, "%K", "duplicate line");
        for (auto token : split(rest, ',')) {
          auto kw = trim(token);
          if (kw.empty()) malformed(line_no, std::string(rest), "empty keyword");
          std::string lower(kw);
          std::transform(lower.begin(), lower.end(), lower.begin(),
                         [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
          entry.keywords.push_back(std::move(lower));
        }
        break;
      }
      case 'O': {
        if (entry.offset_declared) malformed(line_no, "%O", "duplicate line");
        entry.offset_declared = true;
        auto parts = split(rest, ',');
        if (parts.empty() || parts.size() > 2) malformed(line_no, std::string(rest), "bad offset");
        auto first = parse_i64(trim(parts[0]));
        if (!first) malformed(line_no, std::string(trim(parts[0])), "bad offset");
        entry.offset = *first;
        if (parts.size() == 2) {
          auto second = parse_i64(trim(parts[1]));
          if (!second) malformed(line_no, std::string(trim(parts[1])), "bad offset");
          entry.first_large_index = *second;
        }
        break;
      }
      default: entry.raw.push_back(RawLine{tag, std::string(rest)}); break;
    }
  }

  if (entry.terms.empty()) {
    throw IngestError(IngestError::Kind::MissingTerms, 0, entry.id.str(),
                      "record " + (entry.id.empty() ? std::string("<no id>") : entry.id.str()) + " has no %S line");
  }
  entry.source_url = "https://oeis.org/" + entry.id.str();
  return entry;
}

std::vector<RecordResult> parse_internal_file(std::string_view text) {
  std::vector<RecordResult> results;
  std::string block;
  std::size_t block_start = 0;
  bool block_has_tag = false;
  std::size_t line_no = 0;

  auto flush = [&] {
    if (block_has_tag) {
      RecordResult result;
      result.first_line = block_start;
      try {
        result.entry = parse_internal_format(block);
      } catch (const IngestError& e) {
        const std::size_t line = e.line() == 0 ? 0 : block_start + e.line() - 1;
        result.error.emplace(e.kind(), line, e.token(), e.what());
      }
      results.push_back(std::move(result));
    }
    block.clear();
    block_has_tag = false;
  };

  for (std::string_view line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) {
      flush();
      continue;
    }
    if (block.empty()) block_start = line_no;
    block.append(line).push_back('\n');
    if (line.front() != '#') block_has_tag = true;
  }
  flush();
  return results;
}

std::string serialize_internal_format(const SequenceEntry& entry) {
  std::ostringstream out;
  const std::string& id = entry.id.str();
  auto emit = [&](char tag, std::string_view rest) {
    out << '%' << tag << ' ' << id;
    if (!rest.empty()) out << ' ' << rest;
    out << '\n';
  };

  if (entry.identification) emit('I', *entry.identification);

  std::vector<std::size_t> segments = entry.term_segments;
  std::size_t total = 0;
  for (auto s : segments) total += s;
  if (segments.empty() || segments.size() > 3 || total != entry.terms.size() ||
      std::find(segments.begin(), segments.end(), 0) != segments.end()) {
    segments = {entry.terms.size()};
  }
  std::size_t begin = 0;
  const char tags[] = {'S', 'T', 'U'};
  for (std::size_t i = 0; i < segments.size(); ++i) {
    emit(tags[i], join_terms(entry.terms, begin, begin + segments[i]));
    begin += segments[i];
  }

  if (!entry.name.empty()) emit('N', entry.name);
  for (const auto& f : entry.formulas) emit('F', f);
  for (const auto& e : entry.examples) emit('e', e);
  for (const auto& p : entry.programs) emit('o', p);
  for (const auto& y : entry.crossref_lines) emit('Y', y);
  if (!entry.keywords.empty()) emit('K', join(entry.keywords, ","));
  if (entry.offset_declared || entry.first_large_index || entry.offset != 0) {
    std::string o = std::to_string(entry.offset);
    if (entry.first_large_index) o += "," + std::to_string(*entry.first_large_index);
    emit('O', o);
  }
  for (const auto& r : entry.raw) emit(r.tag, r.text);
  return out.str();
}

std::vector<BfileEntry> parse_bfile(std::string_view text) {
  std::vector<BfileEntry> pairs;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;

    auto fields = split_whitespace(body);
    if (fields.size() != 2) {
      throw IngestError(IngestError::Kind::MalformedPair, line_no, std::string(body),
                        "line " + std::to_string(line_no) + ": expected 'index value'");
    }
    auto index = parse_i64(fields[0]);
    auto value = parse_bigint(fields[1]);
    if (!index || !value) {
      throw IngestError(IngestError::Kind::MalformedPair, line_no, std::string(body),
                        "line " + std::to_string(line_no) + ": unparseable pair");
    }
    if (!pairs.empty() && *index != pairs.back().index + 1) {
      throw IngestError(IngestError::Kind::NonContiguousIndex, line_no, std::string(fields[0]),
                        "line " + std::to_string(line_no) + ": index " + std::to_string(*index) + " follows " +
                            std::to_string(pairs.back().index));
    }
    pairs.push_back(BfileEntry{*index, std::move(*value)});
  }
  return pairs;
}

SequenceEntry merge_bfile(const SequenceEntry& entry, const std::vector<BfileEntry>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("merge_bfile: empty b-file");
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    if (pairs[i].index != pairs[i - 1].index + 1) {
      throw IngestError(IngestError::Kind::NonContiguousIndex, 0, std::to_string(pairs[i].index),
                        "b-file index " + std::to_string(pairs[i].index) + " is not contiguous");
    }
  }

  const std::int64_t entry_begin = entry.offset;
  const std::int64_t entry_end = entry.offset + static_cast<std::int64_t>(entry.terms.size());
  const std::int64_t bfile_begin = pairs.front().index;
  const std::int64_t bfile_end = bfile_begin + static_cast<std::int64_t>(pairs.size());

  if (bfile_begin < entry_begin) {
    throw IngestError(IngestError::Kind::OverlapMismatch, 0, std::to_string(bfile_begin),
                      entry.id.str() + ": b-file starts at index " + std::to_string(bfile_begin) +
                          " before offset " + std::to_string(entry_begin));
  }
  if (bfile_begin > entry_end) {
    throw IngestError(IngestError::Kind::NonContiguousIndex, 0, std::to_string(bfile_begin),
                      entry.id.str() + ": b-file starts at index " + std::to_string(bfile_begin) +
                          ", leaving a gap after index " + std::to_string(entry_end - 1));
  }
  for (std::int64_t i = bfile_begin; i < std::min(entry_end, bfile_end); ++i) {
    const auto& record_value = entry.terms[static_cast<std::size_t>(i - entry_begin)];
    const auto& bfile_value = pairs[static_cast<std::size_t>(i - bfile_begin)].value;
    if (record_value != bfile_value) {
      throw IngestError(IngestError::Kind::OverlapMismatch, 0, std::to_string(i),
                        entry.id.str() + ": index " + std::to_string(i) + " is " + record_value.str() +
                            " in the record but " + bfile_value.str() + " in the b-file");
    }
  }

  SequenceEntry merged = entry;
  if (bfile_end <= entry_end) return merged;

  merged.terms.resize(static_cast<std::size_t>(bfile_begin - entry_begin));
  for (const auto& p : pairs) merged.terms.push_back(p.value);
  merged.term_segments = {merged.terms.size()};
  return merged;
}

}  // namespace codeseq
