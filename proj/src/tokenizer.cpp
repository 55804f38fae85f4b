#include "codeseq/tokenizer.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <limits>
#include <stdexcept>

#include "codeseq/text.hpp"

namespace codeseq {

namespace {

bool is_ascii_alpha(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_letter(unsigned char c) { return is_ascii_alpha(c) || c >= 0x80; }
bool is_number(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_newline(unsigned char c) { return c == '\n' || c == '\r'; }

std::string base64_decode(std::string_view in) {
  std::string out(3 * ((in.size() + 3) / 4), '\0');
  int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()), reinterpret_cast<const unsigned char*>(in.data()),
                          static_cast<int>(in.size()));
  if (n < 0) throw std::runtime_error("invalid base64 token");
  std::size_t padding = 0;
  if (!in.empty() && in.back() == '=') ++padding;
  if (in.size() > 1 && in[in.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

// Length of the next pre-token starting at `i`.
std::size_t next_piece(std::string_view s, std::size_t i) {
  auto at = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const std::size_t n = s.size();

  if (s[i] == '\'' && i + 1 < n) {
    for (std::string_view suffix : {"re", "ve", "ll", "s", "t", "m", "d"}) {
      if (starts_with_ci(s.substr(i + 1), suffix)) return 1 + suffix.size();
    }
  }
  // [^\r\n\p{L}\p{N}]?\p{L}+
  {
    std::size_t j = i;
    if (!is_letter(at(j)) && !is_newline(at(j)) && !is_number(at(j)) && j + 1 < n && is_letter(at(j + 1))) ++j;
    if (is_letter(at(j))) {
      while (j < n && is_letter(at(j))) ++j;
      return j - i;
    }
  }
  // \p{N}{1,3}
  if (is_number(at(i))) {
    std::size_t j = i;
    while (j < n && j - i < 3 && is_number(at(j))) ++j;
    return j - i;
  }
  // ' '?[^\s\p{L}\p{N}]+[\r\n]*
  {
    std::size_t j = i;
    if (at(j) == ' ' && j + 1 < n) ++j;
    auto is_symbol = [&](std::size_t k) { return !is_space(at(k)) && !is_letter(at(k)) && !is_number(at(k)); };
    if (is_symbol(j)) {
      while (j < n && is_symbol(j)) ++j;
      while (j < n && is_newline(at(j))) ++j;
      return j - i;
    }
  }
  // Whitespace: \s*[\r\n]+ | \s+(?!\S) | \s+
  std::size_t end = i;
  while (end < n && is_space(at(end))) ++end;
  std::size_t last_newline = std::string_view::npos;
  for (std::size_t k = i; k < end; ++k) {
    if (is_newline(at(k))) last_newline = k;
  }
  if (last_newline != std::string_view::npos) return last_newline + 1 - i;
  if (end < n && end - i > 1) return end - i - 1;
  return end - i;
}

}  // namespace

std::size_t WhitespacePunctTokenizer::count(std::string_view text) const {
  std::size_t tokens = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
    } else if (is_letter(c) || is_number(c) || c == '_') {
      while (i < text.size()) {
        const auto d = static_cast<unsigned char>(text[i]);
        if (!(is_letter(d) || is_number(d) || d == '_')) break;
        ++i;
      }
      ++tokens;
    } else {
      ++i;
      ++tokens;
    }
  }
  return tokens;
}

BpeTokenizer BpeTokenizer::load(const std::filesystem::path& rank_file) {
  std::ifstream in(rank_file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open tokenizer rank file: " + rank_file.string());
  BpeTokenizer tok;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) {
      throw std::runtime_error(rank_file.string() + ":" + std::to_string(line_no) + ": expected '<base64> <rank>'");
    }
    tok.ranks_.emplace(base64_decode(fields[0]), static_cast<std::uint32_t>(std::stoul(std::string(fields[1]))));
  }
  if (tok.ranks_.empty()) throw std::runtime_error("empty tokenizer rank file: " + rank_file.string());
  tok.id_ = "bpe:" + rank_file.filename().string();
  return tok;
}

std::vector<std::string_view> BpeTokenizer::pretokenize(std::string_view text) const {
  std::vector<std::string_view> pieces;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = next_piece(text, i);
    pieces.push_back(text.substr(i, len));
    i += len;
  }
  return pieces;
}

std::vector<std::uint32_t> BpeTokenizer::encode_piece(std::string_view piece) const {
  if (auto it = ranks_.find(std::string(piece)); it != ranks_.end()) return {it->second};

  std::vector<std::string> parts;
  for (char c : piece) parts.emplace_back(1, c);
  constexpr auto kNone = std::numeric_limits<std::uint32_t>::max();
  while (parts.size() > 1) {
    std::uint32_t best = kNone;
    std::size_t best_at = 0;
    for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
      auto it = ranks_.find(parts[k] + parts[k + 1]);
      if (it != ranks_.end() && it->second < best) {
        best = it->second;
        best_at = k;
      }
    }
    if (best == kNone) break;
    parts[best_at] += parts[best_at + 1];
    parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(best_at) + 1);
  }

  std::vector<std::uint32_t> ids;
  for (const auto& p : parts) {
    auto it = ranks_.find(p);
    // Byte-level vocabularies cover every single byte; unknown bytes still count.
    ids.push_back(it == ranks_.end() ? kNone : it->second);
  }
  return ids;
}

std::size_t BpeTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  for (auto piece : pretokenize(text)) n += encode_piece(piece).size();
  return n;
}

std::unique_ptr<Tokenizer> make_tokenizer(const std::optional<std::filesystem::path>& rank_file) {
  if (rank_file) return std::make_unique<BpeTokenizer>(BpeTokenizer::load(*rank_file));
  return std::make_unique<WhitespacePunctTokenizer>();
}

}  // namespace codeseq
