#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace codeseq {

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::size_t count(std::string_view text) const = 0;
  virtual std::string id() const = 0;
};

/// Offline default: runs of letters/digits are one token, every other
/// non-space byte is a token of its own.
class WhitespacePunctTokenizer : public Tokenizer {
 public:
  std::size_t count(std::string_view text) const override;
  std::string id() const override { return "whitespace-punct-v1"; }
};

/// Byte-level BPE over a tiktoken-style rank file ("<base64 token> <rank>"
/// per line), e.g. the Llama 3 tokenizer.model. Pre-tokenization follows the
/// Llama 3 split pattern with non-ASCII bytes treated as letters, so counts
/// for non-English text are approximate.
class BpeTokenizer : public Tokenizer {
 public:
  static BpeTokenizer load(const std::filesystem::path& rank_file);

  std::size_t count(std::string_view text) const override;
  std::string id() const override { return id_; }

  std::vector<std::string_view> pretokenize(std::string_view text) const;
  std::vector<std::uint32_t> encode_piece(std::string_view piece) const;

 private:
  std::unordered_map<std::string, std::uint32_t> ranks_;
  std::string id_;
};

std::unique_ptr<Tokenizer> make_tokenizer(const std::optional<std::filesystem::path>& rank_file);

}  // namespace codeseq
