#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace codeseq {

std::string_view trim(std::string_view s);
std::string_view trim_right(std::string_view s);

/// Splits on '\n'. A trailing newline does not produce an empty last line.
std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char sep);
std::vector<std::string_view> split_whitespace(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Strips trailing whitespace from every line and drops trailing newlines
/// (and trailing blank lines). Both sides of every output comparison go
/// through this.
std::string normalize_output(std::string_view text);

struct CodeBlock {
  std::string language;
  std::string body;
};

/// All ``` fenced blocks in order. An unterminated fence is not a block.
std::vector<CodeBlock> extract_fenced_blocks(std::string_view text);

bool starts_with_ci(std::string_view s, std::string_view prefix);

}  // namespace codeseq
