#include "codeseq/eval.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <random>
#include <sstream>

#include "codeseq/text.hpp"

namespace codeseq {

namespace {

// Unbiased draw in [0, bound) from the raw mt19937_64 stream, which is
// fully specified by the standard (unlike std::uniform_int_distribution).
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

std::string join_terms(const std::vector<BigInt>& terms) {
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out += ", ";
    out += terms[i].str();
  }
  return out;
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Integers in `text` not glued to letters, digits, or a decimal point.
std::vector<BigInt> standalone_integers(std::string_view text) {
  std::vector<BigInt> found;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size() && is_digit(text[i])) ++i;
    const std::size_t end = i;

    bool negative = start > 0 && text[start - 1] == '-' && (start < 2 || !is_alnum(text[start - 2]));
    const std::size_t lead = negative ? start - 1 : start;
    if (lead > 0 && (is_alnum(text[lead - 1]) || text[lead - 1] == '.' || text[lead - 1] == '_')) continue;
    if (end < text.size() && (std::isalpha(static_cast<unsigned char>(text[end])) || text[end] == '_')) continue;
    if (end + 1 < text.size() && text[end] == '.' && is_digit(text[end + 1])) {
      while (i < text.size() && (is_digit(text[i]) || text[i] == '.')) ++i;
      continue;
    }
    found.emplace_back(std::string(text.substr(lead, end - lead)));
  }
  return found;
}

}  // namespace

std::vector<EvalItem> build_eval_set(const std::vector<SequenceEntry>& corpus, const std::set<SequenceId>& training_ids,
                                     std::size_t n, std::uint64_t seed, const EvalConfig& config) {
  if (config.prefix_len == 0) throw std::invalid_argument("prefix_len must be positive");

  std::vector<const SequenceEntry*> candidates;
  std::set<SequenceId> seen;
  for (const auto& entry : corpus) {
    if (training_ids.count(entry.id) || entry.terms.size() < config.prefix_len + 1) continue;
    if (!seen.insert(entry.id).second) continue;
    candidates.push_back(&entry);
  }
  if (candidates.size() < n) {
    throw InsufficientHeldOut("need " + std::to_string(n) + " held-out sequences with at least " +
                              std::to_string(config.prefix_len + 1) + " terms, found " +
                              std::to_string(candidates.size()));
  }
  std::sort(candidates.begin(), candidates.end(), [](auto* a, auto* b) { return a->id < b->id; });

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }

  std::vector<EvalItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    const SequenceEntry& e = *candidates[i];
    EvalItem item;
    item.sequence_id = e.id;
    item.shown_prefix.assign(e.terms.begin(), e.terms.begin() + static_cast<std::ptrdiff_t>(config.prefix_len));
    item.true_next = e.terms[config.prefix_len];
    items.push_back(std::move(item));
  }
  return items;
}

Bindings next_number_bindings(const EvalItem& item, const std::vector<EvalItem>& shots, std::size_t k) {
  if (shots.size() != k) throw std::invalid_argument("expected " + std::to_string(k) + " shots");
  std::string demos;
  for (const auto& shot : shots) {
    if (shot.sequence_id == item.sequence_id) throw ShotOverlap("shot " + shot.sequence_id.str() + " is the target");
    demos += "Sequence: " + join_terms(shot.shown_prefix) + "\nAnswer: " + shot.true_next.str() + "\n\n";
  }
  return {{"demonstrations", demos}, {"sequence", join_terms(item.shown_prefix)}};
}

std::string render_prompt(const EvalItem& item, const std::vector<EvalItem>& shots, std::size_t k,
                          const PromptTemplate& tmpl) {
  return tmpl.render(next_number_bindings(item, shots, k));
}

std::optional<BigInt> extract_prediction(std::string_view reply) {
  const auto lines = split_lines(reply);
  for (std::size_t i = lines.size(); i-- > 0;) {
    auto line = trim(lines[i]);
    auto pos = std::string_view::npos;
    for (std::size_t p = 0; p + 7 <= line.size(); ++p) {
      if (starts_with_ci(line.substr(p), "answer:")) pos = p;
    }
    if (pos == std::string_view::npos) continue;
    auto after = trim(line.substr(pos + 7));
    while (!after.empty() && (after.front() == '*' || after.front() == '$')) after = trim(after.substr(1));
    auto ints = standalone_integers(after);
    if (!ints.empty()) return ints.front();
  }
  auto ints = standalone_integers(reply);
  if (ints.empty()) return std::nullopt;
  return ints.back();
}

std::vector<std::size_t> sample_shots(std::size_t n_items, std::size_t target, std::size_t k, std::uint64_t seed) {
  if (k + 1 > n_items) throw std::invalid_argument("not enough items for " + std::to_string(k) + " shots");
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < n_items; ++i) {
    if (i != target) pool.push_back(i);
  }
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (target + 1)));
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

EvalReport evaluate(AgentClient& client, const std::vector<EvalItem>& items, std::size_t k, std::uint64_t seed,
                    AgentRole role) {
  if (items.empty()) throw std::invalid_argument("evaluate: no items");

  EvalReport report;
  report.k_shot = k;
  report.n_items = items.size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::vector<EvalItem> shots;
    for (auto idx : sample_shots(items.size(), i, k, seed)) shots.push_back(items[idx]);

    EvalItemResult result;
    result.sequence_id = items[i].sequence_id;
    try {
      result.raw_reply = client.complete(role, TemplateId::NextNumber, next_number_bindings(items[i], shots, k));
      result.extracted = extract_prediction(result.raw_reply);
      result.correct = result.extracted && *result.extracted == items[i].true_next;
    } catch (const ScriptMiss&) {
      throw;
    } catch (const AgentError& e) {
      result.error = e.what();
    }
    if (result.correct) ++report.n_correct;
    report.per_item.push_back(std::move(result));
  }
  report.accuracy = static_cast<double>(report.n_correct) / static_cast<double>(report.n_items);
  return report;
}

std::string format_eval_table(const EvalReport& report) {
  std::ostringstream out;
  out << "k-shot     " << report.k_shot << "\n"
      << "items      " << report.n_items << "\n"
      << "correct    " << report.n_correct << "\n"
      << "accuracy   " << std::fixed << std::setprecision(4) << report.accuracy << "\n";
  std::size_t errors = 0;
  for (const auto& r : report.per_item) errors += r.error ? 1 : 0;
  if (errors) out << "errors     " << errors << "\n";
  return out.str();
}

}  // namespace codeseq
