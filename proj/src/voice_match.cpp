#include "natcmd/voice_match.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>

#include <json.hpp>

#include "natcmd/errors.hpp"
#include "text_util.hpp"

namespace natcmd {

namespace {

bool is_ascii_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '\'' || c >= 0x80;
}

}  // namespace

TokenizedPhrase normalize_phrase(std::string_view text) {
  TokenizedPhrase out;
  out.raw = std::string(text);
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.tokens.push_back(std::move(current));
    current.clear();
  };
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_ascii_space(c)) {
      flush();
    } else if (is_word_byte(c)) {
      current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch;
    }
  }
  flush();
  for (std::size_t i = 0; i < out.tokens.size(); ++i) {
    if (i > 0) out.canonical += ' ';
    out.canonical += out.tokens[i];
  }
  return out;
}

bool EmbeddingTable::insert(std::string word, std::vector<double> vector) {
  if (vector.size() != dimension_) {
    throw DataError("embedding for '" + word + "' has " + std::to_string(vector.size()) + " values, table dimension is " +
                    std::to_string(dimension_));
  }
  for (const double v : vector) {
    if (!std::isfinite(v)) throw DataError("embedding for '" + word + "' has a non-finite value");
  }
  auto [it, inserted] = entries_.insert_or_assign(std::move(word), std::move(vector));
  return !inserted;
}

const std::vector<double>* EmbeddingTable::find(std::string_view word) const {
  const auto it = entries_.find(word);
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

bool is_unsigned_integer(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

EmbeddingTable read_embeddings(std::istream& in, std::vector<std::string>* warnings) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> dimension;
  EmbeddingTable table;
  bool first = true;

  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split_whitespace(line);
    if (fields.empty()) continue;
    if (first) {
      first = false;
      if (fields.size() == 2 && is_unsigned_integer(fields[0]) && is_unsigned_integer(fields[1])) {
        const auto d = static_cast<std::size_t>(std::stoull(std::string(fields[1])));
        if (d == 0) throw ParseError("header declares dimension 0", line_no);
        dimension = d;
        table = EmbeddingTable(d);
        continue;
      }
    }
    if (fields.size() < 2) throw ParseError("entry has no vector values", line_no);
    const std::size_t d = fields.size() - 1;
    if (!dimension) {
      dimension = d;
      table = EmbeddingTable(d);
    } else if (d != *dimension) {
      throw ParseError("entry has " + std::to_string(d) + " values, expected " + std::to_string(*dimension), line_no);
    }
    std::vector<double> vec(d);
    for (std::size_t i = 0; i < d; ++i) {
      const auto v = detail::parse_double(fields[i + 1]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("invalid vector value '" + std::string(fields[i + 1]) + "'", line_no);
      }
      vec[i] = *v;
    }
    std::string word(fields[0]);
    if (table.insert(word, std::move(vec)) && warnings != nullptr) {
      warnings->push_back("line " + std::to_string(line_no) + ": duplicate word '" + word + "', keeping the later vector");
    }
  }
  if (table.empty()) throw DataError("embedding file has no entries");
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings '" + path.string() + "'");
  return read_embeddings(in, warnings);
}

std::vector<double> phrase_vector(const TokenizedPhrase& phrase, const EmbeddingTable& table) {
  std::vector<double> sum(table.dimension(), 0.0);
  std::size_t known = 0;
  for (const auto& token : phrase.tokens) {
    if (const auto* v = table.find(token)) {
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
      ++known;
    }
  }
  if (known > 1) {
    for (auto& s : sum) s /= static_cast<double>(known);
  }
  return sum;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError("cosine similarity needs equal-length vectors (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), 0.0, 1.0);
}

double jaro(std::string_view s1, std::string_view s2) {
  if (s1.empty() && s2.empty()) return 1.0;
  if (s1.empty() || s2.empty()) return 0.0;

  const std::size_t longest = std::max(s1.size(), s2.size());
  const std::size_t window = longest / 2 >= 1 ? longest / 2 - 1 : 0;

  std::vector<bool> taken1(s1.size(), false), taken2(s2.size(), false);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < s1.size(); ++i) {
    const std::size_t lo = i > window ? i - window : 0;
    const std::size_t hi = std::min(s2.size(), i + window + 1);
    for (std::size_t j = lo; j < hi; ++j) {
      if (!taken2[j] && s1[i] == s2[j]) {
        taken1[i] = taken2[j] = true;
        ++matches;
        break;
      }
    }
  }
  if (matches == 0) return 0.0;

  std::size_t half_transpositions = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < s1.size(); ++i) {
    if (!taken1[i]) continue;
    while (!taken2[j]) ++j;
    if (s1[i] != s2[j]) ++half_transpositions;
    ++j;
  }
  const double m = static_cast<double>(matches);
  const double t = static_cast<double>(half_transpositions) / 2.0;
  return (m / static_cast<double>(s1.size()) + m / static_cast<double>(s2.size()) + (m - t) / m) / 3.0;
}

double jaro_winkler(std::string_view s1, std::string_view s2) {
  constexpr std::size_t kMaxPrefix = 4;
  constexpr double kScaling = 0.1;
  const double j = jaro(s1, s2);
  std::size_t prefix = 0;
  while (prefix < kMaxPrefix && prefix < s1.size() && prefix < s2.size() && s1[prefix] == s2[prefix]) ++prefix;
  return j + static_cast<double>(prefix) * kScaling * (1.0 - j);
}

CommandList::CommandList(std::vector<Command> commands) : commands_(std::move(commands)) {
  if (commands_.empty()) throw DataError("command list is empty");
  std::set<std::string> seen;
  for (const auto& c : commands_) {
    if (c.action_id.empty() || c.action_id.find_first_of("\t\r\n") != std::string::npos) {
      throw DataError("invalid action id for command '" + c.phrase + "'");
    }
    const auto canonical = normalize_phrase(c.phrase).canonical;
    if (canonical.empty()) throw DataError("command '" + c.action_id + "' has an empty phrase");
    if (!seen.insert(canonical).second) throw DataError("duplicate command phrase '" + canonical + "'");
  }
}

std::string snake_case(std::string_view phrase) {
  const auto p = normalize_phrase(phrase);
  std::string out;
  for (const auto& t : p.tokens) {
    if (!out.empty()) out += '_';
    out += t;
  }
  return out;
}

CommandList default_command_list() {
  static const char* const phrases[] = {
      "look back",    "look right",   "look up",         "look down",       "look left",
      "move forward", "move back",    "move left",       "move right",      "show reality",
      "hide reality", "enter reality", "show floor plan", "hide floor plan", "show schedule",
      "hide schedule", "zoom in",     "zoom out",        "go to kitchen"};
  std::vector<Command> commands;
  for (const char* p : phrases) commands.push_back({p, snake_case(p)});
  return CommandList(std::move(commands));
}

CommandList read_command_list(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<Command> commands;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected 'action_id<TAB>phrase'", line_no);
    const auto action = detail::trim(std::string_view(line).substr(0, tab));
    const auto phrase = detail::trim(std::string_view(line).substr(tab + 1));
    if (action.empty() || phrase.empty()) throw ParseError("empty action id or phrase", line_no);
    commands.push_back({std::string(phrase), std::string(action)});
  }
  return CommandList(std::move(commands));
}

CommandList load_command_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open command list '" + path.string() + "'");
  return read_command_list(in);
}

MatchResult resolve_command(std::string_view transcript, const CommandList& commands, const EmbeddingTable& table) {
  MatchResult result;
  result.transcript = normalize_phrase(transcript);
  const auto spoken = phrase_vector(result.transcript, table);

  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < commands.size(); ++k) {
    const auto& cmd = commands.commands()[k];
    const auto phrase = normalize_phrase(cmd.phrase);
    CandidateScore s;
    s.phrase = cmd.phrase;
    // Identical phrases share one representation even when every token is OOV.
    const bool identical = !phrase.canonical.empty() && phrase.canonical == result.transcript.canonical;
    s.cosine = identical ? 1.0 : cosine_similarity(spoken, phrase_vector(phrase, table));
    s.jaro_winkler = jaro_winkler(result.transcript.canonical, phrase.canonical);
    s.total = s.cosine + s.jaro_winkler;
    if (!best || s.total > result.per_candidate[*best].total) best = k;
    result.per_candidate.push_back(std::move(s));
  }
  if (best && result.per_candidate[*best].total > 1.0) result.matched = commands.commands()[*best];
  return result;
}

std::string match_result_to_json(const MatchResult& result) {
  nlohmann::ordered_json doc;
  doc["transcript"] = {{"raw", result.transcript.raw},
                       {"canonical", result.transcript.canonical},
                       {"tokens", result.transcript.tokens}};
  if (result.matched) {
    doc["matched"] = {{"action", result.matched->action_id}, {"phrase", result.matched->phrase}};
  } else {
    doc["matched"] = nullptr;
  }
  auto candidates = nlohmann::ordered_json::array();
  for (const auto& c : result.per_candidate) {
    candidates.push_back(
        {{"phrase", c.phrase}, {"cosine", c.cosine}, {"jaro_winkler", c.jaro_winkler}, {"total", c.total}});
  }
  doc["candidates"] = std::move(candidates);
  return doc.dump();
}

}  // namespace natcmd
