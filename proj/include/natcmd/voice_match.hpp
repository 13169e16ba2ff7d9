#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace natcmd {

struct TokenizedPhrase {
  std::string raw;
  std::vector<std::string> tokens;
  std::string canonical;  // tokens joined by single spaces

  friend bool operator==(const TokenizedPhrase&, const TokenizedPhrase&) = default;
};

/// Lowercases ASCII, drops every character that is not a letter, digit,
/// apostrophe or whitespace, then splits on whitespace runs. Bytes >= 0x80 are
/// kept so UTF-8 words survive.
TokenizedPhrase normalize_phrase(std::string_view text);

/// Word -> vector map with a fixed dimension.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Inserts or replaces; returns true when `word` was already present.
  /// Throws DataError on a wrong-width or non-finite vector.
  bool insert(std::string word, std::vector<double> vector);
  const std::vector<double>* find(std::string_view word) const;

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
  };
  std::size_t dimension_ = 0;
  std::unordered_map<std::string, std::vector<double>, Hash, std::equal_to<>> entries_;
};

/// Text format `word v1 ... vd`, one entry per line. A leading `N d` header line
/// is skipped. Duplicate words keep the last vector and add a warning.
EmbeddingTable read_embeddings(std::istream& in, std::vector<std::string>* warnings = nullptr);
EmbeddingTable load_embeddings(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

/// Mean of the in-vocabulary token vectors; the zero vector when none are known.
std::vector<double> phrase_vector(const TokenizedPhrase& phrase, const EmbeddingTable& table);

/// max(0, cos(a, b)); 0 if either vector has zero norm. Throws DataError on a
/// length mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

double jaro(std::string_view s1, std::string_view s2);

/// Jaro plus the Winkler prefix boost (prefix capped at 4, scaling 0.1).
double jaro_winkler(std::string_view s1, std::string_view s2);

struct Command {
  std::string phrase;
  std::string action_id;

  friend bool operator==(const Command&, const Command&) = default;
};

/// Non-empty ordered vocabulary; phrases are unique after normalization.
class CommandList {
 public:
  explicit CommandList(std::vector<Command> commands);

  const std::vector<Command>& commands() const noexcept { return commands_; }
  std::size_t size() const noexcept { return commands_.size(); }

 private:
  std::vector<Command> commands_;
};

/// "show floor plan" -> "show_floor_plan".
std::string snake_case(std::string_view phrase);

/// The 19 spoken commands of the progress-monitoring interface.
CommandList default_command_list();

/// `action_id<TAB>phrase` per line; blank lines are skipped.
CommandList read_command_list(std::istream& in);
CommandList load_command_list(const std::filesystem::path& path);

struct CandidateScore {
  std::string phrase;
  double cosine = 0.0;
  double jaro_winkler = 0.0;
  double total = 0.0;
};

struct MatchResult {
  std::optional<Command> matched;
  std::vector<CandidateScore> per_candidate;  // command-list order
  TokenizedPhrase transcript;
};

/// Scores the transcript against every command (cosine of phrase vectors plus
/// Jaro-Winkler of canonical strings). A transcript whose canonical form equals
/// a command's has cosine 1 with it, whatever the table holds. The best total
/// wins only if it is strictly greater than 1; ties go to the earlier command.
MatchResult resolve_command(std::string_view transcript, const CommandList& commands,
                            const EmbeddingTable& table);

std::string match_result_to_json(const MatchResult& result);

}  // namespace natcmd
