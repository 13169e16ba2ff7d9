#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "natcmd/errors.hpp"
#include "natcmd/voice_match.hpp"
#include "test_support.hpp"

using namespace natcmd;
using testing_support::TempDir;

namespace {

// go and walk share move's direction; everything else is roughly orthogonal.
EmbeddingTable motion_fixture() {
  std::istringstream in(
      "8 4\n"
      "move 1 0 0 0\n"
      "walk 1 0 0 0\n"
      "go 0.95 0.05 0 0\n"
      "forward 0 1 0 0\n"
      "back 0 -1 0 0\n"
      "look 0 0 1 0\n"
      "show 0 0 0 1\n"
      "hide 0 0 0 -1\n");
  return read_embeddings(in);
}

std::string random_string(std::mt19937_64& rng, std::string_view alphabet, std::size_t max_len) {
  std::string s(rng() % (max_len + 1), ' ');
  for (auto& c : s) c = alphabet[rng() % alphabet.size()];
  return s;
}

}  // namespace

TEST_CASE("phrase normalization") {
  const auto p = normalize_phrase("Move Forward!");
  CHECK(p.tokens == std::vector<std::string>{"move", "forward"});
  CHECK(p.canonical == "move forward");
  CHECK(p.raw == "Move Forward!");

  const auto blank = normalize_phrase("   ");
  CHECK(blank.tokens.empty());
  CHECK(blank.canonical.empty());

  CHECK(normalize_phrase("  go\tto   the KITCHEN, now. ").canonical == "go to the kitchen now");
  CHECK(normalize_phrase("don't stop").tokens == std::vector<std::string>{"don't", "stop"});
}

TEST_CASE("property: normalization is idempotent and tokens are clean") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const auto raw = random_string(rng, "aBz9 ,.!?\t-_'\"()Q", 30);
    const auto p = normalize_phrase(raw);
    CHECK(normalize_phrase(p.canonical).tokens == p.tokens);
    CHECK(normalize_phrase(raw) == p);
    for (const auto& t : p.tokens) {
      CHECK_FALSE(t.empty());
      for (const char c : t) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'';
        CHECK(ok);
      }
    }
  }
}

TEST_CASE("embedding file loading") {
  std::istringstream three("cat 1 2 3 4\ndog 0.5 0.5 0.5 0.5\nbird -1 0 0 1\n");
  const auto table = read_embeddings(three);
  CHECK(table.size() == 3);
  CHECK(table.dimension() == 4);
  REQUIRE(table.find("dog") != nullptr);
  CHECK(*table.find("dog") == std::vector<double>{0.5, 0.5, 0.5, 0.5});
  CHECK(table.find("cow") == nullptr);

  std::istringstream short_line("cat 1 2 3 4\ndog 1 2 3\n");
  try {
    (void)read_embeddings(short_line);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  std::istringstream dup("cat 1 2\ncat 3 4\n");
  std::vector<std::string> warnings;
  const auto last = read_embeddings(dup, &warnings);
  CHECK(*last.find("cat") == std::vector<double>{3.0, 4.0});
  CHECK(warnings.size() == 1);

  std::istringstream header_mismatch("2 3\ncat 1 2\n");
  CHECK_THROWS_AS(read_embeddings(header_mismatch), ParseError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_embeddings(empty), DataError);
  CHECK_THROWS_AS(load_embeddings("/nonexistent/emb.txt"), DataError);
}

TEST_CASE("phrase vectors") {
  const auto table = motion_fixture();
  CHECK(phrase_vector(normalize_phrase("look"), table) == *table.find("look"));
  CHECK(phrase_vector(normalize_phrase("move forward"), table) == std::vector<double>{0.5, 0.5, 0.0, 0.0});
  CHECK(phrase_vector(normalize_phrase("zzz qqq"), table) == std::vector<double>(4, 0.0));
  CHECK(phrase_vector(normalize_phrase(""), table) == std::vector<double>(4, 0.0));
  // OOV tokens are ignored rather than averaged in as zeros.
  CHECK(phrase_vector(normalize_phrase("move zzz"), table) == *table.find("move"));
}

TEST_CASE("cosine similarity") {
  const std::vector<double> v{0.3, -2.0, 5.0};
  CHECK(cosine_similarity(v, v) == doctest::Approx(1.0));
  CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
  CHECK(cosine_similarity(std::vector<double>{1, 1, 0}, std::vector<double>{1, 0, 0}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{-1, 0}) == 0.0);
  CHECK(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 0}) == 0.0);
  CHECK_THROWS_AS(cosine_similarity(std::vector<double>{1}, std::vector<double>{1, 0}), DataError);
}

TEST_CASE("property: cosine is symmetric and bounded") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> a(1 + rng() % 10), b(a.size());
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    const double ab = cosine_similarity(a, b);
    CHECK(ab == cosine_similarity(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("jaro and jaro-winkler reference values") {
  // Hand trace: m = 6, the th/ht swap gives t = 1, so (1 + 1 + 5/6) / 3.
  CHECK(jaro("martha", "marhta") == doctest::Approx(17.0 / 18.0).epsilon(1e-12));
  CHECK(std::abs(jaro("martha", "marhta") - 0.9444) < 1e-4);
  // Prefix "mar" (3) boosts it by 3 * 0.1 * (1 - j).
  CHECK(std::abs(jaro_winkler("martha", "marhta") - 0.9611) < 1e-4);
  CHECK(jaro("abc", "xyz") == 0.0);
  CHECK(jaro("abc", "abc") == 1.0);
  CHECK(jaro("", "") == 1.0);
  CHECK(jaro("", "a") == 0.0);
  CHECK(jaro_winkler("move forward", "move forward") == 1.0);
  // dixon/dicksonx: m = 4, t = 0, prefix 2.
  CHECK(jaro("dixon", "dicksonx") == doctest::Approx((4.0 / 5 + 4.0 / 8 + 1.0) / 3).epsilon(1e-12));
  CHECK(jaro_winkler("dixon", "dicksonx") == doctest::Approx(0.7667 + 2 * 0.1 * (1 - 0.7667)).epsilon(1e-3));
}

TEST_CASE("property: string similarity laws") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = random_string(rng, "abcde ", 12);
    const auto b = random_string(rng, "abcde ", 12);
    const double j = jaro(a, b), jw = jaro_winkler(a, b);
    CHECK(j == doctest::Approx(jaro(b, a)).epsilon(1e-12));
    CHECK(jw == doctest::Approx(jaro_winkler(b, a)).epsilon(1e-12));
    CHECK(j >= 0.0);
    CHECK(jw <= 1.0);
    CHECK(jw >= j);
    if (!a.empty()) CHECK(jaro_winkler(a, a) == 1.0);
    const auto disjoint = random_string(rng, "xyz", 12);
    if (!a.empty() && !disjoint.empty() && a.find_first_of("xyz") == std::string::npos) {
      CHECK(jaro_winkler(a, disjoint) == 0.0);
    }
  }
}

TEST_CASE("command lists") {
  const auto commands = default_command_list();
  REQUIRE(commands.size() == 19);
  CHECK(commands.commands().front() == Command{"look back", "look_back"});
  CHECK(commands.commands().back() == Command{"go to kitchen", "go_to_kitchen"});
  CHECK(snake_case("Show Floor Plan") == "show_floor_plan");

  CHECK_THROWS_AS(CommandList({}), DataError);
  CHECK_THROWS_AS(CommandList({{"Zoom In", "a"}, {"zoom  in!", "b"}}), DataError);

  std::istringstream file("move_forward\tmove forward\n\nzoom_in\tzoom in\n");
  const auto parsed = read_command_list(file);
  CHECK(parsed.size() == 2);
  CHECK(parsed.commands()[1] == Command{"zoom in", "zoom_in"});
  std::istringstream bad("move forward\n");
  CHECK_THROWS_AS(read_command_list(bad), ParseError);
}

TEST_CASE("exact phrases resolve with total 2") {
  const auto commands = default_command_list();
  const auto table = motion_fixture();
  for (const auto& cmd : commands.commands()) {
    const auto r = resolve_command(cmd.phrase, commands, table);
    REQUIRE(r.matched.has_value());
    CHECK(*r.matched == cmd);
    const auto it = std::find_if(r.per_candidate.begin(), r.per_candidate.end(),
                                 [&](const CandidateScore& s) { return s.phrase == cmd.phrase; });
    CHECK(it->total == 2.0);
  }
}

TEST_CASE("walk forward and go forward resolve to move forward") {
  const auto commands = default_command_list();
  const auto table = motion_fixture();
  const auto walk = resolve_command("walk forward", commands, table);
  REQUIRE(walk.matched.has_value());
  CHECK(walk.matched->action_id == "move_forward");
  const auto& cand = walk.per_candidate[5];
  REQUIRE(cand.phrase == "move forward");
  CHECK(cand.cosine == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cand.total == doctest::Approx(1.0 + jaro_winkler("walk forward", "move forward")));

  const auto go = resolve_command("Go forward.", commands, table);
  REQUIRE(go.matched.has_value());
  CHECK(go.matched->action_id == "move_forward");
}

TEST_CASE("gibberish is ignored") {
  const auto commands = default_command_list();
  const auto table = motion_fixture();
  const auto r = resolve_command("zzz qqq", commands, table);
  CHECK_FALSE(r.matched.has_value());
  REQUIRE(r.per_candidate.size() == 19);
  for (std::size_t k = 0; k < 19; ++k) {
    const auto& c = r.per_candidate[k];
    CHECK(c.cosine == 0.0);
    CHECK(c.jaro_winkler == doctest::Approx(jaro_winkler("zzz qqq", normalize_phrase(c.phrase).canonical)));
    CHECK(c.total <= 1.0);
  }
  CHECK_FALSE(resolve_command("", commands, table).matched.has_value());
}

TEST_CASE("property: match contract") {
  const auto commands = default_command_list();
  const auto table = motion_fixture();
  std::mt19937_64 rng(21);
  const std::vector<std::string> words{"move", "walk", "go", "forward", "back", "look", "show", "hide",
                                       "floor", "plan", "zoom", "in", "zzz", "kitchen", "up"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    for (std::size_t i = 0, n = rng() % 4; i < n; ++i) text += words[rng() % words.size()] + " ";
    const auto r = resolve_command(text, commands, table);
    double best = -1.0;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < r.per_candidate.size(); ++k) {
      const auto& c = r.per_candidate[k];
      CHECK(c.phrase == commands.commands()[k].phrase);
      CHECK(c.total == c.cosine + c.jaro_winkler);
      CHECK(c.total >= 0.0);
      CHECK(c.total <= 2.0);
      if (c.total > best) {
        best = c.total;
        best_k = k;
      }
    }
    CHECK(r.matched.has_value() == (best > 1.0));
    if (r.matched) CHECK(*r.matched == commands.commands()[best_k]);
  }
}

TEST_CASE("ties go to the earlier command") {
  // Two commands the transcript scores identically against.
  const CommandList commands({{"ab", "first"}, {"ac", "second"}});
  EmbeddingTable table(2);
  table.insert("ab", {1.0, 0.0});
  table.insert("ac", {1.0, 0.0});
  table.insert("ad", {1.0, 0.0});
  const auto r = resolve_command("ad", commands, table);
  REQUIRE(r.per_candidate[0].total == r.per_candidate[1].total);
  REQUIRE(r.matched.has_value());
  CHECK(r.matched->action_id == "first");
}

TEST_CASE("match result json") {
  const auto r = resolve_command("move forward", default_command_list(), motion_fixture());
  const auto doc = nlohmann::json::parse(match_result_to_json(r));
  CHECK(doc["matched"]["action"] == "move_forward");
  CHECK(doc["transcript"]["canonical"] == "move forward");
  CHECK(doc["candidates"].size() == 19);
  const auto none = nlohmann::json::parse(match_result_to_json(resolve_command("zzz", default_command_list(), motion_fixture())));
  CHECK(none["matched"].is_null());
}

TEST_CASE("command files load from disk") {
  TempDir dir;
  testing_support::write_file(dir / "c.tsv", "a\tzoom in\nb\tzoom out\n");
  CHECK(load_command_list(dir / "c.tsv").size() == 2);
  CHECK_THROWS_AS(load_command_list(dir / "missing.tsv"), DataError);
}
