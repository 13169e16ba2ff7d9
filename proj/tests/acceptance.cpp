// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "natcmd/classifiers.hpp"
#include "natcmd/cli.hpp"
#include "natcmd/dataset.hpp"
#include "natcmd/dispatch.hpp"
#include "natcmd/metrics.hpp"
#include "natcmd/voice_match.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace natcmd;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

// Shared by criteria 2, 3, 7 and 8.
struct Regime {
  DatasetSplit split;
  std::optional<GestureModel> svm, mlp;
};

Regime& regime() {
  static Regime r = [] {
    Regime out;
    SyntheticSpec spec;  // default15, 1000 frames per gesture, sigma 0.01
    out.split = split_dataset(generate_synthetic_dataset(spec), 0.8, 42);
    return out;
  }();
  return r;
}

Outcome metric_oracle() {
  Outcome o;
  std::mt19937_64 rng(1);
  const auto start = Clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng() % 15;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < k; ++i) labels.push_back("c" + std::to_string(i));
    std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(k));
    std::vector<std::size_t> truth, predicted;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        counts[i][j] = rng() % 101;
        truth.insert(truth.end(), counts[i][j], i);
        predicted.insert(predicted.end(), counts[i][j], j);
      }
    }
    if (truth.empty()) {
      counts[0][0] = 1;
      truth.push_back(0);
      predicted.push_back(0);
    }
    const ConfusionMatrix cm(labels, counts);
    const auto ref = oracles::brute_force_metrics(truth, predicted, k);
    const double p = macro_precision(cm), r = macro_recall(cm);
    for (const double d : {accuracy(cm) - ref.accuracy, p - ref.precision, r - ref.recall, f1(p, r) - ref.f1}) {
      worst = std::max(worst, std::abs(d));
    }
  }
  const double elapsed = ms_since(start);
  o.require(worst <= 1e-12, "max deviation " + fmt(worst) + " > 1e-12");
  o.require(elapsed < 1000.0, "runtime " + fmt(elapsed) + " ms >= 1 s");
  o.note("50 matrices, max deviation " + fmt(worst) + ", " + fmt(elapsed) + " ms");
  return o;
}

Outcome gesture_accuracy() {
  Outcome o;
  auto& r = regime();
  const auto start = Clock::now();
  r.svm = train_linear_svm(r.split.train, SvmConfig{});
  r.mlp = train_mlp(r.split.train, MlpConfig{});
  const double total = ms_since(start);
  const auto svm = evaluate_model(*r.svm, r.split.test);
  const auto mlp = evaluate_model(*r.mlp, r.split.test);
  o.require(svm.accuracy >= 0.99, "svm accuracy " + fmt(svm.accuracy) + " < 0.99");
  o.require(mlp.accuracy >= 0.90, "mlp accuracy " + fmt(mlp.accuracy) + " < 0.90");
  o.require(svm.accuracy >= mlp.accuracy, "svm accuracy below mlp");
  o.require(total < 60000.0, "training took " + fmt(total) + " ms");
  o.note("svm acc " + fmt(svm.accuracy, 6) + ", mlp acc " + fmt(mlp.accuracy, 6) + ", svm f1 " + fmt(svm.f1, 6) +
         ", mlp f1 " + fmt(mlp.f1, 6) + ", training " + fmt(total) + " ms");
  return o;
}

Outcome training_speed() {
  Outcome o;
  auto& r = regime();
  const double svm = r.svm->training_time_ms(), mlp = r.mlp->training_time_ms();
  o.require(svm < mlp, "svm training not faster than mlp");
  o.note("svm " + fmt(svm) + " ms vs mlp " + fmt(mlp) + " ms");
  return o;
}

Outcome gradient_check() {
  Outcome o;
  std::mt19937_64 rng(4);
  double worst = 0.0;
  std::size_t params = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = oracles::random_network(rng);
    const auto check = oracles::finite_difference_check(net.model, net.frames, net.targets, 1e-5);
    worst = std::max(worst, check.max_relative_error);
    params += check.parameters;
  }
  o.require(worst < 1e-4, "max relative error " + fmt(worst));
  o.note("10 networks, " + std::to_string(params) + " parameters, max relative error " + fmt(worst));
  return o;
}

Outcome jaro_winkler_oracle() {
  Outcome o;
  const double j = jaro("martha", "marhta"), jw = jaro_winkler("martha", "marhta");
  o.require(std::abs(j - 0.9444) <= 1e-4, "jaro(martha, marhta) = " + fmt(j, 8));
  o.require(std::abs(jw - 0.9611) <= 1e-4, "jaro_winkler(martha, marhta) = " + fmt(jw, 8));

  std::mt19937_64 rng(5);
  auto random_string = [&](std::string_view alphabet) {
    std::string s(rng() % 13, ' ');
    for (auto& c : s) c = alphabet[rng() % alphabet.size()];
    return s;
  };
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = random_string("abcdef ");
    const auto b = random_string("abcdef ");
    const double ab = jaro_winkler(a, b);
    if (std::abs(ab - jaro_winkler(b, a)) > 1e-12) ++violations;
    if (ab < jaro(a, b) || ab < 0.0 || ab > 1.0) ++violations;
    if (!a.empty() && jaro_winkler(a, a) != 1.0) ++violations;
    const auto other = random_string("uvwxyz");
    if (!a.empty() && !other.empty() && jaro_winkler(a, other) != 0.0) ++violations;
  }
  o.require(violations == 0, std::to_string(violations) + " property violations");
  o.note("jaro " + fmt(j, 6) + ", jw " + fmt(jw, 6) + ", 1000 random pairs checked");
  return o;
}

/// Deterministic table of `words` random words plus the vocabulary words, dim d.
EmbeddingTable large_table(std::size_t words, std::size_t d) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  EmbeddingTable table(d);
  auto vec = [&] {
    std::vector<double> v(d);
    for (auto& x : v) x = n(rng);
    return v;
  };
  const auto commands = default_command_list();
  for (const auto& cmd : commands.commands()) {
    const auto phrase = normalize_phrase(cmd.phrase);
    for (const auto& t : phrase.tokens) {
      if (table.find(t) == nullptr) table.insert(t, vec());
    }
  }
  for (std::size_t i = 0; table.size() < words; ++i) table.insert("w" + std::to_string(i), vec());
  return table;
}

Outcome voice_contract() {
  Outcome o;
  const auto commands = default_command_list();
  EmbeddingTable empty_vocab(3);
  empty_vocab.insert("unrelated", {1.0, 0.0, 0.0});
  const EmbeddingTable big = large_table(10000, 50);

  std::size_t exact = 0;
  for (const EmbeddingTable* table : std::array<const EmbeddingTable*, 2>{&empty_vocab, &big}) {
    for (const auto& cmd : commands.commands()) {
      const auto r = resolve_command(cmd.phrase, commands, *table);
      double own = 0.0;
      for (const auto& c : r.per_candidate) {
        if (c.phrase == cmd.phrase) own = c.total;
      }
      if (r.matched && r.matched->action_id == cmd.action_id && own == 2.0) ++exact;
    }
  }
  o.require(exact == 2 * commands.size(), std::to_string(exact) + "/38 exact phrases resolved with total 2");

  const auto gibberish = resolve_command("zzz qqq", commands, big);
  bool all_low = true;
  for (const auto& c : gibberish.per_candidate) all_low = all_low && c.total <= 1.0;
  o.require(!gibberish.matched && all_low, "gibberish transcript was not ignored");

  std::istringstream fixture(
      "move 0.9 0.1 0.0\n"
      "walk 0.88 0.12 0.02\n"
      "go 0.85 0.1 0.05\n"
      "forward 0.1 0.9 0.0\n"
      "back -0.1 -0.9 0.0\n"
      "look 0.0 0.1 0.95\n");
  const auto motion = read_embeddings(fixture);
  for (const char* phrase : {"go forward", "walk forward"}) {
    const auto r = resolve_command(phrase, commands, motion);
    o.require(r.matched && r.matched->action_id == "move_forward", std::string(phrase) + " did not resolve to move_forward");
  }
  o.note("19 exact phrases x 2 tables, gibberish ignored, go/walk forward -> move_forward");
  return o;
}

Outcome latency_ordering() {
  Outcome o;
  auto& r = regime();
  const auto& frames = r.split.test.frames();
  const std::size_t n = std::max<std::size_t>(frames.size(), 1000);

  double svm_ms = 0.0, mlp_ms = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    svm_ms += predict(*r.svm, frames[i % frames.size()]).elapsed_ms;
    mlp_ms += predict(*r.mlp, frames[i % frames.size()]).elapsed_ms;
  }
  svm_ms /= static_cast<double>(n);
  mlp_ms /= static_cast<double>(n);

  const auto commands = default_command_list();
  const auto table = large_table(10000, 300);
  std::vector<std::string> words;
  for (const auto& cmd : commands.commands()) words.push_back(cmd.phrase);
  words.insert(words.end(), {"go forward", "walk back", "w17 w42", "zzz qqq", "please zoom in now"});
  double voice_ms = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto start = Clock::now();
    const auto result = resolve_command(words[i % words.size()], commands, table);
    voice_ms += ms_since(start);
    if (result.per_candidate.size() != commands.size()) o.require(false, "bad candidate count");
  }
  voice_ms /= 1000.0;

  o.require(svm_ms < voice_ms, "svm prediction not faster than voice resolution");
  o.require(mlp_ms < voice_ms, "mlp prediction not faster than voice resolution");
  o.note("per input: svm " + fmt(svm_ms) + " ms, mlp " + fmt(mlp_ms) + " ms, voice " + fmt(voice_ms) + " ms (" +
         std::to_string(n) + " frames, 1000 transcripts, " + std::to_string(table.size()) + " words x 300)");
  return o;
}

std::size_t count_events(const GestureModel& model, const std::vector<LandmarkFrame>& frames, std::size_t k) {
  VectorFrameSource source(frames);
  CollectingEventSink sink;
  GestureStreamOptions opts;
  opts.policy.k = k;
  return run_gesture_stream(model, source, opts, sink).events_emitted;
}

Outcome stream_determinism() {
  Outcome o;
  auto& r = regime();
  testing_support::TempDir dir;
  const auto frames_path = dir / "frames.csv";
  const auto model_path = dir / "model.json";
  save_landmark_dataset(frames_path, r.split.test, DatasetFormat::csv);
  save_model(*r.svm, model_path);
  testing_support::write_file(dir / "speech.txt", "move forward\n\nzzz qqq\nshow schedule\n");
  std::ostringstream words;
  for (const char* w : {"move", "forward", "show", "schedule"}) words << w << " 1 0.5 0.25\n";
  testing_support::write_file(dir / "emb.txt", words.str());

  const std::vector<std::string> args{"run",           "--model",        model_path.string(),
                                      "--frames",      frames_path.string(), "--transcripts",
                                      (dir / "speech.txt").string(), "--embeddings", (dir / "emb.txt").string()};
  std::ostringstream out1, out2, err;
  const int rc1 = run_cli(args, out1, err);
  const int rc2 = run_cli(args, out2, err);
  o.require(rc1 == 0 && rc2 == 0, "run exited with " + std::to_string(rc1) + "/" + std::to_string(rc2));
  o.require(!out1.str().empty() && out1.str() == out2.str(), "replays differ");

  // Debounce examples, on frames drawn from the synthetic prototypes.
  SyntheticSpec spec;
  const auto protos = synthetic_prototypes(spec);
  const auto& labels = spec.label_set;
  const auto index_of = [&](const std::string& l) {
    return static_cast<std::size_t>(std::find(labels.begin(), labels.end(), l) - labels.begin());
  };
  const auto& a = protos[index_of("look_up")];
  const auto& b = protos[index_of("move_back")];
  std::vector<LandmarkFrame> alternating;
  for (int i = 0; i < 20; ++i) alternating.push_back(i % 2 ? a : b);
  const std::vector<LandmarkFrame> aaabbb{a, a, a, b, b, b};
  o.require(count_events(*r.svm, std::vector<LandmarkFrame>(10, a), 5) == 1, "10 stable frames, k=5 != 1 event");
  o.require(count_events(*r.svm, alternating, 5) == 0, "alternating frames emitted events");
  o.require(count_events(*r.svm, aaabbb, 1) == 2, "k=1 AAABBB != 2 events");

  std::size_t lines = 0;
  for (const char c : out1.str()) lines += c == '\n';
  o.note(std::to_string(r.split.test.size()) + " frames replayed twice, " + std::to_string(lines) +
         " identical NDJSON lines; debounce examples 1/0/2 events");
  return o;
}

Outcome round_trips() {
  Outcome o;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::size_t dataset_ok = 0, model_ok = 0, event_ok = 0;
  testing_support::TempDir dir;

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LandmarkFrame> frames;
    std::vector<std::string> labels;
    for (std::size_t i = 0, n = 1 + rng() % 20; i < n; ++i) {
      frames.push_back(testing_support::random_frame(rng, -1e3, 1e3));
      labels.push_back("g" + std::to_string(rng() % 5) + (rng() % 2 ? "_x" : ""));
    }
    const LabeledDataset ds(frames, labels);
    const auto format = trial % 2 ? DatasetFormat::csv : DatasetFormat::jsonl;
    const auto path = dir / (format == DatasetFormat::csv ? "d.csv" : "d.jsonl");
    save_landmark_dataset(path, ds, format);
    dataset_ok += load_landmark_dataset(path, format) == ds;

    std::vector<std::string> model_labels;
    for (std::size_t i = 0, k = 2 + rng() % 6; i < k; ++i) model_labels.push_back("l" + std::to_string(i));
    std::optional<GestureModel> model;
    if (trial % 2) {
      SvmParameters p;
      for (std::size_t i = 0; i < model_labels.size(); ++i) {
        std::vector<double> w(kAugmentedWidth);
        for (auto& x : w) x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
        p.weights.push_back(std::move(w));
      }
      model = GestureModel::make_svm(model_labels, p, u(rng) + 10.0);
    } else {
      auto p = MlpParameters::zeros(1 + rng() % 12, model_labels.size());
      p.for_each([&](double& x) { x = u(rng) / 3.0; });
      model = GestureModel::make_mlp(model_labels, p, u(rng) + 10.0, Preprocessing::wrist_center);
    }
    save_model(*model, dir / "m.json");
    model_ok += load_model(dir / "m.json") == *model;

    CommandEvent ev;
    ev.source = rng() % 2 ? EventSource::gesture : EventSource::voice;
    ev.action_id = "act_" + std::to_string(rng()) + (rng() % 4 == 0 ? "\n\"\\\t" : "");
    ev.confidence = std::abs(u(rng)) / 10.0;
    ev.ts_ms = static_cast<std::int64_t>(rng() >> 2);
    event_ok += decode_event(encode_event(ev)) == ev;
  }
  o.require(dataset_ok == 100, std::to_string(dataset_ok) + "/100 datasets");
  o.require(model_ok == 100, std::to_string(model_ok) + "/100 models");
  o.require(event_ok == 100, std::to_string(event_ok) + "/100 events");
  o.note("datasets " + std::to_string(dataset_ok) + "/100, models " + std::to_string(model_ok) + "/100, events " +
         std::to_string(event_ok) + "/100");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric oracle", metric_oracle},
      {"gesture accuracy regime", gesture_accuracy},
      {"training-speed ordering", training_speed},
      {"mlp gradient check", gradient_check},
      {"jaro-winkler oracle", jaro_winkler_oracle},
      {"voice resolution contract", voice_contract},
      {"latency ordering", latency_ordering},
      {"stream determinism", stream_determinism},
      {"round-trips", round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << ": " << criteria[i].first << " (" << o.detail
              << ")\n";
  }
  std::cout << (failed == 0 ? "all acceptance criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
  return failed == 0 ? 0 : 1;
}
