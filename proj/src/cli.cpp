#include "natcmd/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "natcmd/classifiers.hpp"
#include "natcmd/dataset.hpp"
#include "natcmd/dispatch.hpp"
#include "natcmd/metrics.hpp"
#include "natcmd/voice_match.hpp"
#include "text_util.hpp"

namespace natcmd {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> parse_labels(const std::string& spec) {
  if (spec == "default15") return default_gesture_labels();
  std::vector<std::string> labels;
  for (const auto part : detail::split(spec, ',')) {
    const auto label = detail::trim(part);
    if (!label.empty()) labels.emplace_back(label);
  }
  if (labels.empty()) throw ConfigError("no labels given");
  return labels;
}

CommandList commands_from(const std::string& spec) {
  return spec == "default19" ? default_command_list() : load_command_list(spec);
}

DatasetFormat dataset_format(const std::string& name, const std::string& path) {
  if (name == "csv") return DatasetFormat::csv;
  if (name == "jsonl") return DatasetFormat::jsonl;
  return dataset_format_for(path);
}

EmbeddingTable embeddings_from(const std::string& path, std::ostream& err) {
  std::vector<std::string> warnings;
  auto table = load_embeddings(path, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  return table;
}

/// NATCMD_<LONG_NAME> for every long option of `app` and its subcommands.
void bind_environment(CLI::App& app) {
  for (auto* opt : app.get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help") continue;
    std::string env = "NATCMD_";
    for (const char c : names.front()) env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    opt->envname(env);
  }
  for (auto* sub : app.get_subcommands({})) bind_environment(*sub);
}

struct GenDataArgs {
  std::string labels = "default15";
  std::size_t per_label = 1000;
  double sigma = 0.01;
  std::uint64_t seed = 42;
  std::string output;
  std::string format = "auto";
};

struct TrainArgs {
  std::string kind = "svm";
  std::string data;
  std::string format = "auto";
  std::string output;
  double split = 0.0;
  std::uint64_t seed = 42;
  double c = 1.0;
  std::size_t max_epochs = 1000;
  double tolerance = 1e-4;
  std::size_t hidden = 30;
  double learning_rate = 1e-3;
  std::size_t batch = 32;
  std::size_t epochs = 50;
  bool wrist_center = false;
};

struct EvaluateArgs {
  std::string model;
  std::string data;
  std::string format = "auto";
  double split = 0.0;
  std::uint64_t seed = 42;
  bool table = false;
};

struct PredictArgs {
  std::string model;
  std::string frame;
};

struct MatchArgs {
  std::string commands = "default19";
  std::string embeddings;
  std::string text;
};

struct RunArgs {
  std::string model;
  std::string frames;
  std::string frame_format = "auto";
  std::size_t k = 5;
  std::string suppress = "neutral";
  std::string transcripts;
  std::string commands = "default19";
  std::string embeddings;
  std::string connect;
  std::int64_t start_ms = 0;
  std::int64_t frame_interval_ms = 40;
  std::int64_t poll_interval_ms = 3000;
  bool wall_clock = false;
};

LabeledDataset load_for_cli(const std::string& path, const std::string& format) {
  return load_landmark_dataset(path, dataset_format(format, path));
}

int gen_data(const GenDataArgs& a, std::ostream& out) {
  SyntheticSpec spec;
  spec.label_set = parse_labels(a.labels);
  spec.frames_per_label = a.per_label;
  spec.noise_sigma = a.sigma;
  spec.seed = a.seed;
  const auto ds = generate_synthetic_dataset(spec);
  save_landmark_dataset(a.output, ds, dataset_format(a.format, a.output));
  ordered_json doc = {{"path", a.output}, {"frames", ds.size()}, {"labels", ds.label_set()}};
  out << doc.dump() << '\n';
  return kExitOk;
}

double training_accuracy(const GestureModel& model, const LabeledDataset& ds) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (predict(model, ds.frames()[i]).label == ds.labels()[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

int train(const TrainArgs& a, std::ostream& out) {
  auto ds = load_for_cli(a.data, a.format);
  if (a.split > 0.0) ds = split_dataset(ds, a.split, a.seed).train;
  const auto pre = a.wrist_center ? Preprocessing::wrist_center : Preprocessing::none;

  std::optional<GestureModel> model;
  if (a.kind == "svm") {
    SvmConfig cfg;
    cfg.c = a.c;
    cfg.max_epochs = a.max_epochs;
    cfg.tolerance = a.tolerance;
    cfg.seed = a.seed;
    cfg.preprocessing = pre;
    model = train_linear_svm(ds, cfg);
  } else {
    MlpConfig cfg;
    cfg.hidden_units = a.hidden;
    cfg.learning_rate = a.learning_rate;
    cfg.batch_size = a.batch;
    cfg.epochs = a.epochs;
    cfg.seed = a.seed;
    cfg.preprocessing = pre;
    model = train_mlp(ds, cfg);
  }
  save_model(*model, a.output);
  ordered_json doc = {{"model", a.output},
                      {"kind", to_string(model->kind())},
                      {"labels", model->label_set()},
                      {"train_frames", ds.size()},
                      {"training_time_ms", model->training_time_ms()},
                      {"train_accuracy", training_accuracy(*model, ds)}};
  out << doc.dump() << '\n';
  return kExitOk;
}

int evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto model = load_model(a.model);
  auto ds = load_for_cli(a.data, a.format);
  if (a.split > 0.0) ds = split_dataset(ds, a.split, a.seed).test;
  const auto report = evaluate_model(model, ds);
  if (a.table) {
    out << render_report_table(report);
  } else {
    out << report_to_json(report) << '\n';
  }
  return kExitOk;
}

int predict_one(const PredictArgs& a, std::ostream& out) {
  const auto model = load_model(a.model);
  std::ifstream in(a.frame);
  if (!in) throw DataError("cannot open frame file '" + a.frame + "'");
  std::string line;
  std::size_t line_no = 0;
  std::optional<LandmarkFrame> frame;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    frame = parse_frame_line(line, line_no);
    break;
  }
  if (!frame) throw DataError("frame file '" + a.frame + "' is empty");
  const auto p = predict(model, *frame);
  ordered_json doc = {{"label", p.label},
                      {"labels", model.label_set()},
                      {"scores", p.scores},
                      {"elapsed_ms", p.elapsed_ms}};
  out << doc.dump() << '\n';
  return kExitOk;
}

int match(const MatchArgs& a, std::ostream& out, std::ostream& err) {
  const auto commands = commands_from(a.commands);
  const auto table = embeddings_from(a.embeddings, err);
  out << match_result_to_json(resolve_command(a.text, commands, table)) << '\n';
  return kExitOk;
}

int run_streams(const RunArgs& a, std::ostream& out, std::ostream& err) {
  if (a.frames.empty() && a.transcripts.empty()) throw ConfigError("run needs --frames and/or --transcripts");
  if (!a.frames.empty() && a.model.empty()) throw ConfigError("--frames requires --model");
  if (!a.transcripts.empty() && a.embeddings.empty()) throw ConfigError("--transcripts requires --embeddings");

  std::unique_ptr<EventSink> sink;
  if (a.connect.empty()) {
    sink = std::make_unique<StreamEventSink>(out);
  } else {
    const auto colon = a.connect.rfind(':');
    if (colon == std::string::npos) throw ConfigError("--connect expects host:port");
    const auto port = std::stoul(a.connect.substr(colon + 1));
    if (port == 0 || port > 65535) throw ConfigError("invalid port in --connect");
    sink = std::make_unique<TcpEventSink>(a.connect.substr(0, colon), static_cast<std::uint16_t>(port));
  }

  // Setup errors surface before any stream starts.
  std::optional<GestureModel> model;
  std::unique_ptr<FrameSource> frames;
  if (!a.frames.empty()) {
    model = load_model(a.model);
    FrameFormat format = FrameFormat::live;
    if (a.frame_format == "csv") {
      format = FrameFormat::csv;
    } else if (a.frame_format == "jsonl") {
      format = FrameFormat::jsonl;
    } else if (a.frame_format == "auto" && a.frames != "-") {
      format = frame_format_for(a.frames);
    }
    if (a.frames == "-") {
      frames = std::make_unique<LineFrameSource>(std::cin, format);
    } else {
      frames = std::make_unique<FileFrameSource>(a.frames, format);
    }
  }
  std::optional<CommandList> commands;
  std::optional<EmbeddingTable> table;
  std::optional<CannedTranscriptionProvider> provider;
  if (!a.transcripts.empty()) {
    commands = commands_from(a.commands);
    table = embeddings_from(a.embeddings, err);
    provider = CannedTranscriptionProvider::from_file(a.transcripts, a.poll_interval_ms);
  }

  // Replayed streams with stream-relative timestamps are buffered and merged by
  // ts_ms so output does not depend on thread scheduling. Live (wall clock)
  // runs write straight to the shared sink.
  const bool merge = frames && provider && !a.wall_clock;
  CollectingEventSink gesture_buffer, voice_buffer;
  auto gesture_sink = [&]() -> EventSink& { return merge ? gesture_buffer : *sink; };
  auto voice_sink = [&]() -> EventSink& { return merge ? voice_buffer : *sink; };

  std::ostringstream gesture_log, voice_log;
  GestureStreamSummary gesture_summary;
  VoiceStreamSummary voice_summary;
  std::exception_ptr gesture_error;

  auto gesture_task = [&] {
    try {
      GestureStreamOptions opts;
      opts.policy.k = a.k;
      opts.policy.suppress_label = a.suppress;
      opts.clock = StreamClock{a.start_ms, a.frame_interval_ms, a.wall_clock};
      opts.log = &gesture_log;
      gesture_summary = run_gesture_stream(*model, *frames, opts, gesture_sink());
    } catch (...) {
      gesture_error = std::current_exception();
    }
  };
  auto voice_task = [&] {
    VoiceStreamOptions opts;
    opts.start_ms = a.start_ms;
    opts.wall_clock = a.wall_clock;
    opts.log = &voice_log;
    voice_summary = run_voice_stream(*provider, *commands, *table, opts, voice_sink());
  };

  if (frames && provider) {
    std::thread gesture_thread(gesture_task);
    voice_task();
    gesture_thread.join();
  } else if (frames) {
    gesture_task();
  } else {
    voice_task();
  }
  if (merge) {
    auto events = gesture_buffer.events();
    const auto voice_events = voice_buffer.events();
    events.insert(events.end(), voice_events.begin(), voice_events.end());
    std::stable_sort(events.begin(), events.end(),
                     [](const CommandEvent& x, const CommandEvent& y) { return x.ts_ms < y.ts_ms; });
    for (const auto& e : events) sink->emit(e);
  }
  err << gesture_log.str() << voice_log.str();
  if (gesture_error) std::rethrow_exception(gesture_error);

  if (frames) {
    err << "gesture stream: " << gesture_summary.frames_processed << " frames, " << gesture_summary.invalid_frames
        << " invalid, " << gesture_summary.events_emitted << " events\n";
  }
  if (provider) {
    err << "voice stream: " << voice_summary.polls << " polls, " << voice_summary.transcripts << " transcripts, "
        << voice_summary.events_emitted << " events" << (voice_summary.aborted ? " (aborted)" : "") << '\n';
    if (voice_summary.aborted) return kExitDataError;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gesture and voice command recognition toolkit", "natcmd"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic landmark dataset");
  gen_cmd->add_option("--labels", gen.labels, "default15 or a comma-separated label list")->capture_default_str();
  gen_cmd->add_option("--per-label", gen.per_label, "Frames per label")->capture_default_str();
  gen_cmd->add_option("--sigma", gen.sigma, "Per-coordinate noise standard deviation")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("-o,--output", gen.output, "Dataset file (.csv or .jsonl)")->required();
  gen_cmd->add_option("--format", gen.format)->check(CLI::IsMember({"auto", "csv", "jsonl"}))->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a gesture classifier");
  train_cmd->add_option("--kind", tr.kind)->check(CLI::IsMember({"svm", "mlp"}))->capture_default_str();
  train_cmd->add_option("--data", tr.data, "Training dataset")->required();
  train_cmd->add_option("--format", tr.format)->check(CLI::IsMember({"auto", "csv", "jsonl"}))->capture_default_str();
  train_cmd->add_option("-o,--output", tr.output, "Model file to write")->required();
  train_cmd->add_option("--split", tr.split, "Train only on this stratified fraction")->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--seed", tr.seed)->capture_default_str();
  train_cmd->add_option("--c", tr.c, "SVM regularization parameter")->capture_default_str();
  train_cmd->add_option("--max-epochs", tr.max_epochs, "SVM epoch limit")->capture_default_str();
  train_cmd->add_option("--tolerance", tr.tolerance, "SVM relative objective tolerance")->capture_default_str();
  train_cmd->add_option("--hidden", tr.hidden, "MLP hidden units")->capture_default_str();
  train_cmd->add_option("--lr", tr.learning_rate, "MLP learning rate")->capture_default_str();
  train_cmd->add_option("--batch", tr.batch, "MLP mini-batch size")->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs, "MLP epochs")->capture_default_str();
  train_cmd->add_flag("--wrist-center", tr.wrist_center, "Subtract the wrist landmark from every landmark");

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a model on a dataset");
  eval_cmd->add_option("--model", ev.model)->required();
  eval_cmd->add_option("--data", ev.data)->required();
  eval_cmd->add_option("--format", ev.format)->check(CLI::IsMember({"auto", "csv", "jsonl"}))->capture_default_str();
  eval_cmd->add_option("--split", ev.split, "Evaluate on the held-out part of this stratified split")
      ->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--seed", ev.seed)->capture_default_str();
  eval_cmd->add_flag("--table", ev.table, "Print a text table instead of JSON");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Classify one frame");
  predict_cmd->add_option("--model", pr.model)->required();
  predict_cmd->add_option("--frame", pr.frame, "File holding 63 comma-separated numbers")->required();

  MatchArgs ma;
  auto* match_cmd = app.add_subcommand("match", "Resolve one transcript against the command list");
  match_cmd->add_option("--commands", ma.commands, "default19 or a TSV command file")->capture_default_str();
  match_cmd->add_option("--embeddings", ma.embeddings, "Word-vector text file")->required();
  match_cmd->add_option("--text", ma.text, "Transcript")->required();

  RunArgs ru;
  auto* run_cmd = app.add_subcommand("run", "Stream frames and/or transcripts into NDJSON command events");
  run_cmd->add_option("--model", ru.model);
  run_cmd->add_option("--frames", ru.frames, "Frame file, or - for a live feed on stdin");
  run_cmd->add_option("--frame-format", ru.frame_format)
      ->check(CLI::IsMember({"auto", "csv", "jsonl", "live"}))
      ->capture_default_str();
  run_cmd->add_option("--k", ru.k, "Consecutive agreeing frames before an event")->capture_default_str();
  run_cmd->add_option("--suppress", ru.suppress, "Label that never emits an event")->capture_default_str();
  run_cmd->add_option("--transcripts", ru.transcripts, "Canned transcript file, one poll per line");
  run_cmd->add_option("--commands", ru.commands)->capture_default_str();
  run_cmd->add_option("--embeddings", ru.embeddings);
  run_cmd->add_option("--connect", ru.connect, "Send events to host:port over TCP instead of stdout");
  run_cmd->add_option("--start-ms", ru.start_ms, "Timestamp of the first frame/poll")->capture_default_str();
  run_cmd->add_option("--frame-interval-ms", ru.frame_interval_ms)->capture_default_str();
  run_cmd->add_option("--poll-interval-ms", ru.poll_interval_ms)->capture_default_str();
  run_cmd->add_flag("--wall-clock", ru.wall_clock, "Stamp events with the current time");

  bind_environment(app);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return gen_data(gen, out);
    if (train_cmd->parsed()) return train(tr, out);
    if (eval_cmd->parsed()) return evaluate(ev, out);
    if (predict_cmd->parsed()) return predict_one(pr, out);
    if (match_cmd->parsed()) return match(ma, out, err);
    if (run_cmd->parsed()) return run_streams(ru, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitUsage;
}

}  // namespace natcmd
