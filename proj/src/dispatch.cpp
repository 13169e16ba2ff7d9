#include "natcmd/dispatch.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <ostream>

#include <json.hpp>

#include "text_util.hpp"

namespace natcmd {

std::string_view to_string(EventSource source) { return source == EventSource::gesture ? "gesture" : "voice"; }

std::string encode_event(const CommandEvent& event) {
  std::string line = R"({"type":"command","source":")";
  line += to_string(event.source);
  line += R"(","action":)";
  // dump() escapes control characters, so the line never holds a raw newline.
  line += nlohmann::json(event.action_id).dump();
  line += R"(,"confidence":)";
  line += detail::format_double(event.confidence);
  line += R"(,"ts_ms":)";
  line += std::to_string(event.ts_ms);
  line += "}\n";
  return line;
}

CommandEvent decode_event(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("event is not valid JSON: ") + e.what());
  }
  static const char* const keys[] = {"type", "source", "action", "confidence", "ts_ms"};
  if (!doc.is_object() || doc.size() != std::size(keys)) throw ParseError("event must have exactly 5 fields");
  std::size_t i = 0;
  for (const auto& [key, _] : doc.items()) {
    if (key != keys[i++]) throw ParseError("unexpected event field '" + key + "'");
  }
  if (doc["type"] != "command") throw ParseError("event type must be \"command\"");
  CommandEvent ev;
  if (doc["source"] == "gesture") {
    ev.source = EventSource::gesture;
  } else if (doc["source"] == "voice") {
    ev.source = EventSource::voice;
  } else {
    throw ParseError("unknown event source " + doc["source"].dump());
  }
  if (!doc["action"].is_string()) throw ParseError("event action must be a string");
  ev.action_id = doc["action"].get<std::string>();
  if (!doc["confidence"].is_number()) throw ParseError("event confidence must be a number");
  ev.confidence = doc["confidence"].get<double>();
  if (!(ev.confidence >= 0.0 && ev.confidence <= 1.0)) throw ParseError("event confidence outside [0, 1]");
  if (!doc["ts_ms"].is_number_integer()) throw ParseError("event ts_ms must be an integer");
  ev.ts_ms = doc["ts_ms"].get<std::int64_t>();
  return ev;
}

void StreamEventSink::emit(const CommandEvent& event) {
  const auto line = encode_event(event);
  std::lock_guard lock(mutex_);
  out_ << line << std::flush;
}

void CollectingEventSink::emit(const CommandEvent& event) {
  std::lock_guard lock(mutex_);
  events_.push_back(event);
}

std::vector<CommandEvent> CollectingEventSink::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

TcpEventSink::TcpEventSink(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const auto service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
    throw Error("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  for (auto* ai = found; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  ::freeaddrinfo(found);
  if (fd_ < 0) throw Error("cannot connect to " + host + ":" + service);
}

TcpEventSink::~TcpEventSink() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpEventSink::emit(const CommandEvent& event) {
  const auto line = encode_event(event);
  std::lock_guard lock(mutex_);
  std::size_t sent = 0;
  while (sent < line.size()) {
    const auto n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) throw Error(std::string("event send failed: ") + std::strerror(errno));
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<FrameReading> VectorFrameSource::next() {
  if (pos_ >= frames_.size()) return std::nullopt;
  const auto c = frames_[pos_++].coords();
  return FrameReading{{c.begin(), c.end()}, {}};
}

FrameFormat frame_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return FrameFormat::csv;
  if (ext == ".jsonl" || ext == ".ndjson") return FrameFormat::jsonl;
  return FrameFormat::live;
}

LandmarkFrame parse_frame_line(std::string_view line, std::size_t line_no) {
  std::vector<double> values;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ',' || line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const auto start = i;
    while (i < line.size() && !(line[i] == ',' || line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i == start) break;
    const auto field = line.substr(start, i - start);
    const auto v = detail::parse_double(field);
    if (!v) throw ParseError("non-numeric value '" + std::string(field) + "'", line_no);
    if (!std::isfinite(*v)) throw ParseError("non-finite value", line_no);
    values.push_back(*v);
  }
  if (values.size() != kFrameWidth) {
    throw ParseError("frame has " + std::to_string(values.size()) + " values, expected " + std::to_string(kFrameWidth),
                     line_no);
  }
  return LandmarkFrame(values);
}

std::optional<FrameReading> LineFrameSource::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (detail::trim(line).empty()) continue;
    try {
      switch (format_) {
        case FrameFormat::live: {
          const auto frame = parse_frame_line(line, line_no_);
          return FrameReading{{frame.coords().begin(), frame.coords().end()}, {}};
        }
        case FrameFormat::csv: {
          if (!header_seen_) {
            if (detail::trim(line) != csv_header()) throw ParseError("unexpected CSV header", line_no_);
            header_seen_ = true;
            continue;
          }
          const auto comma = line.find(',');
          if (comma == std::string::npos) throw ParseError("row has no coordinates", line_no_);
          const auto frame = parse_frame_line(std::string_view(line).substr(comma + 1), line_no_);
          return FrameReading{{frame.coords().begin(), frame.coords().end()}, {}};
        }
        case FrameFormat::jsonl: {
          const auto obj = nlohmann::json::parse(line);
          const auto it = obj.find("coords");
          if (!obj.is_object() || it == obj.end() || !it->is_array()) throw ParseError("missing 'coords'", line_no_);
          std::vector<double> coords;
          for (const auto& v : *it) {
            if (!v.is_number()) throw ParseError("non-numeric coordinate", line_no_);
            coords.push_back(v.get<double>());
          }
          const LandmarkFrame frame(coords);
          return FrameReading{std::move(coords), {}};
        }
      }
    } catch (const nlohmann::json::exception& e) {
      return FrameReading{{}, "line " + std::to_string(line_no_) + ": " + e.what()};
    } catch (const ParseError& e) {
      if (format_ == FrameFormat::csv && !header_seen_) throw;
      return FrameReading{{}, e.what()};
    } catch (const DataError& e) {
      return FrameReading{{}, "line " + std::to_string(line_no_) + ": " + e.what()};
    }
  }
  return std::nullopt;
}

FileFrameSource::FileFrameSource(const std::filesystem::path& path, FrameFormat format) : file_(path) {
  if (!file_) throw DataError("cannot open frame source '" + path.string() + "'");
  reader_ = std::make_unique<LineFrameSource>(file_, format);
}

void StabilityPolicy::validate() const {
  if (k < 1) throw ConfigError("stability window k must be at least 1");
}

const ActionMap& default_gesture_actions() {
  static const ActionMap actions = {
      {"two", "show_floor_plan"},     {"reverse_two", "hide_floor_plan"}, {"three", "show_reality"},
      {"reverse_three", "hide_reality"}, {"four", "show_schedule"},     {"reverse_four", "hide_schedule"}};
  return actions;
}

std::int64_t StreamClock::stamp(std::size_t index) const {
  if (wall_clock) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  }
  return start_ms + static_cast<std::int64_t>(index) * interval_ms;
}

double gesture_confidence(const GestureModel& model, const Prediction& prediction) {
  const double score = prediction.scores.at(prediction.index);
  if (model.kind() == ModelKind::mlp) return std::clamp(score, 0.0, 1.0);
  return 1.0 / (1.0 + std::exp(-score));
}

GestureStreamSummary run_gesture_stream(const GestureModel& model, FrameSource& frames,
                                        const GestureStreamOptions& options, EventSink& sink) {
  options.policy.validate();
  GestureStreamSummary summary;
  std::optional<std::size_t> run_label;
  std::size_t run_length = 0;
  std::optional<std::size_t> last_emitted;
  std::size_t index = 0;

  while (auto reading = frames.next()) {
    const std::size_t frame_index = index++;
    if (!reading->error.empty() || reading->coords.size() != kFrameWidth) {
      ++summary.invalid_frames;
      if (options.log != nullptr) {
        *options.log << "warning: skipping invalid frame " << frame_index << ": "
                     << (reading->error.empty() ? "wrong arity" : reading->error) << '\n';
      }
      continue;
    }
    Prediction p;
    try {
      p = predict(model, reading->coords);
    } catch (const DataError& e) {
      ++summary.invalid_frames;
      if (options.log != nullptr) *options.log << "warning: skipping invalid frame " << frame_index << ": " << e.what() << '\n';
      continue;
    }
    ++summary.frames_processed;

    if (run_label == p.index) {
      ++run_length;
    } else {
      run_label = p.index;
      run_length = 1;
    }
    if (run_length != options.policy.k) continue;

    if (p.label == options.policy.suppress_label) {
      last_emitted.reset();
      continue;
    }
    if (last_emitted == p.index) continue;

    CommandEvent ev;
    ev.source = EventSource::gesture;
    const auto mapped = options.actions.find(p.label);
    ev.action_id = mapped == options.actions.end() ? p.label : mapped->second;
    ev.confidence = gesture_confidence(model, p);
    ev.ts_ms = options.clock.stamp(frame_index);
    sink.emit(ev);
    last_emitted = p.index;
    ++summary.events_emitted;
  }
  return summary;
}

CannedTranscriptionProvider CannedTranscriptionProvider::from_file(const std::filesystem::path& path,
                                                                   std::int64_t poll_interval_ms) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open transcript file '" + path.string() + "'");
  std::vector<std::optional<std::string>> polls;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) {
      polls.emplace_back(std::nullopt);
    } else {
      polls.emplace_back(line);
    }
  }
  return CannedTranscriptionProvider(std::move(polls), poll_interval_ms);
}

std::optional<std::string> CannedTranscriptionProvider::next() {
  if (pos_ >= polls_.size()) throw TranscriptionError("canned provider is exhausted");
  return polls_[pos_++];
}

VoiceStreamSummary run_voice_stream(TranscriptionProvider& provider, const CommandList& commands,
                                    const EmbeddingTable& table, const VoiceStreamOptions& options,
                                    EventSink& sink) {
  VoiceStreamSummary summary;
  const StreamClock clock{options.start_ms, provider.poll_interval_ms(), options.wall_clock};
  std::size_t consecutive_failures = 0;

  while (!provider.exhausted()) {
    const std::size_t poll_index = summary.polls++;
    std::optional<std::string> transcript;
    try {
      transcript = provider.next();
      consecutive_failures = 0;
    } catch (const TranscriptionError& e) {
      ++summary.failures;
      if (options.log != nullptr) *options.log << "warning: transcription failed: " << e.what() << '\n';
      if (++consecutive_failures >= options.max_consecutive_failures) {
        summary.aborted = true;
        if (options.log != nullptr) *options.log << "error: too many consecutive transcription failures\n";
        break;
      }
      continue;
    }
    if (!transcript) continue;
    ++summary.transcripts;

    const auto result = resolve_command(*transcript, commands, table);
    if (!result.matched) continue;
    double best = 0.0;
    for (const auto& c : result.per_candidate) best = std::max(best, c.total);

    CommandEvent ev;
    ev.source = EventSource::voice;
    ev.action_id = result.matched->action_id;
    ev.confidence = std::clamp(best / 2.0, 0.0, 1.0);
    ev.ts_ms = clock.stamp(poll_index);
    sink.emit(ev);
    ++summary.events_emitted;
  }
  return summary;
}

}  // namespace natcmd
