#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "natcmd/classifiers.hpp"
#include "natcmd/errors.hpp"
#include "natcmd/voice_match.hpp"

namespace natcmd {

enum class EventSource { gesture, voice };
std::string_view to_string(EventSource source);

struct CommandEvent {
  EventSource source = EventSource::gesture;
  std::string action_id;
  double confidence = 0.0;  // in [0, 1]
  std::int64_t ts_ms = 0;

  friend bool operator==(const CommandEvent&, const CommandEvent&) = default;
};

/// One NDJSON line, newline-terminated, keys in the order
/// type, source, action, confidence, ts_ms.
std::string encode_event(const CommandEvent& event);

/// Inverse of encode_event; throws ParseError on anything else.
CommandEvent decode_event(std::string_view line);

class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void emit(const CommandEvent& event) = 0;
};

/// Writes encoded events to a stream. Safe to share between streams.
class StreamEventSink : public EventSink {
 public:
  explicit StreamEventSink(std::ostream& out) : out_(out) {}
  void emit(const CommandEvent& event) override;

 private:
  std::ostream& out_;
  std::mutex mutex_;
};

class CollectingEventSink : public EventSink {
 public:
  void emit(const CommandEvent& event) override;
  std::vector<CommandEvent> events() const;

 private:
  mutable std::mutex mutex_;
  std::vector<CommandEvent> events_;
};

/// Sends encoded events over a TCP connection opened at construction.
class TcpEventSink : public EventSink {
 public:
  /// Throws Error when the connection cannot be established.
  TcpEventSink(const std::string& host, std::uint16_t port);
  ~TcpEventSink() override;
  TcpEventSink(const TcpEventSink&) = delete;
  TcpEventSink& operator=(const TcpEventSink&) = delete;

  void emit(const CommandEvent& event) override;

 private:
  int fd_ = -1;
  std::mutex mutex_;
};

/// A frame as read from a source. `error` is set when the input line could not
/// be turned into 63 finite values.
struct FrameReading {
  std::vector<double> coords;
  std::string error;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// nullopt once the source is exhausted.
  virtual std::optional<FrameReading> next() = 0;
};

class VectorFrameSource : public FrameSource {
 public:
  explicit VectorFrameSource(std::vector<LandmarkFrame> frames) : frames_(std::move(frames)) {}
  std::optional<FrameReading> next() override;

 private:
  std::vector<LandmarkFrame> frames_;
  std::size_t pos_ = 0;
};

/// csv and jsonl replay the dataset files (labels ignored); live is one frame
/// per line as 63 comma-separated numbers.
enum class FrameFormat { csv, jsonl, live };

FrameFormat frame_format_for(const std::filesystem::path& path);

/// Parses one live-feed line (comma and/or whitespace separated numbers).
/// Throws ParseError with `line_no` when the line is not a valid frame.
LandmarkFrame parse_frame_line(std::string_view line, std::size_t line_no = 0);

/// Reads frames line by line from a stream; malformed lines become readings
/// with `error` set instead of aborting the replay.
class LineFrameSource : public FrameSource {
 public:
  LineFrameSource(std::istream& in, FrameFormat format) : in_(in), format_(format) {}
  std::optional<FrameReading> next() override;

 private:
  std::istream& in_;
  FrameFormat format_;
  std::size_t line_no_ = 0;
  bool header_seen_ = false;
};

class FileFrameSource : public FrameSource {
 public:
  FileFrameSource(const std::filesystem::path& path, FrameFormat format);
  std::optional<FrameReading> next() override { return reader_->next(); }

 private:
  std::ifstream file_;
  std::unique_ptr<LineFrameSource> reader_;
};

struct StabilityPolicy {
  std::size_t k = 5;
  std::string suppress_label = "neutral";

  void validate() const;
};

/// Gesture label -> action id. Labels missing from the map emit their own name.
using ActionMap = std::map<std::string, std::string, std::less<>>;

/// look_*/move_* map to themselves; the number gestures show (palm) or hide
/// (back of hand) the floor plan (two), reality (three) and schedule (four).
const ActionMap& default_gesture_actions();

/// Event timestamps: `start_ms + index * interval_ms`, or the wall clock when
/// `wall_clock` is set.
struct StreamClock {
  std::int64_t start_ms = 0;
  std::int64_t interval_ms = 40;
  bool wall_clock = false;

  std::int64_t stamp(std::size_t index) const;
};

struct GestureStreamOptions {
  StabilityPolicy policy;
  ActionMap actions = default_gesture_actions();
  StreamClock clock{0, 40, false};
  std::ostream* log = nullptr;
};

struct GestureStreamSummary {
  std::size_t frames_processed = 0;
  std::size_t invalid_frames = 0;
  std::size_t events_emitted = 0;
};

/// Winning softmax probability (MLP) or logistic of the winning margin (SVM).
double gesture_confidence(const GestureModel& model, const Prediction& prediction);

/// Predicts frames in order and emits one event whenever `policy.k`
/// consecutive predictions agree on a non-suppressed label that differs from
/// the last emitted one. A stable suppressed label clears that memory, so a
/// gesture repeated after a rest fires again.
GestureStreamSummary run_gesture_stream(const GestureModel& model, FrameSource& frames,
                                        const GestureStreamOptions& options, EventSink& sink);

class TranscriptionError : public Error {
 public:
  using Error::Error;
};

/// Yields one transcript per poll interval. next() returns nullopt for a
/// silent interval and throws TranscriptionError on provider failure;
/// implementations must return within poll_interval_ms() plus their grace.
class TranscriptionProvider {
 public:
  virtual ~TranscriptionProvider() = default;
  virtual std::optional<std::string> next() = 0;
  virtual bool exhausted() const = 0;
  virtual std::int64_t poll_interval_ms() const { return 3000; }
};

/// Replays fixed poll results; an empty string is a silent interval.
class CannedTranscriptionProvider : public TranscriptionProvider {
 public:
  explicit CannedTranscriptionProvider(std::vector<std::optional<std::string>> polls,
                                       std::int64_t poll_interval_ms = 3000)
      : polls_(std::move(polls)), interval_(poll_interval_ms) {}

  /// One poll per line; blank lines are silent intervals.
  static CannedTranscriptionProvider from_file(const std::filesystem::path& path, std::int64_t poll_interval_ms = 3000);

  std::optional<std::string> next() override;
  bool exhausted() const override { return pos_ >= polls_.size(); }
  std::int64_t poll_interval_ms() const override { return interval_; }

 private:
  std::vector<std::optional<std::string>> polls_;
  std::size_t pos_ = 0;
  std::int64_t interval_;
};

struct VoiceStreamOptions {
  std::int64_t start_ms = 0;
  bool wall_clock = false;
  std::size_t max_consecutive_failures = 3;
  std::ostream* log = nullptr;
};

struct VoiceStreamSummary {
  std::size_t polls = 0;
  std::size_t transcripts = 0;
  std::size_t events_emitted = 0;
  std::size_t failures = 0;
  bool aborted = false;
};

/// Resolves each polled transcript and emits an event (confidence total / 2)
/// for every match; unmatched speech is ignored.
VoiceStreamSummary run_voice_stream(TranscriptionProvider& provider, const CommandList& commands,
                                    const EmbeddingTable& table, const VoiceStreamOptions& options,
                                    EventSink& sink);

}  // namespace natcmd
