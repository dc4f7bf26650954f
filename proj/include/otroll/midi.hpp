#ifndef OTROLL_MIDI_HPP
#define OTROLL_MIDI_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <fstream>
#include <iterator>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otroll/errors.hpp"
#include "otroll/grid.hpp"

namespace otroll {

inline constexpr std::uint32_t kDefaultTempoUs = 500000;  // 120 bpm
inline constexpr std::uint32_t kMaxVlq = 0x0FFFFFFF;

struct TempoChange {
  std::uint64_t tick = 0;
  std::uint32_t us_per_quarter = kDefaultTempoUs;

  friend bool operator==(const TempoChange&, const TempoChange&) = default;
};

/// Piecewise-constant tempo. The first change is always at tick 0.
class TempoMap {
public:
  explicit TempoMap(std::uint32_t ticks_per_quarter = 480, std::vector<TempoChange> changes = {})
      : ticks_per_quarter_(ticks_per_quarter) {
    if (ticks_per_quarter == 0) throw ValidationError("tempo map: ticks per quarter must be > 0");
    std::stable_sort(changes.begin(), changes.end(),
                     [](const TempoChange& a, const TempoChange& b) { return a.tick < b.tick; });
    for (const auto& c : changes) {
      if (c.us_per_quarter == 0) throw ValidationError("tempo map: zero tempo");
      if (!changes_.empty() && changes_.back().tick == c.tick)
        changes_.back() = c;  // last one at a tick wins
      else
        changes_.push_back(c);
    }
    if (changes_.empty() || changes_.front().tick != 0)
      changes_.insert(changes_.begin(), TempoChange{0, kDefaultTempoUs});

    start_s_.resize(changes_.size(), 0.0);
    for (std::size_t k = 1; k < changes_.size(); ++k)
      start_s_[k] = start_s_[k - 1] + span_seconds(k - 1, changes_[k].tick - changes_[k - 1].tick);
  }

  std::uint32_t ticks_per_quarter() const noexcept { return ticks_per_quarter_; }
  const std::vector<TempoChange>& changes() const noexcept { return changes_; }

  double seconds(std::uint64_t tick) const {
    auto it = std::upper_bound(changes_.begin(), changes_.end(), tick,
                               [](std::uint64_t t, const TempoChange& c) { return t < c.tick; });
    const auto k = static_cast<std::size_t>(std::distance(changes_.begin(), it)) - 1;
    return start_s_[k] + span_seconds(k, tick - changes_[k].tick);
  }

  friend bool operator==(const TempoMap& a, const TempoMap& b) {
    return a.ticks_per_quarter_ == b.ticks_per_quarter_ && a.changes_ == b.changes_;
  }

private:
  double span_seconds(std::size_t k, std::uint64_t ticks) const {
    return static_cast<double>(ticks) * changes_[k].us_per_quarter * 1e-6 / ticks_per_quarter_;
  }

  std::uint32_t ticks_per_quarter_;
  std::vector<TempoChange> changes_;
  std::vector<double> start_s_;
};

/// Sustain pedal (CC64) value change.
struct PedalEvent {
  double time_s = 0.0;
  int value = 0;
};

struct SmfData {
  NoteList notes;
  TempoMap tempo;
  std::vector<PedalEvent> pedal;
  std::vector<std::string> warnings;
};

namespace detail {

class ByteReader {
public:
  ByteReader(std::span<const std::uint8_t> bytes, std::size_t pos, std::size_t end)
      : bytes_(bytes), pos_(pos), end_(end) {}

  std::size_t pos() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ >= end_; }

  std::uint8_t u8(const char* what) {
    if (pos_ >= end_) throw FormatError(std::string("truncated ") + what, pos_);
    return bytes_[pos_++];
  }
  std::uint8_t peek(const char* what) const {
    if (pos_ >= end_) throw FormatError(std::string("truncated ") + what, pos_);
    return bytes_[pos_];
  }
  std::uint32_t be16(const char* what) {
    const std::uint32_t hi = u8(what);
    return (hi << 8) | u8(what);
  }
  std::uint32_t be32(const char* what) {
    const std::uint32_t hi = be16(what);
    return (hi << 16) | be16(what);
  }
  /// Variable-length quantity: 7 bits per byte, high bit set on all but the
  /// last, at most four bytes.
  std::uint32_t vlq(const char* what) {
    const std::size_t start = pos_;
    std::uint32_t value = 0;
    for (int n = 0; n < 4; ++n) {
      const std::uint8_t b = u8(what);
      value = (value << 7) | (b & 0x7F);
      if (!(b & 0x80)) return value;
    }
    throw FormatError(std::string("variable-length ") + what + " longer than 4 bytes", start);
  }
  std::uint8_t data_byte(const char* what) {
    const std::size_t at = pos_;
    const std::uint8_t b = u8(what);
    if (b & 0x80) throw FormatError(std::string("status byte where ") + what + " data expected", at);
    return b;
  }
  void skip(std::size_t n, const char* what) {
    if (n > end_ - pos_) throw FormatError(std::string("truncated ") + what, pos_);
    pos_ += n;
  }

private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
  std::size_t end_;
};

enum class RawKind { note_on, note_off, pedal, tempo };

struct RawEvent {
  std::uint64_t tick;
  std::size_t track;
  RawKind kind;
  int channel;
  int key;
  int value;  ///< velocity, CC value, or microseconds per quarter
};

inline bool tag_is(std::span<const std::uint8_t> bytes, std::size_t at, const char* tag) {
  return bytes[at] == tag[0] && bytes[at + 1] == tag[1] && bytes[at + 2] == tag[2] &&
         bytes[at + 3] == tag[3];
}

/// Appends the events of one MTrk body; returns the end-of-track tick.
inline std::uint64_t read_track(ByteReader& r, std::size_t track, std::vector<RawEvent>& events,
                                std::vector<std::string>& warnings) {
  std::uint64_t tick = 0;
  std::uint8_t running = 0;
  while (!r.done()) {
    tick += r.vlq("delta time");
    const std::size_t at = r.pos();
    std::uint8_t status = r.peek("event");
    if (status & 0x80) {
      r.u8("event");
    } else if (running) {
      status = running;
    } else {
      throw FormatError("data byte without running status", at);
    }

    if (status == 0xFF) {
      running = 0;
      const std::uint8_t type = r.u8("meta type");
      const std::uint32_t len = r.vlq("meta length");
      if (type == 0x2F) {
        r.skip(len, "end-of-track");
        if (!r.done()) warnings.push_back("track " + std::to_string(track) + ": data after end-of-track ignored");
        return tick;
      }
      if (type == 0x51 && len == 3) {
        const std::uint32_t us = (std::uint32_t{r.u8("tempo")} << 16) |
                                 (std::uint32_t{r.u8("tempo")} << 8) | r.u8("tempo");
        if (us == 0) {
          warnings.push_back("track " + std::to_string(track) + ": zero tempo ignored");
        } else {
          events.push_back({tick, track, RawKind::tempo, 0, 0, static_cast<int>(us)});
        }
        continue;
      }
      r.skip(len, "meta event");
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      running = 0;
      r.skip(r.vlq("sysex length"), "sysex event");
      continue;
    }
    if (status >= 0xF1) throw FormatError("unsupported system message in file", at);

    running = status;
    const int channel = status & 0x0F;
    switch (status & 0xF0) {
      case 0x80: {
        const int key = r.data_byte("note-off");
        r.data_byte("note-off");
        events.push_back({tick, track, RawKind::note_off, channel, key, 0});
        break;
      }
      case 0x90: {
        const int key = r.data_byte("note-on");
        const int vel = r.data_byte("note-on");
        events.push_back({tick, track, vel == 0 ? RawKind::note_off : RawKind::note_on,
                          channel, key, vel});
        break;
      }
      case 0xB0: {
        const int controller = r.data_byte("control change");
        const int value = r.data_byte("control change");
        if (controller == 64) events.push_back({tick, track, RawKind::pedal, channel, 64, value});
        break;
      }
      case 0xA0:
      case 0xE0:
        r.data_byte("channel message");
        r.data_byte("channel message");
        break;
      default:  // 0xC0, 0xD0
        r.data_byte("channel message");
        break;
    }
  }
  warnings.push_back("track " + std::to_string(track) + ": missing end-of-track");
  return tick;
}

}  // namespace detail

/// Parses a format 0 or 1 Standard MIDI File into notes in seconds.
///
/// All tracks are merged. Note-on with velocity 0 is a note-off. Overlapping
/// notes on the same (channel, key) pair first-on with first-off. Notes left
/// open close at their track's end with a warning. Unknown chunks, meta and
/// sysex events are skipped.
inline SmfData parse_smf(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 14 || !detail::tag_is(bytes, 0, "MThd"))
    throw FormatError("not a Standard MIDI File: missing MThd header", 0);
  detail::ByteReader head(bytes, 4, bytes.size());
  const std::uint32_t header_len = head.be32("header length");
  if (header_len < 6) throw FormatError("header chunk shorter than 6 bytes", 4);
  if (header_len > bytes.size() - 8) throw FormatError("header chunk length exceeds file", 4);
  const std::uint32_t format = head.be16("format");
  const std::uint32_t n_tracks = head.be16("track count");
  const std::uint32_t division = head.be16("division");
  if (format > 1) throw FormatError("unsupported SMF format " + std::to_string(format), 8);
  if (division & 0x8000) throw FormatError("SMPTE time division is not supported", 12);
  if (division == 0) throw FormatError("zero ticks per quarter note", 12);

  std::vector<detail::RawEvent> events;
  std::vector<std::uint64_t> track_end;
  std::vector<std::string> warnings;
  std::size_t pos = 8 + header_len;
  while (track_end.size() < n_tracks) {
    if (pos == bytes.size()) {
      warnings.push_back("header announces " + std::to_string(n_tracks) + " tracks, found " +
                         std::to_string(track_end.size()));
      break;
    }
    if (bytes.size() - pos < 8) throw FormatError("truncated chunk header", pos);
    detail::ByteReader ch(bytes, pos + 4, pos + 8);
    const std::uint32_t len = ch.be32("chunk length");
    if (len > bytes.size() - pos - 8) throw FormatError("chunk length exceeds file", pos + 4);
    if (detail::tag_is(bytes, pos, "MTrk")) {
      detail::ByteReader body(bytes, pos + 8, pos + 8 + len);
      track_end.push_back(detail::read_track(body, track_end.size(), events, warnings));
    }
    pos += 8 + static_cast<std::size_t>(len);
  }

  // Events sorted by tick; within a tick, by track then file order.
  std::stable_sort(events.begin(), events.end(),
                   [](const detail::RawEvent& a, const detail::RawEvent& b) {
                     return a.tick != b.tick ? a.tick < b.tick : a.track < b.track;
                   });

  std::vector<TempoChange> changes;
  for (const auto& e : events)
    if (e.kind == detail::RawKind::tempo)
      changes.push_back({e.tick, static_cast<std::uint32_t>(e.value)});
  TempoMap tempo(division, std::move(changes));

  struct Open {
    std::uint64_t tick;
    std::size_t track;
    int velocity;
  };
  std::map<std::pair<int, int>, std::deque<Open>> open;
  std::vector<NoteEvent> notes;
  std::vector<PedalEvent> pedal;
  auto close = [&](int key, const Open& o, std::uint64_t off_tick) {
    if (off_tick <= o.tick) {
      warnings.push_back("zero-length note " + std::to_string(key) + " at tick " +
                         std::to_string(o.tick) + " dropped");
      return;
    }
    notes.push_back({tempo.seconds(o.tick), tempo.seconds(off_tick), key, o.velocity});
  };
  for (const auto& e : events) {
    switch (e.kind) {
      case detail::RawKind::note_on:
        open[{e.channel, e.key}].push_back({e.tick, e.track, e.value});
        break;
      case detail::RawKind::note_off: {
        auto& q = open[{e.channel, e.key}];
        if (q.empty()) {
          warnings.push_back("note-off without note-on: key " + std::to_string(e.key) +
                             " at tick " + std::to_string(e.tick));
          break;
        }
        close(e.key, q.front(), e.tick);
        q.pop_front();
        break;
      }
      case detail::RawKind::pedal:
        pedal.push_back({tempo.seconds(e.tick), e.value});
        break;
      case detail::RawKind::tempo:
        break;
    }
  }
  for (const auto& [key, q] : open) {
    for (const auto& o : q) {
      warnings.push_back("unterminated note " + std::to_string(key.second) + " at tick " +
                         std::to_string(o.tick) + " closed at end of track");
      close(key.second, o, track_end[o.track]);
    }
  }
  return SmfData{NoteList(std::move(notes)), std::move(tempo), std::move(pedal), std::move(warnings)};
}

namespace detail {

inline void put_be(std::vector<std::uint8_t>& out, std::uint32_t v, int n_bytes) {
  for (int k = n_bytes - 1; k >= 0; --k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

inline void put_vlq(std::vector<std::uint8_t>& out, std::uint32_t v) {
  std::uint8_t buf[4];
  int n = 0;
  do {
    buf[n++] = static_cast<std::uint8_t>(v & 0x7F);
    v >>= 7;
  } while (v != 0);
  while (n-- > 0) out.push_back(static_cast<std::uint8_t>(buf[n] | (n > 0 ? 0x80 : 0)));
}

}  // namespace detail

/// Format-0 single-track file at a fixed tempo, channel 0, velocity 64 unless
/// the note carries one. Notes shorter than one tick are lengthened to one.
inline std::vector<std::uint8_t> write_smf(const NoteList& notes, std::uint32_t ticks_per_quarter = 480,
                                           std::uint32_t tempo_us = kDefaultTempoUs) {
  if (ticks_per_quarter == 0 || ticks_per_quarter > 0x7FFF)
    throw ValidationError("write_smf: ticks per quarter must lie in 1..32767");
  if (tempo_us == 0 || tempo_us > 0xFFFFFF)
    throw ValidationError("write_smf: tempo must lie in 1..16777215 us per quarter");

  const double ticks_per_s = ticks_per_quarter * 1e6 / tempo_us;
  auto to_tick = [&](double s) -> std::uint32_t {
    const double t = std::round(s * ticks_per_s);
    if (!(t <= kMaxVlq))
      throw OverflowError("write_smf: time " + std::to_string(s) + " s exceeds the tick range");
    return static_cast<std::uint32_t>(t);
  };

  struct Ev {
    std::uint32_t tick;
    bool on;
    std::uint8_t key;
    std::uint8_t vel;
  };
  std::vector<Ev> evs;
  evs.reserve(notes.size() * 2);
  for (const auto& n : notes) {
    const std::uint32_t on = to_tick(n.onset_s);
    const std::uint32_t off = std::max(to_tick(n.offset_s), on + 1);
    if (off > kMaxVlq) throw OverflowError("write_smf: note end exceeds the tick range");
    const auto key = static_cast<std::uint8_t>(n.pitch);
    evs.push_back({on, true, key, static_cast<std::uint8_t>(n.velocity.value_or(64))});
    evs.push_back({off, false, key, 0});
  }
  // Offs precede ons at equal ticks so back-to-back repeats pair correctly.
  std::stable_sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) {
    if (a.tick != b.tick) return a.tick < b.tick;
    return !a.on && b.on;
  });

  std::vector<std::uint8_t> track;
  detail::put_vlq(track, 0);
  track.insert(track.end(), {0xFF, 0x51, 0x03});
  detail::put_be(track, tempo_us, 3);
  std::uint32_t last = 0;
  for (const auto& e : evs) {
    detail::put_vlq(track, e.tick - last);
    last = e.tick;
    track.push_back(e.on ? 0x90 : 0x80);
    track.push_back(e.key);
    track.push_back(e.on ? e.vel : 0x40);
  }
  detail::put_vlq(track, 0);
  track.insert(track.end(), {0xFF, 0x2F, 0x00});

  std::vector<std::uint8_t> out{'M', 'T', 'h', 'd'};
  detail::put_be(out, 6, 4);
  detail::put_be(out, 0, 2);
  detail::put_be(out, 1, 2);
  detail::put_be(out, ticks_per_quarter, 2);
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  detail::put_be(out, static_cast<std::uint32_t>(track.size()), 4);
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

/// Sustain-pedal offset extension (not applied by default ingestion).
///
/// A note whose raw offset falls while the pedal is down (value >= threshold)
/// is held until the pedal next drops below threshold, but never past the
/// next onset of the same pitch. Pedal events must be time-sorted.
inline NoteList extend_offsets_with_pedal(const NoteList& notes, std::span<const PedalEvent> pedal,
                                          int threshold = 64) {
  if (pedal.empty()) return notes;
  std::vector<NoteEvent> out(notes.begin(), notes.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double raw = out[i].offset_s;
    auto after = std::upper_bound(pedal.begin(), pedal.end(), raw,
                                  [](double t, const PedalEvent& e) { return t < e.time_s; });
    const bool down = after != pedal.begin() && std::prev(after)->value >= threshold;
    if (!down) continue;
    auto release = std::find_if(after, pedal.end(),
                                [&](const PedalEvent& e) { return e.value < threshold; });
    if (release == pedal.end()) continue;
    double extended = release->time_s;
    for (std::size_t k = i + 1; k < out.size(); ++k) {
      if (out[k].pitch == out[i].pitch && out[k].onset_s > out[i].onset_s) {
        extended = std::min(extended, out[k].onset_s);
        break;
      }
    }
    out[i].offset_s = std::max(raw, extended);
  }
  return NoteList(std::move(out));
}

inline std::vector<std::uint8_t> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_binary_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}

}  // namespace otroll

#endif  // OTROLL_MIDI_HPP
