#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "hapsim/events.hpp"

namespace hapsim {

// Wire format, little to say and byte-exact:
//
//   A5 | seq | count | count * (channel, value_hi, value_lo) | crc
//
// value is the current fraction quantized to 16 bits, big-endian.  count
// is 0..9 and channels are unique, ascending.  crc is CRC-8 (poly 0x07,
// init 0, MSB first) over seq through the last entry byte.  A count-0
// frame is a heartbeat.
inline constexpr std::uint8_t kSyncByte = 0xA5;
inline constexpr int kFrameOverhead = 4;  // sync + seq + count + crc
inline constexpr int kEntryBytes = 3;
inline constexpr int kDefaultDeltaRaw = 8;        // raw units, ~1.2e-4 fraction
inline constexpr double kHeartbeatPeriod = 0.1;   // s

std::uint8_t crc8(const std::uint8_t* data, std::size_t len);

// Fraction -> raw with ties rounding down, so 0.5 -> 0x7FFF.
std::uint16_t quantize_fraction(double fraction);
double dequantize(std::uint16_t raw);

struct ChannelShadow {
  std::array<std::uint16_t, kChannelCount> last{};
  std::array<bool, kChannelCount> sent{};
  int delta_threshold_raw = kDefaultDeltaRaw;

  // True when `raw` differs from the last transmitted value by more than
  // the threshold (or nothing was ever sent).
  bool differs(int channel, std::uint16_t raw) const {
    if (!sent[channel]) return true;
    const int d = static_cast<int>(raw) - static_cast<int>(last[channel]);
    return d > delta_threshold_raw || -d > delta_threshold_raw;
  }
};

// Encodes one frame carrying every update that clears the shadow's delta
// threshold; an empty change set yields a heartbeat.  The shadow records
// what was transmitted.  Throws ChannelOutOfRange and, for fractions
// outside [0, 1], OutOfRangeCurrent.
std::vector<std::uint8_t> encode_frame(const std::map<int, double>& updates,
                                       ChannelShadow& shadow, std::uint8_t seq);

struct DecodedFrame {
  std::uint8_t seq = 0;
  std::map<int, std::uint16_t> raw;
  std::map<int, double> updates;  // dequantized view of raw
  std::size_t size = 0;           // bytes consumed
};

enum class DecodeErrorKind {
  BadSync,
  BadCount,
  TruncatedFrame,
  BadCrc,
  BadChannel,
  DuplicateChannel,
  TrailingBytes,  // strict single-frame decode only
};
const char* to_string(DecodeErrorKind k);

struct DecodeError {
  DecodeErrorKind kind = DecodeErrorKind::BadSync;
  std::size_t offset = 0;  // byte offset the error was noticed at
  std::string detail;
};

using DecodeResult = std::variant<DecodedFrame, DecodeError>;

// Strict inverse of encode_frame: the buffer must hold exactly one valid
// frame.  Any single-bit corruption of a valid frame is rejected, because
// a shortened count surfaces as TrailingBytes and a lengthened one as
// TruncatedFrame.
DecodeResult decode_frame(const std::uint8_t* data, std::size_t len);
DecodeResult decode_frame(const std::vector<std::uint8_t>& bytes);

// Incremental decoder for back-to-back frame streams.  Errors are data:
// after one, scanning resumes at the next 0xA5.  A trailing partial frame
// is reported as TruncatedFrame by finish().  Offsets count all bytes ever
// fed.  Note one inherent limit of a length-prefixed layout: a corrupted
// count byte can truncate a frame so that a stale byte lands in the crc
// position; with probability ~1/256 such a frame decodes as a shorter
// valid frame and only the leftover bytes raise errors.
class StreamDecoder {
 public:
  std::vector<DecodeResult> feed(const std::uint8_t* data, std::size_t len);
  std::vector<DecodeResult> feed(const std::vector<std::uint8_t>& bytes);
  std::vector<DecodeResult> finish();

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t base_offset_ = 0;  // stream offset of buf_[0]
  bool scanning_ = false;        // true while hunting for a sync byte
};

// Per-channel staircase rebuilt from decoded frames; seq gaps are recorded
// and reconstruction continues.
struct GapWarning {
  std::size_t frame_index = 0;
  std::uint8_t expected = 0;
  std::uint8_t got = 0;
  int missing = 0;  // frames skipped (mod-256 distance)
};

struct Reconstruction {
  std::array<double, kChannelCount> value{};
  std::array<bool, kChannelCount> seen{};
  std::vector<GapWarning> gaps;

  void apply(const DecodedFrame& frame);

 private:
  bool has_seq_ = false;
  std::uint8_t next_seq_ = 0;
  std::size_t frames_applied_ = 0;
};

// Synthesizer-side link: quantizes each tick's channel values, emits a
// frame when any channel clears the delta threshold, and otherwise emits
// heartbeats at kHeartbeatPeriod so the receiver can detect link loss.
class LinkSession {
 public:
  explicit LinkSession(int delta_threshold_raw = kDefaultDeltaRaw,
                       double heartbeat_period = kHeartbeatPeriod) {
    shadow_.delta_threshold_raw = delta_threshold_raw;
    heartbeat_period_ = heartbeat_period;
  }

  // Returns the frame to transmit at time t, or empty when nothing is due.
  std::vector<std::uint8_t> tick(double t,
                                 const std::array<double, kChannelCount>& values);

  const ChannelShadow& shadow() const { return shadow_; }
  std::uint8_t next_seq() const { return next_seq_; }

 private:
  ChannelShadow shadow_;
  double heartbeat_period_ = kHeartbeatPeriod;
  double last_tx_ = 0.0;
  bool ever_tx_ = false;
  std::uint8_t next_seq_ = 0;
};

// Binary capture of a frame stream with receive timestamps (timestamps
// live in the capture file, not in the wire format):
//
//   "HCAP" | u8 version=1 | records of (f64le time_s, u16le len, bytes)
void write_capture(const std::string& path,
                   const std::vector<std::pair<double, std::vector<std::uint8_t>>>& frames);
std::vector<std::pair<double, std::vector<std::uint8_t>>> read_capture(
    const std::string& path);

}  // namespace hapsim
