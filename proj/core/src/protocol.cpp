#include "hapsim/protocol.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "hapsim/errors.hpp"

namespace hapsim {

std::uint8_t crc8(const std::uint8_t* data, std::size_t len) {
  std::uint8_t crc = 0x00;
  for (std::size_t i = 0; i < len; ++i) {
    crc ^= data[i];
    for (int bit = 0; bit < 8; ++bit)
      crc = (crc & 0x80) ? static_cast<std::uint8_t>((crc << 1) ^ 0x07)
                         : static_cast<std::uint8_t>(crc << 1);
  }
  return crc;
}

std::uint16_t quantize_fraction(double fraction) {
  if (fraction < 0.0 || fraction > 1.0)
    throw OutOfRangeCurrent("fraction " + std::to_string(fraction) + " outside [0, 1]");
  // Half-down rounding keeps 0.5 at 0x7FFF.
  const double scaled = std::ceil(fraction * 65535.0 - 0.5);
  return static_cast<std::uint16_t>(scaled < 0.0 ? 0.0 : scaled);
}

double dequantize(std::uint16_t raw) { return raw / 65535.0; }

std::vector<std::uint8_t> encode_frame(const std::map<int, double>& updates,
                                       ChannelShadow& shadow, std::uint8_t seq) {
  std::vector<std::pair<int, std::uint16_t>> entries;
  for (const auto& [channel, fraction] : updates) {
    if (channel < 0 || channel >= kChannelCount)
      throw ChannelOutOfRange("channel " + std::to_string(channel) + " outside [0, " +
                              std::to_string(kChannelCount) + ")");
    const std::uint16_t raw = quantize_fraction(fraction);
    if (shadow.differs(channel, raw)) entries.emplace_back(channel, raw);
  }

  std::vector<std::uint8_t> frame;
  frame.reserve(kFrameOverhead + kEntryBytes * entries.size());
  frame.push_back(kSyncByte);
  frame.push_back(seq);
  frame.push_back(static_cast<std::uint8_t>(entries.size()));
  for (const auto& [channel, raw] : entries) {
    frame.push_back(static_cast<std::uint8_t>(channel));
    frame.push_back(static_cast<std::uint8_t>(raw >> 8));
    frame.push_back(static_cast<std::uint8_t>(raw & 0xFF));
    shadow.last[channel] = raw;
    shadow.sent[channel] = true;
  }
  frame.push_back(crc8(frame.data() + 1, frame.size() - 1));
  return frame;
}

const char* to_string(DecodeErrorKind k) {
  switch (k) {
    case DecodeErrorKind::BadSync: return "bad_sync";
    case DecodeErrorKind::BadCount: return "bad_count";
    case DecodeErrorKind::TruncatedFrame: return "truncated_frame";
    case DecodeErrorKind::BadCrc: return "bad_crc";
    case DecodeErrorKind::BadChannel: return "bad_channel";
    case DecodeErrorKind::DuplicateChannel: return "duplicate_channel";
    case DecodeErrorKind::TrailingBytes: return "trailing_bytes";
  }
  return "?";
}

namespace {

// Parses one frame at the front of [data, data+len).  `exact` additionally
// requires the frame to consume the whole buffer.
DecodeResult parse_front(const std::uint8_t* data, std::size_t len, bool exact,
                         std::size_t offset_bias) {
  if (len < 1 || data[0] != kSyncByte)
    return DecodeError{DecodeErrorKind::BadSync, offset_bias,
                       len < 1 ? "empty buffer" : "first byte is not 0xA5"};
  if (len < 3)
    return DecodeError{DecodeErrorKind::TruncatedFrame, offset_bias + len,
                       "frame header cut short"};

  const int count = data[2];
  if (count > kChannelCount)
    return DecodeError{DecodeErrorKind::BadCount, offset_bias + 2,
                       "count " + std::to_string(count) + " exceeds " +
                           std::to_string(kChannelCount)};
  const std::size_t frame_len = kFrameOverhead + kEntryBytes * count;
  if (len < frame_len)
    return DecodeError{DecodeErrorKind::TruncatedFrame, offset_bias + len,
                       "need " + std::to_string(frame_len) + " bytes, have " +
                           std::to_string(len)};
  if (exact && len > frame_len)
    return DecodeError{DecodeErrorKind::TrailingBytes, offset_bias + frame_len,
                       std::to_string(len - frame_len) + " bytes after the frame"};

  const std::uint8_t expect = data[frame_len - 1];
  const std::uint8_t got = crc8(data + 1, frame_len - 2);
  if (expect != got)
    return DecodeError{DecodeErrorKind::BadCrc, offset_bias + frame_len - 1,
                       "crc mismatch"};

  DecodedFrame frame;
  frame.seq = data[1];
  frame.size = frame_len;
  for (int e = 0; e < count; ++e) {
    const std::uint8_t* entry = data + 3 + kEntryBytes * e;
    const int channel = entry[0];
    if (channel >= kChannelCount)
      return DecodeError{DecodeErrorKind::BadChannel,
                         offset_bias + static_cast<std::size_t>(entry - data),
                         "channel " + std::to_string(channel)};
    const std::uint16_t raw = static_cast<std::uint16_t>((entry[1] << 8) | entry[2]);
    if (!frame.raw.emplace(channel, raw).second)
      return DecodeError{DecodeErrorKind::DuplicateChannel,
                         offset_bias + static_cast<std::size_t>(entry - data),
                         "channel " + std::to_string(channel) + " repeated"};
    frame.updates[channel] = dequantize(raw);
  }
  return frame;
}

}  // namespace

DecodeResult decode_frame(const std::uint8_t* data, std::size_t len) {
  return parse_front(data, len, /*exact=*/true, 0);
}

DecodeResult decode_frame(const std::vector<std::uint8_t>& bytes) {
  return decode_frame(bytes.data(), bytes.size());
}

std::vector<DecodeResult> StreamDecoder::feed(const std::uint8_t* data, std::size_t len) {
  buf_.insert(buf_.end(), data, data + len);

  std::vector<DecodeResult> out;
  std::size_t pos = 0;
  while (pos < buf_.size()) {
    if (buf_[pos] != kSyncByte) {
      // One error per garbage run, then hunt for the next sync byte.
      if (!scanning_) {
        out.push_back(DecodeError{DecodeErrorKind::BadSync, base_offset_ + pos,
                                  "expected 0xA5"});
        scanning_ = true;
      }
      ++pos;
      continue;
    }
    scanning_ = false;

    DecodeResult r =
        parse_front(buf_.data() + pos, buf_.size() - pos, /*exact=*/false,
                    base_offset_ + pos);
    if (const auto* frame = std::get_if<DecodedFrame>(&r)) {
      pos += frame->size;
      out.push_back(std::move(r));
      continue;
    }
    const DecodeError& err = std::get<DecodeError>(r);
    if (err.kind == DecodeErrorKind::TruncatedFrame) break;  // wait for more bytes
    out.push_back(r);
    ++pos;  // resync: skip the sync byte of the bad frame, scan on
    scanning_ = true;
  }

  buf_.erase(buf_.begin(), buf_.begin() + pos);
  base_offset_ += pos;
  return out;
}

std::vector<DecodeResult> StreamDecoder::feed(const std::vector<std::uint8_t>& bytes) {
  return feed(bytes.data(), bytes.size());
}

std::vector<DecodeResult> StreamDecoder::finish() {
  std::vector<DecodeResult> out;
  if (!buf_.empty()) {
    out.push_back(DecodeError{DecodeErrorKind::TruncatedFrame,
                              base_offset_ + buf_.size(),
                              std::to_string(buf_.size()) + " byte partial frame"});
    buf_.clear();
  }
  scanning_ = false;
  return out;
}

void Reconstruction::apply(const DecodedFrame& frame) {
  if (has_seq_ && frame.seq != next_seq_) {
    const int missing = (256 + frame.seq - next_seq_) % 256;
    gaps.push_back({frames_applied_, next_seq_, frame.seq, missing});
  }
  next_seq_ = static_cast<std::uint8_t>(frame.seq + 1);
  has_seq_ = true;
  ++frames_applied_;

  for (const auto& [channel, raw] : frame.raw) {
    value[channel] = dequantize(raw);
    seen[channel] = true;
  }
}

std::vector<std::uint8_t> LinkSession::tick(
    double t, const std::array<double, kChannelCount>& values) {
  std::map<int, double> updates;
  for (int ch = 0; ch < kChannelCount; ++ch) {
    const std::uint16_t raw = quantize_fraction(values[ch]);
    if (shadow_.differs(ch, raw)) updates[ch] = values[ch];
  }

  const bool heartbeat_due = !ever_tx_ || t - last_tx_ >= heartbeat_period_;
  if (updates.empty() && !heartbeat_due) return {};

  std::vector<std::uint8_t> frame = encode_frame(updates, shadow_, next_seq_);
  ++next_seq_;
  last_tx_ = t;
  ever_tx_ = true;
  return frame;
}

void write_capture(
    const std::string& path,
    const std::vector<std::pair<double, std::vector<std::uint8_t>>>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write capture file '" + path + "'");
  out.write("HCAP", 4);
  const char version = 1;
  out.write(&version, 1);
  for (const auto& [time, bytes] : frames) {
    double t = time;
    std::uint16_t len = static_cast<std::uint16_t>(bytes.size());
    out.write(reinterpret_cast<const char*>(&t), sizeof t);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw IoError("failed writing capture file '" + path + "'");
}

std::vector<std::pair<double, std::vector<std::uint8_t>>> read_capture(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open capture file '" + path + "'");
  char magic[5] = {};
  in.read(magic, 5);
  if (!in || std::memcmp(magic, "HCAP\x01", 5) != 0)
    throw ParseError("'" + path + "' is not a version-1 capture file");

  std::vector<std::pair<double, std::vector<std::uint8_t>>> frames;
  while (true) {
    double t = 0.0;
    std::uint16_t len = 0;
    in.read(reinterpret_cast<char*>(&t), sizeof t);
    if (in.gcount() == 0 && in.eof()) break;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in) throw ParseError("capture file '" + path + "' record header cut short");
    std::vector<std::uint8_t> bytes(len);
    in.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!in) throw ParseError("capture file '" + path + "' record body cut short");
    frames.emplace_back(t, std::move(bytes));
  }
  return frames;
}

}  // namespace hapsim
