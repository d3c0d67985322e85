#include "calfmon/cwa.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <istream>
#include <ostream>
#include <sstream>

#include "calfmon/bytes.hpp"
#include "calfmon/error.hpp"

namespace calfmon {

std::vector<Segment> segments_of(const Recording& rec) {
  if (!rec.segments.empty()) return rec.segments;
  if (rec.samples.empty()) return {};
  return {Segment{0, rec.samples.size()}};
}

}  // namespace calfmon

namespace calfmon::cwa {

using bytes::load_u16;
using bytes::load_u32;
using bytes::store_u16;
using bytes::store_u32;

namespace {

struct DecodedBlock {
  double t0_s = 0.0;  // time of sample 0, seconds since epoch
  double rate_hz = 25.0;
  std::vector<Sample> samples;  // timestamps assigned later
};

std::int32_t sign_extend10(std::uint32_t v) noexcept {
  return (v & 0x200u) ? static_cast<std::int32_t>(v) - 0x400 : static_cast<std::int32_t>(v);
}

void decode_payload(const std::uint8_t* block, std::uint8_t mode, std::size_t count,
                    std::vector<Sample>& out) {
  const std::uint8_t* p = block + 30;
  out.resize(count);
  if (mode == kModeUnpacked) {
    for (std::size_t i = 0; i < count; ++i, p += 6) {
      out[i].x = static_cast<std::int16_t>(load_u16(p)) * kUnitG;
      out[i].y = static_cast<std::int16_t>(load_u16(p + 2)) * kUnitG;
      out[i].z = static_cast<std::int16_t>(load_u16(p + 4)) * kUnitG;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i, p += 4) {
      const std::uint32_t w = load_u32(p);
      const int e = static_cast<int>(w >> 30);
      out[i].x = sign_extend10(w & 0x3ffu) * (1 << e) * kUnitG;
      out[i].y = sign_extend10((w >> 10) & 0x3ffu) * (1 << e) * kUnitG;
      out[i].z = sign_extend10((w >> 20) & 0x3ffu) * (1 << e) * kUnitG;
    }
  }
}

class BlockDecoder {
 public:
  void header(const std::uint8_t* h, std::size_t available) {
    if (available < kHeaderSize || h[0] != 'M' || h[1] != 'D' || load_u16(h + 2) != kHeaderSize - 4) {
      throw Error(Errc::malformed_header, "missing or malformed 'MD' header block");
    }
    rec_.source = Source::cwa;
    rec_.device.device_id = load_u16(h + 5);
    rec_.device.session_id = load_u32(h + 7);
    rec_.device.rate_code = h[36];
    rec_.device.range_g = range_from_code(h[36]);
    rec_.rate_hz = rate_from_code(h[36]);
  }

  void block(const std::uint8_t* b) {
    if (b[0] != 'A' || b[1] != 'X') {
      ++rec_.skipped_blocks;
      return;
    }
    if (word_sum({b, kBlockSize}) != 0 || load_u16(b + 2) != kBlockSize - 4) {
      ++rec_.rejected_blocks;
      return;
    }
    const std::uint8_t mode = b[25];
    if (mode != kModeUnpacked && mode != kModePacked) {
      throw Error(Errc::unsupported_mode, "axes/packing byte 0x" + hex(mode));
    }
    const std::size_t count = load_u16(b + 28);
    const std::size_t capacity =
        samples_per_block(mode == kModeUnpacked ? Packing::unpacked : Packing::packed);
    if (count > capacity) {
      ++rec_.rejected_blocks;
      return;
    }
    if (count == 0) return;

    DecodedBlock d;
    d.rate_hz = rate_from_code(b[24]);
    const std::uint16_t frac = load_u16(b + 4);
    const std::int16_t offset = static_cast<std::int16_t>(load_u16(b + 26));
    d.t0_s = static_cast<double>(unpack_datetime(load_u32(b + 14)));
    if (frac & 0x8000u) d.t0_s += static_cast<double>(frac & 0x7fffu) / 32768.0;
    d.t0_s -= offset / d.rate_hz;
    decode_payload(b, mode, count, d.samples);
    blocks_.push_back(std::move(d));
  }

  Recording finish() {
    // Sample times are interpolated between consecutive block starts when the
    // next block follows within 1.5 times the nominal block span.
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      auto& blk = blocks_[b];
      const double n = static_cast<double>(blk.samples.size());
      double dt = 1.0 / blk.rate_hz;
      if (b + 1 < blocks_.size()) {
        const double span = blocks_[b + 1].t0_s - blk.t0_s;
        if (span > 0.0 && span < 1.5 * n / blk.rate_hz) dt = span / n;
      }
      for (std::size_t i = 0; i < blk.samples.size(); ++i) {
        const double t = blk.t0_s + static_cast<double>(i) * dt;
        auto s = blk.samples[i];
        s.t = from_epoch_ms(static_cast<std::int64_t>(std::llround(t * 1000.0)));
        if (!rec_.samples.empty() && s.t <= rec_.samples.back().t) continue;
        rec_.samples.push_back(s);
      }
    }
    if (rec_.samples.empty()) {
      throw Error(Errc::empty_recording, "no valid data blocks (" +
                                             std::to_string(rec_.rejected_blocks) + " rejected)");
    }
    return std::move(rec_);
  }

 private:
  static std::string hex(std::uint8_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    return {digits[v >> 4], digits[v & 15]};
  }

  Recording rec_;
  std::vector<DecodedBlock> blocks_;
};

std::uint16_t fraction_bits(std::int64_t ms) {
  const std::int64_t sub = ((ms % 1000) + 1000) % 1000;
  return static_cast<std::uint16_t>(0x8000u | static_cast<std::uint16_t>(std::lround(static_cast<double>(sub) * 32.768)));
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::uint32_t encode_packed(const Sample& s) {
  const double m = std::max({std::abs(s.x), std::abs(s.y), std::abs(s.z)}) / kUnitG;
  int e = 0;
  while (e < 3 && m > 511.0 * (1 << e)) ++e;
  const double scale = 1.0 / (kUnitG * (1 << e));
  auto field = [&](double v) {
    auto q = static_cast<std::int32_t>(std::lround(v * scale));
    q = std::clamp(q, -512, 511);
    return static_cast<std::uint32_t>(q) & 0x3ffu;
  };
  return field(s.x) | (field(s.y) << 10) | (field(s.z) << 20) | (static_cast<std::uint32_t>(e) << 30);
}

void check_range(const Sample& s, Packing mode) {
  const double lo = mode == Packing::unpacked ? -32768 * kUnitG : -512 * 8 * kUnitG;
  const double hi = mode == Packing::unpacked ? 32767 * kUnitG : 511 * 8 * kUnitG;
  for (double v : {s.x, s.y, s.z}) {
    if (!std::isfinite(v) || v < lo - kUnitG / 2 || v > hi + kUnitG / 2) {
      throw Error(Errc::range_exceeded,
                  "sample value " + std::to_string(v) + " g outside representable range");
    }
  }
}

}  // namespace

std::uint16_t word_sum(std::span<const std::uint8_t> block) noexcept {
  std::uint16_t sum = 0;
  for (std::size_t i = 0; i + 1 < block.size(); i += 2) sum = static_cast<std::uint16_t>(sum + load_u16(&block[i]));
  return sum;
}

std::uint32_t pack_datetime(std::int64_t epoch_seconds) {
  using namespace std::chrono;
  const sys_seconds t{seconds{epoch_seconds}};
  const auto dp = floor<days>(t);
  const year_month_day ymd{dp};
  const hh_mm_ss tod{t - dp};
  const int yr = static_cast<int>(ymd.year()) - 2000;
  if (yr < 0 || yr > 63) throw Error(Errc::range_exceeded, "timestamp outside 2000-2063");
  return (static_cast<std::uint32_t>(yr) << 26) | (static_cast<unsigned>(ymd.month()) << 22) |
         (static_cast<unsigned>(ymd.day()) << 17) | (static_cast<std::uint32_t>(tod.hours().count()) << 12) |
         (static_cast<std::uint32_t>(tod.minutes().count()) << 6) |
         static_cast<std::uint32_t>(tod.seconds().count());
}

std::int64_t unpack_datetime(std::uint32_t packed) {
  using namespace std::chrono;
  const year_month_day ymd{year{2000 + static_cast<int>(packed >> 26)}, month{(packed >> 22) & 0x0f},
                           day{(packed >> 17) & 0x1f}};
  const auto t = sys_days{ymd} + hours{(packed >> 12) & 0x1f} + minutes{(packed >> 6) & 0x3f} +
                 seconds{packed & 0x3f};
  return duration_cast<seconds>(t.time_since_epoch()).count();
}

double rate_from_code(std::uint8_t code) noexcept {
  return 3200.0 / static_cast<double>(1 << (15 - (code & 0x0f)));
}

double range_from_code(std::uint8_t code) noexcept {
  return static_cast<double>(16 >> (code >> 6));
}

std::uint8_t make_rate_code(double rate_hz, double range_g) {
  int rate_bits = -1;
  for (int c = 0; c <= 15; ++c) {
    if (std::abs(rate_from_code(static_cast<std::uint8_t>(c)) - rate_hz) < 1e-9) rate_bits = c;
  }
  int range_bits = -1;
  for (int r = 0; r <= 3; ++r) {
    if ((16 >> r) == static_cast<int>(range_g) && std::abs(range_g - (16 >> r)) < 1e-9) range_bits = r;
  }
  if (rate_bits < 0 || range_bits < 0) {
    throw Error(Errc::bad_config, "no device rate code for " + std::to_string(rate_hz) + " Hz, " +
                                      std::to_string(range_g) + " g");
  }
  return static_cast<std::uint8_t>((range_bits << 6) | rate_bits);
}

Recording parse_cwa(std::span<const std::uint8_t> data) {
  BlockDecoder dec;
  dec.header(data.data(), data.size());
  for (std::size_t off = kHeaderSize; off + kBlockSize <= data.size(); off += kBlockSize) {
    dec.block(data.data() + off);
  }
  return dec.finish();
}

Recording parse_cwa(std::istream& in) {
  BlockDecoder dec;
  std::vector<std::uint8_t> buf(kHeaderSize);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(kHeaderSize));
  dec.header(buf.data(), static_cast<std::size_t>(in.gcount()));
  buf.resize(kBlockSize);
  while (in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(kBlockSize))) {
    dec.block(buf.data());
  }
  return dec.finish();
}

Recording parse_cwa_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  return parse_cwa(in);
}

std::vector<std::uint8_t> write_cwa(const Recording& rec, Packing mode) {
  const std::uint8_t rate_code = make_rate_code(rec.rate_hz, rec.device.range_g);
  for (const auto& s : rec.samples) check_range(s, mode);

  // A block holds an evenly spaced run, so a new block starts wherever the
  // sample spacing departs from the nominal period.
  const std::size_t per_block = samples_per_block(mode);
  const double period_ms = 1000.0 / rec.rate_hz;
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    const bool full = !starts.empty() && i - starts.back() == per_block;
    const bool jump = i > 0 && std::abs(static_cast<double>(to_epoch_ms(rec.samples[i].t) -
                                                            to_epoch_ms(rec.samples[i - 1].t)) -
                                        period_ms) > 0.5 + 1e-9 * period_ms;
    if (starts.empty() || full || jump) starts.push_back(i);
  }
  const std::size_t n_blocks = starts.size();
  std::vector<std::uint8_t> out(kHeaderSize + n_blocks * kBlockSize, 0);

  std::uint8_t* h = out.data();
  h[0] = 'M';
  h[1] = 'D';
  store_u16(h + 2, kHeaderSize - 4);
  h[4] = 0x17;
  store_u16(h + 5, rec.device.device_id);
  store_u32(h + 7, rec.device.session_id);
  if (!rec.samples.empty()) {
    store_u32(h + 13, pack_datetime(floor_div(to_epoch_ms(rec.samples.front().t), 1000)));
    store_u32(h + 17, pack_datetime(floor_div(to_epoch_ms(rec.samples.back().t), 1000)));
  }
  h[36] = rate_code;
  h[41] = 1;

  for (std::size_t b = 0; b < n_blocks; ++b) {
    std::uint8_t* blk = out.data() + kHeaderSize + b * kBlockSize;
    const std::size_t first = starts[b];
    const std::size_t count = (b + 1 < n_blocks ? starts[b + 1] : rec.samples.size()) - first;
    const std::int64_t t0 = to_epoch_ms(rec.samples[first].t);

    blk[0] = 'A';
    blk[1] = 'X';
    store_u16(blk + 2, kBlockSize - 4);
    store_u16(blk + 4, fraction_bits(t0));
    store_u32(blk + 6, rec.device.session_id);
    store_u32(blk + 10, static_cast<std::uint32_t>(b));
    store_u32(blk + 14, pack_datetime(floor_div(t0, 1000)));
    blk[24] = rate_code;
    blk[25] = mode == Packing::unpacked ? kModeUnpacked : kModePacked;
    store_u16(blk + 26, 0);
    store_u16(blk + 28, static_cast<std::uint16_t>(count));

    std::uint8_t* p = blk + 30;
    for (std::size_t i = 0; i < count; ++i) {
      const Sample& s = rec.samples[first + i];
      if (mode == Packing::unpacked) {
        for (double v : {s.x, s.y, s.z}) {
          const auto q = static_cast<std::int16_t>(std::clamp<long>(std::lround(v / kUnitG), -32768, 32767));
          store_u16(p, static_cast<std::uint16_t>(q));
          p += 2;
        }
      } else {
        store_u32(p, encode_packed(s));
        p += 4;
      }
    }
    const std::uint16_t partial = word_sum({blk, kBlockSize - 2});
    store_u16(blk + kBlockSize - 2, static_cast<std::uint16_t>(0x10000u - partial));
  }
  return out;
}

}  // namespace calfmon::cwa

namespace calfmon::csv {

namespace {

std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  return s;
}

bool parse_number(std::string_view s, double& out) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Recording parse_csv(std::istream& in) {
  Recording rec;
  rec.source = Source::csv;
  std::string line;
  if (!std::getline(in, line) || trim_cr(line) != "timestamp,x,y,z") {
    throw Error(Errc::bad_header, "expected header 'timestamp,x,y,z'", 1);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view row = trim_cr(line);
    if (row.empty()) continue;
    std::string_view fields[4];
    std::size_t nf = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= row.size() && nf < 5; ++i) {
      if (i == row.size() || row[i] == ',') {
        if (nf < 4) fields[nf] = row.substr(start, i - start);
        ++nf;
        start = i + 1;
      }
    }
    Sample s;
    bool ok = nf == 4 && parse_number(fields[1], s.x) && parse_number(fields[2], s.y) &&
              parse_number(fields[3], s.z);
    if (ok) {
      try {
        s.t = parse_iso8601(fields[0]);
      } catch (const Error&) {
        ok = false;
      }
    }
    if (!ok) throw Error(Errc::bad_row, "malformed row at line " + std::to_string(lineno), lineno);
    rec.samples.push_back(s);
  }
  return rec;
}

Recording parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_csv(in);
}

void write_csv(const Recording& rec, std::ostream& out) {
  out << "timestamp,x,y,z\n";
  for (const auto& s : rec.samples) {
    out << format_iso8601(s.t) << ',' << format_double(s.x) << ',' << format_double(s.y) << ','
        << format_double(s.z) << '\n';
  }
}

std::string write_csv(const Recording& rec) {
  std::ostringstream out;
  write_csv(rec, out);
  return out.str();
}

}  // namespace calfmon::csv

namespace calfmon {

Recording regularize(const Recording& rec, double target_hz) {
  if (rec.samples.size() < 2) throw Error(Errc::too_short, "regularize needs at least two samples");
  if (!(target_hz > 0.0)) throw Error(Errc::bad_config, "target rate must be positive");

  // Strictly increasing copy of the input times.
  std::vector<const Sample*> in;
  in.reserve(rec.samples.size());
  for (const auto& s : rec.samples) {
    if (in.empty() || s.t > in.back()->t) in.push_back(&s);
  }
  if (in.size() < 2) throw Error(Errc::too_short, "regularize needs at least two distinct timestamps");

  const double step_ms = 1000.0 / target_hz;
  const std::int64_t gap_ms = static_cast<std::int64_t>(kGapThresholdSeconds * 1000.0);
  const std::int64_t first = to_epoch_ms(in.front()->t);
  const std::int64_t last = to_epoch_ms(in.back()->t);

  Recording out;
  out.rate_hz = target_hz;
  out.device = rec.device;
  out.source = rec.source;
  out.rejected_blocks = rec.rejected_blocks;
  out.skipped_blocks = rec.skipped_blocks;
  out.samples.reserve(static_cast<std::size_t>((last - first) / step_ms) + 2);

  std::size_t j = 0;  // in[j].t <= grid time < in[j+1].t
  bool in_gap = false;
  std::size_t seg_begin = 0;
  for (std::int64_t k = 0;; ++k) {
    const std::int64_t g = first + static_cast<std::int64_t>(std::llround(static_cast<double>(k) * step_ms));
    if (g > last) break;
    while (j + 1 < in.size() && to_epoch_ms(in[j + 1]->t) <= g) ++j;
    const std::int64_t ta = to_epoch_ms(in[j]->t);
    const Sample* pick = in[j];
    if (j + 1 < in.size()) {
      const std::int64_t tb = to_epoch_ms(in[j + 1]->t);
      if (ta != g && tb - ta > gap_ms) {
        if (!in_gap && out.samples.size() > seg_begin) out.segments.push_back({seg_begin, out.samples.size()});
        in_gap = true;
        continue;
      }
      if (tb - g < g - ta) pick = in[j + 1];
    }
    if (in_gap) {
      seg_begin = out.samples.size();
      in_gap = false;
    }
    out.samples.push_back(Sample{from_epoch_ms(g), pick->x, pick->y, pick->z});
  }
  if (out.samples.size() > seg_begin) out.segments.push_back({seg_begin, out.samples.size()});
  return out;
}

}  // namespace calfmon
