#include "calfmon/signal.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "calfmon/error.hpp"

namespace calfmon::signal {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Centered moving mean over `span` samples, shrinking at the run edges. Each
// mean is accumulated as deviations from the centre sample, so a constant run
// reproduces its value exactly.
void moving_mean(std::span<const double> v, std::span<double> out, std::size_t span) {
  const std::size_t half = span / 2;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    double acc = 0.0;
    for (std::size_t j = lo; j < hi; ++j) acc += v[j] - v[i];
    out[i] = v[i] + acc / static_cast<double>(hi - lo);
  }
}

std::vector<std::string_view> split_csv(std::string_view row) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= row.size(); ++i) {
    if (i == row.size() || row[i] == ',') {
      out.push_back(row.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

std::vector<EthogramInterval> Ethogram::for_calf(std::string_view calf_id) const {
  std::vector<EthogramInterval> out;
  for (const auto& iv : intervals) {
    if (iv.calf_id == calf_id) out.push_back(iv);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  return out;
}

void validate(const Ethogram& eth) {
  std::map<std::string, std::vector<const EthogramInterval*>> by_calf;
  for (const auto& iv : eth.intervals) {
    if (iv.end <= iv.start) {
      throw Error(Errc::validation_failed, "ethogram interval with end <= start for calf " + iv.calf_id);
    }
    by_calf[iv.calf_id].push_back(&iv);
  }
  for (auto& [calf, ivs] : by_calf) {
    std::sort(ivs.begin(), ivs.end(), [](auto* a, auto* b) { return a->start < b->start; });
    for (std::size_t i = 1; i < ivs.size(); ++i) {
      if (ivs[i]->start < ivs[i - 1]->end) {
        throw Error(Errc::validation_failed, "overlapping ethogram intervals for calf " + calf);
      }
    }
  }
}

Ethogram read_ethogram_csv(std::istream& in) {
  Ethogram eth;
  std::string line;
  auto strip = [](std::string& s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  };
  if (!std::getline(in, line)) throw Error(Errc::bad_header, "empty ethogram", 1);
  strip(line);
  if (line != "calf_id,start,end,behaviour,activity") {
    throw Error(Errc::bad_header, "expected header 'calf_id,start,end,behaviour,activity'", 1);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    auto bad = [&] { return Error(Errc::bad_row, "malformed ethogram row at line " + std::to_string(lineno), lineno); };
    if (f.size() != 5) throw bad();
    EthogramInterval iv;
    iv.calf_id = std::string(f[0]);
    try {
      iv.start = parse_iso8601(f[1]);
      iv.end = parse_iso8601(f[2]);
    } catch (const Error&) {
      throw bad();
    }
    iv.label = std::string(f[3]);
    const auto act = parse_activity(f[4]);
    if (!act || iv.calf_id.empty() || iv.label.empty()) throw bad();
    iv.activity = *act;
    eth.intervals.push_back(std::move(iv));
  }
  validate(eth);
  return eth;
}

void write_ethogram_csv(const Ethogram& eth, std::ostream& out) {
  out << "calf_id,start,end,behaviour,activity\n";
  for (const auto& iv : eth.intervals) {
    out << iv.calf_id << ',' << format_iso8601(iv.start) << ',' << format_iso8601(iv.end) << ','
        << iv.label << ',' << to_string(iv.activity) << '\n';
  }
}

DerivedSeries derive_channels(const Recording& rec) {
  const std::size_t n = rec.samples.size();
  if (n < kWindowLength) {
    throw Error(Errc::too_short, "derive_channels needs at least " + std::to_string(kWindowLength) +
                                     " samples, got " + std::to_string(n));
  }
  DerivedSeries ds;
  ds.rate_hz = rec.rate_hz;
  ds.segments = segments_of(rec);
  ds.t.resize(n);
  for (auto& c : ds.channels) c.resize(n);
  auto& cx = ds.channels[0];
  auto& cy = ds.channels[1];
  auto& cz = ds.channels[2];
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = rec.samples[i];
    ds.t[i] = s.t;
    cx[i] = s.x;
    cy[i] = s.y;
    cz[i] = s.z;
  }

  std::vector<double> sx(n), sy(n), sz(n);
  for (const auto& seg : ds.segments) {
    const auto len = seg.size();
    moving_mean({cx.data() + seg.begin, len}, {sx.data() + seg.begin, len}, kStaticSpan);
    moving_mean({cy.data() + seg.begin, len}, {sy.data() + seg.begin, len}, kStaticSpan);
    moving_mean({cz.data() + seg.begin, len}, {sz.data() + seg.begin, len}, kStaticSpan);
  }

  auto& mag = ds.channels[3];
  auto& odba = ds.channels[4];
  auto& vedba = ds.channels[5];
  auto& pitch = ds.channels[6];
  auto& roll = ds.channels[7];
  for (std::size_t i = 0; i < n; ++i) {
    mag[i] = std::sqrt(cx[i] * cx[i] + cy[i] * cy[i] + cz[i] * cz[i]);
    const double dx = cx[i] - sx[i];
    const double dy = cy[i] - sy[i];
    const double dz = cz[i] - sz[i];
    odba[i] = std::abs(dx) + std::abs(dy) + std::abs(dz);
    vedba[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
    pitch[i] = std::atan2(sx[i], std::sqrt(sy[i] * sy[i] + sz[i] * sz[i])) * kRadToDeg;
    roll[i] = std::atan2(sy[i], sz[i]) * kRadToDeg;
  }
  return ds;
}

std::vector<std::size_t> window_starts(std::size_t length, Purpose purpose) {
  const std::size_t stride = purpose == Purpose::training ? kTrainingStride : kInferenceStride;
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + kWindowLength <= length; s += stride) starts.push_back(s);
  return starts;
}

std::vector<Window> segment(const DerivedSeries& ds, Purpose purpose, std::string_view calf_id) {
  std::vector<Window> out;
  for (const auto& seg : ds.segments) {
    for (std::size_t off : window_starts(seg.size(), purpose)) {
      const std::size_t begin = seg.begin + off;
      Window w;
      w.start_t = ds.t[begin];
      w.calf_id = std::string(calf_id);
      for (std::size_t c = 0; c < kChannels; ++c) {
        std::copy_n(ds.channels[c].begin() + static_cast<std::ptrdiff_t>(begin), kWindowLength,
                    w.values.begin() + static_cast<std::ptrdiff_t>(c * kWindowLength));
      }
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<LabeledWindow> align_labels(std::span<const Window> windows, const Ethogram& eth) {
  std::map<std::string, std::vector<EthogramInterval>, std::less<>> by_calf;
  for (const auto& iv : eth.intervals) by_calf[iv.calf_id].push_back(iv);
  for (auto& [calf, ivs] : by_calf) {
    std::sort(ivs.begin(), ivs.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  }

  std::vector<LabeledWindow> out;
  for (const auto& w : windows) {
    const auto it = by_calf.find(w.calf_id);
    if (it == by_calf.end()) continue;
    const auto& ivs = it->second;
    const Timestamp end = w.start_t + kWindowDuration;
    // Last interval starting at or before the window start.
    auto pos = std::upper_bound(ivs.begin(), ivs.end(), w.start_t,
                                [](Timestamp t, const EthogramInterval& iv) { return t < iv.start; });
    if (pos == ivs.begin()) continue;
    const auto& iv = *std::prev(pos);
    if (iv.start > w.start_t || iv.end < end) continue;
    LabeledWindow lw;
    lw.window = w;
    lw.behaviour = behaviour_from_label(iv.label);
    lw.activity = implied_activity(lw.behaviour).value_or(iv.activity);
    out.push_back(std::move(lw));
  }
  return out;
}

}  // namespace calfmon::signal
