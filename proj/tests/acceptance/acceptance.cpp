// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
//
//   calfmon_acceptance                 all criteria
//   calfmon_acceptance --criterion 6   just one (repeatable)

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "calfmon/behaviour_metrics.hpp"
#include "calfmon/cwa.hpp"
#include "calfmon/error.hpp"
#include "calfmon/evaluation.hpp"
#include "calfmon/forest.hpp"
#include "calfmon/model_io.hpp"
#include "calfmon/ridge.hpp"
#include "calfmon/rocket.hpp"
#include "calfmon/signal.hpp"
#include "commands.hpp"
#include "test_support.hpp"

namespace calfmon::acceptance {
namespace {

namespace fs = std::filesystem;

// Collects failed checks; a criterion passes when none failed.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ = failed_ || !ok;
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return !failed_; }
  std::string summary() const {
    std::string out;
    for (const auto& n : notes_) out += (out.empty() ? "" : "; ") + n;
    for (const auto& f : failures_) out += (out.empty() ? "" : "; ") + ("failed: " + f);
    return out;
  }

 private:
  bool failed_ = false;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

void cwa_round_trip(Check& c) {
  Rng rng(1001);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t corruptions = 0;
  for (int i = 0; i < 100; ++i) {
    const auto rec = testing::random_recording(rng, 200 + rng.uniform_int(2000), rng.uniform(0.5, 7.9));
    const auto back = cwa::parse_cwa(cwa::write_cwa(rec, cwa::Packing::unpacked));
    c.expect(back.samples == rec.samples, "unpacked round trip " + std::to_string(i));

    const auto packed = cwa::parse_cwa(cwa::write_cwa(rec, cwa::Packing::packed));
    bool within = packed.samples.size() == rec.samples.size();
    for (std::size_t k = 0; within && k < rec.samples.size(); ++k) {
      const auto& a = rec.samples[k];
      const auto& b = packed.samples[k];
      // A packed word's step is 2^exponent / 256 g, chosen per sample.
      const double step = std::exp2(std::max(0.0, std::ceil(std::log2(
                              std::max({std::abs(a.x), std::abs(a.y), std::abs(a.z)}) * 256.0 / 511.0)))) / 256.0;
      within = a.t == b.t && std::abs(a.x - b.x) <= step + 1e-12 && std::abs(a.y - b.y) <= step + 1e-12 &&
               std::abs(a.z - b.z) <= step + 1e-12;
    }
    c.expect(within, "packed within one step " + std::to_string(i));

    auto bytes = cwa::write_cwa(rec, cwa::Packing::unpacked);
    const std::size_t blocks = (bytes.size() - cwa::kHeaderSize) / cwa::kBlockSize;
    const std::size_t block = rng.uniform_int(blocks);
    const std::size_t offset = cwa::kHeaderSize + block * cwa::kBlockSize + rng.uniform_int(cwa::kBlockSize);
    bytes[offset] ^= static_cast<std::uint8_t>(1 + rng.uniform_int(255));
    const auto corrupt = cwa::parse_cwa(bytes);
    const std::size_t in_block = std::min<std::size_t>(80, rec.samples.size() - block * 80);
    c.expect(corrupt.samples.size() == rec.samples.size() - in_block,
             "corrupt block " + std::to_string(block) + " of recording " + std::to_string(i) + " rejected");
    ++corruptions;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(secs < 10.0, "runtime under 10 s");
  c.note("100 recordings, " + std::to_string(corruptions) + " corruptions, " + num(secs) + " s");
}

void signal_invariants(Check& c) {
  Rng rng(1002);
  double worst = 0.0;
  std::size_t windows = 0;
  while (windows < 10000) {
    const auto rec = testing::random_recording(rng, 75 * 20, rng.uniform(0.1, 7.9));
    const auto ds = signal::derive_channels(rec);
    for (const auto& w : signal::segment(ds, signal::Purpose::inference)) {
      const auto odba = w.channel(static_cast<std::size_t>(signal::Channel::odba));
      const auto vedba = w.channel(static_cast<std::size_t>(signal::Channel::vedba));
      for (std::size_t i = 0; i < signal::kWindowLength; ++i) {
        worst = std::max({worst, vedba[i] - odba[i], odba[i] - std::sqrt(3.0) * vedba[i]});
      }
      ++windows;
    }
  }
  c.expect(worst <= 1e-9, "VeDBA <= ODBA <= sqrt(3) VeDBA (worst excess " + num(worst) + ")");
  bool zero = true;
  for (int i = 0; i < 50; ++i) {
    auto rec = testing::random_recording(rng, 300);
    const double x = std::round(rng.uniform(-2, 2) * 256) / 256;
    const double y = std::round(rng.uniform(-2, 2) * 256) / 256;
    const double z = std::round(rng.uniform(-2, 2) * 256) / 256;
    for (auto& s : rec.samples) s.x = x, s.y = y, s.z = z;
    const auto ds = signal::derive_channels(rec);
    for (double v : ds[signal::Channel::odba]) zero = zero && v == 0.0;
    for (double v : ds[signal::Channel::vedba]) zero = zero && v == 0.0;
  }
  c.expect(zero, "constant input gives exactly zero ODBA and VeDBA");
  c.note(std::to_string(windows) + " windows");
}

void rocket_oracle(Check& c) {
  Rng rng(1003);
  const auto ks = rocket::sample_kernels(77, 20);
  double worst = 0.0;
  bool ppv_ok = true;
  for (int w = 0; w < 50; ++w) {
    const auto win = testing::random_window(rng, rng.uniform(0.1, 3.0));
    for (const auto& k : ks.kernels) {
      std::vector<double> s(win.channel(static_cast<std::size_t>(k.channel)).begin(),
                            win.channel(static_cast<std::size_t>(k.channel)).end());
      double mean = 0, var = 0;
      for (double v : s) mean += v / 75.0;
      for (double v : s) var += (v - mean) * (v - mean) / 75.0;
      for (auto& v : s) v = (v - mean) / std::sqrt(var);
      // Naive loop over output positions of the padded, dilated kernel.
      const int L = 75, span = (k.length - 1) * k.dilation;
      int positive = 0, count = 0;
      double best = -INFINITY;
      for (int i = -k.padding; i + span < L + k.padding; ++i) {
        double acc = k.bias;
        for (int j = 0; j < k.length; ++j) {
          const int idx = i + j * k.dilation;
          acc += (idx >= 0 && idx < L) ? k.weights[static_cast<std::size_t>(j)] * s[static_cast<std::size_t>(idx)] : 0.0;
        }
        positive += acc > 0;
        best = std::max(best, acc);
        ++count;
      }
      const auto got = rocket::apply_kernel(win, k);
      worst = std::max({worst, std::abs(got.ppv - static_cast<double>(positive) / count), std::abs(got.max - best)});
      ppv_ok = ppv_ok && got.ppv >= 0.0 && got.ppv <= 1.0;
    }
  }
  c.expect(worst <= 1e-9, "PPV/max match the naive convolution (worst " + num(worst) + ")");
  c.expect(ppv_ok, "PPV within [0, 1]");
  c.expect(rocket::sample_kernels(77, 20) == ks, "same seed gives identical kernels");
  bytes::Writer a, b;
  rocket::write(a, ks);
  rocket::write(b, rocket::sample_kernels(77, 20));
  c.expect(a.buffer() == b.buffer(), "same seed gives bit-identical kernel bytes");
  c.note("20 kernels x 50 windows, worst deviation " + num(worst));
}

void ridge_oracle(Check& c) {
  Rng rng(1004);
  double worst = 0.0;
  int same_alpha = 0;
  for (int inst = 0; inst < 25; ++inst) {
    const auto n = static_cast<Eigen::Index>(12 + rng.uniform_int(19));
    const auto p = static_cast<Eigen::Index>(1 + rng.uniform_int(10));
    const int n_classes = 2 + static_cast<int>(rng.uniform_int(3));
    Eigen::MatrixXd X(n, p);
    std::vector<int> y;
    for (Eigen::Index i = 0; i < n; ++i) {
      y.push_back(static_cast<int>(i % n_classes));
      for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.normal() + 0.8 * y.back() * (j % 2 ? 1 : -1);
    }
    std::vector<std::string> classes;
    for (int k = 0; k < n_classes; ++k) classes.push_back("c" + std::to_string(k));
    const auto m = learn::fit_ridge_cv(X, y, classes);
    const auto Z = learn::standardize_inputs(m, X);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Constant(n, n_classes, -1.0);
    for (Eigen::Index i = 0; i < n; ++i) Y(i, y[static_cast<std::size_t>(i)]) = 1.0;
    std::vector<double> curve;
    for (double alpha : m.alphas) {
      double total = 0;
      for (Eigen::Index out = 0; out < n; ++out) {
        Eigen::MatrixXd Zi(n - 1, Z.cols()), Yi(n - 1, n_classes);
        for (Eigen::Index r = 0, o = 0; r < n; ++r) {
          if (r == out) continue;
          Zi.row(o) = Z.row(r);
          Yi.row(o++) = Y.row(r);
        }
        const Eigen::RowVectorXd zm = Zi.colwise().mean(), ym = Yi.colwise().mean();
        const Eigen::MatrixXd Zc = Zi.rowwise() - zm;
        Eigen::MatrixXd G = Zc.transpose() * Zc;
        G.diagonal().array() += alpha;
        const Eigen::MatrixXd W = G.ldlt().solve(Zc.transpose() * (Yi.rowwise() - ym));
        total += (Y.row(out) - (ym + (Z.row(out) - zm) * W)).squaredNorm();
      }
      curve.push_back(total);
    }
    for (std::size_t a = 0; a < curve.size(); ++a) worst = std::max(worst, std::abs(m.loo_errors[a] - curve[a]) / curve[a]);
    const auto best = static_cast<std::size_t>(std::min_element(curve.begin(), curve.end()) - curve.begin());
    same_alpha += m.alphas[best] == m.alpha ? 1 : 0;
  }
  c.expect(worst <= 1e-6, "LOO curve matches hold-one-out refits (worst relative " + num(worst) + ")");
  c.expect(same_alpha == 25, "same alpha selected (" + std::to_string(same_alpha) + "/25)");
  c.note("25 instances, worst relative deviation " + num(worst));
}

void forest_sanity(Check& c) {
  Rng rng(1005);
  auto make = [&](Eigen::Index n) {
    Eigen::MatrixXd X(n, 5);
    std::vector<int> y;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < 5; ++j) X(i, j) = rng.normal();
      y.push_back(X(i, 0) > 0 ? 1 : 0);
    }
    return std::pair{X, y};
  };
  const auto [X, y] = make(500);
  const auto [Xt, yt] = make(500);
  learn::ForestParams p;
  p.n_trees = 100;
  const auto m = learn::fit_rf(X, y, {"neg", "pos"}, p, 5);
  const auto pred = learn::predict_rf(m, Xt).labels;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < yt.size(); ++i) hit += pred[i] == yt[i] ? 1 : 0;
  const double acc = static_cast<double>(hit) / static_cast<double>(yt.size());
  c.expect(acc >= 0.95, "held-out accuracy " + num(acc) + " >= 0.95");
  const auto again = learn::fit_rf(X, y, {"neg", "pos"}, p, 5);
  c.expect(learn::save_model(learn::ActivityModel{m, {}}) == learn::save_model(learn::ActivityModel{again, {}}),
           "same-seed forests serialize identically");
  c.note("held-out accuracy " + num(acc));
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void protocol_reproduction(Check& c) {
  const auto dir = testing::temp_dir("acceptance_protocol");
  const auto herd = (dir / "herd").string();
  const auto t0 = std::chrono::steady_clock::now();
  auto cli = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run_command(args, out, err);
    c.expect(code == 0, args[0] + " exited " + std::to_string(code) + ": " + err.str());
    return out.str();
  };
  cli({"synth", "--calves", "30", "--seed", "7", "--duration", "3600", "-o", herd});
  double ba[2] = {0, 0};
  for (int m = 0; m < 2; ++m) {
    const std::string which = m == 0 ? "model1" : "model2";
    const auto model = (dir / (which + ".cwml")).string();
    const auto report = (dir / (which + ".json")).string();
    cli({"train", which, "--herd", herd, "--seed", "7", "--kernels", "500", "-o", model, "--report", report, "--json"});
    if (!c.ok()) break;
    const auto j = nlohmann::json::parse(cli({"evaluate", "--model", model, "--herd", herd, "--json"}));
    ba[m] = j["balanced_accuracy"].get<double>();
    const auto trained = nlohmann::json::parse(read_file(report));
    c.expect(trained["split"]["test_calves"].size() == 6 && trained["split"]["train_calves"].size() == 24,
             which + " uses a 6/24 calf split");
    bool folds_ok = trained["split"]["folds"].size() == 10;
    for (const auto& f : trained["split"]["folds"]) folds_ok = folds_ok && f["validation"].size() == 5;
    c.expect(folds_ok, which + " uses 10 repeated 5/19 holdouts");
    c.expect(j["balanced_accuracy"] == trained["balanced_accuracy"], which + " evaluate agrees with train report");
    c.expect(m == 1 || trained["grid_trace"].size() == 27, "model1 searched the 27-point forest grid");
  }
  c.expect(ba[0] >= 0.90, "model 1 balanced accuracy " + num(ba[0]) + " >= 0.90");
  c.expect(ba[1] >= 0.80, "model 2 balanced accuracy " + num(ba[1]) + " >= 0.80");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.note("model 1 BA " + num(ba[0]) + ", model 2 BA " + num(ba[1]) + ", " + num(secs) + " s");
  fs::remove_all(dir);
}

const Timestamp kDay = parse_iso8601("2024-03-01T00:00:00Z");

Timestamp at_ms(std::int64_t ms) { return kDay + Millis{ms}; }

// Back-to-back 3 s windows from 00:00:01.5 to 23:59:58.5, so one window
// straddles every hour boundary by 1.5 s on each side. Activity and behaviour
// cycle with the window index.
metrics::PredictionTimeline day_fixture() {
  metrics::PredictionTimeline tl;
  tl.calf_id = "fixture";
  for (std::int64_t k = 0; k < 28799; ++k) {
    const std::int64_t s = 1500 + 3000 * k;
    tl.entries.push_back({at_ms(s), at_ms(s + 3000), k % 3 == 0 ? Activity::active : Activity::inactive,
                          kBehaviours[static_cast<std::size_t>(k % 4)]});
  }
  return tl;
}

// Milliseconds of `tl` inside [lo, hi) matching `keep`.
template <class Pred>
std::int64_t overlap_ms(const metrics::PredictionTimeline& tl, std::int64_t lo, std::int64_t hi, Pred keep) {
  std::int64_t total = 0;
  for (const auto& e : tl.entries) {
    if (!keep(e)) continue;
    const std::int64_t s = std::max(lo, to_epoch_ms(e.start) - to_epoch_ms(kDay));
    const std::int64_t t = std::min(hi, to_epoch_ms(e.end) - to_epoch_ms(kDay));
    total += std::max<std::int64_t>(0, t - s);
  }
  return total;
}

void metrics_fixtures(Check& c) {
  metrics::PredictionTimeline boundary;
  boundary.entries.push_back({at_ms(3'598'500), at_ms(3'601'500), Activity::active, Behaviour::running});
  const auto b = metrics::hourly_buckets(boundary, kDay, at_ms(7'200'000));
  c.expect(b.size() == 2 && b[0].tally.active_ms == 1500 && b[1].tally.active_ms == 1500 &&
               b[1].tally.behaviour_ms[1] == 1500,
           "window across the hour boundary splits 1.5 s / 1.5 s");

  const auto tl = day_fixture();
  const auto hours = metrics::hourly_buckets(tl, kDay, at_ms(86'400'000));
  c.expect(hours.size() == 24, "24 hourly buckets");
  metrics::Tally total;
  for (std::size_t h = 0; h < hours.size(); ++h) {
    const auto& t = hours[h].tally;
    const auto lo = static_cast<std::int64_t>(h) * 3'600'000;
    const auto hi = lo + 3'600'000;
    total += t;
    const std::int64_t want_cov = (h == 0 || h == 23) ? 3'598'500 : 3'600'000;
    c.expect(t.coverage_ms() == want_cov, "hour " + std::to_string(h) + " coverage");
    c.expect(hours[h].bucket_start == at_ms(lo), "hour " + std::to_string(h) + " start");
    c.expect(t.active_ms == overlap_ms(tl, lo, hi, [](const auto& e) { return e.activity == Activity::active; }),
             "hour " + std::to_string(h) + " active time");
    for (Behaviour beh : kBehaviours) {
      c.expect(t.behaviour_ms[static_cast<std::size_t>(beh)] ==
                   overlap_ms(tl, lo, hi, [&](const auto& e) { return e.behaviour == beh; }),
               "hour " + std::to_string(h) + " " + std::string(to_string(beh)) + " time");
    }
    const auto p = metrics::behaviour_proportions(t);
    double sum = 0;
    for (double v : *p) sum += v;
    c.expect(std::abs(sum - 1.0) <= 1e-12, "hour " + std::to_string(h) + " proportions sum to 1");
  }
  c.expect(total.coverage_ms() == 28799LL * 3000, "hourly coverage sums to the classified time");
  const auto dn = metrics::day_night_split(tl, kDay, at_ms(86'400'000));
  c.expect(dn.day.coverage_ms() + dn.night.coverage_ms() == total.coverage_ms(), "day + night = coverage");
  c.expect(dn.day.coverage_ms() == 14LL * 3'600'000, "day covers 06:00 to 20:00");
  c.expect(dn.day.active_ms == overlap_ms(tl, 6 * 3'600'000LL, 20 * 3'600'000LL,
                                          [](const auto& e) { return e.activity == Activity::active; }),
           "day active time");
  const auto summary = metrics::period_summary(tl, kDay, at_ms(86'400'000));
  c.expect(summary.active_ms == total.active_ms && summary.behaviour_ms == total.behaviour_ms,
           "summary equals the sum of hourly buckets");
  c.note("24 hourly buckets, " + std::to_string(total.coverage_ms()) + " ms classified");
}

void export_contract(Check& c) {
  const auto tl = day_fixture();
  const auto from = at_ms(5 * 3'600'000LL);
  const auto to = at_ms(9 * 3'600'000LL);
  std::ostringstream out;
  metrics::export_predictions_csv(tl, from, to, out);
  std::int64_t classified_ms = 0;
  std::set<std::int64_t> grid;
  for (const auto& e : tl.entries) {
    if (e.start < from || e.start >= to) continue;
    classified_ms += (e.end - e.start).count();
    for (std::int64_t t = to_epoch_ms(e.start); t < to_epoch_ms(e.end); t += 40) grid.insert(t);
  }
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  c.expect(line == "timestamp,activity,behaviour", "header");
  std::size_t rows = 0;
  bool round_trip = true, on_grid = true;
  while (std::getline(in, line)) {
    const std::string ts = line.substr(0, line.find(','));
    const auto t = parse_iso8601(ts);
    round_trip = round_trip && format_iso8601(t) == ts;
    on_grid = on_grid && grid.count(to_epoch_ms(t)) == 1;
    ++rows;
  }
  c.expect(static_cast<std::int64_t>(rows) * 1000 == classified_ms * 25, "rows = classified seconds x 25");
  c.expect(round_trip, "timestamps re-parse to the same text");
  c.expect(on_grid, "every timestamp is a 25 Hz sample of its window");
  c.note(std::to_string(rows) + " rows for " + std::to_string(classified_ms / 1000) + " s");
}

void evaluation_math(Check& c) {
  Eigen::MatrixXi cm(2, 2);
  cm << 40, 10, 20, 30;
  const auto s = eval::metrics(cm, std::vector<std::string>{"active", "inactive"});
  c.expect(std::abs(s.per_class[0].sensitivity - 0.8) < 1e-15 && std::abs(s.per_class[1].sensitivity - 0.6) < 1e-15,
           "sensitivities (0.8, 0.6)");
  c.expect(std::abs(s.balanced_accuracy - 0.7) < 1e-15, "balanced accuracy 0.7");
  Rng rng(1009);
  bool clean = true;
  for (int i = 0; i < 100; ++i) {
    std::vector<std::string> ids;
    const std::size_t n = 10 + rng.uniform_int(40);
    for (std::size_t k = 0; k < n; ++k) ids.push_back("c" + std::to_string(rng.uniform_int(1000)));
    std::set<std::string> unique(ids.begin(), ids.end());
    if (unique.size() < 10) continue;
    const auto plan = eval::make_split(ids, rng.next_u64());
    const std::set<std::string> test(plan.test_calves.begin(), plan.test_calves.end());
    for (const auto& id : plan.train_calves) clean = clean && !test.count(id);
    for (const auto& f : plan.folds) {
      const std::set<std::string> val(f.validation.begin(), f.validation.end());
      for (const auto& id : f.train) clean = clean && !val.count(id) && !test.count(id);
      for (const auto& id : f.validation) clean = clean && !test.count(id);
    }
    clean = clean && plan.test_calves.size() + plan.train_calves.size() == unique.size();
  }
  c.expect(clean, "no calf id shared across test, training and validation portions in 100 plans");
}

struct Criterion {
  int id;
  std::string name;
  std::function<void(Check&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "CWA round trip and corruption rejection", cwa_round_trip},
      {2, "signal invariants", signal_invariants},
      {3, "ROCKET against a naive convolution", rocket_oracle},
      {4, "ridge LOO against explicit refits", ridge_oracle},
      {5, "forest sanity", forest_sanity},
      {6, "protocol reproduction on a synthetic herd", protocol_reproduction},
      {7, "metrics fixtures", metrics_fixtures},
      {8, "export contract", export_contract},
      {9, "evaluation math and leakage", evaluation_math},
  };
  return all;
}

}  // namespace
}  // namespace calfmon::acceptance

int main(int argc, char** argv) {
  using namespace calfmon::acceptance;
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      wanted.insert(std::stoi(argv[++i]));
    } else {
      std::cerr << "usage: calfmon_acceptance [--criterion N]...\n";
      return 1;
    }
  }
  int failed = 0;
  for (const auto& cr : criteria()) {
    if (!wanted.empty() && !wanted.count(cr.id)) continue;
    Check check;
    try {
      cr.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const std::string detail = check.summary();
    std::cout << "criterion " << cr.id << " " << (check.ok() ? "PASS" : "FAIL") << "  " << cr.name
              << (detail.empty() ? "" : "  (" + detail + ")") << std::endl;
    failed += check.ok() ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
