#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "calfmon/behaviour_metrics.hpp"
#include "calfmon/cwa.hpp"
#include "calfmon/dataset.hpp"
#include "calfmon/error.hpp"
#include "calfmon/features.hpp"
#include "calfmon/json_util.hpp"
#include "calfmon/protocol.hpp"
#include "calfmon/rocket.hpp"
#include "calfmon/service/server.hpp"
#include "calfmon/synth.hpp"

namespace calfmon::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct SynthOpts {
  std::size_t calves = 30;
  double duration = 3600.0;
  std::uint64_t seed = 7;
  std::string out = "herd";
  std::string format = "cwa";
  std::string packing = "unpacked";
  double spread = 0.1;
};

struct ConvertOpts {
  std::string input;
  std::string output;
  bool regularize = false;
};

struct FeaturizeOpts {
  std::string herd;
  std::string recording;
  std::string calf_id;
  std::string out = "features";
  std::size_t kernels = 0;
  std::uint64_t seed = 7;
};

struct TrainOpts {
  std::string which;
  std::string herd = "herd";
  std::string out;
  std::string report;
  std::uint64_t seed = 7;
  std::size_t kernels = 10000;
  std::size_t selected = 11;
  std::size_t selection_trees = 300;
  std::size_t repeats = 10;
  std::vector<std::size_t> grid_trees{100, 300, 500};
  std::vector<std::string> grid_depth{"none", "10", "20"};
  std::vector<std::size_t> grid_leaf{1, 5, 10};
  std::vector<double> alphas;
  bool json_out = false;
};

struct EvaluateOpts {
  std::string model;
  std::string herd = "herd";
  std::vector<std::string> calves;
  bool json_out = false;
};

struct PredictOpts {
  std::string recording;
  std::string model1 = "model1.cwml";
  std::string model2 = "model2.cwml";
  std::string calf_id;
  std::string output;
};

struct ReportOpts {
  std::string timeline;
  std::string granularity = "hour";
  std::string from;
  std::string to;
  std::string utc_offset = "+00:00";
  std::string calf_id;
  bool json_out = false;
};

struct ServeOpts {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data = "calfmon-data";
  std::string models = "models";
  std::string static_dir;
  std::size_t workers = 0;
  std::string utc_offset = "+00:00";
};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(9) << v;
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") return;
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error(Errc::io_error, "cannot write " + path);
}

// Re-raises with the offending file named in the message.
template <class F>
auto in_file(const std::string& path, F f) {
  try {
    return f();
  } catch (const Error& e) {
    std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (colon != std::string::npos) msg = msg.substr(colon + 2);
    throw Error(e.code(), path + ": " + msg, e.line());
  }
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

void print_report(const eval::EvalReport& r, std::ostream& out) {
  out << "model " << r.model << "\n";
  out << "test_windows " << r.test_windows << "\n";
  out << "balanced_accuracy " << fmt(r.scores.balanced_accuracy) << "\n";
  out << "class sensitivity specificity precision support\n";
  for (const auto& c : r.scores.per_class) {
    out << c.name << ' ' << fmt(c.sensitivity) << ' ' << fmt(c.specificity) << ' ' << fmt(c.precision)
        << (c.precision_undefined ? "*" : "") << ' ' << c.support << "\n";
  }
  out << "confusion (rows true, columns predicted)\n";
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    out << r.classes[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < r.confusion.cols(); ++k) out << ' ' << r.confusion(i, k);
    out << "\n";
  }
  if (!r.chosen_params.empty()) out << "chosen " << r.chosen_params << "\n";
}

std::vector<learn::ForestParams> forest_grid(const TrainOpts& o) {
  std::vector<learn::ForestParams> grid;
  for (std::size_t trees : o.grid_trees) {
    for (const auto& depth : o.grid_depth) {
      for (std::size_t leaf : o.grid_leaf) {
        learn::ForestParams p;
        p.n_trees = trees;
        if (depth != "none" && depth != "unbounded") {
          std::size_t d = 0;
          const auto [ptr, ec] = std::from_chars(depth.data(), depth.data() + depth.size(), d);
          if (ec != std::errc() || ptr != depth.data() + depth.size()) {
            throw Error(Errc::bad_config, "max depth must be a number or 'none': " + depth);
          }
          p.max_depth = d;
        }
        p.min_samples_leaf = leaf;
        p.validate();
        grid.push_back(p);
      }
    }
  }
  return grid;
}

int do_convert(const ConvertOpts& o, std::ostream& out) {
  std::ifstream probe(o.input, std::ios::binary);
  if (!probe) throw Error(Errc::io_error, "cannot open " + o.input);
  Recording rec = in_file(o.input, [&] { return cwa::parse_cwa(probe); });
  if (o.regularize) rec = regularize(rec);
  if (o.output.empty() || o.output == "-") {
    csv::write_csv(rec, out);
  } else {
    write_text(o.output, csv::write_csv(rec));
  }
  return kExitOk;
}

int do_synth(const SynthOpts& o, std::ostream& out, std::ostream& err) {
  if (o.format != "cwa" && o.format != "csv") throw Error(Errc::bad_config, "format must be cwa or csv");
  if (o.packing != "unpacked" && o.packing != "packed") throw Error(Errc::bad_config, "packing must be packed or unpacked");
  const auto herd = synth::generate_herd(o.calves, o.duration, o.seed, synth::default_profiles(), o.spread);
  data::write_herd(o.out, herd, o.format == "cwa" ? data::FileFormat::cwa : data::FileFormat::csv, o.seed, o.duration,
                   o.packing == "packed" ? cwa::Packing::packed : cwa::Packing::unpacked);
  err << "wrote " << herd.size() << " calves to " << o.out << "\n";
  out << o.out << "\n";
  return kExitOk;
}

int do_featurize(const FeaturizeOpts& o, std::ostream& out, std::ostream& err) {
  if (o.herd.empty() == o.recording.empty()) throw Error(Errc::bad_config, "give exactly one of --herd or --recording");
  fs::create_directories(o.out);
  std::vector<signal::Window> windows;
  std::vector<std::string> labels_rows;
  if (!o.herd.empty()) {
    for (const auto& src : data::herd_sources(o.herd)) {
      for (auto& lw : src.load()) {
        labels_rows.push_back(src.calf_id + "," + format_iso8601(lw.window.start_t) + "," +
                              std::string(to_string(lw.activity)) + "," + std::string(to_string(lw.behaviour)));
        windows.push_back(std::move(lw.window));
      }
    }
  } else {
    const auto rec = data::load_recording(o.recording);
    const std::string id = o.calf_id.empty() ? stem_of(o.recording) : o.calf_id;
    windows = signal::segment(signal::derive_channels(rec), signal::Purpose::inference, id);
  }
  std::vector<std::string> ids;
  std::vector<Timestamp> starts;
  for (const auto& w : windows) {
    ids.push_back(w.calf_id);
    starts.push_back(w.start_t);
  }
  const auto& names = features::feature_names();
  {
    std::ofstream f(fs::path(o.out) / "handcrafted.csv");
    features::write_feature_csv(f, std::vector<std::string>(names.begin(), names.end()), ids, starts,
                                features::handcrafted_matrix(windows));
  }
  if (!labels_rows.empty()) {
    std::ofstream f(fs::path(o.out) / "labels.csv");
    f << "calf_id,start_t,activity,behaviour\n";
    for (const auto& row : labels_rows) f << row << "\n";
  }
  if (o.kernels > 0) {
    const auto ks = rocket::sample_kernels(o.seed, o.kernels, signal::kWindowLength, signal::kChannels);
    std::vector<std::string> cols;
    for (std::size_t k = 0; k < o.kernels; ++k) {
      cols.push_back("k" + std::to_string(k) + "_ppv");
      cols.push_back("k" + std::to_string(k) + "_max");
    }
    std::ofstream f(fs::path(o.out) / "rocket.csv");
    features::write_feature_csv(f, cols, ids, starts, rocket::transform(windows, ks));
  }
  err << "featurized " << windows.size() << " windows\n";
  out << o.out << "\n";
  return kExitOk;
}

int do_train(const TrainOpts& o, std::ostream& out, std::ostream& err) {
  protocol::TrainConfig cfg;
  cfg.seed = o.seed;
  cfg.kernels = o.kernels;
  cfg.selected_features = o.selected;
  cfg.selection_trees = o.selection_trees;
  cfg.repeats = o.repeats;
  cfg.forest_grid = forest_grid(o);
  if (!o.alphas.empty()) cfg.ridge_grid = {eval::RidgeParams{o.alphas}};
  const auto sources = data::herd_sources(o.herd);
  err << "training " << o.which << " on " << sources.size() << " calves\n";
  const auto result = o.which == "model1" ? protocol::train_model1(sources, cfg) : protocol::train_model2(sources, cfg);
  const std::string model_path = o.out.empty() ? o.which + ".cwml" : o.out;
  learn::save_model_file(result.model, model_path);
  const std::string report = eval::to_json(result.report);
  write_text(o.report, report + "\n");
  if (o.json_out) {
    out << report << "\n";
  } else {
    print_report(result.report, out);
  }
  err << "model written to " << model_path << "\n";
  return kExitOk;
}

int do_evaluate(const EvaluateOpts& o, std::ostream& out) {
  const auto model = learn::load_model_file(o.model);
  const auto report = protocol::evaluate(model, data::herd_sources(o.herd), o.calves);
  if (o.json_out) {
    out << eval::to_json(report) << "\n";
  } else {
    print_report(report, out);
  }
  return kExitOk;
}

int do_predict(const PredictOpts& o, std::ostream& out, std::ostream& err) {
  const auto m1 = learn::load_model_file(o.model1);
  const auto m2 = learn::load_model_file(o.model2);
  const auto rec = in_file(o.recording, [&] { return data::load_recording(o.recording); });
  const std::string id = o.calf_id.empty() ? stem_of(o.recording) : o.calf_id;
  const auto tl = protocol::predict(rec, m1, m2, id);
  if (o.output.empty() || o.output == "-") {
    metrics::write_timeline_csv(tl, out);
  } else {
    std::ostringstream s;
    metrics::write_timeline_csv(tl, s);
    write_text(o.output, s.str());
  }
  err << "classified " << tl.entries.size() << " windows\n";
  return kExitOk;
}

void print_tally_row(std::ostream& out, const std::string& label, const metrics::Tally& t) {
  const auto r = metrics::activity_ratio(t);
  const auto p = metrics::behaviour_proportions(t);
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("-"); };
  out << label << ' ' << fmt(static_cast<double>(t.coverage_ms()) / 1000.0) << ' ' << opt(r.proportion_active) << ' '
      << opt(r.ratio);
  for (std::size_t b = 0; b < 4; ++b) out << ' ' << (p ? fmt((*p)[b]) : std::string("-"));
  out << "\n";
}

int do_report(const ReportOpts& o, std::ostream& out) {
  std::ifstream in(o.timeline);
  if (!in) throw Error(Errc::io_error, "cannot open " + o.timeline);
  const auto tl = in_file(o.timeline, [&] {
    return metrics::read_timeline_csv(in, o.calf_id.empty() ? stem_of(o.timeline) : o.calf_id);
  });
  if (tl.entries.empty() && (o.from.empty() || o.to.empty())) throw Error(Errc::no_data, "timeline is empty");
  const Timestamp from = o.from.empty() ? floor_hour(tl.entries.front().start) : parse_iso8601(o.from);
  const Timestamp to = o.to.empty() ? ceil_hour(tl.entries.back().end) : parse_iso8601(o.to);
  const int offset = parse_utc_offset(o.utc_offset);
  if (o.json_out) {
    out << metrics::metrics_json(tl, from, to, o.granularity, offset) << "\n";
    return kExitOk;
  }
  out << "span coverage_s proportion_active ratio_active_inactive lying running drinking_milk other\n";
  if (o.granularity == "hour") {
    for (const auto& b : metrics::hourly_buckets(tl, from, to, offset)) print_tally_row(out, format_iso8601(b.bucket_start), b.tally);
  } else if (o.granularity == "summary") {
    print_tally_row(out, "summary", metrics::period_summary(tl, from, to));
  } else if (o.granularity == "day_night") {
    const auto dn = metrics::day_night_split(tl, from, to, offset);
    print_tally_row(out, "day", dn.day);
    print_tally_row(out, "night", dn.night);
  } else {
    throw Error(Errc::bad_config, "granularity must be hour, summary or day_night");
  }
  return kExitOk;
}

service::Server* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int do_serve(const ServeOpts& o, std::ostream& out) {
  service::ServerConfig cfg;
  cfg.data_dir = o.data;
  cfg.models_dir = o.models;
  cfg.static_dir = o.static_dir;
  cfg.workers = o.workers;
  cfg.utc_offset_min = parse_utc_offset(o.utc_offset);
  service::Server server(cfg);
  const int port = server.bind(o.host, o.port);
  out << "listening on http://" << o.host << ':' << port << "\n" << std::flush;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calf accelerometer monitoring: conversion, training, prediction and metrics", "calfmon"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key=value config file with one [section] per subcommand");

  ConvertOpts convert;
  auto* c = app.add_subcommand("convert", "Decode a .cwa file to timestamp,x,y,z CSV");
  c->add_option("input", convert.input, "Input .cwa file")->required();
  c->add_option("-o,--output", convert.output, "Output CSV (stdout when omitted)");
  c->add_flag("--regularize", convert.regularize, "Resample onto the 25 Hz grid");

  SynthOpts synth_o;
  auto* s = app.add_subcommand("synth", "Generate a labeled synthetic herd");
  s->add_option("--calves", synth_o.calves, "Number of calves (>= 10)");
  s->add_option("--duration", synth_o.duration, "Seconds per calf (>= 60)");
  s->add_option("--seed", synth_o.seed, "Master seed");
  s->add_option("-o,--out", synth_o.out, "Output herd directory");
  s->add_option("--format", synth_o.format, "Recording format: cwa or csv");
  s->add_option("--packing", synth_o.packing, "CWA payload: unpacked or packed");
  s->add_option("--spread", synth_o.spread, "Per-calf parameter jitter");

  FeaturizeOpts feat;
  auto* f = app.add_subcommand("featurize", "Write hand-crafted (and optionally ROCKET) feature CSVs");
  f->add_option("--herd", feat.herd, "Herd directory (labeled training windows)");
  f->add_option("--recording", feat.recording, "Single recording (inference windows)");
  f->add_option("--calf-id", feat.calf_id, "Calf id for --recording");
  f->add_option("-o,--out", feat.out, "Output directory");
  f->add_option("--kernels", feat.kernels, "ROCKET kernels (0 skips rocket.csv)");
  f->add_option("--seed", feat.seed, "Kernel seed");

  TrainOpts train;
  auto* t = app.add_subcommand("train", "Train and evaluate model1 (activity) or model2 (behaviour)");
  t->add_option("model", train.which, "model1 or model2")->required()->check(CLI::IsMember({"model1", "model2"}));
  t->add_option("--herd", train.herd, "Herd directory");
  t->add_option("-o,--out", train.out, "Model artifact path (default <model>.cwml)");
  t->add_option("--report", train.report, "Write the evaluation report JSON here");
  t->add_option("--seed", train.seed, "Seed for split, kernels, selection and forests");
  t->add_option("--kernels", train.kernels, "ROCKET kernel count (model2)");
  t->add_option("--selected-features", train.selected, "Hand-crafted features kept (model1)");
  t->add_option("--selection-trees", train.selection_trees, "Trees in the selection forest (model1)");
  t->add_option("--repeats", train.repeats, "Repeated validation draws");
  t->add_option("--grid-trees", train.grid_trees, "Forest grid: tree counts");
  t->add_option("--grid-depth", train.grid_depth, "Forest grid: depths ('none' is unbounded)");
  t->add_option("--grid-leaf", train.grid_leaf, "Forest grid: minimum leaf sizes");
  t->add_option("--alphas", train.alphas, "Ridge alpha grid (model2)");
  t->add_flag("--json", train.json_out, "Print the report as JSON");

  EvaluateOpts ev;
  auto* e = app.add_subcommand("evaluate", "Score a model on held-out calves");
  e->add_option("--model", ev.model, "Model artifact")->required();
  e->add_option("--herd", ev.herd, "Herd directory");
  e->add_option("--calves", ev.calves, "Calves to score (default: the model's test calves)")->delimiter(',');
  e->add_flag("--json", ev.json_out, "Print the report as JSON");

  PredictOpts pr;
  auto* p = app.add_subcommand("predict", "Classify a recording into a timeline CSV");
  p->add_option("recording", pr.recording, "Recording (.cwa or .csv)")->required();
  p->add_option("--model1", pr.model1, "Activity model");
  p->add_option("--model2", pr.model2, "Behaviour model");
  p->add_option("--calf-id", pr.calf_id, "Calf id (default: file stem)");
  p->add_option("-o,--output", pr.output, "Output CSV (stdout when omitted)");

  ReportOpts rep;
  auto* r = app.add_subcommand("report", "Behaviour metrics from a timeline CSV");
  r->add_option("timeline", rep.timeline, "Timeline CSV")->required();
  r->add_option("--granularity", rep.granularity, "hour, summary or day_night")
      ->check(CLI::IsMember({"hour", "summary", "day_night"}));
  r->add_option("--from", rep.from, "Range start (ISO-8601)");
  r->add_option("--to", rep.to, "Range end (ISO-8601)");
  r->add_option("--utc-offset", rep.utc_offset, "Local clock offset, e.g. +01:00");
  r->add_option("--calf-id", rep.calf_id, "Calf id (default: file stem)");
  r->add_flag("--json", rep.json_out, "Print metrics JSON");

  ServeOpts sv;
  auto* v = app.add_subcommand("serve", "Run the HTTP service");
  v->add_option("--host", sv.host, "Bind address");
  v->add_option("--port", sv.port, "Port (0 picks a free one)");
  v->add_option("--data", sv.data, "Store directory");
  v->add_option("--models", sv.models, "Model directory");
  v->add_option("--static", sv.static_dir, "Dashboard bundle served at /");
  v->add_option("--workers", sv.workers, "Job workers (0: one per CPU)");
  v->add_option("--utc-offset", sv.utc_offset, "Local clock offset for day/night and hours");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (c->parsed()) return do_convert(convert, out);
    if (s->parsed()) return do_synth(synth_o, out, err);
    if (f->parsed()) return do_featurize(feat, out, err);
    if (t->parsed()) return do_train(train, out, err);
    if (e->parsed()) return do_evaluate(ev, out);
    if (p->parsed()) return do_predict(pr, out, err);
    if (r->parsed()) return do_report(rep, out);
    if (v->parsed()) return do_serve(sv, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what();
    if (ex.line()) err << " (line " << *ex.line() << ")";
    err << "\n";
    return kExitData;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace calfmon::cli
