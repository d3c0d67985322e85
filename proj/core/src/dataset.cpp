#include "calfmon/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "calfmon/error.hpp"

namespace calfmon::data {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
}

signal::Ethogram read_ethogram_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  return signal::read_ethogram_csv(in);
}

}  // namespace

void write_herd(const fs::path& dir, const std::vector<synth::CalfData>& herd, FileFormat format, std::uint64_t seed,
                double duration_s, cwa::Packing packing) {
  fs::create_directories(dir / "recordings");
  json manifest;
  manifest["seed"] = seed;
  manifest["duration_s"] = duration_s;
  manifest["format"] = format == FileFormat::cwa ? "cwa" : "csv";
  json calves = json::array();
  signal::Ethogram all;
  for (const auto& calf : herd) {
    const std::string ext = format == FileFormat::cwa ? ".cwa" : ".csv";
    const fs::path path = dir / "recordings" / (calf.calf_id + ext);
    if (format == FileFormat::cwa) {
      const auto bytes = cwa::write_cwa(calf.recording, packing);
      write_file(path, std::string(bytes.begin(), bytes.end()));
    } else {
      write_file(path, csv::write_csv(calf.recording));
    }
    calves.push_back(calf.calf_id);
    all.intervals.insert(all.intervals.end(), calf.ethogram.intervals.begin(), calf.ethogram.intervals.end());
  }
  manifest["calves"] = calves;
  std::ofstream eth(dir / "ethogram.csv");
  signal::write_ethogram_csv(all, eth);
  if (!eth) throw Error(Errc::io_error, "cannot write ethogram");
  write_file(dir / "herd.json", manifest.dump(2) + "\n");
}

Recording load_recording(const fs::path& path) {
  if (path.extension() == ".cwa") return regularize(cwa::parse_cwa_file(path.string()));
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  return regularize(csv::parse_csv(in));
}

std::vector<signal::LabeledWindow> labeled_windows(const Recording& rec, const signal::Ethogram& eth,
                                                   const std::string& calf_id) {
  const auto ds = signal::derive_channels(rec);
  const auto windows = signal::segment(ds, signal::Purpose::training, calf_id);
  return signal::align_labels(windows, eth);
}

std::vector<CalfSource> herd_sources(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::io_error, "not a herd directory: " + dir.string());
  auto eth = std::make_shared<const signal::Ethogram>(read_ethogram_file(dir / "ethogram.csv"));

  std::vector<std::pair<std::string, fs::path>> files;
  const fs::path manifest_path = dir / "herd.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    const json manifest = json::parse(in, nullptr, false);
    if (manifest.is_discarded() || !manifest.contains("calves")) {
      throw Error(Errc::parse_failed, "malformed herd manifest");
    }
    const std::string ext = manifest.value("format", std::string("cwa")) == "csv" ? ".csv" : ".cwa";
    for (const auto& id : manifest["calves"]) {
      const auto name = id.get<std::string>();
      files.emplace_back(name, dir / "recordings" / (name + ext));
    }
  } else {
    for (const auto& entry : fs::directory_iterator(dir / "recordings")) {
      const auto ext = entry.path().extension();
      if (ext == ".cwa" || ext == ".csv") files.emplace_back(entry.path().stem().string(), entry.path());
    }
    std::sort(files.begin(), files.end());
  }

  std::vector<CalfSource> out;
  for (auto& [id, path] : files) {
    out.push_back(CalfSource{id, [eth, id = id, path = path] { return labeled_windows(load_recording(path), *eth, id); }});
  }
  return out;
}

std::vector<CalfSource> memory_sources(const std::vector<synth::CalfData>& herd) {
  std::vector<CalfSource> out;
  for (const auto& calf : herd) {
    const auto* c = &calf;
    out.push_back(CalfSource{calf.calf_id, [c] { return labeled_windows(regularize(c->recording), c->ethogram, c->calf_id); }});
  }
  return out;
}

std::vector<std::string> class_names(Target t) {
  std::vector<std::string> out;
  if (t == Target::activity) {
    for (Activity a : kActivities) out.emplace_back(to_string(a));
  } else {
    for (Behaviour b : kBehaviours) out.emplace_back(to_string(b));
  }
  return out;
}

eval::LabeledData build_dataset(const std::vector<CalfSource>& sources, const Featurizer& featurize, Target target,
                                const std::set<std::string>& only) {
  eval::LabeledData out;
  out.classes = class_names(target);
  std::vector<Eigen::MatrixXd> blocks;
  Eigen::Index cols = -1;
  for (const auto& src : sources) {
    if (!only.empty() && !only.count(src.calf_id)) continue;
    const auto labeled = src.load();
    std::vector<signal::Window> windows;
    windows.reserve(labeled.size());
    for (const auto& lw : labeled) {
      windows.push_back(lw.window);
      out.y.push_back(target == Target::activity ? static_cast<int>(lw.activity) : static_cast<int>(lw.behaviour));
      out.calf.push_back(src.calf_id);
    }
    blocks.push_back(featurize(windows));
    if (blocks.back().rows() > 0) cols = blocks.back().cols();
  }
  out.X.resize(static_cast<Eigen::Index>(out.y.size()), std::max<Eigen::Index>(cols, 0));
  Eigen::Index row = 0;
  for (auto& b : blocks) {
    if (b.rows() == 0) continue;
    out.X.middleRows(row, b.rows()) = b;
    row += b.rows();
    b.resize(0, 0);
  }
  return out;
}

}  // namespace calfmon::data
