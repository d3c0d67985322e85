#pragma once

#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "calfmon/cwa.hpp"
#include "calfmon/evaluation.hpp"
#include "calfmon/signal.hpp"
#include "calfmon/synth.hpp"

// Herd directory layout:
//   herd.json              {"seed", "duration_s", "format", "calves": [...]}
//   recordings/<id>.cwa    (or .csv)
//   ethogram.csv           all calves
namespace calfmon::data {

enum class FileFormat { cwa, csv };

/// Writes recordings, the combined ethogram and the manifest.
void write_herd(const std::filesystem::path& dir, const std::vector<synth::CalfData>& herd, FileFormat format,
                std::uint64_t seed, double duration_s, cwa::Packing packing = cwa::Packing::unpacked);

/// Parses by extension (.cwa, otherwise CSV) and regularizes to 25 Hz.
Recording load_recording(const std::filesystem::path& path);

/// One calf whose labeled windows are produced on demand, so a herd never has
/// to sit in memory as raw windows.
struct CalfSource {
  std::string calf_id;
  std::function<std::vector<signal::LabeledWindow>()> load;
};

/// Sources for every recording listed in the herd manifest (or found under
/// recordings/ when there is no manifest), labeled by ethogram.csv.
std::vector<CalfSource> herd_sources(const std::filesystem::path& dir);

/// Sources over an in-memory herd; `herd` must outlive them.
std::vector<CalfSource> memory_sources(const std::vector<synth::CalfData>& herd);

/// Training windows of a regularized recording aligned to its ethogram.
std::vector<signal::LabeledWindow> labeled_windows(const Recording& rec, const signal::Ethogram& eth,
                                                   const std::string& calf_id);

enum class Target { activity, behaviour };

std::vector<std::string> class_names(Target t);

using Featurizer = std::function<Eigen::MatrixXd(std::span<const signal::Window>)>;

/// Feature rows of every window of the selected calves (all when `only` is
/// empty), in source order.
eval::LabeledData build_dataset(const std::vector<CalfSource>& sources, const Featurizer& featurize, Target target,
                                const std::set<std::string>& only = {});

}  // namespace calfmon::data
