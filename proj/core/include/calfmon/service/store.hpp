#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "calfmon/behaviour_metrics.hpp"
#include "calfmon/recording.hpp"

// Directory store:
//   manifest.json                         committed state (atomic replace)
//   calves/<id>/recordings/<rid>.cwa      regularized samples, unpacked CWA
//   calves/<id>/timelines/<rid>.csv       prediction timeline per recording
namespace calfmon::service {

struct CalfMeta {
  std::string calf_id;
  std::string breed;
  std::string birth_date;  // YYYY-MM-DD
  std::string coat_colour;
  std::string pen;

  friend bool operator==(const CalfMeta&, const CalfMeta&) = default;
};

/// Throws Error(validation_failed) for a missing id, an id unsafe as a
/// directory name, or an invalid calendar date.
void validate(const CalfMeta& meta);

struct RecordingInfo {
  std::string recording_id;
  std::string calf_id;
  std::string filename;
  std::size_t samples = 0;
  std::size_t segments = 0;
  std::size_t rejected_blocks = 0;
  std::string first_t;
  std::string last_t;
  bool converted = false;
  bool has_timeline = false;
  std::string model1_version;
  std::string model2_version;
};

enum class JobKind { convert, predict };
enum class JobState { queued, running, done, failed };

std::string_view to_string(JobKind k) noexcept;
std::string_view to_string(JobState s) noexcept;

struct JobInfo {
  std::string job_id;
  JobKind kind = JobKind::convert;
  JobState state = JobState::queued;
  std::string calf_id;
  std::string recording_id;
  std::string error;
  std::string created;
  std::string finished;
};

/// All mutations go through one mutex and end in an atomic manifest rewrite,
/// so readers only ever see committed state.
class Store {
 public:
  /// Opens or creates the store. Jobs left queued or running by a previous
  /// process are marked failed.
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  void upsert_calf(const CalfMeta& meta);
  std::optional<CalfMeta> calf(const std::string& id) const;
  std::vector<CalfMeta> calves() const;

  /// Reserves an id for a new recording of `calf_id`; UnknownCalf otherwise.
  std::string new_recording(const std::string& calf_id, const std::string& filename);
  /// Persists the samples and marks the recording as converted.
  void save_recording(const std::string& recording_id, const Recording& rec);
  std::optional<RecordingInfo> recording(const std::string& id) const;
  std::vector<RecordingInfo> recordings_of(const std::string& calf_id) const;
  /// Only converted recordings can be loaded; RecordingMissing otherwise.
  Recording load_recording(const std::string& recording_id) const;

  /// Replaces the recording's timeline atomically.
  void save_timeline(const std::string& recording_id, const metrics::PredictionTimeline& tl);
  /// Union of the calf's recording timelines, ordered, with overlaps dropped.
  metrics::PredictionTimeline timeline(const std::string& calf_id) const;

  std::string create_job(JobKind kind, const std::string& calf_id, const std::string& recording_id);
  /// Enforces queued -> running -> done | failed.
  void transition(const std::string& job_id, JobState next, const std::string& error = {});
  std::optional<JobInfo> job(const std::string& id) const;
  std::vector<JobInfo> jobs() const;

 private:
  struct State {
    std::vector<CalfMeta> calves;
    std::vector<RecordingInfo> recordings;
    std::vector<JobInfo> jobs;
    std::uint64_t next_recording = 1;
    std::uint64_t next_job = 1;
  };

  void load();
  void commit_locked();
  RecordingInfo* find_recording_locked(const std::string& id);
  std::filesystem::path recording_path(const RecordingInfo& r) const;
  std::filesystem::path timeline_path(const RecordingInfo& r) const;

  std::filesystem::path root_;
  mutable std::mutex mu_;
  State state_;
};

/// Writes `bytes` to a temporary sibling and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

}  // namespace calfmon::service
