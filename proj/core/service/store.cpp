#include "calfmon/service/store.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "calfmon/cwa.hpp"
#include "calfmon/error.hpp"

namespace calfmon::service {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kJobKinds[] = {"convert", "predict"};
constexpr std::string_view kJobStates[] = {"queued", "running", "done", "failed"};

std::string now_iso() {
  return format_iso8601(std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now()));
}

std::string numbered(std::string_view prefix, std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(n));
  return std::string(prefix) + buf;
}

template <std::size_t N>
std::size_t index_of(const std::string_view (&names)[N], const std::string& v) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == v) return i;
  }
  throw Error(Errc::parse_failed, "unknown value '" + v + "' in manifest");
}

json to_json(const CalfMeta& c) {
  return json{{"calf_id", c.calf_id}, {"breed", c.breed}, {"birth_date", c.birth_date},
              {"coat_colour", c.coat_colour}, {"pen", c.pen}};
}

CalfMeta calf_from(const json& j) {
  return CalfMeta{j.at("calf_id"), j.value("breed", ""), j.value("birth_date", ""), j.value("coat_colour", ""),
                  j.value("pen", "")};
}

json to_json(const RecordingInfo& r) {
  return json{{"recording_id", r.recording_id}, {"calf_id", r.calf_id},
              {"filename", r.filename},         {"samples", r.samples},
              {"segments", r.segments},         {"rejected_blocks", r.rejected_blocks},
              {"first_t", r.first_t},           {"last_t", r.last_t},
              {"converted", r.converted},       {"has_timeline", r.has_timeline},
              {"model1_version", r.model1_version}, {"model2_version", r.model2_version}};
}

RecordingInfo recording_from(const json& j) {
  RecordingInfo r;
  r.recording_id = j.at("recording_id");
  r.calf_id = j.at("calf_id");
  r.filename = j.value("filename", "");
  r.samples = j.value("samples", std::size_t{0});
  r.segments = j.value("segments", std::size_t{0});
  r.rejected_blocks = j.value("rejected_blocks", std::size_t{0});
  r.first_t = j.value("first_t", "");
  r.last_t = j.value("last_t", "");
  r.converted = j.value("converted", false);
  r.has_timeline = j.value("has_timeline", false);
  r.model1_version = j.value("model1_version", "");
  r.model2_version = j.value("model2_version", "");
  return r;
}

json to_json(const JobInfo& j) {
  return json{{"job_id", j.job_id},       {"kind", to_string(j.kind)},        {"state", to_string(j.state)},
              {"calf_id", j.calf_id},     {"recording_id", j.recording_id}, {"error", j.error},
              {"created", j.created},     {"finished", j.finished}};
}

JobInfo job_from(const json& j) {
  JobInfo out;
  out.job_id = j.at("job_id");
  out.kind = static_cast<JobKind>(index_of(kJobKinds, j.at("kind")));
  out.state = static_cast<JobState>(index_of(kJobStates, j.at("state")));
  out.calf_id = j.value("calf_id", "");
  out.recording_id = j.value("recording_id", "");
  out.error = j.value("error", "");
  out.created = j.value("created", "");
  out.finished = j.value("finished", "");
  return out;
}

bool safe_id(const std::string& id) {
  if (id.empty() || id.size() > 64 || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
  });
}

}  // namespace

std::string_view to_string(JobKind k) noexcept { return kJobKinds[static_cast<std::size_t>(k)]; }
std::string_view to_string(JobState s) noexcept { return kJobStates[static_cast<std::size_t>(s)]; }

void validate(const CalfMeta& meta) {
  if (meta.calf_id.empty()) throw Error(Errc::validation_failed, "calf_id is required");
  if (!safe_id(meta.calf_id)) {
    throw Error(Errc::validation_failed, "calf_id may only contain letters, digits, '_', '-' and '.'");
  }
  if (!meta.birth_date.empty()) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    char tail = 0;
    const bool shaped = meta.birth_date.size() == 10 &&
                        std::sscanf(meta.birth_date.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) == 3;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!shaped || !ymd.ok()) throw Error(Errc::validation_failed, "birth_date must be a valid YYYY-MM-DD date");
  }
}

void atomic_write(const fs::path& path, std::string_view bytes) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::io_error, "cannot replace " + path.string() + ": " + ec.message());
}

Store::Store(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  std::lock_guard lock(mu_);
  load();
  bool recovered = false;
  for (auto& j : state_.jobs) {
    if (j.state == JobState::queued || j.state == JobState::running) {
      j.state = JobState::failed;
      j.error = "interrupted by a service restart";
      j.finished = now_iso();
      recovered = true;
    }
  }
  if (recovered) commit_locked();
}

void Store::load() {
  const fs::path path = root_ / "manifest.json";
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::parse_failed, "corrupt manifest " + path.string());
  state_.next_recording = j.value("next_recording", std::uint64_t{1});
  state_.next_job = j.value("next_job", std::uint64_t{1});
  for (const auto& c : j.value("calves", json::array())) state_.calves.push_back(calf_from(c));
  for (const auto& r : j.value("recordings", json::array())) state_.recordings.push_back(recording_from(r));
  for (const auto& x : j.value("jobs", json::array())) state_.jobs.push_back(job_from(x));
}

void Store::commit_locked() {
  json j;
  j["next_recording"] = state_.next_recording;
  j["next_job"] = state_.next_job;
  json calves = json::array();
  for (const auto& c : state_.calves) calves.push_back(to_json(c));
  json recs = json::array();
  for (const auto& r : state_.recordings) recs.push_back(to_json(r));
  json jobs = json::array();
  for (const auto& x : state_.jobs) jobs.push_back(to_json(x));
  j["calves"] = calves;
  j["recordings"] = recs;
  j["jobs"] = jobs;
  atomic_write(root_ / "manifest.json", j.dump(2) + "\n");
}

void Store::upsert_calf(const CalfMeta& meta) {
  validate(meta);
  std::lock_guard lock(mu_);
  auto it = std::find_if(state_.calves.begin(), state_.calves.end(),
                         [&](const CalfMeta& c) { return c.calf_id == meta.calf_id; });
  if (it == state_.calves.end()) {
    state_.calves.push_back(meta);
    std::sort(state_.calves.begin(), state_.calves.end(),
              [](const CalfMeta& a, const CalfMeta& b) { return a.calf_id < b.calf_id; });
  } else {
    *it = meta;
  }
  commit_locked();
}

std::optional<CalfMeta> Store::calf(const std::string& id) const {
  std::lock_guard lock(mu_);
  for (const auto& c : state_.calves) {
    if (c.calf_id == id) return c;
  }
  return std::nullopt;
}

std::vector<CalfMeta> Store::calves() const {
  std::lock_guard lock(mu_);
  return state_.calves;
}

std::string Store::new_recording(const std::string& calf_id, const std::string& filename) {
  std::lock_guard lock(mu_);
  const bool known = std::any_of(state_.calves.begin(), state_.calves.end(),
                                 [&](const CalfMeta& c) { return c.calf_id == calf_id; });
  if (!known) throw Error(Errc::unknown_calf, "calf '" + calf_id + "' is not registered");
  RecordingInfo r;
  r.recording_id = numbered("rec-", state_.next_recording++);
  r.calf_id = calf_id;
  r.filename = filename;
  state_.recordings.push_back(r);
  commit_locked();
  return r.recording_id;
}

RecordingInfo* Store::find_recording_locked(const std::string& id) {
  for (auto& r : state_.recordings) {
    if (r.recording_id == id) return &r;
  }
  return nullptr;
}

fs::path Store::recording_path(const RecordingInfo& r) const {
  return root_ / "calves" / r.calf_id / "recordings" / (r.recording_id + ".cwa");
}

fs::path Store::timeline_path(const RecordingInfo& r) const {
  return root_ / "calves" / r.calf_id / "timelines" / (r.recording_id + ".csv");
}

void Store::save_recording(const std::string& recording_id, const Recording& rec) {
  RecordingInfo info;
  {
    std::lock_guard lock(mu_);
    const auto* r = find_recording_locked(recording_id);
    if (!r) throw Error(Errc::recording_missing, "unknown recording '" + recording_id + "'");
    info = *r;
  }
  const auto bytes = cwa::write_cwa(rec, cwa::Packing::unpacked);
  atomic_write(recording_path(info), std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));

  std::lock_guard lock(mu_);
  auto* r = find_recording_locked(recording_id);
  r->samples = rec.samples.size();
  r->segments = segments_of(rec).size();
  r->rejected_blocks = rec.rejected_blocks;
  r->first_t = rec.samples.empty() ? "" : format_iso8601(rec.samples.front().t);
  r->last_t = rec.samples.empty() ? "" : format_iso8601(rec.samples.back().t);
  r->converted = true;
  commit_locked();
}

std::optional<RecordingInfo> Store::recording(const std::string& id) const {
  std::lock_guard lock(mu_);
  for (const auto& r : state_.recordings) {
    if (r.recording_id == id) return r;
  }
  return std::nullopt;
}

std::vector<RecordingInfo> Store::recordings_of(const std::string& calf_id) const {
  std::lock_guard lock(mu_);
  std::vector<RecordingInfo> out;
  for (const auto& r : state_.recordings) {
    if (r.calf_id == calf_id) out.push_back(r);
  }
  return out;
}

Recording Store::load_recording(const std::string& recording_id) const {
  const auto r = recording(recording_id);
  if (!r || !r->converted) throw Error(Errc::recording_missing, "recording '" + recording_id + "' is not available");
  return regularize(cwa::parse_cwa_file(recording_path(*r).string()));
}

void Store::save_timeline(const std::string& recording_id, const metrics::PredictionTimeline& tl) {
  const auto r = recording(recording_id);
  if (!r) throw Error(Errc::recording_missing, "unknown recording '" + recording_id + "'");
  std::ostringstream csv;
  metrics::write_timeline_csv(tl, csv);
  atomic_write(timeline_path(*r), csv.str());
  std::lock_guard lock(mu_);
  auto* rec = find_recording_locked(recording_id);
  rec->has_timeline = true;
  rec->model1_version = tl.model1_version;
  rec->model2_version = tl.model2_version;
  commit_locked();
}

metrics::PredictionTimeline Store::timeline(const std::string& calf_id) const {
  metrics::PredictionTimeline out;
  out.calf_id = calf_id;
  for (const auto& r : recordings_of(calf_id)) {
    if (!r.has_timeline) continue;
    std::ifstream in(timeline_path(r));
    if (!in) continue;
    auto tl = metrics::read_timeline_csv(in, calf_id);
    out.entries.insert(out.entries.end(), tl.entries.begin(), tl.entries.end());
    out.model1_version = r.model1_version;
    out.model2_version = r.model2_version;
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const auto& a, const auto& b) { return a.start < b.start; });
  std::vector<metrics::TimelineEntry> kept;
  kept.reserve(out.entries.size());
  for (const auto& e : out.entries) {
    if (kept.empty() || e.start >= kept.back().end) kept.push_back(e);
  }
  out.entries = std::move(kept);
  return out;
}

std::string Store::create_job(JobKind kind, const std::string& calf_id, const std::string& recording_id) {
  std::lock_guard lock(mu_);
  JobInfo j;
  j.job_id = numbered("job-", state_.next_job++);
  j.kind = kind;
  j.calf_id = calf_id;
  j.recording_id = recording_id;
  j.created = now_iso();
  state_.jobs.push_back(j);
  commit_locked();
  return j.job_id;
}

void Store::transition(const std::string& job_id, JobState next, const std::string& error) {
  std::lock_guard lock(mu_);
  for (auto& j : state_.jobs) {
    if (j.job_id != job_id) continue;
    const bool ok = (j.state == JobState::queued && (next == JobState::running || next == JobState::failed)) ||
                    (j.state == JobState::running && (next == JobState::done || next == JobState::failed));
    if (!ok) {
      throw Error(Errc::validation_failed, "job " + job_id + " cannot move from " + std::string(to_string(j.state)) +
                                               " to " + std::string(to_string(next)));
    }
    j.state = next;
    j.error = error;
    if (next == JobState::done || next == JobState::failed) j.finished = now_iso();
    commit_locked();
    return;
  }
  throw Error(Errc::validation_failed, "unknown job '" + job_id + "'");
}

std::optional<JobInfo> Store::job(const std::string& id) const {
  std::lock_guard lock(mu_);
  for (const auto& j : state_.jobs) {
    if (j.job_id == id) return j;
  }
  return std::nullopt;
}

std::vector<JobInfo> Store::jobs() const {
  std::lock_guard lock(mu_);
  return state_.jobs;
}

}  // namespace calfmon::service
