#include "calfmon/model_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>

#include "calfmon/bytes.hpp"
#include "calfmon/error.hpp"

namespace calfmon::learn {

namespace {

enum Section : std::uint16_t {
  kClasses = 1,
  kMetadata = 2,
  kStandardization = 10,
  kRidgeWeights = 11,
  kKernelSet = 12,
  kForestParams = 20,
  kTrees = 21,
  kFeatureNames = 22,
  kFeatureSubset = 23,
};

void write_strings(bytes::Writer& w, const std::vector<std::string>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (const auto& s : v) w.str(s);
}

std::vector<std::string> read_strings(bytes::Reader& r) {
  const auto n = r.u32();
  if (n > r.remaining()) throw Error(Errc::truncated, "string count exceeds section size");
  std::vector<std::string> out(n);
  for (auto& s : out) s = r.str();
  return out;
}

std::vector<std::pair<std::uint16_t, bytes::Writer>> ridge_sections(const RidgeModel& m) {
  std::vector<std::pair<std::uint16_t, bytes::Writer>> out;
  {
    bytes::Writer w;
    w.u32(static_cast<std::uint32_t>(m.n_features_in));
    w.u32(static_cast<std::uint32_t>(m.kept.size()));
    for (auto k : m.kept) w.u32(static_cast<std::uint32_t>(k));
    for (Eigen::Index j = 0; j < m.mu.size(); ++j) w.f64(m.mu(j));
    for (Eigen::Index j = 0; j < m.sigma.size(); ++j) w.f64(m.sigma(j));
    out.emplace_back(kStandardization, std::move(w));
  }
  {
    bytes::Writer w;
    w.u32(static_cast<std::uint32_t>(m.W.rows()));
    w.u32(static_cast<std::uint32_t>(m.W.cols()));
    for (Eigen::Index c = 0; c < m.W.rows(); ++c) {
      for (Eigen::Index j = 0; j < m.W.cols(); ++j) w.f64(m.W(c, j));
    }
    for (Eigen::Index c = 0; c < m.b.size(); ++c) w.f64(m.b(c));
    w.f64(m.alpha);
    w.u32(static_cast<std::uint32_t>(m.alphas.size()));
    for (double a : m.alphas) w.f64(a);
    for (std::size_t i = 0; i < m.alphas.size(); ++i) w.f64(i < m.loo_errors.size() ? m.loo_errors[i] : 0.0);
    out.emplace_back(kRidgeWeights, std::move(w));
  }
  if (m.kernels) {
    bytes::Writer w;
    rocket::write(w, *m.kernels);
    out.emplace_back(kKernelSet, std::move(w));
  }
  return out;
}

std::vector<std::pair<std::uint16_t, bytes::Writer>> forest_sections(const ActivityModel& am) {
  const ForestModel& m = am.forest;
  std::vector<std::pair<std::uint16_t, bytes::Writer>> out;
  {
    bytes::Writer w;
    w.u32(static_cast<std::uint32_t>(m.params.n_trees));
    w.i32(m.params.max_depth ? static_cast<std::int32_t>(*m.params.max_depth) : -1);
    w.u32(static_cast<std::uint32_t>(m.params.min_samples_leaf));
    w.i32(m.params.mtry ? static_cast<std::int32_t>(*m.params.mtry) : -1);
    w.u64(m.seed);
    w.u32(static_cast<std::uint32_t>(m.n_features));
    out.emplace_back(kForestParams, std::move(w));
  }
  {
    bytes::Writer w;
    w.u32(static_cast<std::uint32_t>(m.trees.size()));
    const std::size_t nc = m.classes.size();
    for (const auto& t : m.trees) {
      w.u32(static_cast<std::uint32_t>(t.nodes.size()));
      for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        const auto& nd = t.nodes[i];
        w.i32(nd.feature);
        w.f64(nd.threshold);
        w.i32(nd.left);
        w.i32(nd.right);
        w.u32(nd.depth);
        for (std::size_t c = 0; c < nc; ++c) w.u32(t.counts[i * nc + c]);
      }
    }
    out.emplace_back(kTrees, std::move(w));
  }
  {
    bytes::Writer w;
    write_strings(w, m.feature_names);
    out.emplace_back(kFeatureNames, std::move(w));
  }
  {
    bytes::Writer w;
    write_strings(w, am.subset.names);
    for (std::size_t i = 0; i < am.subset.names.size(); ++i) {
      w.f64(i < am.subset.importances.size() ? am.subset.importances[i] : 0.0);
    }
    out.emplace_back(kFeatureSubset, std::move(w));
  }
  return out;
}

RidgeModel read_ridge(const std::map<std::uint16_t, std::span<const std::uint8_t>>& sections) {
  RidgeModel m;
  auto need = [&](std::uint16_t id) {
    auto it = sections.find(id);
    if (it == sections.end()) throw Error(Errc::truncated, "missing section " + std::to_string(id));
    return it->second;
  };
  {
    bytes::Reader r(need(kStandardization));
    m.n_features_in = r.u32();
    const auto kept = r.u32();
    if (kept > r.remaining()) throw Error(Errc::truncated, "kept count exceeds section size");
    m.kept.resize(kept);
    for (auto& k : m.kept) k = r.u32();
    m.mu.resize(kept);
    m.sigma.resize(kept);
    for (std::uint32_t j = 0; j < kept; ++j) m.mu(j) = r.f64();
    for (std::uint32_t j = 0; j < kept; ++j) m.sigma(j) = r.f64();
  }
  {
    bytes::Reader r(need(kRidgeWeights));
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (static_cast<std::uint64_t>(rows) * cols * 8 > r.remaining()) throw Error(Errc::truncated, "weights exceed section size");
    m.W.resize(rows, cols);
    for (std::uint32_t c = 0; c < rows; ++c) {
      for (std::uint32_t j = 0; j < cols; ++j) m.W(c, j) = r.f64();
    }
    m.b.resize(rows);
    for (std::uint32_t c = 0; c < rows; ++c) m.b(c) = r.f64();
    m.alpha = r.f64();
    const auto grid = r.u32();
    if (grid > r.remaining()) throw Error(Errc::truncated, "alpha grid exceeds section size");
    m.alphas.resize(grid);
    m.loo_errors.resize(grid);
    for (auto& a : m.alphas) a = r.f64();
    for (auto& e : m.loo_errors) e = r.f64();
  }
  if (auto it = sections.find(kKernelSet); it != sections.end()) {
    bytes::Reader r(it->second);
    m.kernels = rocket::read(r);
  }
  return m;
}

ActivityModel read_forest(const std::map<std::uint16_t, std::span<const std::uint8_t>>& sections,
                          std::size_t n_classes) {
  ActivityModel am;
  ForestModel& m = am.forest;
  auto need = [&](std::uint16_t id) {
    auto it = sections.find(id);
    if (it == sections.end()) throw Error(Errc::truncated, "missing section " + std::to_string(id));
    return it->second;
  };
  {
    bytes::Reader r(need(kForestParams));
    m.params.n_trees = r.u32();
    const auto depth = r.i32();
    if (depth >= 0) m.params.max_depth = static_cast<std::size_t>(depth);
    m.params.min_samples_leaf = r.u32();
    const auto mtry = r.i32();
    if (mtry >= 0) m.params.mtry = static_cast<std::size_t>(mtry);
    m.seed = r.u64();
    m.n_features = r.u32();
  }
  {
    bytes::Reader r(need(kTrees));
    const auto count = r.u32();
    if (count > r.remaining()) throw Error(Errc::truncated, "tree count exceeds section size");
    m.trees.resize(count);
    for (auto& t : m.trees) {
      const auto nodes = r.u32();
      if (static_cast<std::uint64_t>(nodes) * 24 > r.remaining()) throw Error(Errc::truncated, "tree exceeds section size");
      t.nodes.resize(nodes);
      t.counts.resize(static_cast<std::size_t>(nodes) * n_classes);
      for (std::uint32_t i = 0; i < nodes; ++i) {
        auto& nd = t.nodes[i];
        nd.feature = r.i32();
        nd.threshold = r.f64();
        nd.left = r.i32();
        nd.right = r.i32();
        nd.depth = r.u32();
        for (std::size_t c = 0; c < n_classes; ++c) t.counts[i * n_classes + c] = r.u32();
        const auto limit = static_cast<std::int32_t>(nodes);
        if (!nd.is_leaf() && (nd.left <= 0 || nd.right <= 0 || nd.left >= limit || nd.right >= limit ||
                              static_cast<std::size_t>(nd.feature) >= m.n_features)) {
          throw Error(Errc::truncated, "corrupt tree node");
        }
      }
    }
  }
  {
    bytes::Reader r(need(kFeatureNames));
    m.feature_names = read_strings(r);
  }
  if (auto it = sections.find(kFeatureSubset); it != sections.end()) {
    bytes::Reader r(it->second);
    am.subset.names = read_strings(r);
    am.subset.importances.resize(am.subset.names.size());
    for (auto& v : am.subset.importances) v = r.f64();
  }
  return am;
}

}  // namespace

ModelKind kind_of(const Model& m) noexcept {
  return std::holds_alternative<RidgeModel>(m) ? ModelKind::ridge : ModelKind::forest;
}

const std::string& metadata_of(const Model& m) noexcept {
  return std::visit(
      [](const auto& v) -> const std::string& {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, RidgeModel>) {
          return v.metadata;
        } else {
          return v.forest.metadata;
        }
      },
      m);
}

std::vector<std::uint8_t> save_model(const Model& model) {
  std::vector<std::pair<std::uint16_t, bytes::Writer>> sections;
  const auto& classes = std::visit(
      [](const auto& v) -> const std::vector<std::string>& {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, RidgeModel>) {
          return v.classes;
        } else {
          return v.forest.classes;
        }
      },
      model);
  {
    bytes::Writer w;
    write_strings(w, classes);
    sections.emplace_back(kClasses, std::move(w));
  }
  {
    bytes::Writer w;
    w.str(metadata_of(model));
    sections.emplace_back(kMetadata, std::move(w));
  }
  auto body = std::holds_alternative<RidgeModel>(model) ? ridge_sections(std::get<RidgeModel>(model))
                                                        : forest_sections(std::get<ActivityModel>(model));
  for (auto& s : body) sections.push_back(std::move(s));

  bytes::Writer out;
  out.raw({reinterpret_cast<const std::uint8_t*>("CWML"), 4});
  out.u16(kModelFormatVersion);
  out.u8(static_cast<std::uint8_t>(kind_of(model)));
  out.u16(static_cast<std::uint16_t>(sections.size()));
  std::uint32_t offset = static_cast<std::uint32_t>(out.size() + sections.size() * 10);
  for (auto& [id, w] : sections) {
    out.u16(id);
    out.u32(offset);
    out.u32(static_cast<std::uint32_t>(w.size()));
    offset += static_cast<std::uint32_t>(w.size());
  }
  for (auto& [id, w] : sections) out.raw(w.buffer());
  return out.take();
}

Model load_model(std::span<const std::uint8_t> data) {
  if (data.size() < 4 || std::memcmp(data.data(), "CWML", 4) != 0) {
    throw Error(Errc::bad_magic, "not a model artifact");
  }
  bytes::Reader r(data.subspan(4));
  const auto version = r.u16();
  if (version != kModelFormatVersion) {
    throw Error(Errc::version_unsupported, "model format version " + std::to_string(version));
  }
  const auto kind = r.u8();
  if (kind != static_cast<std::uint8_t>(ModelKind::ridge) && kind != static_cast<std::uint8_t>(ModelKind::forest)) {
    throw Error(Errc::version_unsupported, "unknown model kind " + std::to_string(kind));
  }
  const auto count = r.u16();
  std::map<std::uint16_t, std::span<const std::uint8_t>> sections;
  for (std::uint16_t i = 0; i < count; ++i) {
    const auto id = r.u16();
    const auto off = r.u32();
    const auto len = r.u32();
    if (static_cast<std::uint64_t>(off) + len > data.size()) throw Error(Errc::truncated, "section past end of artifact");
    sections[id] = data.subspan(off, len);
  }
  auto need = [&](std::uint16_t id) {
    auto it = sections.find(id);
    if (it == sections.end()) throw Error(Errc::truncated, "missing section " + std::to_string(id));
    return it->second;
  };
  bytes::Reader cr(need(kClasses));
  auto classes = read_strings(cr);
  bytes::Reader mr(need(kMetadata));
  auto metadata = mr.str();

  if (kind == static_cast<std::uint8_t>(ModelKind::ridge)) {
    auto m = read_ridge(sections);
    m.classes = std::move(classes);
    m.metadata = std::move(metadata);
    if (static_cast<std::size_t>(m.W.rows()) != m.classes.size() || static_cast<std::size_t>(m.W.cols()) != m.kept.size()) {
      throw Error(Errc::truncated, "ridge weights do not match class or feature counts");
    }
    return m;
  }
  auto am = read_forest(sections, classes.size());
  am.forest.classes = std::move(classes);
  am.forest.metadata = std::move(metadata);
  return am;
}

void save_model_file(const Model& m, const std::string& path) {
  const auto bytes = save_model(m);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io_error, "short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Model load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::model_missing, "cannot open model " + path);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_model(data);
}

}  // namespace calfmon::learn
