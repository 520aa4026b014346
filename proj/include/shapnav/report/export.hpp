#pragma once

// Report directory layout:
//   dataset.csv                  one row per timestep
//   ranking_<output>.csv         features by mean |phi|
//   dependence_<output>_<feature>.csv  (normalized value, phi) pairs
//   dependence_summary.csv       Spearman correlation per (output, feature)
//   traces/episode_<i>.csv       state, action and reference action over time
//   manifest.json

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "shapnav/agent/evaluate.hpp"
#include "shapnav/attrib/attribution.hpp"
#include "shapnav/error.hpp"
#include "shapnav/format.hpp"
#include "shapnav/kvconfig.hpp"
#include "shapnav/report/dataset.hpp"

namespace shapnav::report {

inline constexpr const char* kDatasetSchema = "shapnav-dataset-1";

inline std::vector<std::string> dataset_columns(const AttributionDataset& ds) {
  std::vector<std::string> c{"trajectory", "step"};
  for (const auto& f : ds.features) c.push_back("raw_" + f);
  for (const auto& f : ds.features) c.push_back("norm_" + f);
  for (const char* o : attrib::kOutputNames)
    for (const auto& f : ds.features) c.push_back("phi_" + std::string(o) + "_" + f);
  for (const char* o : attrib::kOutputNames) c.push_back("f_x_" + std::string(o));
  for (const char* o : attrib::kOutputNames) c.push_back("f_ref_" + std::string(o));
  return c;
}

inline std::string join(const std::vector<std::string>& v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + v[i];
  return s;
}

inline std::string dataset_csv(const AttributionDataset& ds) {
  std::ostringstream s;
  s << "# schema=" << kDatasetSchema << " n_cnn=" << ds.n_cnn << " trajectories=" << ds.trajectory_count << "\n";
  s << join(dataset_columns(ds)) << "\n";
  for (const auto& r : ds.rows) {
    s << r.trajectory << "," << r.step;
    for (double v : r.raw) s << "," << fmt_num(v);
    for (double v : r.normalized) s << "," << fmt_num(v);
    for (const auto& p : r.phi)
      for (double v : p) s << "," << fmt_num(v);
    for (double v : r.f_x) s << "," << fmt_num(v);
    for (double v : r.f_ref) s << "," << fmt_num(v);
    s << "\n";
  }
  return s.str();
}

inline AttributionDataset parse_dataset_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# schema=", 0) != 0) throw ConfigError("dataset CSV lacks a schema line");
  AttributionDataset ds;
  {
    std::istringstream h(line.substr(2));
    std::string tok;
    bool schema_ok = false;
    while (h >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      auto k = tok.substr(0, eq), v = tok.substr(eq + 1);
      if (k == "schema") schema_ok = v == kDatasetSchema;
      if (k == "n_cnn") ds.n_cnn = static_cast<int>(parse_int(v, k));
      if (k == "trajectories") ds.trajectory_count = static_cast<int>(parse_int(v, k));
    }
    if (!schema_ok) throw VersionError("unsupported dataset schema: " + line);
  }
  if (!std::getline(in, line)) throw ConfigError("dataset CSV lacks a header row");
  auto cols = split(line, ',');
  for (const auto& c : cols)
    if (c.rfind("raw_", 0) == 0) ds.features.push_back(c.substr(4));
  ds.features.shrink_to_fit();
  if (cols != dataset_columns(ds)) throw ConfigError("dataset CSV header does not match the schema");
  const std::size_t nf = ds.features.size();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto v = split(line, ',');
    if (v.size() != cols.size()) throw ConfigError("dataset CSV row has the wrong column count");
    DatasetRow r;
    std::size_t i = 0;
    r.trajectory = static_cast<int>(parse_int(v[i++], "trajectory"));
    r.step = static_cast<int>(parse_int(v[i++], "step"));
    for (std::size_t k = 0; k < nf; ++k) r.raw.push_back(parse_double(v[i++], "raw"));
    for (std::size_t k = 0; k < nf; ++k) r.normalized.push_back(parse_double(v[i++], "norm"));
    for (auto& p : r.phi)
      for (std::size_t k = 0; k < nf; ++k) p.push_back(parse_double(v[i++], "phi"));
    for (double& x : r.f_x) x = parse_double(v[i++], "f_x");
    for (double& x : r.f_ref) x = parse_double(v[i++], "f_ref");
    ds.rows.push_back(std::move(r));
  }
  return ds;
}

inline std::string ranking_csv(const std::vector<RankedFeature>& r) {
  std::ostringstream s;
  s << "rank,feature,mean_abs_phi\n";
  for (std::size_t i = 0; i < r.size(); ++i) s << i + 1 << "," << r[i].feature << "," << fmt_num(r[i].mean_abs_phi) << "\n";
  return s.str();
}

inline std::string dependence_csv(const Dependence& d) {
  std::ostringstream s;
  s << "value,phi\n";
  for (std::size_t i = 0; i < d.value.size(); ++i) s << fmt_num(d.value[i]) << "," << fmt_num(d.phi[i]) << "\n";
  return s.str();
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_num(*v) : "undefined"; }

inline std::string trace_csv(const agent::Trajectory& t, const sim::ActionCommand& ref) {
  std::ostringstream s;
  s << "step,d_xy,d_z,angle_error,v_xy,v_z,yaw_rate,cmd_v_xy,cmd_v_z,cmd_yaw_rate,ref_v_xy,ref_v_z,ref_yaw_rate,"
       "reward,x,y,z,terminal\n";
  for (const auto& r : t.steps) {
    s << r.step;
    for (double v : r.features.as_array()) s << "," << fmt_num(v);
    for (double v : r.action.as_array()) s << "," << fmt_num(v);
    for (double v : ref.as_array()) s << "," << fmt_num(v);
    s << "," << fmt_num(r.reward) << "," << fmt_num(r.position.x) << "," << fmt_num(r.position.y) << ","
      << fmt_num(r.position.z) << "," << sim::terminal_name(r.terminal) << "\n";
  }
  return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw IoError("write failed: " + p.string());
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot read " + p.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// Hex SHA-256 over the concatenated bytes of `files`, in order.
inline std::string sha256_files(const std::vector<std::filesystem::path>& files) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw IoError("sha256 init failed");
  }
  for (const auto& p : files) {
    std::string bytes = read_file(p);
    EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream s;
  for (unsigned int i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return s.str();
}

inline std::vector<std::filesystem::path> checkpoint_files(const std::filesystem::path& dir) {
  return {dir / "actor.spec", dir / "actor.ckpt", nn::payload_path(dir / "actor.ckpt")};
}

struct ExportInput {
  const AttributionDataset* dataset = nullptr;
  const std::vector<agent::Trajectory>* trajectories = nullptr;
  sim::ActionCommand reference_action;
  nlohmann::ordered_json manifest;  // run metadata merged into manifest.json
};

// Writes the report directory; returns the relative file list.
inline std::vector<std::string> export_report(const ExportInput& in, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const auto& ds = *in.dataset;
  fs::create_directories(out_dir / "traces");
  std::vector<std::string> files;
  auto put = [&](const std::string& rel, const std::string& content) {
    write_file(out_dir / rel, content);
    files.push_back(rel);
  };
  put("dataset.csv", dataset_csv(ds));
  auto ranking = importance_ranking(ds);
  for (std::size_t k = 0; k < 3; ++k) put("ranking_" + std::string(attrib::kOutputNames[k]) + ".csv", ranking_csv(ranking[k]));
  std::ostringstream summary;
  summary << "output,feature,n,spearman\n";
  for (int k = 0; k < 3; ++k) {
    const std::string out = attrib::kOutputNames[static_cast<std::size_t>(k)];
    for (const auto& f : ds.features) {
      auto d = dependence_data(ds, f, k);
      put("dependence_" + out + "_" + f + ".csv", dependence_csv(d));
      summary << out << "," << f << "," << d.value.size() << "," << fmt_opt(d.spearman) << "\n";
    }
  }
  put("dependence_summary.csv", summary.str());
  if (in.trajectories)
    for (std::size_t i = 0; i < in.trajectories->size(); ++i)
      put("traces/episode_" + std::to_string(i) + ".csv", trace_csv((*in.trajectories)[i], in.reference_action));
  nlohmann::ordered_json m = in.manifest;
  m["dataset_schema"] = kDatasetSchema;
  m["trajectories"] = ds.trajectory_count;
  m["rows"] = ds.rows.size();
  m["features"] = ds.features;
  m["files"] = files;
  write_file(out_dir / "manifest.json", m.dump(2) + "\n");
  files.push_back("manifest.json");
  return files;
}

}  // namespace shapnav::report
