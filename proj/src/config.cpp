#include "simba/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "simba/error.hpp"

namespace simba {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(out)) {
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ConfigError("'" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "': expected true/false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v, std::size_t n) {
  const auto parts = split(v, ',');
  if (parts.size() != n) {
    throw ConfigError("'" + key + "': expected " + std::to_string(n) + " comma-separated values");
  }
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(parse_double(key, p));
  return out;
}

Vec3 parse_vec3(const std::string& key, const std::string& v) {
  const auto p = parse_list(key, v, 3);
  return {p[0], p[1], p[2]};
}

Box parse_box(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 6) throw ConfigError("'" + key + "': expected x0,y0,z0,x1,y1,z1");
  Box b;
  for (int i = 0; i < 3; ++i) {
    b.lo[i] = parse_uint(key, parts[i]);
    b.hi[i] = parse_uint(key, parts[i + 3]);
    if (b.hi[i] <= b.lo[i]) throw ConfigError("'" + key + "': empty box (hi must exceed lo)");
  }
  return b;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string fmt(const Vec3& v) { return fmt(v.x) + "," + fmt(v.y) + "," + fmt(v.z); }

struct KeyDoc {
  std::string key;
  std::string doc;
  std::function<std::string(const RunConfig&)> current;
};

const std::vector<KeyDoc>& key_docs() {
  static const std::vector<KeyDoc> docs = {
      {"n_interleaves", "interleaves in the acquisition", [](auto& c) { return std::to_string(c.n_interleaves); }},
      {"n_readouts", "readouts per interleaf (first is SI)", [](auto& c) { return std::to_string(c.n_readouts); }},
      {"n_samples", "samples per readout", [](auto& c) { return std::to_string(c.n_samples); }},
      {"tr", "repetition time, s", [](auto& c) { return fmt(c.tr); }},
      {"fov_mm", "field of view, mm", [](auto& c) { return fmt(c.geometry.fov_mm); }},
      {"matrix_size", "reconstruction matrix", [](auto& c) { return std::to_string(c.geometry.matrix_size); }},
      {"seed", "simulation and clustering seed", [](auto& c) { return std::to_string(c.scene.seed); }},
      {"noise_seed", "noise stream seed (defaults to seed)", [](auto& c) {
         return c.scene.noise_seed ? std::to_string(*c.scene.noise_seed) : std::string("seed");
       }},
      {"noise_sigma", "complex noise sd per component", [](auto& c) { return fmt(c.scene.noise_sigma); }},
      {"cardiac_period", "mean RR interval, s", [](auto& c) { return fmt(c.scene.cardiac_period); }},
      {"respiratory_period", "breathing period, s", [](auto& c) { return fmt(c.scene.respiratory_period); }},
      {"rr_jitter", "fractional RR spread", [](auto& c) { return fmt(c.scene.rr_jitter); }},
      {"systolic_fraction", "cardiac phase of peak contraction", [](auto& c) { return fmt(c.scene.systolic_fraction); }},
      {"unit_coils", "use unit coil sensitivities", [](auto& c) { return std::string(c.scene.unit_coils ? "true" : "false"); }},
      {"ellipsoid.<name>.center", "mm; unknown names add an ellipsoid", [](auto&) { return std::string("see scene"); }},
      {"ellipsoid.<name>.semi_axes", "mm", [](auto&) { return std::string("see scene"); }},
      {"ellipsoid.<name>.amplitude", "", [](auto&) { return std::string("see scene"); }},
      {"ellipsoid.<name>.cardiac_scaling", "fractional shrink at peak systole", [](auto&) { return std::string("see scene"); }},
      {"ellipsoid.<name>.respiratory_shift", "mm at peak inspiration", [](auto&) { return std::string("see scene"); }},
      {"coil.<0-3>.center", "mm", [](auto& c) { return fmt(c.scene.coils[0].center) + " (coil 0)"; }},
      {"coil.<0-3>.width", "Gaussian sd, mm", [](auto& c) { return fmt(c.scene.coils[0].width); }},
      {"oversampling", "gridding oversampling factor", [](auto& c) { return fmt(c.gridding.oversampling); }},
      {"kernel_width", "Kaiser-Bessel width, grid points", [](auto& c) { return fmt(c.gridding.kernel_width); }},
      {"deterministic", "fixed-order gridding reduction", [](auto& c) { return std::string(c.gridding.deterministic ? "true" : "false"); }},
      {"coil_ids", "four coils used for reference data", [](auto& c) {
         return std::to_string(c.coil_ids[0]) + "," + std::to_string(c.coil_ids[1]) + "," +
                std::to_string(c.coil_ids[2]) + "," + std::to_string(c.coil_ids[3]);
       }},
      {"n_pc", "principal components kept", [](auto& c) { return std::to_string(c.n_pc); }},
      {"discard_first_pc", "drop the first component", [](auto& c) { return std::string(c.discard_first_pc ? "true" : "false"); }},
      {"k_min", "smallest cluster count tried", [](auto& c) { return std::to_string(c.k_min); }},
      {"k_max", "largest cluster count tried", [](auto& c) { return std::to_string(c.k_max); }},
      {"n_init", "k-means restarts per k", [](auto& c) { return std::to_string(c.kmeans.n_init); }},
      {"kmeans_max_iter", "Lloyd iteration cap", [](auto& c) { return std::to_string(c.kmeans.max_iter); }},
      {"kmeans_tol", "relative inertia change to stop", [](auto& c) { return fmt(c.kmeans.tol); }},
      {"include_si", "reuse SI readouts as imaging data", [](auto& c) { return std::string(c.include_si ? "true" : "false"); }},
      {"roi.blood", "voxel box x0,y0,z0,x1,y1,z1 (hi exclusive)", [](auto&) { return std::string("derived from scene"); }},
      {"roi.myocardium", "voxel box", [](auto&) { return std::string("derived from scene"); }},
      {"roi.background", "voxel box outside the body", [](auto&) { return std::string("derived from scene"); }},
      {"line.<n>", "sharpness segment x0,y0,z0,x1,y1,z1 in voxels", [](auto&) { return std::string("derived from scene"); }},
      {"samples_per_voxel", "profile sampling density", [](auto& c) { return fmt(c.samples_per_voxel); }},
      {"max_slope", "sigmoid slope bound, 1/mm", [](auto& c) { return fmt(c.max_slope); }},
      {"qt_k", "QT = qt_k * sqrt(RR)", [](auto& c) { return fmt(c.qt_k); }},
      {"ecg_provenance", "classify cardiac phase from R-waves", [](auto& c) { return std::string(c.ecg_provenance ? "true" : "false"); }},
      {"output_dir", "directory for all outputs", [](auto& c) { return c.output_dir.string(); }},
  };
  return docs;
}

Ellipsoid& find_or_add_ellipsoid(PhantomScene& scene, const std::string& name) {
  for (auto& e : scene.ellipsoids) {
    if (e.name == name) return e;
  }
  Ellipsoid e;
  e.name = name;
  e.semi_axes = {10, 10, 10};
  scene.ellipsoids.push_back(e);
  return scene.ellipsoids.back();
}

const Ellipsoid* find_ellipsoid(const PhantomScene& scene, const std::string& name) {
  for (const auto& e : scene.ellipsoids) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::size_t to_index(double v, std::size_t n) {
  const double r = std::round(v);
  return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(n)));
}

Box box_around(const Vec3& c, const std::array<double, 3>& half, std::size_t n) {
  Box b;
  const double p[3] = {c.x, c.y, c.z};
  for (int i = 0; i < 3; ++i) {
    b.lo[i] = to_index(p[i] - half[i], n);
    b.hi[i] = std::max(b.lo[i] + 1, to_index(p[i] + half[i] + 1.0, n));
  }
  return b;
}

}  // namespace

Vec3 mm_to_voxel(const Vec3& p, const AcquisitionGeometry& geometry) {
  const double half = static_cast<double>(geometry.matrix_size / 2);
  return p * (1.0 / geometry.voxel_mm()) + Vec3{half, half, half};
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto& s = cfg.scene;
  if (key == "n_interleaves") cfg.n_interleaves = parse_uint(key, v);
  else if (key == "n_readouts") cfg.n_readouts = parse_uint(key, v);
  else if (key == "n_samples") cfg.n_samples = parse_uint(key, v);
  else if (key == "tr") cfg.tr = parse_double(key, v);
  else if (key == "fov_mm") {
    cfg.geometry.fov_mm = parse_double(key, v);
    s.fov = {cfg.geometry.fov_mm, cfg.geometry.fov_mm, cfg.geometry.fov_mm};
  } else if (key == "matrix_size") {
    cfg.geometry.matrix_size = parse_uint(key, v);
    cfg.gridding.matrix_size = cfg.geometry.matrix_size;
  } else if (key == "seed") s.seed = parse_uint(key, v);
  else if (key == "noise_sigma") s.noise_sigma = parse_double(key, v);
  else if (key == "noise_seed") s.noise_seed = parse_uint(key, v);
  else if (key == "cardiac_period") s.cardiac_period = parse_double(key, v);
  else if (key == "respiratory_period") s.respiratory_period = parse_double(key, v);
  else if (key == "rr_jitter") s.rr_jitter = parse_double(key, v);
  else if (key == "systolic_fraction") s.systolic_fraction = parse_double(key, v);
  else if (key == "unit_coils") s.unit_coils = parse_bool(key, v);
  else if (key.rfind("ellipsoid.", 0) == 0) {
    const auto parts = split(key, '.');
    if (parts.size() != 3 || parts[1].empty()) throw ConfigError("unknown key '" + key + "'");
    auto& e = find_or_add_ellipsoid(s, parts[1]);
    const auto& field = parts[2];
    if (field == "center") e.center = parse_vec3(key, v);
    else if (field == "semi_axes") e.semi_axes = parse_vec3(key, v);
    else if (field == "amplitude") e.amplitude = parse_double(key, v);
    else if (field == "cardiac_scaling") e.cardiac_scaling = parse_double(key, v);
    else if (field == "respiratory_shift") e.respiratory_shift = parse_vec3(key, v);
    else throw ConfigError("unknown key '" + key + "'");
  } else if (key.rfind("coil.", 0) == 0) {
    const auto parts = split(key, '.');
    if (parts.size() != 3) throw ConfigError("unknown key '" + key + "'");
    const auto idx = parse_uint(key, parts[1]);
    if (idx >= s.coils.size()) throw ConfigError("'" + key + "': coil index out of range");
    if (parts[2] == "center") s.coils[idx].center = parse_vec3(key, v);
    else if (parts[2] == "width") s.coils[idx].width = parse_double(key, v);
    else throw ConfigError("unknown key '" + key + "'");
  } else if (key == "oversampling") cfg.gridding.oversampling = parse_double(key, v);
  else if (key == "kernel_width") cfg.gridding.kernel_width = parse_double(key, v);
  else if (key == "deterministic") cfg.gridding.deterministic = parse_bool(key, v);
  else if (key == "coil_ids") {
    const auto parts = split(v, ',');
    if (parts.size() != 4) throw ConfigError("'coil_ids': expected four indices");
    for (int i = 0; i < 4; ++i) cfg.coil_ids[i] = parse_uint(key, parts[i]);
  } else if (key == "n_pc") cfg.n_pc = parse_uint(key, v);
  else if (key == "discard_first_pc") cfg.discard_first_pc = parse_bool(key, v);
  else if (key == "k_min") cfg.k_min = parse_uint(key, v);
  else if (key == "k_max") cfg.k_max = parse_uint(key, v);
  else if (key == "n_init") cfg.kmeans.n_init = parse_uint(key, v);
  else if (key == "kmeans_max_iter") cfg.kmeans.max_iter = parse_uint(key, v);
  else if (key == "kmeans_tol") cfg.kmeans.tol = parse_double(key, v);
  else if (key == "include_si") cfg.include_si = parse_bool(key, v);
  else if (key == "roi.blood") cfg.roi_blood = parse_box(key, v);
  else if (key == "roi.myocardium") cfg.roi_myocardium = parse_box(key, v);
  else if (key == "roi.background") cfg.roi_background = parse_box(key, v);
  else if (key.rfind("line.", 0) == 0) {
    const auto n = parse_uint(key, key.substr(5));
    if (n < 1 || n > 64) throw ConfigError("'" + key + "': line numbers run from 1 to 64");
    const auto p = parse_list(key, v, 6);
    if (cfg.lines.size() < n) cfg.lines.resize(n, LineSegment{{-1, -1, -1}, {-1, -1, -1}});
    cfg.lines[n - 1] = {{p[0], p[1], p[2]}, {p[3], p[4], p[5]}};
  } else if (key == "samples_per_voxel") cfg.samples_per_voxel = parse_double(key, v);
  else if (key == "max_slope") cfg.max_slope = parse_double(key, v);
  else if (key == "qt_k") cfg.qt_k = parse_double(key, v);
  else if (key == "ecg_provenance") cfg.ecg_provenance = parse_bool(key, v);
  else if (key == "output_dir") cfg.output_dir = v;
  else throw ConfigError("unknown key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string describe_config_keys() {
  const RunConfig defaults;
  std::ostringstream os;
  for (const auto& d : key_docs()) {
    os << "  " << d.key << " = " << d.current(defaults);
    if (!d.doc.empty()) os << "    # " << d.doc;
    os << "\n";
  }
  return os.str();
}

void RunConfig::validate() const {
  try {
    scene.validate();
    gridding.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (n_interleaves < 1 || n_readouts < 2 || n_samples < 4) {
    throw ConfigError("trajectory needs n_interleaves >= 1, n_readouts >= 2, n_samples >= 4");
  }
  if (!(tr > 0.0)) throw ConfigError("tr must be positive");
  if (geometry.matrix_size < 2 || !(geometry.fov_mm > 0.0)) throw ConfigError("invalid matrix_size or fov_mm");
  if (gridding.matrix_size != geometry.matrix_size) throw ConfigError("gridding and geometry matrix sizes differ");
  if (k_min < 1 || k_max < k_min) throw ConfigError("need 1 <= k_min <= k_max");
  if (k_max > n_interleaves) throw ConfigError("k_max exceeds the number of interleaves");
  if (kmeans.n_init < 1 || kmeans.max_iter < 1 || !(kmeans.tol >= 0.0)) throw ConfigError("invalid k-means options");
  if (n_pc < 1) throw ConfigError("n_pc must be >= 1");
  for (std::size_t i = 0; i < 4; ++i) {
    if (coil_ids[i] >= scene.coils.size()) throw ConfigError("coil_ids: index out of range");
    for (std::size_t j = 0; j < i; ++j) {
      if (coil_ids[i] == coil_ids[j]) throw ConfigError("coil_ids must be distinct");
    }
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].start.x < 0 && lines[i].end.x < 0) throw ConfigError("line." + std::to_string(i + 1) + " is missing");
  }
  if (!(samples_per_voxel > 0.0) || !(max_slope > 0.0) || !(qt_k > 0.0)) {
    throw ConfigError("samples_per_voxel, max_slope and qt_k must be positive");
  }
}

void RunConfig::derive_defaults() {
  const std::size_t n = geometry.matrix_size;
  const double vox = geometry.voxel_mm();
  const Ellipsoid* blood = find_ellipsoid(scene, "blood_pool");
  const Ellipsoid* myo = find_ellipsoid(scene, "myocardium");
  const Ellipsoid* body = find_ellipsoid(scene, "thorax");

  if (roi_blood.count() == 0 && blood != nullptr) {
    const double h = std::max(1.0, std::floor(0.3 * std::min({blood->semi_axes.x, blood->semi_axes.y,
                                                               blood->semi_axes.z}) / vox));
    roi_blood = box_around(mm_to_voxel(blood->center, geometry), {h, h, h}, n);
  }
  if (roi_myocardium.count() == 0 && blood != nullptr && myo != nullptr) {
    // Mid-wall on the lateral side, at the cycle-averaged wall position.
    const double shrink = 1.0 - 0.5 * myo->cardiac_scaling;
    const double mid = 0.5 * (blood->semi_axes.x + myo->semi_axes.x) * shrink;
    const Vec3 c = myo->center + Vec3{mid, 0, 0};
    const double h = std::max(1.0, std::floor(0.3 * blood->semi_axes.y / vox));
    roi_myocardium = box_around(mm_to_voxel(c, geometry), {1.0, h, h}, n);
  }
  if (roi_background.count() == 0 && body != nullptr) {
    // Anterior air gap between the body and the edge of the field of view.
    const double y0 = body->center.y + body->semi_axes.y + 3.0 * vox;
    const double y1 = 0.5 * geometry.fov_mm - 2.0 * vox;
    if (y1 > y0) {
      const Vec3 lo = mm_to_voxel({body->center.x - 0.3 * body->semi_axes.x, y0,
                                   body->center.z - 0.3 * body->semi_axes.z}, geometry);
      const Vec3 hi = mm_to_voxel({body->center.x + 0.3 * body->semi_axes.x, y1,
                                   body->center.z + 0.3 * body->semi_axes.z}, geometry);
      roi_background.lo = {to_index(lo.x, n), to_index(lo.y, n), to_index(lo.z, n)};
      roi_background.hi = {to_index(hi.x, n), to_index(hi.y, n), to_index(hi.z, n)};
    }
  }
  if (lines.empty() && blood != nullptr) {
    // Three medial-lateral lines across the lateral wall and three
    // superior-inferior lines across the inferior wall, all in the coronal
    // plane through the ventricle center.
    const Vec3 c = blood->center;
    const Vec3 a = blood->semi_axes;
    const double half = 10.0;
    for (double dz : {-10.0, 0.0, 10.0}) {
      const double x = a.x * std::sqrt(std::max(0.0, 1.0 - (dz * dz) / (a.z * a.z)));
      const Vec3 edge = c + Vec3{x, 0, dz};
      lines.push_back({mm_to_voxel(edge - Vec3{half, 0, 0}, geometry), mm_to_voxel(edge + Vec3{half, 0, 0}, geometry)});
    }
    for (double dx : {-8.0, 0.0, 8.0}) {
      const double z = a.z * std::sqrt(std::max(0.0, 1.0 - (dx * dx) / (a.x * a.x)));
      const Vec3 edge = c + Vec3{dx, 0, -z};
      lines.push_back({mm_to_voxel(edge + Vec3{0, 0, half}, geometry), mm_to_voxel(edge - Vec3{0, 0, half}, geometry)});
    }
  }
}

}  // namespace simba
