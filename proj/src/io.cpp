#include "simba/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <sstream>

#include "simba/error.hpp"

namespace simba {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::string_view kTrajMagic = "SIMBTRAJ";
constexpr std::string_view kLabelMagic = "SIMBLABL";
constexpr std::string_view kKspaceMagic = "SIMBKSPC";
constexpr std::string_view kRefMagic = "SIMBREFM";
constexpr std::size_t kLabelRecord = 3 * 8 + 2;

class Writer {
 public:
  void magic(std::string_view m) { out_.append(m); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void count(std::size_t n, const char* what) {
    if (n > 0xFFFFFFFFu) throw std::invalid_argument(std::string(what) + " does not fit in 32 bits");
    u32(static_cast<std::uint32_t>(n));
  }
  void raw(std::string_view s) { out_.append(s); }
  void reserve(std::size_t n) { out_.reserve(n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes, std::size_t base = 0) : in_(bytes), base_(base) {}

  std::size_t offset() const { return base_ + pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("truncated file while reading ") + what, offset());
  }
  void magic(std::string_view m) {
    need(m.size(), "magic");
    if (in_.substr(pos_, m.size()) != m) throw FormatError("bad magic, expected " + std::string(m), offset());
    pos_ += m.size();
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  void version() {
    const std::size_t at = offset();
    const auto v = u32("version");
    if (v != kVersion) throw FormatError("unsupported version " + std::to_string(v), at);
  }
  std::string_view rest() {
    auto r = in_.substr(pos_);
    pos_ = in_.size();
    return r;
  }
  void expect_end() const {
    if (remaining() != 0) throw FormatError(std::to_string(remaining()) + " trailing bytes", offset());
  }

 private:
  std::string_view in_;
  std::size_t base_ = 0;
  std::size_t pos_ = 0;
};

void check_positive(std::size_t v, std::size_t at, const char* what) {
  if (v == 0) throw FormatError(std::string(what) + " must be positive", at);
}

double checked_tr(Reader& r) {
  const std::size_t at = r.offset();
  const double tr = r.f64("tr");
  if (!(tr > 0.0) || !std::isfinite(tr)) throw FormatError("tr must be positive", at);
  return tr;
}

void encode_labels_into(Writer& w, const GroundTruthLabels& labels) {
  if (labels.readouts.size() != labels.n_interleaves * labels.n_readouts) {
    throw std::invalid_argument("encode_labels: readout count does not match dimensions");
  }
  w.magic(kLabelMagic);
  w.u32(kVersion);
  w.count(labels.n_interleaves, "n_interleaves");
  w.count(labels.n_readouts, "n_readouts");
  w.f64(labels.tr);
  for (const auto& l : labels.readouts) {
    w.f64(l.cardiac_phase);
    w.f64(l.respiratory_phase);
    w.f64(l.respiratory_displacement);
    w.u8(static_cast<std::uint8_t>(l.cardiac_bin));
    w.u8(l.respiratory_bin);
  }
  w.count(labels.r_wave_times.size(), "n_beats");
  for (double t : labels.r_wave_times) w.f64(t);
}

GroundTruthLabels decode_labels_from(Reader& r) {
  GroundTruthLabels labels;
  r.magic(kLabelMagic);
  r.version();
  std::size_t at = r.offset();
  labels.n_interleaves = r.u32("n_interleaves");
  check_positive(labels.n_interleaves, at, "n_interleaves");
  at = r.offset();
  labels.n_readouts = r.u32("n_readouts");
  check_positive(labels.n_readouts, at, "n_readouts");
  labels.tr = checked_tr(r);
  const std::size_t n = labels.n_interleaves * labels.n_readouts;
  r.need(n * kLabelRecord, "label records");
  labels.readouts.resize(n);
  for (auto& l : labels.readouts) {
    l.cardiac_phase = r.f64("cardiac_phase");
    l.respiratory_phase = r.f64("respiratory_phase");
    l.respiratory_displacement = r.f64("respiratory_displacement");
    at = r.offset();
    const auto bin = r.u8("cardiac_bin");
    if (bin > 1) throw FormatError("cardiac_bin must be 0 or 1", at);
    l.cardiac_bin = static_cast<CardiacBin>(bin);
    at = r.offset();
    l.respiratory_bin = r.u8("respiratory_bin");
    if (l.respiratory_bin == 0) throw FormatError("respiratory_bin must be >= 1", at);
  }
  const auto n_beats = r.u32("n_beats");
  r.need(static_cast<std::size_t>(n_beats) * 8, "R-wave times");
  labels.r_wave_times.resize(n_beats);
  for (auto& t : labels.r_wave_times) t = r.f64("R-wave time");
  return labels;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string encode_trajectory(const RadialTrajectory& traj) {
  Writer w;
  w.magic(kTrajMagic);
  w.u32(kVersion);
  w.count(traj.n_interleaves, "n_interleaves");
  w.count(traj.n_readouts, "n_readouts");
  w.count(traj.n_samples, "n_samples");
  w.f64(traj.tr);
  for (const auto& d : traj.directions) {
    w.f64(d.x);
    w.f64(d.y);
    w.f64(d.z);
  }
  return w.take();
}

RadialTrajectory decode_trajectory(std::string_view bytes) {
  Reader r(bytes);
  r.magic(kTrajMagic);
  r.version();
  RadialTrajectory traj;
  std::size_t at = r.offset();
  traj.n_interleaves = r.u32("n_interleaves");
  check_positive(traj.n_interleaves, at, "n_interleaves");
  at = r.offset();
  traj.n_readouts = r.u32("n_readouts");
  check_positive(traj.n_readouts, at, "n_readouts");
  at = r.offset();
  traj.n_samples = r.u32("n_samples");
  check_positive(traj.n_samples, at, "n_samples");
  traj.tr = checked_tr(r);
  const std::size_t n = traj.n_interleaves * traj.n_readouts;
  if (r.remaining() != n * 24) {
    throw FormatError("direction block holds " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(n * 24),
                      r.offset());
  }
  traj.directions.resize(n);
  for (auto& d : traj.directions) {
    at = r.offset();
    d.x = r.f64("direction");
    d.y = r.f64("direction");
    d.z = r.f64("direction");
    if (!(std::abs(d.norm() - 1.0) < 1e-6)) throw FormatError("direction is not a unit vector", at);
  }
  traj.radii = spoke_radii(traj.n_samples);
  return traj;
}

std::string encode_labels(const GroundTruthLabels& labels) {
  Writer w;
  encode_labels_into(w, labels);
  return w.take();
}

GroundTruthLabels decode_labels(std::string_view bytes) {
  Reader r(bytes);
  auto labels = decode_labels_from(r);
  r.expect_end();
  return labels;
}

std::size_t kspace_file_size(const KSpaceData& k, const GroundTruthLabels& labels) {
  const std::size_t header = 8 + 5 * 4 + 8;
  const std::size_t data = k.n_coils * k.n_spokes() * k.n_samples * 8;
  const std::size_t label_block = 8 + 3 * 4 + 8 + labels.readouts.size() * kLabelRecord + 4 +
                                  labels.r_wave_times.size() * 8;
  return header + data + label_block;
}

std::string encode_kspace(const KSpaceData& k, const GroundTruthLabels& labels) {
  if (k.samples.size() != k.n_coils * k.n_spokes() * k.n_samples) {
    throw std::invalid_argument("encode_kspace: sample count does not match dimensions");
  }
  if (labels.n_interleaves != k.n_interleaves || labels.n_readouts != k.n_readouts) {
    throw std::invalid_argument("encode_kspace: labels do not match k-space dimensions");
  }
  if (k.si_index != 0) throw std::invalid_argument("encode_kspace: the format assumes the SI readout comes first");
  Writer w;
  w.reserve(kspace_file_size(k, labels));
  w.magic(kKspaceMagic);
  w.u32(kVersion);
  w.count(k.n_coils, "n_coils");
  w.count(k.n_interleaves, "n_interleaves");
  w.count(k.n_readouts, "n_readouts");
  w.count(k.n_samples, "n_samples");
  w.f64(k.tr);
  for (const auto& s : k.samples) {
    w.f32(s.real());
    w.f32(s.imag());
  }
  encode_labels_into(w, labels);
  return w.take();
}

KSpaceFile decode_kspace(std::string_view bytes) {
  Reader r(bytes);
  r.magic(kKspaceMagic);
  r.version();
  KSpaceFile f;
  auto& k = f.kspace;
  std::size_t at = r.offset();
  k.n_coils = r.u32("n_coils");
  check_positive(k.n_coils, at, "n_coils");
  at = r.offset();
  k.n_interleaves = r.u32("n_interleaves");
  check_positive(k.n_interleaves, at, "n_interleaves");
  at = r.offset();
  k.n_readouts = r.u32("n_readouts");
  check_positive(k.n_readouts, at, "n_readouts");
  at = r.offset();
  k.n_samples = r.u32("n_samples");
  check_positive(k.n_samples, at, "n_samples");
  k.tr = checked_tr(r);
  k.si_index = 0;
  const std::size_t n = k.n_coils * k.n_spokes() * k.n_samples;
  r.need(n * 8, "samples");
  k.samples.resize(n);
  for (auto& s : k.samples) {
    const float re = r.f32("sample");
    const float im = r.f32("sample");
    s = {re, im};
  }
  const std::size_t label_at = r.offset();
  f.labels = decode_labels_from(r);
  r.expect_end();
  if (f.labels.n_interleaves != k.n_interleaves || f.labels.n_readouts != k.n_readouts) {
    throw FormatError("label block dimensions differ from the k-space header", label_at);
  }
  if (f.labels.tr != k.tr) throw FormatError("label block tr differs from the k-space header", label_at);
  return f;
}

std::string encode_volume_raw(const RealVolume& voxels) {
  Writer w;
  w.reserve(voxels.size() * 4);
  for (double v : voxels.values()) w.f32(static_cast<float>(v));
  return w.take();
}

std::string encode_volume_sidecar(const Volume& volume, const VolumeMeta& meta) {
  nlohmann::ordered_json j;
  j["format"] = "simba-volume";
  j["version"] = kVersion;
  j["dtype"] = "float32-le";
  j["order"] = "x-fastest";
  j["shape"] = {volume.voxels.nx(), volume.voxels.ny(), volume.voxels.nz()};
  j["voxel_mm"] = volume.voxel_mm;
  j["fov_mm"] = meta.fov_mm;
  j["provenance"] = {{"method", volume.provenance.method},
                     {"n_spokes_used", volume.provenance.n_spokes_used},
                     {"k_selected", volume.provenance.k_selected},
                     {"include_si", meta.include_si},
                     {"selected_interleaves", meta.selected_interleaves}};
  j["acquisition"] = {{"n_coils", meta.n_coils},
                      {"n_interleaves", meta.n_interleaves},
                      {"n_readouts", meta.n_readouts},
                      {"n_samples", meta.n_samples},
                      {"tr", meta.tr}};
  return j.dump(2) + "\n";
}

VolumeFile decode_volume(std::string_view raw, std::string_view sidecar) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(sidecar);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("sidecar is not valid JSON: ") + e.what(), e.byte);
  }
  VolumeFile f;
  try {
    if (j.at("format").get<std::string>() != "simba-volume") throw FormatError("sidecar format is not simba-volume", 0);
    if (j.at("version").get<std::uint32_t>() != kVersion) throw FormatError("unsupported sidecar version", 0);
    if (j.at("dtype").get<std::string>() != "float32-le") throw FormatError("unsupported dtype", 0);
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3 || shape[0] == 0 || shape[1] == 0 || shape[2] == 0) {
      throw FormatError("sidecar shape must have three positive extents", 0);
    }
    f.volume.voxel_mm = j.at("voxel_mm").get<double>();
    f.meta.fov_mm = j.at("fov_mm").get<double>();
    const auto& p = j.at("provenance");
    f.volume.provenance.method = p.at("method").get<std::string>();
    f.volume.provenance.n_spokes_used = p.at("n_spokes_used").get<std::size_t>();
    f.volume.provenance.k_selected = p.at("k_selected").get<std::size_t>();
    f.meta.include_si = p.at("include_si").get<bool>();
    f.meta.selected_interleaves = p.at("selected_interleaves").get<std::vector<std::size_t>>();
    const auto& a = j.at("acquisition");
    f.meta.n_coils = a.at("n_coils").get<std::size_t>();
    f.meta.n_interleaves = a.at("n_interleaves").get<std::size_t>();
    f.meta.n_readouts = a.at("n_readouts").get<std::size_t>();
    f.meta.n_samples = a.at("n_samples").get<std::size_t>();
    f.meta.tr = a.at("tr").get<double>();
    f.volume.voxels = RealVolume(shape[0], shape[1], shape[2]);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("sidecar field error: ") + e.what(), 0);
  }
  Reader r(raw);
  const std::size_t expected = f.volume.voxels.size() * 4;
  if (raw.size() != expected) {
    throw FormatError("raw volume holds " + std::to_string(raw.size()) + " bytes, sidecar implies " +
                          std::to_string(expected),
                      std::min(raw.size(), expected));
  }
  for (auto& v : f.volume.voxels.values()) v = r.f32("voxel");
  return f;
}

void write_volume(const std::filesystem::path& stem, const Volume& volume, const VolumeMeta& meta) {
  write_file(stem.string() + ".raw", encode_volume_raw(volume.voxels));
  write_file(stem.string() + ".json", encode_volume_sidecar(volume, meta));
}

VolumeFile read_volume(const std::filesystem::path& stem) {
  std::filesystem::path base = stem;
  if (base.extension() == ".raw" || base.extension() == ".json") base.replace_extension();
  const auto raw_path = base.string() + ".raw";
  const auto json_path = base.string() + ".json";
  try {
    return decode_volume(read_file(raw_path), read_file(json_path));
  } catch (const FormatError& e) {
    throw FormatError(base.string() + ": " + e.detail(), e.offset());
  }
}

std::string encode_reference_csv(const ReferenceMatrix& s) {
  std::string out;
  for (Eigen::Index c = 0; c < s.data.cols(); ++c) {
    for (Eigen::Index r = 0; r < s.data.rows(); ++r) {
      if (r > 0) out.push_back(',');
      out += format_double(s.data(r, c));
    }
    out.push_back('\n');
  }
  return out;
}

std::string encode_reference_binary(const ReferenceMatrix& s) {
  Writer w;
  w.magic(kRefMagic);
  w.u32(kVersion);
  w.count(static_cast<std::size_t>(s.data.rows()), "rows");
  w.count(static_cast<std::size_t>(s.data.cols()), "cols");
  for (Eigen::Index r = 0; r < s.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < s.data.cols(); ++c) w.f32(static_cast<float>(s.data(r, c)));
  }
  return w.take();
}

std::string encode_cluster_report(const Eigen::MatrixXd& points, const KSelection& selection,
                                  std::size_t n_selected_readouts, std::size_t n_total_readouts) {
  const auto& a = selection.assignment;
  std::ostringstream os;
  os << "interleaf,label,distance_to_centroid\n";
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const double d = (points.col(static_cast<Eigen::Index>(i)) - a.centroids.col(static_cast<Eigen::Index>(a.labels[i]))).norm();
    os << i << ',' << a.labels[i] << ',' << format_double(d) << '\n';
  }
  os << "# k_star," << selection.k_star << '\n';
  os << "# k,criterion\n";
  for (std::size_t i = 0; i < selection.k_values.size(); ++i) {
    os << "# " << selection.k_values[i] << ',' << format_double(selection.criteria[i]) << '\n';
  }
  os << "# cluster_sizes";
  for (auto s : a.cluster_sizes()) os << ',' << s;
  os << '\n';
  const std::size_t largest_label = a.largest_cluster.empty() ? 0 : a.labels[a.largest_cluster.front()];
  os << "# largest_cluster_label," << largest_label << '\n';
  os << "# largest_cluster_interleaves," << a.largest_cluster.size() << '\n';
  os << "# selected_interleaf_fraction,"
     << format_double(static_cast<double>(a.largest_cluster.size()) / static_cast<double>(a.labels.size())) << '\n';
  os << "# selected_readouts," << n_selected_readouts << '\n';
  os << "# selected_readout_fraction,"
     << format_double(n_total_readouts == 0 ? 0.0
                                            : static_cast<double>(n_selected_readouts) / static_cast<double>(n_total_readouts))
     << '\n';
  os << "# inertia," << format_double(a.inertia) << '\n';
  return os.str();
}

namespace {

void write_png(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels, std::size_t width,
               std::size_t height) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw PipelineError("cannot write '" + path.string() + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw PipelineError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw PipelineError("libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t row = 0; row < height; ++row) {
    // Flip so the second axis points up.
    png_write_row(png, const_cast<png_bytep>(pixels.data() + (height - 1 - row) * width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_center_slices(const std::filesystem::path& stem, const RealVolume& v, double window, double level) {
  if (v.size() == 0) throw std::invalid_argument("write_center_slices: empty volume");
  if (window <= 0.0) {
    const auto [lo, hi] = std::minmax_element(v.values().begin(), v.values().end());
    window = std::max(*hi - *lo, 1e-30);
    level = *lo + 0.5 * window;
  }
  auto gray = [&](double x) {
    const double t = (x - (level - 0.5 * window)) / window;
    return static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
  };
  const std::size_t cx = v.nx() / 2, cy = v.ny() / 2, cz = v.nz() / 2;
  {
    std::vector<std::uint8_t> px(v.nx() * v.ny());
    for (std::size_t y = 0; y < v.ny(); ++y)
      for (std::size_t x = 0; x < v.nx(); ++x) px[y * v.nx() + x] = gray(v(x, y, cz));
    write_png(stem.string() + "_axial.png", px, v.nx(), v.ny());
  }
  {
    std::vector<std::uint8_t> px(v.nx() * v.nz());
    for (std::size_t z = 0; z < v.nz(); ++z)
      for (std::size_t x = 0; x < v.nx(); ++x) px[z * v.nx() + x] = gray(v(x, cy, z));
    write_png(stem.string() + "_coronal.png", px, v.nx(), v.nz());
  }
  {
    std::vector<std::uint8_t> px(v.ny() * v.nz());
    for (std::size_t z = 0; z < v.nz(); ++z)
      for (std::size_t y = 0; y < v.ny(); ++y) px[z * v.ny() + y] = gray(v(cx, y, z));
    write_png(stem.string() + "_sagittal.png", px, v.ny(), v.nz());
  }
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PipelineError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PipelineError("write failed for '" + path.string() + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace simba
