#include "simba/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace simba {

std::vector<double> spoke_radii(std::size_t n_samples) {
  std::vector<double> radii(n_samples);
  const auto center = static_cast<double>(n_samples / 2);
  for (std::size_t j = 0; j < n_samples; ++j) {
    radii[j] = (static_cast<double>(j) - center) / static_cast<double>(n_samples);
  }
  return radii;
}

RadialTrajectory generate_phyllotaxis(std::size_t n_interleaves, std::size_t n_readouts,
                                      std::size_t n_samples, double tr) {
  if (n_interleaves < 1 || n_readouts < 1) {
    throw std::invalid_argument("generate_phyllotaxis: need at least one interleaf and readout");
  }
  if (n_samples < 2) throw std::invalid_argument("generate_phyllotaxis: n_samples must be >= 2");
  if (!(tr > 0.0)) throw std::invalid_argument("generate_phyllotaxis: tr must be positive");

  RadialTrajectory traj;
  traj.n_interleaves = n_interleaves;
  traj.n_readouts = n_readouts;
  traj.n_samples = n_samples;
  traj.tr = tr;
  traj.si_index = 0;
  traj.radii = spoke_radii(n_samples);

  const std::size_t total = n_interleaves * n_readouts;
  traj.directions.resize(total);
  for (std::size_t n = 0; n < total; ++n) {
    const std::size_t interleaf = n % n_interleaves;
    const std::size_t readout = n / n_interleaves;
    Vec3 d{0.0, 0.0, 1.0};
    if (readout != traj.si_index) {
      const double polar =
          0.5 * kPi * std::sqrt(static_cast<double>(n) / static_cast<double>(total));
      const double azimuth = std::fmod(static_cast<double>(n) * kGoldenAngle, 2.0 * kPi);
      d = {std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth),
           std::cos(polar)};
    }
    traj.directions[traj.spoke_index(interleaf, readout)] = d;
  }
  return traj;
}

std::vector<Vec3> gather_directions(const RadialTrajectory& traj,
                                    std::span<const std::size_t> spokes) {
  std::vector<Vec3> out;
  out.reserve(spokes.size());
  for (std::size_t s : spokes) out.push_back(traj.directions.at(s));
  return out;
}

std::vector<std::size_t> imaging_spokes(const RadialTrajectory& traj) {
  std::vector<std::size_t> out;
  out.reserve(traj.n_spokes());
  for (std::size_t s = 0; s < traj.n_spokes(); ++s) {
    if (!traj.is_si(s)) out.push_back(s);
  }
  return out;
}

namespace {

struct Neighbor {
  double angle;
  std::size_t index;
  bool operator<(const Neighbor& o) const {
    return angle < o.angle || (angle == o.angle && index < o.index);
  }
};

double great_circle(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(a.dot(b), -1.0, 1.0));
}

// Keeps the n best neighbors in a small sorted buffer.
void offer(std::vector<Neighbor>& best, std::size_t n, Neighbor cand) {
  if (best.size() == n && !(cand < best.back())) return;
  auto pos = std::upper_bound(best.begin(), best.end(), cand);
  best.insert(pos, cand);
  if (best.size() > n) best.pop_back();
}

double mean_angle(const std::vector<Neighbor>& best) {
  double sum = 0.0;
  for (const auto& nb : best) sum += nb.angle;
  return sum / static_cast<double>(best.size());
}

void check_neighbor_input(std::size_t n_points, std::size_t n_neighbors) {
  if (n_neighbors < 1) throw std::invalid_argument("great_circle_uniformity: n_neighbors must be >= 1");
  if (n_points < n_neighbors + 1) {
    throw std::invalid_argument("great_circle_uniformity: need at least n_neighbors + 1 directions");
  }
}

}  // namespace

std::vector<double> neighbor_mean_distances_exhaustive(std::span<const Vec3> directions,
                                                       std::size_t n_neighbors) {
  check_neighbor_input(directions.size(), n_neighbors);
  const std::size_t n = directions.size();
  std::vector<double> means(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Neighbor> best;
    best.reserve(n_neighbors + 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      offer(best, n_neighbors, {great_circle(directions[i], directions[j]), j});
    }
    means[i] = mean_angle(best);
  }
  return means;
}

std::vector<double> neighbor_mean_distances(std::span<const Vec3> directions,
                                            std::size_t n_neighbors) {
  check_neighbor_input(directions.size(), n_neighbors);
  const std::size_t n = directions.size();
  if (n < 2048) return neighbor_mean_distances_exhaustive(directions, n_neighbors);

  // Uniform cell grid over [-1, 1]^3 sized for a few points per surface cell.
  const double spacing = 2.0 * std::sqrt(4.0 * kPi / static_cast<double>(n));
  const auto dim = static_cast<long>(std::clamp(std::ceil(2.0 / spacing), 1.0, 200.0));
  const double h = 2.0 / static_cast<double>(dim);
  auto cell_coord = [&](double v) {
    return std::clamp(static_cast<long>(std::floor((v + 1.0) / h)), 0L, dim - 1);
  };
  auto cell_id = [&](long cx, long cy, long cz) {
    return static_cast<std::size_t>((cz * dim + cy) * dim + cx);
  };

  const std::size_t n_cells = static_cast<std::size_t>(dim * dim * dim);
  std::vector<std::size_t> offsets(n_cells + 1, 0);
  std::vector<std::size_t> point_cell(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& d = directions[i];
    point_cell[i] = cell_id(cell_coord(d.x), cell_coord(d.y), cell_coord(d.z));
    ++offsets[point_cell[i] + 1];
  }
  for (std::size_t c = 0; c < n_cells; ++c) offsets[c + 1] += offsets[c];
  std::vector<std::size_t> members(n);
  {
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (std::size_t i = 0; i < n; ++i) members[cursor[point_cell[i]]++] = i;
  }

  std::vector<double> means(n);
#pragma omp parallel for schedule(dynamic, 256)
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = directions[i];
    const long cx = cell_coord(p.x), cy = cell_coord(p.y), cz = cell_coord(p.z);
    std::vector<Neighbor> best;
    best.reserve(n_neighbors + 1);
    for (long ring = 0; ring <= dim; ++ring) {
      // Visit only the cells on the surface of the (2 ring + 1)^3 block.
      for (long z = cz - ring; z <= cz + ring; ++z) {
        if (z < 0 || z >= dim) continue;
        for (long y = cy - ring; y <= cy + ring; ++y) {
          if (y < 0 || y >= dim) continue;
          const bool yz_face = std::abs(z - cz) == ring || std::abs(y - cy) == ring;
          const long step = yz_face ? 1 : 2 * ring;
          for (long x = cx - ring; x <= cx + ring; x += (step > 0 ? step : 1)) {
            if (x < 0 || x >= dim) continue;
            const std::size_t c = cell_id(x, y, z);
            for (std::size_t m = offsets[c]; m < offsets[c + 1]; ++m) {
              const std::size_t j = members[m];
              if (j == i) continue;
              offer(best, n_neighbors, {great_circle(p, directions[j]), j});
            }
          }
        }
      }
      // Unvisited points are at chord distance >= ring * h from p.
      if (best.size() == n_neighbors) {
        const double chord = static_cast<double>(ring) * h;
        const double bound = chord >= 2.0 ? kPi : 2.0 * std::asin(chord / 2.0);
        if (best.back().angle < bound - 1e-12) break;
      }
    }
    means[i] = mean_angle(best);
  }
  return means;
}

UniformityReport great_circle_uniformity(std::span<const Vec3> directions,
                                         std::size_t n_neighbors) {
  const auto means = neighbor_mean_distances(directions, n_neighbors);
  double sum = 0.0;
  for (double m : means) sum += m;
  const double mean = sum / static_cast<double>(means.size());
  double ss = 0.0;
  for (double m : means) ss += (m - mean) * (m - mean);
  const double sd = std::sqrt(ss / static_cast<double>(means.size()));
  return {mean, mean > 0.0 ? sd / mean : 0.0, n_neighbors};
}

double radial_nyquist_fraction(std::size_t n_spokes, std::size_t matrix_size) {
  if (n_spokes < 1) throw std::invalid_argument("radial_nyquist_fraction: n_spokes must be >= 1");
  if (matrix_size < 2) throw std::invalid_argument("radial_nyquist_fraction: matrix_size must be >= 2");
  const double n = static_cast<double>(matrix_size);
  return static_cast<double>(n_spokes) / (kPi * n * n / 2.0);
}

}  // namespace simba
