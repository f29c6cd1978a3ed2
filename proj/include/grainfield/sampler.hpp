#ifndef GRAINFIELD_SAMPLER_HPP_
#define GRAINFIELD_SAMPLER_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grainfield/model.hpp"
#include "grainfield/rng.hpp"

namespace grainfield {

// Axis-aligned observation box [lo, hi]^d with n_grid nodes per axis at
// lo + (i + 1/2) h, h = (hi − lo) / n_grid.
struct Window {
  int dimension = 1;
  double lo = 0.0;
  double hi = 1.0;
  int n_grid = 2;

  void validate() const;
  double spacing() const { return (hi - lo) / n_grid; }
  double node(int i) const { return lo + (i + 0.5) * spacing(); }
  double length() const { return hi - lo; }
  std::size_t node_count() const;

  bool operator==(const Window&) const = default;
};

struct Grain {
  Point center{0.0, 0.0};
  double volume = 0.0;  // mark r
  double scale = 0.0;   // r^{1/d}

  bool operator==(const Grain&) const = default;
};

// Coverage predicate t ∈ u + r^{1/d}Ξ⁰: half-open cubes u_i < t_i <= u_i + s,
// closed balls ‖t − u‖ <= s.
bool covers(const GrainSpec& spec, const Grain& grain, const Point& t);
// Whether the grain meets the closed window box.
bool hits_window(const GrainSpec& spec, const Grain& grain, const Window& window);

struct FieldSample {
  GrainSpec spec;
  Window window;
  double intensity = 1.0;  // M
  std::uint64_t seed = 0;
  std::vector<Grain> grains;
  std::vector<std::int32_t> counts;  // row-major, index iy * n_grid + ix

  std::int32_t at(int ix, int iy = 0) const {
    return counts[static_cast<std::size_t>(iy) * static_cast<std::size_t>(window.n_grid) +
                  static_cast<std::size_t>(ix)];
  }
};

// Λ = M ∫ Leb_d(W ⊕ r^{1/d}Ξ̌⁰) f(r) dr, in closed form.
double relevant_mass(const GrainSpec& spec, const Window& window, double intensity);

// Exact draw of the grains of the Poisson process with intensity M du F(dr)
// that hit the window. Per grain the stream supplies one uniform for the
// mixture component, one for the mark and d for the center (balls in d = 2
// repeat the center draw until accepted).
std::vector<Grain> sample_grains(const GrainSpec& spec, const Window& window, double intensity,
                                 Engine& engine);
std::vector<Grain> sample_grains(const GrainSpec& spec, const Window& window, double intensity,
                                 std::uint64_t seed);

// Node counts #{grains covering the node}; O(grains + covered rows + nodes).
std::vector<std::int32_t> evaluate_field(const GrainSpec& spec, const std::vector<Grain>& grains,
                                         const Window& window);

FieldSample sample_field(const GrainSpec& spec, const Window& window, double intensity,
                         std::uint64_t seed);

// ξ(t) = (X_M(t) − M μ) / √M.
std::vector<double> center_normalize(const FieldSample& field);

// Canonical text of a grain spec and its SHA-256, used to key cached fields.
std::string spec_fingerprint(const GrainSpec& spec);
std::string spec_hash(const GrainSpec& spec);

// Little-endian binary dump: magic "GFLD", version, spec hash, window,
// M, seed, grains, counts.
void save_field(const FieldSample& field, const std::filesystem::path& path);
// Throws IntegrityError on a malformed file or when the stored spec hash
// differs from `spec`.
FieldSample load_field(const std::filesystem::path& path, const GrainSpec& spec);

// sample_field through a directory of saved fields keyed by (spec, window,
// M, seed); an empty directory path disables the cache.
FieldSample sample_field_cached(const GrainSpec& spec, const Window& window, double intensity,
                                std::uint64_t seed, const std::filesystem::path& cache_dir);

}  // namespace grainfield

#endif  // GRAINFIELD_SAMPLER_HPP_
