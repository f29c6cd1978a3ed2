#include "grainfield/sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "grainfield/errors.hpp"
#include "grainfield/hash.hpp"

namespace grainfield {

namespace {

constexpr char kMagic[4] = {'G', 'F', 'L', 'D'};
constexpr std::uint32_t kVersion = 1;

// Coefficients a_j of Leb_d(W ⊕ sΞ̌⁰) = Σ_j a_j s^j.
std::vector<double> dilation_polynomial(const GrainSpec& spec, double len) {
  if (spec.shape == Shape::Cube) {
    if (spec.dimension == 1) return {len, 1.0};
    return {len * len, 2.0 * len, 1.0};
  }
  if (spec.dimension == 1) return {len, 2.0};
  return {len * len, 4.0 * len, std::numbers::pi};
}

// Number of nodes x_i with x_i <= v (resp. < v).
int count_le(const Window& w, double v) {
  const int n = w.n_grid;
  double guess = std::floor((v - w.lo) / w.spacing() - 0.5) + 1.0;
  int k = static_cast<int>(std::clamp(guess, 0.0, static_cast<double>(n)));
  while (k < n && w.node(k) <= v) ++k;
  while (k > 0 && w.node(k - 1) > v) --k;
  return k;
}

int count_lt(const Window& w, double v) {
  const int n = w.n_grid;
  double guess = std::ceil((v - w.lo) / w.spacing() - 0.5);
  int k = static_cast<int>(std::clamp(guess, 0.0, static_cast<double>(n)));
  while (k < n && w.node(k) < v) ++k;
  while (k > 0 && w.node(k - 1) >= v) --k;
  return k;
}

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw IntegrityError("field file truncated");
  }
  std::uint64_t u(int width) {
    unsigned char b[8];
    bytes(b, static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(u(4)); }
  std::uint64_t u64() { return u(8); }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  std::istream& in_;
};

}  // namespace

void Window::validate() const {
  if (dimension != 1 && dimension != 2) throw ConfigError("window dimension must be 1 or 2");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError("window needs hi > lo");
  if (n_grid < 2) throw ConfigError("window needs n_grid >= 2");
  const double total = std::pow(static_cast<double>(n_grid), dimension);
  if (total > 4e8) throw ConfigError("window grid too large");
}

std::size_t Window::node_count() const {
  const auto n = static_cast<std::size_t>(n_grid);
  return dimension == 1 ? n : n * n;
}

bool covers(const GrainSpec& spec, const Grain& g, const Point& t) {
  if (spec.shape == Shape::Cube) {
    for (int i = 0; i < spec.dimension; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (!(t[k] > g.center[k] && t[k] <= g.center[k] + g.scale)) return false;
    }
    return true;
  }
  if (spec.dimension == 1) return std::abs(t[0] - g.center[0]) <= g.scale;
  const double dx = t[0] - g.center[0], dy = t[1] - g.center[1];
  return dx * dx + dy * dy <= g.scale * g.scale;
}

bool hits_window(const GrainSpec& spec, const Grain& g, const Window& w) {
  if (spec.shape == Shape::Cube) {
    for (int i = 0; i < spec.dimension; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (!(g.center[k] + g.scale >= w.lo && g.center[k] <= w.hi)) return false;
    }
    return true;
  }
  double d2 = 0.0;
  for (int i = 0; i < spec.dimension; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double gap = std::max({w.lo - g.center[k], 0.0, g.center[k] - w.hi});
    d2 += gap * gap;
  }
  return d2 <= g.scale * g.scale;
}

double relevant_mass(const GrainSpec& spec, const Window& window, double intensity) {
  spec.validate();
  window.validate();
  if (window.dimension != spec.dimension) throw ConfigError("window and grain dimension differ");
  if (!(intensity > 0.0) || !std::isfinite(intensity)) throw ConfigError("intensity M must be positive");
  const auto a = dilation_polynomial(spec, window.length());
  double mass = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    mass += a[j] * spec.radius_moment(static_cast<double>(j) / spec.dimension);
  }
  return intensity * mass;
}

std::vector<Grain> sample_grains(const GrainSpec& spec, const Window& window, double intensity,
                                 Engine& engine) {
  const double mass = relevant_mass(spec, window, intensity);
  const int d = spec.dimension;
  // Mixture of Pareto(α − j/d, r0) marks with weights a_j E R^{j/d}.
  const auto a = dilation_polynomial(spec, window.length());
  std::vector<double> cum;
  double total = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    total += a[j] * spec.radius_moment(static_cast<double>(j) / d);
    cum.push_back(total);
  }
  std::poisson_distribution<std::int64_t> count_dist(mass);
  const std::int64_t n = count_dist(engine);
  std::vector<Grain> grains;
  grains.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    const double pick = uniform01(engine) * total;
    std::size_t j = 0;
    while (j + 1 < cum.size() && pick > cum[j]) ++j;
    const double shape = spec.alpha - static_cast<double>(j) / d;
    Grain g;
    g.volume = spec.r0 * std::pow(uniform01(engine), -1.0 / shape);
    g.scale = spec.linear_scale(g.volume);
    const double s = g.scale;
    if (spec.shape == Shape::Cube) {
      for (int i = 0; i < d; ++i) {
        g.center[static_cast<std::size_t>(i)] = window.lo - s + uniform01(engine) * (window.length() + s);
      }
    } else if (d == 1) {
      g.center[0] = window.lo - s + uniform01(engine) * (window.length() + 2.0 * s);
    } else {
      do {
        g.center[0] = window.lo - s + uniform01(engine) * (window.length() + 2.0 * s);
        g.center[1] = window.lo - s + uniform01(engine) * (window.length() + 2.0 * s);
      } while (!hits_window(spec, g, window));
    }
    grains.push_back(g);
  }
  return grains;
}

std::vector<Grain> sample_grains(const GrainSpec& spec, const Window& window, double intensity,
                                 std::uint64_t seed) {
  Engine engine = make_engine(seed);
  return sample_grains(spec, window, intensity, engine);
}

std::vector<std::int32_t> evaluate_field(const GrainSpec& spec, const std::vector<Grain>& grains,
                                         const Window& w) {
  w.validate();
  if (w.dimension != spec.dimension) throw ConfigError("window and grain dimension differ");
  const int n = w.n_grid;
  const auto un = static_cast<std::size_t>(n);
  std::vector<std::int32_t> counts(w.node_count(), 0);
  if (spec.dimension == 1) {
    std::vector<std::int64_t> diff(un + 1, 0);
    for (const auto& g : grains) {
      int i0, i1;
      if (spec.shape == Shape::Cube) {
        i0 = count_le(w, g.center[0]);
        i1 = count_le(w, g.center[0] + g.scale);
      } else {
        i0 = count_lt(w, g.center[0] - g.scale);
        i1 = count_le(w, g.center[0] + g.scale);
      }
      if (i1 <= i0) continue;
      ++diff[static_cast<std::size_t>(i0)];
      --diff[static_cast<std::size_t>(i1)];
    }
    std::int64_t run = 0;
    for (std::size_t i = 0; i < un; ++i) counts[i] = static_cast<std::int32_t>(run += diff[i]);
    return counts;
  }
  // d = 2: per-row difference arrays.
  std::vector<std::int64_t> diff((un + 1) * un, 0);
  auto row = [&](int j) { return static_cast<std::size_t>(j) * (un + 1); };
  std::int64_t everywhere = 0;
  for (const auto& g : grains) {
    if (spec.shape == Shape::Cube) {
      const int i0 = count_le(w, g.center[0]), i1 = count_le(w, g.center[0] + g.scale);
      const int j0 = count_le(w, g.center[1]), j1 = count_le(w, g.center[1] + g.scale);
      if (i1 <= i0 || j1 <= j0) continue;
      if (i0 == 0 && i1 == n && j0 == 0 && j1 == n) {
        ++everywhere;
        continue;
      }
      for (int j = j0; j < j1; ++j) {
        ++diff[row(j) + static_cast<std::size_t>(i0)];
        --diff[row(j) + static_cast<std::size_t>(i1)];
      }
      continue;
    }
    const double s = g.scale;
    const double x0 = w.node(0), x1 = w.node(n - 1);
    bool all = true;
    for (double cx : {x0, x1})
      for (double cy : {x0, x1}) all = all && covers(spec, g, {cx, cy});
    if (all) {
      ++everywhere;
      continue;
    }
    const int j0 = count_lt(w, g.center[1] - s), j1 = count_le(w, g.center[1] + s);
    for (int j = j0; j < j1; ++j) {
      const double dy = w.node(j) - g.center[1];
      const double half = std::sqrt(std::max(0.0, s * s - dy * dy));
      int i0 = count_lt(w, g.center[0] - half), i1 = count_le(w, g.center[0] + half);
      auto in = [&](int i) { return covers(spec, g, {w.node(i), w.node(j)}); };
      while (i0 < i1 && !in(i0)) ++i0;
      while (i0 > 0 && in(i0 - 1)) --i0;
      while (i1 > i0 && !in(i1 - 1)) --i1;
      while (i1 < n && in(i1)) ++i1;
      if (i1 <= i0) continue;
      ++diff[row(j) + static_cast<std::size_t>(i0)];
      --diff[row(j) + static_cast<std::size_t>(i1)];
    }
  }
  for (std::size_t j = 0; j < un; ++j) {
    std::int64_t run = everywhere;
    for (std::size_t i = 0; i < un; ++i) counts[j * un + i] = static_cast<std::int32_t>(run += diff[j * (un + 1) + i]);
  }
  return counts;
}

FieldSample sample_field(const GrainSpec& spec, const Window& window, double intensity,
                         std::uint64_t seed) {
  FieldSample f;
  f.spec = spec;
  f.window = window;
  f.intensity = intensity;
  f.seed = seed;
  f.grains = sample_grains(spec, window, intensity, seed);
  f.counts = evaluate_field(spec, f.grains, window);
  return f;
}

std::vector<double> center_normalize(const FieldSample& field) {
  const double m = field.intensity;
  const double mean = m * mean_mu(field.spec);
  const double inv = 1.0 / std::sqrt(m);
  std::vector<double> xi(field.counts.size());
  for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = (field.counts[i] - mean) * inv;
  return xi;
}

std::string spec_fingerprint(const GrainSpec& spec) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "grainfield-spec-v1;d=%d;shape=%s;alpha=%a;r0=%a", spec.dimension,
                to_string(spec.shape).c_str(), spec.alpha, spec.r0);
  return buf;
}

std::string spec_hash(const GrainSpec& spec) { return sha256_hex(spec_fingerprint(spec)); }

void save_field(const FieldSample& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  put_bytes(out, kMagic, 4);
  put_u32(out, kVersion);
  const Digest h = sha256(spec_fingerprint(field.spec));
  put_bytes(out, h.data(), h.size());
  put_u32(out, static_cast<std::uint32_t>(field.spec.dimension));
  put_u32(out, field.spec.shape == Shape::Ball ? 0u : 1u);
  put_f64(out, field.spec.alpha);
  put_f64(out, field.spec.r0);
  put_u32(out, static_cast<std::uint32_t>(field.window.dimension));
  put_f64(out, field.window.lo);
  put_f64(out, field.window.hi);
  put_u32(out, static_cast<std::uint32_t>(field.window.n_grid));
  put_f64(out, field.intensity);
  put_u64(out, field.seed);
  put_u64(out, field.grains.size());
  for (const auto& g : field.grains) {
    put_f64(out, g.center[0]);
    put_f64(out, g.center[1]);
    put_f64(out, g.volume);
    put_f64(out, g.scale);
  }
  put_u64(out, field.counts.size());
  for (auto c : field.counts) put_u32(out, static_cast<std::uint32_t>(c));
  if (!out) throw Error("write failed for " + path.string());
}

FieldSample load_field(const std::filesystem::path& path, const GrainSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  Reader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw IntegrityError(path.string() + ": not a field file");
  if (r.u32() != kVersion) throw IntegrityError(path.string() + ": unsupported field file version");
  Digest stored{};
  r.bytes(stored.data(), stored.size());
  if (stored != sha256(spec_fingerprint(spec))) {
    throw IntegrityError(path.string() + ": spec hash mismatch");
  }
  FieldSample f;
  f.spec.dimension = static_cast<int>(r.u32());
  f.spec.shape = r.u32() == 0 ? Shape::Ball : Shape::Cube;
  f.spec.alpha = r.f64();
  f.spec.r0 = r.f64();
  if (!(f.spec == spec)) throw IntegrityError(path.string() + ": spec fields disagree with hash");
  f.window.dimension = static_cast<int>(r.u32());
  f.window.lo = r.f64();
  f.window.hi = r.f64();
  f.window.n_grid = static_cast<int>(r.u32());
  f.window.validate();
  f.intensity = r.f64();
  f.seed = r.u64();
  const std::uint64_t ng = r.u64();
  if (ng > (std::uint64_t{1} << 36)) throw IntegrityError(path.string() + ": implausible grain count");
  f.grains.resize(static_cast<std::size_t>(ng));
  for (auto& g : f.grains) {
    g.center[0] = r.f64();
    g.center[1] = r.f64();
    g.volume = r.f64();
    g.scale = r.f64();
  }
  const std::uint64_t nc = r.u64();
  if (nc != f.window.node_count()) throw IntegrityError(path.string() + ": count grid size mismatch");
  f.counts.resize(static_cast<std::size_t>(nc));
  for (auto& c : f.counts) c = static_cast<std::int32_t>(r.u32());
  if (in.peek() != std::char_traits<char>::eof()) throw IntegrityError(path.string() + ": trailing bytes");
  return f;
}

FieldSample sample_field_cached(const GrainSpec& spec, const Window& window, double intensity,
                                std::uint64_t seed, const std::filesystem::path& cache_dir) {
  if (cache_dir.empty()) return sample_field(spec, window, intensity, seed);
  char key[256];
  std::snprintf(key, sizeof key, "%s;window=%d,%a,%a,%d;M=%a;seed=%llu", spec_fingerprint(spec).c_str(),
                window.dimension, window.lo, window.hi, window.n_grid, intensity,
                static_cast<unsigned long long>(seed));
  const auto path = cache_dir / (sha256_hex(key) + ".gfld");
  if (std::filesystem::exists(path)) {
    FieldSample f = load_field(path, spec);
    if (!(f.window == window) || f.intensity != intensity || f.seed != seed) {
      throw IntegrityError(path.string() + ": cached field does not match its key");
    }
    return f;
  }
  FieldSample f = sample_field(spec, window, intensity, seed);
  std::filesystem::create_directories(cache_dir);
  auto tmp = path;
  tmp += ".tmp" + std::to_string(seed);
  save_field(f, tmp);
  std::filesystem::rename(tmp, path);
  return f;
}

}  // namespace grainfield
