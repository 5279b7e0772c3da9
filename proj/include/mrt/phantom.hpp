#pragma once

#include <cstdint>
#include <string>

#include "mrt/tensorfield.hpp"

namespace mrt {

// Deterministic 64-bit generator with an explicit uniform mapping, so that a
// seed pins the phantom bit-for-bit on any platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : s_(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
  std::uint64_t s_;
};

// kind:
//   "gaussian"        anisotropic Gaussian blobs per component, smooth bump cut
//   "polynomial-bump" low-degree polynomial times a compact bump window
//   "i_delta-lifted"  lift_level-fold Kronecker lift of a lower-rank gaussian
//   "kernel-member"   bundle whose sphere-restricted weighted transforms all
//                     vanish: top even/odd ranks set from the lower ranks
struct PhantomSpec {
  std::string kind = "gaussian";
  int dim = 2;
  int top_rank = 2;
  int nodes = 64;
  double extent = 1.0;          // grid box is [-extent, extent]^dim
  double support_radius = 0.0;  // 0 = auto (fits the margin rule)
  std::uint64_t seed = 1;
  int lift_level = 1;           // only for i_delta-lifted

  GridSpec make_grid() const;
  double resolve_support() const;
};

// One random smooth scalar profile (bump-windowed Gaussian mixture).
std::function<double(const Vec&)> random_profile(Rng& rng, int dim, double radius);

SymTensorField make_phantom_field(const PhantomSpec& spec, int rank, Rng& rng);
TensorBundle make_phantom(const PhantomSpec& spec);

// Top-rank characterization used by "kernel-member": overwrite the highest
// even and odd ranks so that the bundle's sphere-bundle data cancels
// identically (each lower rank folds onto the top one with a minus sign).
void project_to_kernel(TensorBundle& F);

}  // namespace mrt
