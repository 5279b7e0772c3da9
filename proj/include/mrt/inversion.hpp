#pragma once

// Explicit inversion of momentum ray transforms.
//
//  - recover_component reads the plain (zero-moment) ray transform of one
//    canonical component of the rank-j part off the moment data I^{m,k}F,
//    k = 0..j, by finite differencing in x and xi and applying the Euler-type
//    operator P_{m-j}. Everything is pointwise in the ray, so the caller can
//    feed any moment source: sampled bundles, cached evaluators, or closures.
//  - invert_scalar_xray is a filtered backprojection for scalar X-ray data in
//    the plane, with a closed-form band-limited ramp kernel.
//  - full_inverse_pipeline chains the two: component recovery turns moment
//    data into per-component scalar X-ray data, backprojection turns that
//    into a rank-by-rank reconstruction on a grid (slice-stacked in dim 3).

#include <functional>
#include <string>
#include <vector>

#include "mrt/identities.hpp"
#include "mrt/raytransform.hpp"
#include "mrt/tensorfield.hpp"

namespace mrt {

// Value of (I f^{(j)})_{i1..ij} at `ray`, recovered from the moments
// data(k, x, xi), k = 0..j, of a bundle with top rank m. Requires
// 0 <= j <= min(m, 3) and m <= 4; the mixed x/xi derivatives go up to
// order j and the xi-only operator up to order m-j.
double recover_component(const MomentFn& data, int m, int j, const MultiIndex& idx,
                         const Ray& ray, int dim, const FDStencil& stencil = {});

// j = 0 case: (1/m!) P_m applied to the zeroth moment, up to sign. Shares the
// code path of recover_component, so the two agree bit for bit.
double recover_scalar_moment(const MomentFn& data, int m, const Ray& ray, int dim,
                             const FDStencil& stencil = {});

// Convenience overload: forward-models the moments of F on the fly through a
// per-call cache.
double recover_component(const TensorBundle& F, int j, const MultiIndex& idx, const Ray& ray,
                         const QuadratureSpec& quad = {}, const FDStencil& stencil = {});

// ---------------------------------------------------------------------------
// Scalar parallel-beam data in the plane. Angle a covers phi = pi*a/angles
// over [0, pi); offsets are uniform on [-extent, extent] including endpoints.
// The ray at (a, s) is point + t*direction with point = s*(-sin phi, cos phi)
// and direction = (cos phi, sin phi).

struct ParallelBeamData {
  int angles = 0;
  int offsets = 0;
  double extent = 0.0;
  std::vector<double> samples;  // angle-major: samples[a*offsets + s]

  double angle(int a) const { return M_PI * double(a) / double(angles); }
  double offset(int s) const {
    return -extent + 2.0 * extent * double(s) / double(offsets - 1);
  }
  double& at(int a, int s) { return samples[std::size_t(a) * std::size_t(offsets) + std::size_t(s)]; }
  double at(int a, int s) const { return samples[std::size_t(a) * std::size_t(offsets) + std::size_t(s)]; }
  void validate() const;
};

// Scalar line integral at a given point and (unit) direction.
using LineIntegralFn = std::function<double(const Vec& point, const Vec& direction)>;

ParallelBeamData make_parallel_beam(const LineIntegralFn& xray, int angles, int offsets,
                                    double extent, int threads = 0);

// Filtered backprojection onto a 2-D grid. The ramp filter is band-limited to
// the detector Nyquist frequency and softened by a half-sample cosine window;
// both the filter and the backprojection sum are plain closed-form loops.
// Throws if fewer than 60 angles are supplied: below that the angular sum
// undersamples the filtered projections badly enough to be misleading.
SymTensorField invert_scalar_xray(const ParallelBeamData& data, const GridSpec& grid,
                                  double support_radius);

// ---------------------------------------------------------------------------
// Full pipeline: moments of F -> componentwise scalar X-ray data (recovery
// pointwise in the ray) -> filtered backprojection per component -> bundle.

struct PipelineConfig {
  int max_moment = -1;          // highest usable moment order k; -1 = top rank
  int angles = 180;
  int offsets = 192;
  double detector_extent = 1.5;
  int recon_nodes = 64;
  double recon_extent = 1.0;
  double support_radius = 0.9;  // support ball of the reconstruction fields
  QuadratureSpec quad{};        // forward moment sampling
  FDStencil stencil{};
  int threads = 0;
};

struct RankStatus {
  int rank = 0;
  bool recovered = false;
  std::string note;  // "ok", or what is missing
};

struct InverseReport {
  TensorBundle reconstruction;    // parts of unrecovered ranks stay zero
  std::vector<RankStatus> ranks;  // one per rank 0..top_rank
  int top_rank = 0;
  int max_moment = 0;  // the moment order actually used
  int angles = 0;
  int offsets = 0;
};

// Recovering the rank-j part needs moments up to order j, so with
// max_moment = K only ranks j <= K are reconstructed; higher ranks are
// reported as not recovered and left identically zero. Supports top rank
// m <= 3 and dim 2 or 3 (dim 3 reconstructs slice by slice in the last axis).
InverseReport full_inverse_pipeline(const TensorBundle& F, const PipelineConfig& cfg = {});

}  // namespace mrt
