#include "mrt/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mrt {

namespace {

// Central stencil for one derivative order: physical offsets (multiples of
// the step) and the matching weights. Orders 1 and 2 use the 4th-order
// 5-point stencil; order 3 drops to 2nd order so the window stays small.
struct AxisRule {
  std::vector<double> offsets;
  std::vector<double> weights;
};

AxisRule axis_rule(int deriv, double h, int accuracy) {
  const int acc = deriv <= 2 ? accuracy : 2;
  AxisRule rule;
  for (double j : central_offsets(deriv, acc)) rule.offsets.push_back(h * j);
  rule.weights = fd_weights(0.0, rule.offsets, deriv);
  return rule;
}

// Mixed partial of the k-th moment with per-axis derivative counts xd (in x,
// step h_x) and xid (in xi, step h_xi), evaluated at `base` by a
// tensor-product walk over the active axes.
double mixed_moment_derivative(const MomentFn& data, int k, const Ray& base, const int* xd,
                               const int* xid, int dim, const FDStencil& st) {
  struct Active {
    bool in_xi;
    int axis;
    AxisRule rule;
  };
  std::vector<Active> act;
  for (int a = 0; a < dim; ++a)
    if (xd[a] > 0) act.push_back({false, a, axis_rule(xd[a], st.h_x, st.order)});
  for (int a = 0; a < dim; ++a)
    if (xid[a] > 0) act.push_back({true, a, axis_rule(xid[a], st.h_xi, st.order)});
  if (act.empty()) return data(k, base.x, base.xi);

  std::vector<int> pos(act.size(), 0);
  double acc = 0.0;
  while (true) {
    Vec x = base.x, xi = base.xi;
    double w = 1.0;
    for (std::size_t i = 0; i < act.size(); ++i) {
      const Active& ax = act[i];
      const double off = ax.rule.offsets[std::size_t(pos[i])];
      if (ax.in_xi)
        xi[std::size_t(ax.axis)] += off;
      else
        x[std::size_t(ax.axis)] += off;
      w *= ax.rule.weights[std::size_t(pos[i])];
    }
    acc += w * data(k, x, xi);
    std::size_t carry = act.size();
    while (carry > 0) {
      std::size_t i = carry - 1;
      if (++pos[i] < int(act[i].rule.offsets.size())) break;
      pos[i] = 0;
      --carry;
    }
    if (carry == 0) break;
  }
  return acc;
}

}  // namespace

double recover_component(const MomentFn& data, int m, int j, const MultiIndex& idx,
                         const Ray& ray, int dim, const FDStencil& stencil) {
  stencil.validate();
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("recover_component: dim out of range");
  ray.validate(dim);
  if (m < 0 || m > 4) throw std::invalid_argument("recover_component: top rank out of range");
  if (j < 0 || j > m || j > 3)
    throw std::invalid_argument("recover_component: moment order j must satisfy 0 <= j <= min(m, 3)");
  if (idx.rank != j) throw std::invalid_argument("recover_component: index rank does not match j");
  for (int i = 0; i < j; ++i)
    if (idx[i] < 0 || idx[i] >= dim) throw std::invalid_argument("recover_component: index axis out of range");

  // Distinct arrangements of the component axes. Each j-permutation splits
  // into k leading axes differentiated in x and j-k trailing axes in xi; the
  // symmetrization averages over the arrangements.
  std::vector<int> axes(std::size_t(j), 0);
  for (int i = 0; i < j; ++i) axes[std::size_t(i)] = idx[i];
  std::sort(axes.begin(), axes.end());
  std::vector<std::vector<int>> arrangements;
  do {
    arrangements.push_back(axes);
  } while (std::next_permutation(axes.begin(), axes.end()));

  // One term per (k, multiset of x-axes); arrangements sharing the split
  // share the value because partial derivatives commute.
  std::map<std::array<int, 4>, double> term;
  double sum = 0.0;
  for (const std::vector<int>& arr : arrangements) {
    for (int k = 0; k <= j; ++k) {
      std::array<int, 4> key{k, -1, -1, -1};
      {
        std::vector<int> xs(arr.begin(), arr.begin() + k);
        std::sort(xs.begin(), xs.end());
        for (int i = 0; i < k; ++i) key[std::size_t(i) + 1] = xs[std::size_t(i)];
      }
      auto it = term.find(key);
      double value;
      if (it != term.end()) {
        value = it->second;
      } else {
        int xd[kMaxDim] = {0, 0, 0, 0};
        int xid[kMaxDim] = {0, 0, 0, 0};
        for (int i = 0; i < k; ++i) ++xd[std::size_t(arr[std::size_t(i)])];
        for (int i = k; i < j; ++i) ++xid[std::size_t(arr[std::size_t(i)])];
        const PhaseFn inner = [&data, k, &xd, &xid, dim, &stencil](const Vec& x, const Vec& xi) {
          Ray at;
          at.x = x;
          at.xi = xi;
          return mixed_moment_derivative(data, k, at, xd, xid, dim, stencil);
        };
        value = apply_P(inner, m - j, ray, dim, stencil);
        term.emplace(key, value);
      }
      sum += (k % 2 == 0 ? 1.0 : -1.0) * binom(j, k) * value;
    }
  }
  const double sign = ((m - j) % 2 == 0) ? 1.0 : -1.0;
  const double norm = factorial(m - j) * factorial(j) * double(arrangements.size());
  return sign * sum / norm;
}

double recover_scalar_moment(const MomentFn& data, int m, const Ray& ray, int dim,
                             const FDStencil& stencil) {
  return recover_component(data, m, 0, MultiIndex{}, ray, dim, stencil);
}

double recover_component(const TensorBundle& F, int j, const MultiIndex& idx, const Ray& ray,
                         const QuadratureSpec& quad, const FDStencil& stencil) {
  MomentCache cache(moment_evaluator(F, quad));
  return recover_component(cache.fn(), F.top_rank(), j, idx, ray, F.grid().dim, stencil);
}

// ---------------------------------------------------------------------------
// Filtered backprojection.

void ParallelBeamData::validate() const {
  if (angles < 1 || offsets < 2) throw std::invalid_argument("ParallelBeamData: empty geometry");
  if (!(extent > 0.0)) throw std::invalid_argument("ParallelBeamData: extent must be positive");
  if (samples.size() != std::size_t(angles) * std::size_t(offsets))
    throw std::invalid_argument("ParallelBeamData: sample count mismatch");
}

ParallelBeamData make_parallel_beam(const LineIntegralFn& xray, int angles, int offsets,
                                    double extent, int threads) {
  if (angles < 1 || offsets < 2) throw std::invalid_argument("make_parallel_beam: empty geometry");
  if (!(extent > 0.0)) throw std::invalid_argument("make_parallel_beam: extent must be positive");
  ParallelBeamData data;
  data.angles = angles;
  data.offsets = offsets;
  data.extent = extent;
  data.samples.assign(std::size_t(angles) * std::size_t(offsets), 0.0);
  parallel_for(
      angles,
      [&](std::int64_t a) {
        const double phi = data.angle(int(a));
        Vec dir{std::cos(phi), std::sin(phi), 0.0, 0.0};
        Vec perp{-std::sin(phi), std::cos(phi), 0.0, 0.0};
        for (int s = 0; s < offsets; ++s) {
          const double off = data.offset(s);
          Vec point{off * perp[0], off * perp[1], 0.0, 0.0};
          data.at(int(a), s) = xray(point, dir);
        }
      },
      threads);
  return data;
}

namespace {

// Inverse transform of the ramp |rho| band-limited to |rho| <= W, up to the
// factor 1/pi: E(b) = (cos(bW) + bW sin(bW) - 1) / b^2, with the b -> 0 limit
// W^2/2 taken through a short series to avoid cancellation.
double ramp_profile(double b, double W) {
  const double u = b * W;
  if (std::fabs(u) < 1e-3) return W * W * (0.5 - u * u / 8.0);
  return (std::cos(u) + u * std::sin(u) - 1.0) / (b * b);
}

}  // namespace

SymTensorField invert_scalar_xray(const ParallelBeamData& data, const GridSpec& grid,
                                  double support_radius) {
  data.validate();
  if (data.angles < 60)
    throw std::invalid_argument("invert_scalar_xray: need at least 60 projection angles");
  if (grid.dim != 2) throw std::invalid_argument("invert_scalar_xray: grid must be 2-D");

  const int A = data.angles, S = data.offsets;
  const double ds = 2.0 * data.extent / double(S - 1);
  const double W = M_PI / ds;       // detector Nyquist band limit
  const double c = M_PI / (2.0 * W);  // half-sample shift = cosine window

  // Convolve each projection row with the windowed ramp kernel
  //   K(t) = (E(t - c) + E(t + c)) / (2 pi).
  std::vector<double> kernel(std::size_t(2 * S - 1), 0.0);
  for (int d = -(S - 1); d <= S - 1; ++d) {
    const double t = ds * double(d);
    kernel[std::size_t(d + S - 1)] =
        (ramp_profile(t - c, W) + ramp_profile(t + c, W)) / (2.0 * M_PI);
  }
  std::vector<double> q(std::size_t(A) * std::size_t(S), 0.0);
  for (int a = 0; a < A; ++a) {
    for (int sj = 0; sj < S; ++sj) {
      double acc = 0.0;
      for (int sk = 0; sk < S; ++sk)
        acc += data.at(a, sk) * kernel[std::size_t(sj - sk + S - 1)];
      q[std::size_t(a) * std::size_t(S) + std::size_t(sj)] = ds * acc;
    }
  }

  // Backproject: f(x) = (1/2pi) integral over [0, pi) of q_phi(<x, perp>),
  // with linear interpolation in the offset and zero outside the detector.
  SymTensorField out(grid, 0, support_radius);
  const std::int64_t nodes = grid.node_count();
  std::vector<double> cs(std::size_t(A), 0.0), sn(std::size_t(A), 0.0);
  for (int a = 0; a < A; ++a) {
    cs[std::size_t(a)] = std::cos(data.angle(a));
    sn[std::size_t(a)] = std::sin(data.angle(a));
  }
  for (std::int64_t node = 0; node < nodes; ++node) {
    const int i0 = int(node / grid.counts[1]);
    const int i1 = int(node % grid.counts[1]);
    const double x0 = grid.origin[0] + grid.spacing[0] * double(i0);
    const double x1 = grid.origin[1] + grid.spacing[1] * double(i1);
    double acc = 0.0;
    for (int a = 0; a < A; ++a) {
      const double s = -x0 * sn[std::size_t(a)] + x1 * cs[std::size_t(a)];
      const double u = (s + data.extent) / ds;
      if (u < 0.0 || u > double(S - 1)) continue;
      const int lo = std::min(int(u), S - 2);
      const double frac = u - double(lo);
      const double* row = q.data() + std::size_t(a) * std::size_t(S);
      acc += (1.0 - frac) * row[lo] + frac * row[lo + 1];
    }
    out.node_data(node)[0] = acc / (2.0 * double(A));
  }
  out.enforce_support();
  return out;
}

// ---------------------------------------------------------------------------
// Full pipeline.

InverseReport full_inverse_pipeline(const TensorBundle& F, const PipelineConfig& cfg) {
  const int dim = F.grid().dim;
  if (dim != 2 && dim != 3)
    throw std::invalid_argument("full_inverse_pipeline: dim must be 2 or 3");
  const int m = F.top_rank();
  if (m > 3) throw std::invalid_argument("full_inverse_pipeline: top rank above 3 not supported");
  if (cfg.recon_nodes < 8) throw std::invalid_argument("full_inverse_pipeline: grid too small");
  if (!(cfg.detector_extent > 0.0) || !(cfg.recon_extent > 0.0))
    throw std::invalid_argument("full_inverse_pipeline: extents must be positive");
  int K = cfg.max_moment < 0 ? m : cfg.max_moment;
  K = std::min(K, m);

  GridSpec grid;
  grid.dim = dim;
  for (int a = 0; a < dim; ++a) {
    grid.counts[std::size_t(a)] = cfg.recon_nodes;
    grid.origin[std::size_t(a)] = -cfg.recon_extent;
    grid.spacing[std::size_t(a)] = 2.0 * cfg.recon_extent / double(cfg.recon_nodes - 1);
  }
  GridSpec plane = grid;  // reconstruction happens plane by plane
  plane.dim = 2;

  std::vector<SymTensorField> parts;
  for (int r = 0; r <= m; ++r) parts.emplace_back(grid, r, cfg.support_radius);

  const int A = cfg.angles, S = cfg.offsets;
  const int nslices = dim == 3 ? cfg.recon_nodes : 1;
  // sinos[r][c] is the scalar parallel-beam data of component c of rank r.
  std::vector<std::vector<std::vector<double>>> sinos(std::size_t(K) + 1);
  for (int r = 0; r <= K; ++r)
    sinos[std::size_t(r)].assign(std::size_t(component_count(r, dim)),
                                 std::vector<double>(std::size_t(A) * std::size_t(S), 0.0));

  for (int iz = 0; iz < nslices; ++iz) {
    const double z = dim == 3 ? grid.origin[2] + grid.spacing[2] * double(iz) : 0.0;
    parallel_for(
        A,
        [&](std::int64_t a) {
          const double phi = M_PI * double(a) / double(A);
          const double cphi = std::cos(phi), sphi = std::sin(phi);
          for (int s = 0; s < S; ++s) {
            const double off = -cfg.detector_extent +
                               2.0 * cfg.detector_extent * double(s) / double(S - 1);
            Ray ray;
            ray.x = {-off * sphi, off * cphi, z, 0.0};
            ray.xi = {cphi, sphi, 0.0, 0.0};
            // One cache per ray: every component and moment order reuses the
            // same finite-difference lattice of moment samples.
            MomentCache cache(moment_evaluator(F, cfg.quad));
            const MomentFn fn = cache.fn();
            for (int r = 0; r <= K; ++r) {
              const ComponentSpace& space = component_space(r, dim);
              for (int ci = 0; ci < space.size; ++ci)
                sinos[std::size_t(r)][std::size_t(ci)][std::size_t(a) * std::size_t(S) + std::size_t(s)] =
                    recover_component(fn, m, r, space.index[std::size_t(ci)], ray, dim, cfg.stencil);
            }
          }
        },
        cfg.threads);

    for (int r = 0; r <= K; ++r) {
      const int ncomp = component_count(r, dim);
      for (int ci = 0; ci < ncomp; ++ci) {
        ParallelBeamData beam;
        beam.angles = A;
        beam.offsets = S;
        beam.extent = cfg.detector_extent;
        beam.samples = sinos[std::size_t(r)][std::size_t(ci)];
        SymTensorField slice = invert_scalar_xray(beam, plane, cfg.support_radius);
        for (int i0 = 0; i0 < cfg.recon_nodes; ++i0) {
          for (int i1 = 0; i1 < cfg.recon_nodes; ++i1) {
            const std::int64_t src = std::int64_t(i0) * cfg.recon_nodes + i1;
            std::array<int, kMaxDim> at{i0, i1, iz, 0};
            parts[std::size_t(r)].node_data(grid.node_linear(at))[ci] = slice.node_data(src)[0];
          }
        }
      }
    }
  }
  for (auto& p : parts) p.enforce_support();

  InverseReport report;
  report.reconstruction = TensorBundle(std::move(parts));
  report.top_rank = m;
  report.max_moment = K;
  report.angles = A;
  report.offsets = S;
  for (int r = 0; r <= m; ++r) {
    RankStatus st;
    st.rank = r;
    st.recovered = r <= K;
    st.note = st.recovered ? "ok" : "requires moments up to order " + std::to_string(r);
    report.ranks.push_back(st);
  }
  return report;
}

}  // namespace mrt
