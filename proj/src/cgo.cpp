#include "mrt/cgo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace mrt {

namespace {

using cd = std::complex<double>;
constexpr cd kImag{0.0, 1.0};

cd ipow(cd base, int p) {
  cd r{1.0, 0.0};
  for (int i = 0; i < p; ++i) r *= base;
  return r;
}

double dpow(double base, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= base;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid and amplitudes

void ComplexSliceGrid::validate() const {
  if (nx < 17 || nr < 17)
    throw std::invalid_argument("ComplexSliceGrid: need at least 17 nodes per axis");
  if (!(x1_hi > x1_lo) || !(r_hi > r_lo))
    throw std::invalid_argument("ComplexSliceGrid: degenerate rectangle");
  if (!(r_lo > 0.0) || r_lo < 2.0 * dr() - 1e-15 * (r_hi - r_lo))
    throw std::invalid_argument(
        "ComplexSliceGrid: rectangle touches the axis r = 0; keep r_lo at least two cells wide");
}

double interior_max(const ComplexField& field, const ComplexSliceGrid& grid, int margin) {
  grid.validate();
  if (field.size() != grid.size())
    throw std::invalid_argument("interior_max: field does not match grid");
  if (margin < 0 || 2 * margin >= grid.nx || 2 * margin >= grid.nr)
    throw std::invalid_argument("interior_max: margin leaves no interior");
  double best = 0.0;
  for (int i = margin; i < grid.nx - margin; ++i)
    for (int j = margin; j < grid.nr - margin; ++j)
      best = std::max(best, std::abs(field[grid.index(i, j)]));
  return best;
}

std::complex<double> HoloFactor::eval(std::complex<double> z) const {
  switch (kind) {
    case Kind::monomial:
      return coeff * ipow(z, power);
    case Kind::plane_wave:
      return coeff * std::exp(-kImag * lambda * z);
  }
  return {0.0, 0.0};
}

std::complex<double> Amplitude::eval(std::complex<double> z) const {
  const cd zmzb = cd{0.0, 2.0} * z.imag();  // z - zbar = 2 i r
  cd sum{0.0, 0.0};
  for (const AmplitudeTerm& t : terms) sum += std::pow(zmzb, exponent(t.k)) * t.h.eval(z);
  return sum;
}

ComplexField sample_amplitude(const Amplitude& a, const ComplexSliceGrid& grid) {
  grid.validate();
  if (a.dim < 2 || a.dim > kMaxDim)
    throw std::invalid_argument("sample_amplitude: dimension out of range");
  for (const AmplitudeTerm& t : a.terms) {
    if (t.k < 1) throw std::invalid_argument("sample_amplitude: rung index must be >= 1");
    if (t.h.kind == HoloFactor::Kind::monomial && (t.h.power < 0 || t.h.power > 6))
      throw std::invalid_argument("sample_amplitude: monomial degree out of range");
  }
  ComplexField out(grid.size());
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.nr; ++j) out[grid.index(i, j)] = a.eval(grid.z(i, j));
  return out;
}

BuiltAmplitude build_a0(const std::vector<HoloFactor>& h_list, int dim,
                        const ComplexSliceGrid& grid) {
  if (h_list.empty()) throw std::invalid_argument("build_a0: need at least one rung");
  Amplitude a;
  a.dim = dim;
  for (int k = 1; k <= int(h_list.size()); ++k)
    a.terms.push_back(AmplitudeTerm{k, h_list[size_t(k - 1)]});
  BuiltAmplitude built;
  built.field = sample_amplitude(a, grid);
  built.descriptor = std::move(a);
  return built;
}

// ---------------------------------------------------------------------------
// Transport operator by finite differences

namespace {

// Interior first derivatives use the centered 9-node 8th-order stencil.
// Within four cells of an edge a centered window no longer fits; there a
// wider 13-node window is used with minimum-norm weights that are still
// exact through degree 8.  Minimizing the weight norm matters because the
// annihilation checks iterate the operator: every application re-
// differentiates the rounding noise of the previous one, and the noise gain
// per application is set by the weight magnitudes.  Plain one-sided stencils
// of this order carry weights ~40x larger and lose several digits by m = 4.
constexpr int kStencil = 9;    // centered interior window
constexpr int kEdgeWin = 17;   // wider minimum-norm edge window
constexpr int kEdgeBand = kStencil / 2;  // window positions served by the edge family
constexpr int kExactDeg = 9;   // edge-window exactness degree

const std::vector<double>& centered_weights() {
  static const std::vector<double> w = [] {
    std::vector<double> nodes(kStencil);
    for (int i = 0; i < kStencil; ++i) nodes[size_t(i)] = double(i);
    return fd_weights(double(kStencil / 2), nodes, 1);
  }();
  return w;
}

// Minimum-norm weights for d/dt at window position p (0..kEdgeBand-1) on the
// unit-spaced nodes t = 0..kEdgeWin-1: minimize ||w||_2 subject to exactness
// on polynomials of degree <= kExactDeg.  Solved as w = A^T (A A^T)^{-1} b in
// a Legendre basis on the window (so the Gram system is well conditioned).
const std::vector<double>& edge_weights(int p) {
  static const std::array<std::vector<double>, kEdgeBand> cache = [] {
    const int nq = kExactDeg + 1;
    // Legendre values and derivatives on the mapped nodes y = 2t/(W-1) - 1.
    auto legendre_row = [](double y, std::vector<double>& val, std::vector<double>& der) {
      val[0] = 1.0; der[0] = 0.0;
      if (val.size() > 1) { val[1] = y; der[1] = 1.0; }
      for (size_t k = 1; k + 1 < val.size(); ++k) {
        val[k + 1] = ((2.0 * double(k) + 1.0) * y * val[k] - double(k) * val[k - 1]) / double(k + 1);
        der[k + 1] = der[k - 1] + (2.0 * double(k) + 1.0) * val[k];
      }
    };
    std::array<std::vector<double>, kEdgeBand> all;
    Matrix A(nq, kEdgeWin);
    const size_t nqz = size_t(nq);
    std::vector<double> val(nqz);
    std::vector<double> der(nqz);
    const double map = 2.0 / double(kEdgeWin - 1);
    for (int t = 0; t < kEdgeWin; ++t) {
      legendre_row(map * double(t) - 1.0, val, der);
      for (int q = 0; q < nq; ++q) A(q, t) = val[size_t(q)];
    }
    Matrix G(nq, nq);
    for (int q = 0; q < nq; ++q)
      for (int s = 0; s <= q; ++s) {
        double acc = 0.0;
        for (int t = 0; t < kEdgeWin; ++t) acc += A(q, t) * A(s, t);
        G(q, s) = acc;
        G(s, q) = acc;
      }
    for (int p = 0; p < kEdgeBand; ++p) {
      legendre_row(map * double(p) - 1.0, val, der);
      std::vector<double> b(nqz);
      for (int q = 0; q < nq; ++q) b[size_t(q)] = der[size_t(q)] * map;  // d/dt chain rule
      const std::vector<double> mu = cholesky_solve(G, b);
      std::vector<double> w(size_t(kEdgeWin), 0.0);
      for (int t = 0; t < kEdgeWin; ++t)
        for (int q = 0; q < nq; ++q) w[size_t(t)] += A(q, t) * mu[size_t(q)];
      all[size_t(p)] = std::move(w);
    }
    return all;
  }();
  return cache[size_t(p)];
}

// First derivative along one axis at index i of n nodes spaced h apart.
// `at` fetches the field value at a given index on that line.
template <typename At>
cd line_derivative(int i, int n, double h, const At& at) {
  cd acc{0.0, 0.0};
  if (i >= kEdgeBand && i <= n - 1 - kEdgeBand) {
    const std::vector<double>& w = centered_weights();
    const int base = i - kStencil / 2;
    for (int t = 0; t < kStencil; ++t) acc += w[size_t(t)] * at(base + t);
  } else if (i < kEdgeBand) {
    const std::vector<double>& w = edge_weights(i);
    for (int t = 0; t < kEdgeWin; ++t) acc += w[size_t(t)] * at(t);
  } else {
    // Mirror of the low-edge window: reflection flips the derivative sign.
    const std::vector<double>& w = edge_weights(n - 1 - i);
    for (int t = 0; t < kEdgeWin; ++t) acc -= w[size_t(t)] * at(n - 1 - t);
  }
  return acc / h;
}

}  // namespace

ComplexField apply_T(const ComplexField& a, int dim, const ComplexSliceGrid& grid) {
  grid.validate();
  if (dim < 2 || dim > kMaxDim) throw std::invalid_argument("apply_T: dimension out of range");
  if (a.size() != grid.size()) throw std::invalid_argument("apply_T: field does not match grid");

  const double hx = grid.dx();
  const double hr = grid.dr();

  ComplexField out(a.size());
  for (int i = 0; i < grid.nx; ++i) {
    for (int j = 0; j < grid.nr; ++j) {
      const cd dx = line_derivative(i, grid.nx, hx, [&](int t) { return a[grid.index(t, j)]; });
      const cd dr = line_derivative(j, grid.nr, hr, [&](int t) { return a[grid.index(i, t)]; });
      const cd dzbar = 0.5 * (dx + kImag * dr);
      const cd zmzb = cd{0.0, 2.0} * grid.r(j);
      out[grid.index(i, j)] = 4.0 * (dzbar - (double(dim - 2) / (2.0 * zmzb)) * a[grid.index(i, j)]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weighted moment reduction

void SliceRect::validate() const {
  if (!(x1_hi > x1_lo) || !(r_hi > r_lo))
    throw std::invalid_argument("SliceRect: degenerate rectangle");
  if (r_lo < 0.0) throw std::invalid_argument("SliceRect: r-range touches r < 0");
  if (panels_x < 1 || panels_r < 1) throw std::invalid_argument("SliceRect: need at least one panel");
  if (order < 2 || order > 64) throw std::invalid_argument("SliceRect: order out of range");
}

namespace {

// Panel boundaries for a 1-D composite rule: at least `min_panels` uniform
// panels, refined by every extra break point inside (lo, hi).  Aligning the
// extra points with the field's interpolation cells makes the integrand
// smooth inside every panel, so moderate Gauss orders converge to machine
// precision on the interpolant.
std::vector<double> merge_breaks(double lo, double hi, std::vector<double> pts, int min_panels) {
  std::vector<double> b;
  b.reserve(pts.size() + size_t(min_panels) + 1);
  for (int p = 0; p <= min_panels; ++p)
    b.push_back(lo + (hi - lo) * double(p) / double(min_panels));
  const double tol = 1e-9 * (hi - lo);
  for (double v : pts)
    if (v > lo + tol && v < hi - tol) b.push_back(v);
  std::sort(b.begin(), b.end());
  std::vector<double> out;
  out.push_back(b.front());
  for (double v : b)
    if (v - out.back() > tol) out.push_back(v);
  out.back() = hi;
  return out;
}

// Grid-node coordinates along one axis that fall inside (lo, hi): the
// interpolation window changes there.
std::vector<double> axis_cell_breaks(const GridSpec& grid, int a, double lo, double hi) {
  std::vector<double> pts;
  for (int i = 0; i < grid.counts[size_t(a)]; ++i) {
    const double x = grid.origin[size_t(a)] + grid.spacing[size_t(a)] * double(i);
    if (x > lo && x < hi) pts.push_back(x);
  }
  return pts;
}

}  // namespace

MomentReduction moment_reduction(const SymTensorField& W, int alpha, const Vec& omega,
                                 double lambda, const SliceRect& rect, int gamma, int axis,
                                 const Vec& center) {
  rect.validate();
  const int dim = W.grid().dim;
  if (dim < 2) throw std::invalid_argument("moment_reduction: field must have dim >= 2");
  if (axis < 0 || axis >= dim) throw std::invalid_argument("moment_reduction: axis out of range");
  if (alpha < 0 || alpha > W.rank())
    throw std::invalid_argument("moment_reduction: alpha out of range for the field rank");
  if (gamma < 0 || gamma > 2)
    throw std::invalid_argument("moment_reduction: lambda-derivative order out of range");

  const std::vector<int> na = nonaxis_axes(dim, axis);
  double n2 = 0.0;
  for (int q = 0; q < dim - 1; ++q) n2 += omega[size_t(q)] * omega[size_t(q)];
  if (std::abs(std::sqrt(n2) - 1.0) > 1e-9)
    throw std::invalid_argument("moment_reduction: omega must be a unit direction");

  const auto zeta = null_vector(dim, axis, omega);
  const int rank = W.rank();
  const ComponentSpace& sp = component_space(rank, dim);
  if (sp.size > 64) throw std::invalid_argument("moment_reduction: rank too large");

  // Zeta powers per canonical component, multiplicity included.
  std::vector<cd> zc(size_t(sp.size));
  for (int c = 0; c < sp.size; ++c) {
    cd p{1.0, 0.0};
    for (int s = 0; s < rank; ++s) p *= zeta[size_t(sp.index[size_t(c)][s])];
    zc[size_t(c)] = sp.mult[size_t(c)] * p;
  }

  double buf[64];
  auto contracted = [&](double x1, double r) -> cd {
    Vec pt{};
    pt[size_t(axis)] = x1;
    for (int q = 0; q < dim - 1; ++q)
      pt[size_t(na[size_t(q)])] = center[size_t(na[size_t(q)])] + r * omega[size_t(q)];
    W.eval_into(pt, buf);
    cd s{0.0, 0.0};
    for (int c = 0; c < sp.size; ++c) s += buf[c] * zc[size_t(c)];
    return s;
  };

  // Both routes use composite Gauss-Legendre rules whose panel boundaries are
  // aligned with the field's interpolation cells, so every panel sees a smooth
  // integrand and converges far below the agreement tolerance.  The routes
  // remain independent checks: they share no sample points (different panel
  // refinements and different orders per axis) and they apply the
  // lambda-derivative weight in structurally different ways.
  const GridSpec& grid = W.grid();
  const std::vector<double> x1_cells =
      axis_cell_breaks(grid, axis, rect.x1_lo, rect.x1_hi);
  std::vector<double> r_cells;
  for (int q = 0; q < dim - 1; ++q) {
    const int a = na[size_t(q)];
    const double w = omega[size_t(q)];
    if (std::abs(w) < 1e-13) continue;
    for (int i = 0; i < grid.counts[size_t(a)]; ++i) {
      const double g = grid.origin[size_t(a)] + grid.spacing[size_t(a)] * double(i);
      const double r = (g - center[size_t(a)]) / w;
      if (r > rect.r_lo && r < rect.r_hi) r_cells.push_back(r);
    }
  }

  MomentReduction result;

  // Route 1: tensor-product rule over the rectangle, with the
  // lambda-derivative inserted as the analytic weight (r - i x1)^gamma.
  {
    const GaussRule& rule = gauss_legendre(rect.order);
    const std::vector<double> bx = merge_breaks(rect.x1_lo, rect.x1_hi, x1_cells, rect.panels_x);
    const std::vector<double> br = merge_breaks(rect.r_lo, rect.r_hi, r_cells, rect.panels_r);
    cd acc{0.0, 0.0};
    for (size_t px = 0; px + 1 < bx.size(); ++px) {
      const double wx_panel = bx[px + 1] - bx[px];
      for (int ix = 0; ix < rect.order; ++ix) {
        const double x1 = bx[px] + 0.5 * wx_panel * (rule.node[size_t(ix)] + 1.0);
        const double wx = 0.5 * wx_panel * rule.weight[size_t(ix)];
        for (size_t pr = 0; pr + 1 < br.size(); ++pr) {
          const double wr_panel = br[pr + 1] - br[pr];
          for (int ir = 0; ir < rect.order; ++ir) {
            const double r = br[pr] + 0.5 * wr_panel * (rule.node[size_t(ir)] + 1.0);
            const double wr = 0.5 * wr_panel * rule.weight[size_t(ir)];
            const cd v = contracted(x1, r);
            if (v == cd{0.0, 0.0}) continue;
            const cd weight = dpow(r, alpha) * std::exp(cd{lambda * r, -lambda * x1}) *
                              ipow(cd{r, -x1}, gamma);
            acc += wx * wr * weight * v;
          }
        }
      }
    }
    result.route_surface = acc;
  }

  // Route 2: x1-transform first (weighted moments of the profile against
  // e^{-i lambda x1}), then the binomial recombination of those transform
  // derivatives, then the r-integral.  Panel refinements and orders differ
  // from route 1 so the two rules share no evaluation points.
  {
    const int order_x = std::min(rect.order + 2, 64);
    const int order_r = std::min(rect.order + 1, 64);
    const GaussRule& rule_x = gauss_legendre(order_x);
    const GaussRule& rule_r = gauss_legendre(order_r);
    const std::vector<double> bx =
        merge_breaks(rect.x1_lo, rect.x1_hi, x1_cells, rect.panels_x + 1);
    const std::vector<double> br =
        merge_breaks(rect.r_lo, rect.r_hi, r_cells, rect.panels_r + 2);
    cd acc{0.0, 0.0};
    for (size_t pr = 0; pr + 1 < br.size(); ++pr) {
      const double wr_panel = br[pr + 1] - br[pr];
      for (int ir = 0; ir < order_r; ++ir) {
        const double r = br[pr] + 0.5 * wr_panel * (rule_r.node[size_t(ir)] + 1.0);
        const double wr = 0.5 * wr_panel * rule_r.weight[size_t(ir)];
        cd transform[3] = {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
        for (size_t px = 0; px + 1 < bx.size(); ++px) {
          const double wx_panel = bx[px + 1] - bx[px];
          for (int ix = 0; ix < order_x; ++ix) {
            const double x1 = bx[px] + 0.5 * wx_panel * (rule_x.node[size_t(ix)] + 1.0);
            const double wt = 0.5 * wx_panel * rule_x.weight[size_t(ix)];
            const cd v = contracted(x1, r);
            if (v == cd{0.0, 0.0}) continue;
            const cd base = wt * std::exp(cd{0.0, -lambda * x1}) * v;
            cd mono{1.0, 0.0};
            for (int g = 0; g <= gamma; ++g) {
              transform[g] += mono * base;
              mono *= cd{0.0, -x1};
            }
          }
        }
        cd val{0.0, 0.0};
        for (int g = 0; g <= gamma; ++g)
          val += binom(gamma, g) * dpow(r, gamma - g) * transform[g];
        acc += wr * dpow(r, alpha) * std::exp(lambda * r) * val;
      }
    }
    result.route_fourier = acc;
  }

  result.difference = std::abs(result.route_surface - result.route_fourier);
  return result;
}

// ---------------------------------------------------------------------------
// Slab phantoms

double slab_window(double u, double halfwidth, double plateau) {
  const double t = std::abs(u) / halfwidth;
  if (t >= 1.0) return 0.0;
  if (t <= plateau) return 1.0;
  const double s = (t - plateau) / (1.0 - plateau);
  auto blend = [](double v) { return v <= 0.0 ? 0.0 : std::exp(-1.0 / v); };
  return blend(1.0 - s) / (blend(1.0 - s) + blend(s));
}

TensorBundle make_slab_phantom(const SlabPhantomSpec& spec) {
  if (spec.top_rank < 2 || spec.top_rank > 3)
    throw std::invalid_argument("make_slab_phantom: top rank must be 2 or 3");
  if (spec.nodes < 16) throw std::invalid_argument("make_slab_phantom: too few nodes");
  if (!(spec.slab_halfwidth > 0.0) || !(spec.plane_radius > 0.0))
    throw std::invalid_argument("make_slab_phantom: degenerate support");
  if (!(spec.plateau > 0.0) || !(spec.plateau < 1.0))
    throw std::invalid_argument("make_slab_phantom: plateau must lie in (0, 1)");
  const double box = std::sqrt(spec.slab_halfwidth * spec.slab_halfwidth +
                               spec.plane_radius * spec.plane_radius);
  if (box > spec.support_radius)
    throw std::invalid_argument("make_slab_phantom: slab leaves the support ball");

  GridSpec grid;
  grid.dim = 3;
  for (int a = 0; a < 3; ++a) {
    grid.origin[size_t(a)] = -spec.extent;
    grid.spacing[size_t(a)] = 2.0 * spec.extent / double(spec.nodes - 1);
    grid.counts[size_t(a)] = spec.nodes;
  }

  Rng rng(spec.seed);
  const int m = spec.top_rank;

  auto make_profiles = [&](int rank) {
    const ComponentSpace& sp = component_space(rank, 3);
    std::vector<std::function<double(const Vec&)>> prof;
    prof.reserve(size_t(sp.size));
    for (int c = 0; c < sp.size; ++c) prof.push_back(random_profile(rng, 2, spec.plane_radius));
    return prof;
  };
  auto window = [&](double x1) { return slab_window(x1, spec.slab_halfwidth, spec.plateau); };

  std::vector<SymTensorField> parts;
  for (int k = 0; k <= m; ++k) {
    const bool lifted = (k == m) || (m == 3 && k == 2);
    const int core_rank = lifted ? k - 2 : k;
    auto prof = make_profiles(core_rank);
    auto fn = [&, prof, core_rank, lifted](const Vec& x) {
      const double w = window(x[0]);
      SymTensor core(core_rank, 3);
      if (w != 0.0) {
        const Vec plane{x[1], x[2]};
        for (int c = 0; c < core.size(); ++c) core[c] = w * prof[size_t(c)](plane);
      }
      return lifted ? i_delta(core) : core;
    };
    parts.push_back(SymTensorField::sample(grid, k, spec.support_radius, fn));
  }
  return TensorBundle(std::move(parts));
}

// ---------------------------------------------------------------------------
// Staged recovery

void RecoveryConfig::validate() const {
  if (!(tol > 0.0)) throw std::invalid_argument("RecoveryConfig: tol must be positive");
  if (!(max_rel_error > 0.0)) throw std::invalid_argument("RecoveryConfig: bad error gate");
  if (plane_nodes < 24) throw std::invalid_argument("RecoveryConfig: reconstruction grid too coarse");
  if (angles < 60) throw std::invalid_argument("RecoveryConfig: need at least 60 angles");
  if (offsets < 32) throw std::invalid_argument("RecoveryConfig: need at least 32 offsets");
  if (!(plane_extent > 0.0) || !(support_radius > 0.0) || !(detector_extent > 0.0))
    throw std::invalid_argument("RecoveryConfig: degenerate geometry");
  if (x1_panels < 1 || line_panels < 1 || x1_order < 2 || x1_order > 64 || line_order < 2 ||
      line_order > 64)
    throw std::invalid_argument("RecoveryConfig: quadrature out of range");
  if (probe_lines < 8) throw std::invalid_argument("RecoveryConfig: too few probe lines");
}

namespace {

// x1-averaged slice of one bundle rank: a rank-0 plane field per canonical
// component of the dim-3 tensor, plus the max pointwise Frobenius norm.
struct PlaneSlice {
  int rho = 0;
  std::vector<SymTensorField> comp;
  double scale = 0.0;
};

PlaneSlice build_plane_slice(const SymTensorField& part, const GridSpec& plane, double sr,
                             int panels, int order, int threads) {
  PlaneSlice s;
  s.rho = part.rank();
  const ComponentSpace& sp = component_space(s.rho, 3);
  s.comp.assign(size_t(sp.size), SymTensorField(plane, 0, sr));

  const Vec c3 = part.support_center();
  const double radius = part.support_radius();
  const GaussRule& rule = gauss_legendre(order);
  const double panel = 2.0 * radius / double(panels);
  const int n0 = plane.counts[0];
  const int n1 = plane.counts[1];

  std::vector<double> scales(size_t(n0), 0.0);
  parallel_for(
      n0,
      [&](std::int64_t i0) {
        double buf[64];
        std::vector<double> acc(size_t(sp.size));
        for (int i1 = 0; i1 < n1; ++i1) {
          const std::array<int, kMaxDim> idx{int(i0), i1, 0, 0};
          const Vec y = plane.node_pos(idx);
          std::fill(acc.begin(), acc.end(), 0.0);
          for (int p = 0; p < panels; ++p) {
            const double a = c3[0] - radius + panel * double(p);
            for (int q = 0; q < order; ++q) {
              const double x1 = a + 0.5 * panel * (rule.node[size_t(q)] + 1.0);
              const double w = 0.5 * panel * rule.weight[size_t(q)];
              const Vec pt{x1, c3[1] + y[0], c3[2] + y[1]};
              part.eval_into(pt, buf);
              for (int c = 0; c < sp.size; ++c) acc[size_t(c)] += w * buf[c];
            }
          }
          const std::int64_t node = plane.node_linear(idx);
          double fro = 0.0;
          for (int c = 0; c < sp.size; ++c) {
            s.comp[size_t(c)].node_data(node)[0] = acc[size_t(c)];
            fro += sp.mult[size_t(c)] * acc[size_t(c)] * acc[size_t(c)];
          }
          scales[size_t(i0)] = std::max(scales[size_t(i0)], std::sqrt(fro));
        }
      },
      threads);
  for (double v : scales) s.scale = std::max(s.scale, v);
  for (SymTensorField& f : s.comp) f.enforce_support();
  return s;
}

// Moment of the zeta-contracted slice along the plane line base + t*theta,
// weight t^alpha, theta = (cos phi, sin phi).
cd slice_zeta_moment(const PlaneSlice& s, const Vec& base, double phi, int alpha, double tmax,
                     int panels, int order) {
  const Vec omega{std::cos(phi), std::sin(phi)};
  const auto zeta = null_vector(3, 0, omega);
  const ComponentSpace& sp = component_space(s.rho, 3);
  std::vector<cd> zc(size_t(sp.size));
  for (int c = 0; c < sp.size; ++c) {
    cd p{1.0, 0.0};
    for (int q = 0; q < s.rho; ++q) p *= zeta[size_t(sp.index[size_t(c)][q])];
    zc[size_t(c)] = sp.mult[size_t(c)] * p;
  }
  const GaussRule& rule = gauss_legendre(order);
  const double panel = 2.0 * tmax / double(panels);
  cd acc{0.0, 0.0};
  double v = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = -tmax + panel * double(p);
    for (int q = 0; q < order; ++q) {
      const double t = a + 0.5 * panel * (rule.node[size_t(q)] + 1.0);
      const double w = 0.5 * panel * rule.weight[size_t(q)];
      const Vec y{base[0] + t * omega[0], base[1] + t * omega[1]};
      cd contracted{0.0, 0.0};
      for (int c = 0; c < sp.size; ++c) {
        s.comp[size_t(c)].eval_into(y, &v);
        contracted += v * zc[size_t(c)];
      }
      acc += w * dpow(t, alpha) * contracted;
    }
  }
  return acc;
}

double rel_l2(const SymTensorField& rec, const SymTensorField& truth) {
  SymTensorField diff = truth;
  for (std::size_t i = 0; i < diff.raw().size(); ++i)
    diff.raw()[i] = rec.raw()[i] - truth.raw()[i];
  const double tn = truth.l2_norm();
  const double dn = diff.l2_norm();
  return tn > 1e-12 ? dn / tn : dn;
}

SymTensorField assemble_plane_field(const GridSpec& plane, double sr,
                                    const std::vector<const SymTensorField*>& comps) {
  SymTensorField out(plane, int(comps.size()) - 1 > 0 ? 1 : 0, sr);
  if (int(comps.size()) != out.ncomp())
    throw std::logic_error("assemble_plane_field: component count mismatch");
  for (std::int64_t node = 0; node < plane.node_count(); ++node)
    for (int c = 0; c < out.ncomp(); ++c)
      out.node_data(node)[c] = comps[size_t(c)]->node_data(node)[0];
  out.enforce_support();
  return out;
}

}  // namespace

RecoveryReport iterative_recovery(const TensorBundle& W, const RecoveryConfig& cfg) {
  cfg.validate();
  if (W.grid().dim != 3)
    throw std::invalid_argument("iterative_recovery: bundle must live on a dim-3 grid");
  const int m = W.top_rank();
  if (m < 2 || m > 3) throw std::invalid_argument("iterative_recovery: top rank must be 2 or 3");

  RecoveryReport report;
  report.steps_expected = m;

  GridSpec plane;
  plane.dim = 2;
  for (int a = 0; a < 2; ++a) {
    plane.origin[size_t(a)] = -cfg.plane_extent;
    plane.spacing[size_t(a)] = 2.0 * cfg.plane_extent / double(cfg.plane_nodes - 1);
    plane.counts[size_t(a)] = cfg.plane_nodes;
  }

  std::vector<PlaneSlice> slice(size_t(m + 1));
  for (int k = 0; k <= m; ++k)
    slice[size_t(k)] = build_plane_slice(W.part(k), plane, cfg.support_radius, cfg.x1_panels,
                                         cfg.x1_order, cfg.threads);

  const double tmax = cfg.detector_extent + cfg.support_radius + 0.2;

  // Probe lines for the structure checks.
  Rng prng(cfg.probe_seed);
  std::vector<std::array<double, 2>> probes(size_t(cfg.probe_lines));
  for (auto& pr : probes)
    pr = {prng.uniform(0.0, M_PI), prng.uniform(-0.85, 0.85) * cfg.support_radius};

  // ---- structure stages -----------------------------------------------
  std::vector<PlaneSlice> cores(size_t(m + 1));  // cores[rho] = extracted core of rank rho
  for (int j = 0; j <= m - 2; ++j) {
    const int rho = m - j;
    const PlaneSlice& s = slice[size_t(rho)];
    StepReport step;
    step.step = j;
    step.rank = rho;
    step.action = "structure";

    // Moment check from line data.
    std::vector<double> worst(probes.size(), 0.0);
    parallel_for(
        std::int64_t(probes.size()),
        [&](std::int64_t i) {
          const Vec theta{std::cos(probes[size_t(i)][0]), std::sin(probes[size_t(i)][0])};
          const Vec base{-theta[1] * probes[size_t(i)][1], theta[0] * probes[size_t(i)][1]};
          for (int alpha = 0; alpha <= rho; ++alpha) {
            const cd mom = slice_zeta_moment(s, base, probes[size_t(i)][0], alpha, tmax,
                                             cfg.line_panels, cfg.line_order);
            const double line_scale =
                s.scale * 2.0 * dpow(tmax, alpha + 1) / double(alpha + 1);
            const double rel = line_scale > 1e-14 ? std::abs(mom) / line_scale : std::abs(mom);
            worst[size_t(i)] = std::max(worst[size_t(i)], rel);
          }
        },
        cfg.threads);
    for (double v : worst) step.data_residual = std::max(step.data_residual, v);

    // Pointwise extraction of the isotropic core.
    PlaneSlice core;
    core.rho = rho - 2;
    const ComponentSpace& csp = component_space(core.rho, 3);
    core.comp.assign(size_t(csp.size), SymTensorField(plane, 0, cfg.support_radius));
    double cert = 0.0;
    for (std::int64_t node = 0; node < plane.node_count(); ++node) {
      SymTensor f(rho, 3);
      for (int c = 0; c < f.size(); ++c) f[c] = s.comp[size_t(c)].node_data(node)[0];
      const SymTensor v = construct_v_point(f, 0);
      const SymTensor back = i_delta(v);
      cert = std::max(cert, norm(axpy(-1.0, back, f)));
      double fro = 0.0;
      for (int c = 0; c < v.size(); ++c) {
        core.comp[size_t(c)].node_data(node)[0] = v[c];
        fro += csp.mult[size_t(c)] * v[c] * v[c];
      }
      core.scale = std::max(core.scale, std::sqrt(fro));
    }
    for (SymTensorField& f : core.comp) f.enforce_support();
    step.certificate_residual = s.scale > 1e-14 ? cert / s.scale : cert;
    cores[size_t(rho)] = std::move(core);

    step.ok = step.data_residual <= cfg.tol && step.certificate_residual <= cfg.tol;
    report.steps.push_back(step);
    if (!step.ok) {
      report.abort_step = j;
      report.abort_reason = "rank-" + std::to_string(rho) +
                            " moment data is not isotropically structured (residual " +
                            std::to_string(step.data_residual) + ")";
      return report;
    }
  }

  // ---- descending-pair consistency (m = 2) ------------------------------
  if (m == 2) {
    // The combined functional of the second amplitude pair must equal the
    // core family plus 2i times the alpha-shifted rank-1 family.
    const PlaneSlice& core = cores[2];
    const PlaneSlice& s1 = slice[1];
    double worst = 0.0;
    const double scale = std::max({core.scale, s1.scale, 1e-14}) * 2.0 * dpow(tmax, 3);
    for (const auto& pr : probes) {
      const Vec theta{std::cos(pr[0]), std::sin(pr[0])};
      const Vec base{-theta[1] * pr[1], theta[0] * pr[1]};
      const auto zeta = null_vector(3, 0, theta);
      for (int beta = 0; beta <= 1; ++beta) {
        // One-pass quadrature of the combined integrand.
        const GaussRule& rule = gauss_legendre(cfg.line_order);
        const double panel = 2.0 * tmax / double(cfg.line_panels);
        cd combined{0.0, 0.0};
        double v = 0.0;
        for (int p = 0; p < cfg.line_panels; ++p) {
          const double a = -tmax + panel * double(p);
          for (int q = 0; q < cfg.line_order; ++q) {
            const double t = a + 0.5 * panel * (rule.node[size_t(q)] + 1.0);
            const double w = 0.5 * panel * rule.weight[size_t(q)];
            const Vec y{base[0] + t * theta[0], base[1] + t * theta[1]};
            core.comp[0].eval_into(y, &v);
            cd val{v, 0.0};
            cd lin{0.0, 0.0};
            for (int c = 0; c < 3; ++c) {
              s1.comp[size_t(c)].eval_into(y, &v);
              lin += v * zeta[size_t(c)];
            }
            val += cd{0.0, 2.0} * t * lin;
            combined += w * dpow(t, beta) * val;
          }
        }
        const cd expected =
            slice_zeta_moment(core, base, pr[0], beta, tmax, cfg.line_panels, cfg.line_order) +
            cd{0.0, 2.0} *
                slice_zeta_moment(s1, base, pr[0], beta + 1, tmax, cfg.line_panels, cfg.line_order);
        worst = std::max(worst, std::abs(combined - expected) / scale);
      }
    }
    report.pair_consistency = worst;
  }

  // ---- terminal stage ----------------------------------------------------
  StepReport term;
  term.step = m - 1;
  term.rank = 1;
  term.action = "terminal";

  auto recover_scalar = [&](const SymTensorField& truth) {
    LineIntegralFn xray = [&](const Vec& point, const Vec& direction) {
      const GaussRule& rule = gauss_legendre(cfg.line_order);
      const double panel = 2.0 * tmax / double(cfg.line_panels);
      double acc = 0.0;
      double v = 0.0;
      for (int p = 0; p < cfg.line_panels; ++p) {
        const double a = -tmax + panel * double(p);
        for (int q = 0; q < cfg.line_order; ++q) {
          const double t = a + 0.5 * panel * (rule.node[size_t(q)] + 1.0);
          const double w = 0.5 * panel * rule.weight[size_t(q)];
          const Vec y{point[0] + t * direction[0], point[1] + t * direction[1]};
          truth.eval_into(y, &v);
          acc += w * v;
        }
      }
      return acc;
    };
    ParallelBeamData pb =
        make_parallel_beam(xray, cfg.angles, cfg.offsets, cfg.detector_extent, cfg.threads);
    return invert_scalar_xray(pb, plane, cfg.support_radius);
  };

  auto recover_plane_vector = [&](const PlaneSlice& s) {
    // Rank-1 moments of the in-plane pair (compensated for non-unit
    // directions), differenced back to per-component line integrals.
    MomentFn data = [&](int k, const Vec& x, const Vec& xi) {
      const double len = norm2(xi, 2);
      const Vec u{xi[0] / len, xi[1] / len};
      const GaussRule& rule = gauss_legendre(cfg.line_order);
      const double panel = 2.0 * tmax / double(cfg.line_panels);
      double acc = 0.0;
      double v = 0.0;
      for (int p = 0; p < cfg.line_panels; ++p) {
        const double a = -tmax + panel * double(p);
        for (int q = 0; q < cfg.line_order; ++q) {
          const double t = a + 0.5 * panel * (rule.node[size_t(q)] + 1.0);
          const double w = 0.5 * panel * rule.weight[size_t(q)];
          const Vec y{x[0] + t * u[0], x[1] + t * u[1]};
          double dotv = 0.0;
          s.comp[1].eval_into(y, &v);
          dotv += v * u[0];
          s.comp[2].eval_into(y, &v);
          dotv += v * u[1];
          acc += w * dpow(t, k) * dotv;
        }
      }
      return acc / dpow(len, k);
    };

    ParallelBeamData sino[2];
    for (int c = 0; c < 2; ++c) {
      sino[c].angles = cfg.angles;
      sino[c].offsets = cfg.offsets;
      sino[c].extent = cfg.detector_extent;
      sino[c].samples.assign(std::size_t(cfg.angles) * std::size_t(cfg.offsets), 0.0);
    }
    parallel_for(
        std::int64_t(cfg.angles) * cfg.offsets,
        [&](std::int64_t ray_id) {
          const int a = int(ray_id / cfg.offsets);
          const int off = int(ray_id % cfg.offsets);
          const double phi = sino[0].angle(a);
          const double sh = sino[0].offset(off);
          Ray ray;
          ray.x = Vec{-std::sin(phi) * sh, std::cos(phi) * sh};
          ray.xi = Vec{std::cos(phi), std::sin(phi)};
          MomentCache cache(data);
          for (int c = 0; c < 2; ++c)
            sino[c].at(a, off) =
                recover_component(cache.fn(), 1, 1, MultiIndex{c}, ray, 2, cfg.stencil);
        },
        cfg.threads);
    SymTensorField rec0 = invert_scalar_xray(sino[0], plane, cfg.support_radius);
    SymTensorField rec1 = invert_scalar_xray(sino[1], plane, cfg.support_radius);
    return assemble_plane_field(plane, cfg.support_radius, {&rec0, &rec1});
  };

  auto push_scalar = [&](const std::string& name, const SymTensorField& truth) {
    RecoveredField rf;
    rf.name = name;
    rf.field = recover_scalar(truth);
    rf.rel_error = rel_l2(rf.field, truth);
    term.worst_rel_error = std::max(term.worst_rel_error, rf.rel_error);
    report.fields.push_back(std::move(rf));
  };
  auto push_vector = [&](const std::string& base_name, const PlaneSlice& s) {
    push_scalar(base_name + "-axis", s.comp[0]);
    RecoveredField rf;
    rf.name = base_name + "-plane";
    rf.field = recover_plane_vector(s);
    const SymTensorField truth =
        assemble_plane_field(plane, cfg.support_radius, {&s.comp[1], &s.comp[2]});
    rf.rel_error = rel_l2(rf.field, truth);
    term.worst_rel_error = std::max(term.worst_rel_error, rf.rel_error);
    report.fields.push_back(std::move(rf));
  };

  if (m == 3) push_vector("rank3-core", cores[3]);
  push_scalar("rank2-core", cores[2].comp[0]);
  push_vector("rank1", slice[1]);
  push_scalar("rank0", slice[0].comp[0]);

  term.ok = term.worst_rel_error <= cfg.max_rel_error;
  report.steps.push_back(term);
  if (!term.ok) {
    report.abort_reason = "terminal reconstruction error " +
                          std::to_string(term.worst_rel_error) + " above gate";
    return report;
  }
  report.completed = true;
  return report;
}

}  // namespace mrt
