#pragma once

// Transport-equation amplitudes on a complexified slice, and the staged
// recovery they drive.
//
// Geometry: fix an axis (default 0) and a unit direction omega in the
// remaining coordinates.  Points of the slice are z = x1 + i r with x1 the
// axis coordinate and r >= 0 the distance along omega, so z - zbar = 2 i r.
// On that slice acts the transport operator
//
//     T = 4 ( d/dzbar - (n - 2) / (2 (z - zbar)) ),   d/dzbar = (d_x1 + i d_r)/2,
//
// whose m-th power annihilates exactly the amplitude ladder
//
//     a0(z) = sum_{k=1}^{m} (z - zbar)^{(2k-n)/2} h_k(z),   h_k holomorphic:
//
// one application maps the k-th rung to -4(k-1) times the (k-1)-th rung and
// kills the first rung outright.
//
// The weighted moment reduction pairs a rank-(m-1) tensor field against the
// null vector zeta = e_axis + i e_omega (zeta . zeta = 0) with weights
// r^alpha e^{lambda r} e^{-i lambda x1}; the same number is computed two
// independent ways (2-D slice quadrature, and an x1-transform followed by a
// 1-D r-integral), which keeps either route an oracle for the other.
//
// iterative_recovery runs the induction those moments support on a bundle
// whose top ranks carry isotropic i_delta-structure: each stage checks the
// structure from moment data, extracts the isotropic core pointwise, and the
// terminal stage rebuilds every remaining rank-0/rank-1 field from its line
// integrals by filtered backprojection and derivative-based component
// recovery.

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "mrt/inversion.hpp"
#include "mrt/phantom.hpp"
#include "mrt/spherekernel.hpp"
#include "mrt/symtensor.hpp"
#include "mrt/tensorfield.hpp"

namespace mrt {

// ---------------------------------------------------------------------------
// Slice grid: uniform rectangle in (x1, r) with r bounded away from 0.  The
// transport operator divides by r, so the grid must keep a margin of at
// least two cells between its lowest row and the axis r = 0.

struct ComplexSliceGrid {
  double x1_lo = -1.0;
  double x1_hi = 1.0;
  double r_lo = 1.0;
  double r_hi = 3.0;
  int nx = 129;
  int nr = 129;

  double dx() const { return (x1_hi - x1_lo) / double(nx - 1); }
  double dr() const { return (r_hi - r_lo) / double(nr - 1); }
  double x1(int i) const { return x1_lo + dx() * double(i); }
  double r(int j) const { return r_lo + dr() * double(j); }
  std::complex<double> z(int i, int j) const { return {x1(i), r(j)}; }
  std::size_t index(int i, int j) const { return std::size_t(i) * std::size_t(nr) + std::size_t(j); }
  std::size_t size() const { return std::size_t(nx) * std::size_t(nr); }

  // Throws if the rectangle is degenerate, has fewer than 17 nodes per axis
  // (the edge stencils need 7-point windows), or touches r = 0: r_lo must be
  // positive and at least two cells wide.
  void validate() const;
};

// Complex samples over the grid, x1-major: field[grid.index(i, j)].
using ComplexField = std::vector<std::complex<double>>;

// Max of |field| over nodes at least `margin` cells from every grid edge.
double interior_max(const ComplexField& field, const ComplexSliceGrid& grid, int margin = 2);

// ---------------------------------------------------------------------------
// Holomorphic factor library: monomials z^p (p <= 6) and plane waves
// e^{-i lambda z}, each with a complex coefficient.

struct HoloFactor {
  enum class Kind { monomial, plane_wave };

  Kind kind = Kind::monomial;
  int power = 0;        // monomial degree, 0..6
  double lambda = 0.0;  // plane-wave frequency
  std::complex<double> coeff{1.0, 0.0};

  std::complex<double> eval(std::complex<double> z) const;
};

// One rung of the ladder: (z - zbar)^{(2k-n)/2} h(z), k >= 1.
struct AmplitudeTerm {
  int k = 1;
  HoloFactor h;
};

struct Amplitude {
  int dim = 3;  // ambient dimension n
  std::vector<AmplitudeTerm> terms;

  double exponent(int k) const { return (2.0 * double(k) - double(dim)) / 2.0; }
  std::complex<double> eval(std::complex<double> z) const;
};

// Sample an amplitude on the grid; (2 i r)^e uses the principal branch,
// well-defined because r > 0 everywhere on a valid grid.
ComplexField sample_amplitude(const Amplitude& a, const ComplexSliceGrid& grid);

struct BuiltAmplitude {
  Amplitude descriptor;
  ComplexField field;
};

// Ladder with rungs k = 1..h_list.size(): term k uses h_list[k-1].  Throws if
// h_list is empty or a monomial degree exceeds 6.
BuiltAmplitude build_a0(const std::vector<HoloFactor>& h_list, int dim,
                        const ComplexSliceGrid& grid);

// One application of T by finite differences: centered 9-point 8th-order
// stencils for d_x1 and d_r in the interior, and wider (17-node) minimum-
// norm windows exact through degree 9 within four cells of an edge.  Small
// edge-weight norms matter because iterated applications (T^m for the
// annihilation checks) re-differentiate the previous application's rounding
// noise; large one-sided weights would amplify it past the tolerance.  The
// operator is most accurate on grids of roughly 120-150 nodes per axis:
// coarser grids raise truncation error, much finer ones raise the iterated
// roundoff floor.  Throws on an invalid grid or a size mismatch.
ComplexField apply_T(const ComplexField& a, int dim, const ComplexSliceGrid& grid);

// ---------------------------------------------------------------------------
// Weighted moment reduction.  For a rank-p field W (p = m-1 in the induction)
// and a unit direction omega in the coordinates other than `axis`, both
// routes evaluate
//
//   d^gamma/dlambda^gamma  integral r^alpha e^{lambda r} e^{-i lambda x1}
//                          < W(x1, center + r omega), zeta^{(x) p} > dx1 dr
//
// over the rectangle, zeta = e_axis + i e_omega.  route_surface inserts the
// lambda-derivative weight (r - i x1)^gamma and integrates with a 2-D
// Gauss-Legendre product rule; route_fourier first forms the x1-transforms
// of (-i x1)^j W at lambda, then combines them with binomial weights and
// integrates in r by Gauss-Legendre panels.  Both routes align their panel
// boundaries with the field's interpolation cells (so each panel integrates
// a smooth function), but use different panel refinements and orders: the
// two discretizations share no nodes, so their agreement certifies
// convergence.

struct SliceRect {
  double x1_lo = -1.1;
  double x1_hi = 1.1;
  double r_lo = 0.2;
  double r_hi = 2.6;
  int panels_x = 16;
  int panels_r = 16;
  int order = 8;

  void validate() const;  // throws if degenerate, r_lo < 0, or order out of range
};

struct MomentReduction {
  std::complex<double> route_surface{0.0, 0.0};
  std::complex<double> route_fourier{0.0, 0.0};
  double difference = 0.0;  // |route_surface - route_fourier|
};

// Requires 0 <= alpha <= W.rank(), 0 <= gamma <= 2, |omega| = 1 in the
// reduced coordinates, and a valid rectangle.  `center` supplies the
// non-axis coordinates the slice is anchored at (axis entry ignored).
MomentReduction moment_reduction(const SymTensorField& W, int alpha, const Vec& omega,
                                 double lambda, const SliceRect& rect, int gamma = 0,
                                 int axis = 0, const Vec& center = Vec{});

// ---------------------------------------------------------------------------
// Slab phantoms: bundles W^0..W^m on a dim-3 grid whose components are
// plane profiles w(x') times a plateau window in x1 (identically 1 on the
// inner slab, smooth fall-off, so the x1-average carries the same shape).
// Structured ranks follow the model the induction expects: W^m is an
// i_delta-lift of a random core of rank m-2, and for m = 3 the rank-2 part
// is an i_delta-lift of a scalar.  Ranks 0 and 1 are free random fields.

struct SlabPhantomSpec {
  int top_rank = 2;  // 2 or 3
  int nodes = 48;
  double extent = 1.0;
  double support_radius = 0.8;
  double slab_halfwidth = 0.45;  // window support in x1
  double plateau = 0.55;         // fraction of the halfwidth that stays exactly 1
  double plane_radius = 0.5;     // support of the plane profiles
  std::uint64_t seed = 1;
};

TensorBundle make_slab_phantom(const SlabPhantomSpec& spec);

// Plateau window: 1 on |u| <= plateau*halfwidth, 0 for |u| >= halfwidth,
// C-infinity transition between.
double slab_window(double u, double halfwidth, double plateau);

// ---------------------------------------------------------------------------
// Staged recovery.  Input: a bundle on a dim-3 grid, top rank m in {2, 3},
// x1-independent on the inner slab.  The driver works on the x1-averaged
// slice S^k(x') = integral W^k(x1, x') dx1 (each such value is a line
// integral along the axis, so the recovery only ever consumes ray data):
//
//   stage j = 0..m-2  ("structure", rank m-j):
//     - moment check: random probe lines in the plane; along each, the
//       moments integral t^alpha < S^{m-j}, zeta^{(x) (m-j)} > dt for
//       alpha = 0..m-j must vanish relative to the field scale (an
//       i_delta-structured rank is pointwise invisible to zeta).
//     - pointwise extraction: construct_v recovers the isotropic core
//       (rank m-j-2); the reconstruction residual |i_delta(core) - S| is
//       recorded.  Failure of the moment check aborts with this stage index.
//
//   terminal stage ("terminal"):
//     every remaining rank-0/rank-1 field (W^0, W^1, and the extracted
//     cores) is rebuilt from its line-integral data: rank-0 fields and axis
//     components by filtered backprojection of parallel-beam data, in-plane
//     vector parts by derivative-based component recovery of the rank-1
//     moments followed by per-component backprojection.  Relative L2 errors
//     against the x1-averaged truth are recorded per field.
//
// For m = 2 the driver also evaluates the descending amplitude pairing
// directly: the combined functional integral t^alpha (core + 2 i t
// < S^1, zeta >) dt must match the separately integrated families; the
// maximum mismatch is reported as pair_consistency.

struct RecoveryConfig {
  double tol = 1e-6;             // structure-residual gate (relative)
  double max_rel_error = 0.08;   // terminal reconstruction gate
  int plane_nodes = 64;          // reconstruction grid (per axis)
  double plane_extent = 1.0;
  double support_radius = 0.8;
  int angles = 120;              // parallel-beam geometry
  int offsets = 128;
  double detector_extent = 1.3;
  int x1_panels = 10;            // axis-average quadrature
  int x1_order = 6;
  int line_panels = 18;          // in-plane line quadrature
  int line_order = 6;
  int probe_lines = 48;          // structure-check probes
  std::uint64_t probe_seed = 17;
  FDStencil stencil{};           // component-recovery differencing
  int threads = 0;

  void validate() const;
};

struct StepReport {
  int step = 0;
  int rank = 0;                       // rank examined (structure) or 1 (terminal)
  std::string action;                 // "structure" or "terminal"
  double data_residual = 0.0;         // relative moment residual (structure)
  double certificate_residual = 0.0;  // pointwise |i_delta(core) - S| / scale
  double worst_rel_error = 0.0;       // terminal stage only
  bool ok = false;
};

struct RecoveredField {
  std::string name;       // "rank0", "rank1-axis", "rank1-plane", "rank2-core", ...
  SymTensorField field;   // plane (dim-2) reconstruction
  double rel_error = -1.0;
};

struct RecoveryReport {
  bool completed = false;
  int abort_step = -1;
  std::string abort_reason;
  int steps_expected = 0;  // the induction's count: one per structured rank + terminal
  std::vector<StepReport> steps;
  std::vector<RecoveredField> fields;
  double pair_consistency = -1.0;  // m = 2 only; -1 otherwise
};

RecoveryReport iterative_recovery(const TensorBundle& W, const RecoveryConfig& cfg = {});

}  // namespace mrt
