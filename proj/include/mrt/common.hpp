#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mrt {

// Hard caps used throughout: tensor ranks up to 8 and spatial dimensions up
// to 4 keep every per-component table small enough to live on the stack.
inline constexpr int kMaxRank = 8;
inline constexpr int kMaxDim = 4;

using Vec = std::array<double, kMaxDim>;

inline double binom(int n, int k) {
  if (k < 0 || k > n || n < 0) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
  return r;
}

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= double(i);
  return r;
}

inline double dot(const Vec& a, const Vec& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a, int dim) { return std::sqrt(dot(a, a, dim)); }

// ---------------------------------------------------------------------------
// Gauss-Legendre rules on [-1,1], computed by Newton iteration on the
// Legendre recurrence. Exact for polynomials of degree 2*order-1.

struct GaussRule {
  std::vector<double> node;
  std::vector<double> weight;
};

inline const GaussRule& gauss_legendre(int order) {
  if (order < 1 || order > 64) throw std::invalid_argument("gauss_legendre: order out of range");
  static std::array<GaussRule, 65> cache;
  GaussRule& rule = cache[size_t(order)];
  if (!rule.node.empty()) return rule;
  GaussRule r;
  r.node.resize(size_t(order));
  r.weight.resize(size_t(order));
  const int n = order;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev-based initial guess, then Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / double(k);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.node[size_t(i)] = -x;
    r.node[size_t(n - 1 - i)] = x;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.weight[size_t(i)] = w;
    r.weight[size_t(n - 1 - i)] = w;
  }
  rule = std::move(r);
  return rule;
}

// ---------------------------------------------------------------------------
// Finite-difference weights on arbitrary nodes (Fornberg's algorithm).
// Returns weights w such that f^(d)(x0) ~= sum_i w[i] f(x[i]).

inline std::vector<double> fd_weights(double x0, const std::vector<double>& x, int d) {
  const int n = int(x.size());
  if (d < 0 || n < d + 1) throw std::invalid_argument("fd_weights: need at least d+1 nodes");
  std::vector<double> c(size_t(n) * size_t(d + 1), 0.0);
  auto C = [&](int i, int j) -> double& { return c[size_t(i) * size_t(d + 1) + size_t(j)]; };
  double c1 = 1.0;
  double c4 = x[0] - x0;
  C(0, 0) = 1.0;
  for (int i = 1; i < n; ++i) {
    int mn = std::min(i, d);
    double c2 = 1.0;
    double c5 = c4;
    c4 = x[size_t(i)] - x0;
    for (int j = 0; j < i; ++j) {
      double c3 = x[size_t(i)] - x[size_t(j)];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          C(i, k) = c1 * (k * C(i - 1, k - 1) - c5 * C(i - 1, k)) / c2;
        C(i, 0) = -c1 * c5 * C(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k)
        C(j, k) = (c4 * C(j, k) - k * C(j, k - 1)) / c3;
      C(j, 0) = c4 * C(j, 0) / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(size_t(n), 0.0);
  for (int i = 0; i < n; ++i) w[size_t(i)] = C(i, d);
  return w;
}

// Symmetric central stencil offsets (in units of the step) for derivative
// order d at accuracy order a: the minimal odd-sized window.
inline std::vector<double> central_offsets(int d, int accuracy) {
  if (d < 0 || d > 6) throw std::invalid_argument("central_offsets: derivative order out of range");
  if (accuracy != 2 && accuracy != 4) throw std::invalid_argument("central_offsets: accuracy must be 2 or 4");
  int half = (d + 1) / 2 + (accuracy / 2 - 1);
  if (d == 0) half = 0;
  std::vector<double> off;
  for (int i = -half; i <= half; ++i) off.push_back(double(i));
  return off;
}

// ---------------------------------------------------------------------------
// Small dense symmetric linear algebra; systems here never exceed a few
// hundred unknowns, so plain O(n^3) with no pivoting tricks is plenty.

class Matrix {
public:
  Matrix() = default;
  Matrix(int rows, int cols) : r_(rows), c_(cols), a_(size_t(rows) * size_t(cols), 0.0) {}
  double& operator()(int i, int j) { return a_[size_t(i) * size_t(c_) + size_t(j)]; }
  double operator()(int i, int j) const { return a_[size_t(i) * size_t(c_) + size_t(j)]; }
  int rows() const { return r_; }
  int cols() const { return c_; }

private:
  int r_ = 0, c_ = 0;
  std::vector<double> a_;
};

// Solves A x = b for symmetric positive definite A (in-place Cholesky copy).
inline std::vector<double> cholesky_solve(const Matrix& A, const std::vector<double>& b) {
  const int n = A.rows();
  if (A.cols() != n || int(b.size()) != n) throw std::invalid_argument("cholesky_solve: shape mismatch");
  Matrix L(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = A(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (s <= 0.0) throw std::runtime_error("cholesky_solve: matrix not positive definite");
        L(i, i) = std::sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }
  std::vector<double> y(size_t(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double s = b[size_t(i)];
    for (int k = 0; k < i; ++k) s -= L(i, k) * y[size_t(k)];
    y[size_t(i)] = s / L(i, i);
  }
  std::vector<double> x(size_t(n), 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = y[size_t(i)];
    for (int k = i + 1; k < n; ++k) s -= L(k, i) * x[size_t(k)];
    x[size_t(i)] = s / L(i, i);
  }
  return x;
}

// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
// Returns eigenvalues ascending; V columns are the matching eigenvectors.
inline void jacobi_eigensymm(Matrix A, std::vector<double>& eig, Matrix& V) {
  const int n = A.rows();
  V = Matrix(n, n);
  for (int i = 0; i < n; ++i) V(i, i) = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off < 1e-28 * (n ? 1.0 : 1.0)) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  eig.resize(size_t(n));
  std::vector<int> order(size_t(n), 0);
  for (int i = 0; i < n; ++i) order[size_t(i)] = i;
  std::vector<double> diag(size_t(n), 0.0);
  for (int i = 0; i < n; ++i) diag[size_t(i)] = A(i, i);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return diag[size_t(a)] < diag[size_t(b)]; });
  Matrix W(n, n);
  for (int j = 0; j < n; ++j) {
    eig[size_t(j)] = diag[size_t(order[size_t(j)])];
    for (int i = 0; i < n; ++i) W(i, j) = V(i, order[size_t(j)]);
  }
  V = std::move(W);
}

// ---------------------------------------------------------------------------
// Worker-count plumbing. MRT_THREADS caps the pool; 0 (or unset) means "use
// hardware_concurrency". Partitioning is static and per-item outputs are
// written by index, so results do not depend on the worker count.

inline int resolve_threads(int requested) {
  int n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("MRT_THREADS")) {
      try {
        n = std::stoi(env);
      } catch (...) {
        n = 0;
      }
    }
  }
  if (n <= 0) n = int(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  return n;
}

inline void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& fn, int threads = 0) {
  int nt = resolve_threads(threads);
  if (nt <= 1 || count < 2) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  if (std::int64_t(nt) > count) nt = int(count);
  std::vector<std::thread> pool;
  pool.reserve(size_t(nt));
  for (int w = 0; w < nt; ++w) {
    pool.emplace_back([&, w]() {
      for (std::int64_t i = w; i < count; i += nt) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace mrt
