#include "madmm/spectral.hpp"

#include "madmm/prox.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace madmm {

IterationMatrixBundle assemble_bundle(const MulticonstraintProblem& problem, const PenaltyVector& pv) {
  if (!problem.is_quadratic()) throw StructuralError("iteration matrix needs quadratic f and g");
  const auto& fq = std::get<QuadraticObjective>(problem.f);
  const auto& gq = std::get<QuadraticObjective>(problem.g);
  const StackedConstraints st = stack_blocks(problem);
  if (pv.layout() != st.layout) throw StructuralError("penalty vector layout does not match the problem");

  Eigen::LLT<Matrix> q_llt(fq.hessian);
  Eigen::LLT<Matrix> r_llt(gq.hessian);
  if (q_llt.info() != Eigen::Success) throw NumericalError("Q is not positive definite");
  if (r_llt.info() != Eigen::Success) throw NumericalError("R is not positive definite");

  const Index p = st.layout.total_rows();
  const Matrix f = st.a * q_llt.solve(st.a.transpose());
  const Matrix g = st.b * r_llt.solve(st.b.transpose());
  const Vector d = pv.expanded();
  const Matrix df = d.asDiagonal() * f;
  const Matrix dg = d.asDiagonal() * g;
  const Matrix eye = Matrix::Identity(p, p);

  const Eigen::PartialPivLU<Matrix> lu_f(eye + df);
  const Eigen::PartialPivLU<Matrix> lu_g(eye + dg);
  const Matrix h = lu_g.solve(lu_f.solve(eye + df * dg));

  // The constant part collects A Q^-1 q + B R^-1 r + c.
  const Vector offset = st.a * q_llt.solve(fq.linear) + st.b * r_llt.solve(gq.linear) + st.c;
  const Vector affine = -lu_g.solve(lu_f.solve(d.cwiseProduct(offset)));
  return IterationMatrixBundle{f, g, h, affine, pv};
}

Vector z_from_multiplier(const MulticonstraintProblem& problem, const Vector& y) {
  const auto* gq = std::get_if<QuadraticObjective>(&problem.g);
  if (!gq) throw StructuralError("z_from_multiplier needs quadratic g");
  return solve_quadratic(gq->hessian, -(gq->linear + problem.stacked_b_adjoint(y)));
}

namespace {

// Householder reduction to upper Hessenberg form, in place.
void to_hessenberg(Matrix& a) {
  const Index n = a.rows();
  for (Index k = 0; k + 2 < n; ++k) {
    Vector v = a.col(k).tail(n - k - 1);
    const double alpha = v.norm();
    if (alpha == 0.0) continue;
    const double sign = v[0] >= 0.0 ? 1.0 : -1.0;
    v[0] += sign * alpha;
    const double vnorm = v.norm();
    if (vnorm == 0.0) continue;
    v /= vnorm;
    // A <- P A P with P = I - 2 v v^T acting on rows/cols k+1..n-1
    auto rows = a.bottomRows(n - k - 1);
    rows -= 2.0 * v * (v.transpose() * rows);
    auto cols = a.rightCols(n - k - 1);
    cols -= 2.0 * (cols * v) * v.transpose();
    a.col(k).tail(n - k - 2).setZero();
  }
}

double sign_of(double mag, double s) { return s >= 0.0 ? std::abs(mag) : -std::abs(mag); }

// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
std::vector<Complex> hessenberg_qr(Matrix a) {
  const int n = static_cast<int>(a.rows());
  std::vector<double> wr(static_cast<std::size_t>(n)), wi(static_cast<std::size_t>(n));
  double anorm = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));
  }
  int nn = n - 1;
  double t = 0.0;
  const int max_its = 60;
  while (nn >= 0) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 1; --l) {
        double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) + s == s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      double x = a(nn, nn);
      if (l == nn) {
        wr[nn] = x + t;
        wi[nn] = 0.0;
        --nn;
      } else {
        double y = a(nn - 1, nn - 1);
        double w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          const double p = 0.5 * (y - x);
          const double q = p * p + w;
          double z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
            wi[nn - 1] = wi[nn] = 0.0;
          } else {
            wr[nn - 1] = wr[nn] = x + p;
            wi[nn - 1] = -z;
            wi[nn] = z;
          }
          nn -= 2;
        } else {
          if (its == max_its) throw NumericalError("Hessenberg QR did not converge");
          if (its == 10 || its == 20 || its == 40) {
            t += x;
            for (int i = 0; i <= nn; ++i) a(i, i) -= x;
            const double s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          double p = 0.0;
          double q = 0.0;
          double r = 0.0;
          double z = 0.0;
          for (; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            const double s0 = y - z;
            p = (r * s0 - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s0;
            r = a(m + 2, m + 1);
            const double s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
            if (u + v == v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = a(k + 2, k - 1);
              x = std::abs(p) + std::abs(q) + std::abs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            const double s = sign_of(std::sqrt(p * p + q * q + r * r), p);
            if (s != 0.0) {
              if (k == m) {
                if (l != m) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = a(k, j) + q * a(k + 1, j);
                if (k != nn - 1) {
                  p += r * a(k + 2, j);
                  a(k + 2, j) -= p * z;
                }
                a(k + 1, j) -= p * y;
                a(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * a(i, k) + y * a(i, k + 1);
                if (k != nn - 1) {
                  p += z * a(i, k + 2);
                  a(i, k + 2) -= p * r;
                }
                a(i, k + 1) -= p * q;
                a(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l < nn - 1);
  }
  std::vector<Complex> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.emplace_back(wr[static_cast<std::size_t>(i)], wi[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<Complex> eigenvalues_2x2(const Matrix& a) {
  const double half_tr = 0.5 * (a(0, 0) + a(1, 1));
  const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  // discriminant written to avoid cancellation in half_tr^2 - det
  const double half_diff = 0.5 * (a(0, 0) - a(1, 1));
  const double disc = half_diff * half_diff + a(0, 1) * a(1, 0);
  if (disc >= 0.0) {
    const double root = std::sqrt(disc);
    const double big = half_tr + (half_tr >= 0.0 ? root : -root);
    const double small = big != 0.0 ? det / big : half_tr - root;
    return {Complex(big, 0.0), Complex(small, 0.0)};
  }
  const double im = std::sqrt(-disc);
  return {Complex(half_tr, im), Complex(half_tr, -im)};
}

Complex pick_dominant(const std::vector<Complex>& values) {
  double top = 0.0;
  for (const auto& v : values) top = std::max(top, std::abs(v));
  Complex best = values.front();
  bool have = false;
  for (const auto& v : values) {
    if (std::abs(v) < top * (1.0 - 1e-12)) continue;
    if (!have || v.imag() > best.imag()) {
      best = v;
      have = true;
    }
  }
  return best;
}

}  // namespace

std::vector<Complex> eigenvalues(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() < 1) throw StructuralError("eigenvalues need a nonempty square matrix");
  if (!a.allFinite()) throw NumericalError("eigenvalues: matrix has non-finite entries");
  if (a.rows() == 1) return {Complex(a(0, 0), 0.0)};
  if (a.rows() == 2) return eigenvalues_2x2(a);
  Matrix hess = a;
  to_hessenberg(hess);
  return hessenberg_qr(std::move(hess));
}

Complex dominant_eigenvalue(const Matrix& h) { return pick_dominant(eigenvalues(h)); }

Eigenpair dominant_eigenpair(const Matrix& h) {
  const Complex lambda = dominant_eigenvalue(h);
  const Index n = h.rows();
  const Eigen::MatrixXcd hc = h.cast<Complex>();
  ComplexVector v = ComplexVector::Ones(n);
  if (n > 1) {
    // Inverse iteration with a slightly perturbed shift.
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    const Complex shift = lambda + Complex(1e-10 * scale, 1e-10 * scale);
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(hc - shift * Eigen::MatrixXcd::Identity(n, n));
    for (Index i = 0; i < n; ++i) v[i] = Complex(1.0 + 0.1 * static_cast<double>(i), 0.3 * static_cast<double>(i % 3));
    for (int it = 0; it < 4; ++it) {
      v = lu.solve(v);
      const double nv = v.norm();
      if (!(nv > 0.0) || !std::isfinite(nv)) throw NumericalError("inverse iteration for the eigenvector broke down");
      v /= nv;
    }
  }
  v.normalize();
  // Fix the phase: largest component real and positive.
  Index big = 0;
  for (Index i = 1; i < n; ++i) {
    if (std::abs(v[i]) > std::abs(v[big])) big = i;
  }
  v *= std::conj(v[big]) / std::abs(v[big]);
  return Eigenpair{lambda, v};
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 1) throw StructuralError("log grid needs 0 < lo < hi and count >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  if (count == 1) {
    out.push_back(lo);
    return out;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i) out.push_back(std::pow(10.0, a + (b - a) * i / (count - 1)));
  return out;
}

EigenSurface radius_surface(const MulticonstraintProblem& problem, const std::vector<double>& rho1_grid,
                            const std::vector<double>& rho2_grid) {
  if (problem.num_blocks() != 2) throw StructuralError("eigenvalue surface needs a two-block problem");
  if (!problem.is_quadratic()) throw StructuralError("eigenvalue surface needs a quadratic problem");
  const BlockLayout layout = problem.layout();
  EigenSurface out{rho1_grid, rho2_grid, Matrix(rho1_grid.size(), rho2_grid.size()),
                   Matrix(rho1_grid.size(), rho2_grid.size())};
  for (std::size_t i = 0; i < rho1_grid.size(); ++i) {
    for (std::size_t j = 0; j < rho2_grid.size(); ++j) {
      Vector rho(2);
      rho << rho1_grid[i], rho2_grid[j];
      const auto bundle = assemble_bundle(problem, PenaltyVector(rho, layout));
      const Complex lam = dominant_eigenvalue(bundle.h);
      out.magnitude(static_cast<Index>(i), static_cast<Index>(j)) = std::abs(lam);
      double ang = std::arg(lam);
      if (ang <= -std::numbers::pi) ang = std::numbers::pi;
      out.angle(static_cast<Index>(i), static_cast<Index>(j)) = ang;
    }
  }
  return out;
}

DominanceBounds dominance_bounds(const IterationMatrixBundle& bundle) {
  const Vector d = bundle.rho.expanded();
  const Matrix df = d.asDiagonal() * bundle.f;
  const Matrix fdg = bundle.f * d.asDiagonal() * bundle.g;
  const Vector s_df = Eigen::JacobiSVD<Matrix>(df).singularValues();
  const Vector s_fdg = Eigen::JacobiSVD<Matrix>(fdg).singularValues();
  const Vector s_g = Eigen::JacobiSVD<Matrix>(bundle.g).singularValues();
  const auto sq = [](double v) { return v * v; };
  DominanceBounds out;
  out.case1_lower = 1.0 / sq(1.0 + s_df.maxCoeff());
  out.case1_upper = 1.0 / sq(1.0 + s_df.minCoeff());
  out.case2_lower = sq(s_fdg.minCoeff() / (s_g.maxCoeff() + s_fdg.minCoeff()));
  out.case2_upper = sq(s_fdg.maxCoeff() / (s_g.minCoeff() + s_fdg.maxCoeff()));
  return out;
}

double dominance_ratio(const IterationMatrixBundle& bundle, const ComplexVector& v) {
  const Vector d = bundle.rho.expanded();
  const ComplexVector dgv = d.cast<Complex>().asDiagonal() * (bundle.g.cast<Complex>() * v);
  return v.norm() / dgv.norm();
}

}  // namespace madmm
