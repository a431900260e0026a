#include "dmduq/pinv_moments.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dmduq/error.hpp"
#include "dmduq/parallel.hpp"

namespace dmduq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// V and its factorization for one snapshot column; shared by every k.
struct ColumnModel {
  Index t = 0;
  Matrix v;
  SpdFactor v_factor;
  double v_log_det = 0.0;
  Matrix r_matrix;
  Vector mu;
  Matrix sigma;
  Matrix sigma_r;  // Sigma R
  double kappa = 0.0;  // mu^T R mu
};

// Integrand pieces at one p2 for all k at once.
struct ColumnIntegrand {
  double log_common = 0.0;  // -p2 + (ln|V| - ln|W|)/2 - p2 mu^T W^{-1} mu
  Vector g1;                // e_k^T W^{-1} mu
  Vector g2;                // e_k^T W^{-1} Sigma R e_k + g1_k^2
};

ColumnIntegrand evaluate_column(const ColumnModel& col, double p2) {
  const Matrix w = col.v + (2.0 * p2) * col.sigma;
  const auto chol = cholesky_logdet(w);
  const Vector w_mu = spd_solve(chol.factor, col.mu);
  const Matrix w_sigma_r = spd_solve(chol.factor, col.sigma_r);
  ColumnIntegrand out;
  out.log_common = -p2 + 0.5 * (col.v_log_det - chol.log_determinant) - p2 * col.mu.dot(w_mu);
  out.g1 = w_mu;
  out.g2 = w_sigma_r.diagonal() + w_mu.cwiseProduct(w_mu);
  return out;
}

Matrix gram_without_column(const Matrix& x, Index t) {
  const Index n = x.rows();
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> acc =
      Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  for (Index l = 0; l < x.cols(); ++l) {
    if (l == t) continue;
    const auto col = x.col(l).cast<long double>();
    acc.noalias() += col * col.transpose();
  }
  return acc.cast<double>();
}

ColumnModel make_column(Matrix v, const Vector& mu, const Matrix& sigma, Index t, double ridge) {
  const Index n = mu.size();
  if (ridge > 0.0) v.diagonal().array() += ridge;
  ColumnModel col;
  col.t = t;
  try {
    auto chol = cholesky_logdet(v);
    const auto d = chol.factor.lower.diagonal();
    const double ratio = d.minCoeff() / d.maxCoeff();
    if (ratio * ratio < 100.0 * static_cast<double>(n) * std::numeric_limits<double>::epsilon()) {
      throw Error(ErrorCode::kNotPositiveDefinite, "numerically singular");
    }
    col.v_factor = std::move(chol.factor);
    col.v_log_det = chol.log_determinant;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNotPositiveDefinite) throw;
    throw Error(ErrorCode::kSingularV,
                "V for snapshot column t=" + std::to_string(t) +
                    " is singular (needs m-1 >= n and non-collinear data, or ridge > 0)");
  }
  col.v = std::move(v);
  col.r_matrix = spd_inverse(col.v_factor);
  col.mu = mu;
  col.sigma = sigma;
  col.sigma_r = sigma * col.r_matrix;
  col.kappa = mu.dot(col.r_matrix * mu);
  return col;
}

ColumnModel column_from_context(const MgfContext& ctx) {
  ColumnModel col;
  col.t = ctx.t;
  col.v = ctx.v;
  col.v_factor = cholesky_logdet(ctx.v).factor;
  col.v_log_det = ctx.v_log_det;
  col.r_matrix = ctx.r_matrix;
  col.mu = ctx.mu;
  col.sigma = ctx.sigma;
  col.sigma_r = ctx.sigma * ctx.r_matrix;
  col.kappa = ctx.mu.dot(ctx.r_matrix * ctx.mu);
  return col;
}

struct ColumnResult {
  Vector first;
  Vector second;
  Vector first_l1;  // integral of |first integrand|
};

// Gauss-Laguerre in the scaled variable u = lambda * p2 with lambda = 1 + kappa,
// which makes the noise-free integrand constant in u. Positive and negative
// contributions are accumulated separately in log space.
ColumnResult laguerre_column(const ColumnModel& col, const LaguerreRule& rule) {
  const Index n = col.mu.size();
  const double lambda = 1.0 + col.kappa;
  const double log_lambda = std::log(lambda);
  Vector first_pos = Vector::Constant(n, kNegInf);
  Vector first_neg = Vector::Constant(n, kNegInf);
  Vector second = Vector::Constant(n, kNegInf);
  for (size_t i = 0; i < rule.nodes.size(); ++i) {
    const double u = rule.nodes[i];
    const double p2 = u / lambda;
    const ColumnIntegrand f = evaluate_column(col, p2);
    const double base = rule.log_weights[i] + u - log_lambda + f.log_common;
    for (Index k = 0; k < n; ++k) {
      const double g1 = f.g1(k);
      if (g1 > 0.0) {
        first_pos(k) = log_add_exp(first_pos(k), base + std::log(g1));
      } else if (g1 < 0.0) {
        first_neg(k) = log_add_exp(first_neg(k), base + std::log(-g1));
      }
      const double g2 = f.g2(k);
      if (g2 > 0.0) second(k) = log_add_exp(second(k), base + std::log(p2) + std::log(g2));
    }
  }
  ColumnResult out;
  out.first.resize(n);
  out.second.resize(n);
  out.first_l1.resize(n);
  for (Index k = 0; k < n; ++k) {
    out.first(k) = std::exp(first_pos(k)) - std::exp(first_neg(k));
    out.first_l1(k) = std::exp(log_add_exp(first_pos(k), first_neg(k)));
    out.second(k) = std::exp(second(k));
  }
  return out;
}

struct AdaptiveResult {
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;
};

// Adaptive Gauss-Kronrod on [0, p2_max], split on a geometric partition
// anchored at the integrand's decay length 1 / (1 + kappa).
template <class F>
AdaptiveResult adaptive_integral(F&& f, double decay_length, const QuadratureConfig& quad) {
  using boost::math::quadrature::gauss_kronrod;
  AdaptiveResult out;
  double a = 0.0;
  double b = std::min(decay_length, quad.p2_max);
  while (a < quad.p2_max) {
    double error = 0.0;
    double l1 = 0.0;
    out.value += gauss_kronrod<double, 31>::integrate(f, a, b, 15, quad.rel_tol * 1e-2, &error,
                                                      &l1);
    out.error += error;
    out.l1 += l1;
    a = b;
    b = std::min(2.0 * b, quad.p2_max);
  }
  return out;
}

ColumnResult adaptive_column(const ColumnModel& col, const QuadratureConfig& quad) {
  const Index n = col.mu.size();
  const double decay_length = 1.0 / (1.0 + col.kappa);
  ColumnResult out;
  out.first.resize(n);
  out.second.resize(n);
  out.first_l1.resize(n);
  for (Index k = 0; k < n; ++k) {
    auto first_integrand = [&](double p2) {
      const ColumnIntegrand f = evaluate_column(col, p2);
      return std::exp(f.log_common) * f.g1(k);
    };
    auto second_integrand = [&](double p2) {
      const ColumnIntegrand f = evaluate_column(col, p2);
      return p2 * std::exp(f.log_common) * f.g2(k);
    };
    const auto first = adaptive_integral(first_integrand, decay_length, quad);
    const auto second = adaptive_integral(second_integrand, decay_length, quad);
    if (first.error > 100.0 * quad.rel_tol * first.l1 ||
        second.error > 100.0 * quad.rel_tol * second.l1) {
      throw Error(ErrorCode::kQuadratureNotConverged,
                  "adaptive quadrature error estimate above tolerance at (t=" +
                      std::to_string(col.t) + ", k=" + std::to_string(k) + ")");
    }
    out.first(k) = first.value;
    out.first_l1(k) = first.l1;
    out.second(k) = second.value;
  }
  return out;
}

void check_agreement(const ColumnResult& a, const ColumnResult& b, const ColumnModel& col,
                     const QuadratureConfig& quad) {
  const double limit = 100.0 * quad.rel_tol;
  for (Index k = 0; k < a.first.size(); ++k) {
    const double first_scale = std::max(a.first_l1(k), b.first_l1(k));
    const double second_scale = std::max(std::abs(a.second(k)), std::abs(b.second(k)));
    const bool first_ok = std::abs(a.first(k) - b.first(k)) <= limit * first_scale;
    const bool second_ok = std::abs(a.second(k) - b.second(k)) <= limit * second_scale;
    if (!first_ok || !second_ok) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "Gauss-Laguerre and adaptive rules disagree at (t=" << col.t << ", k=" << k
          << "): first " << a.first(k) << " vs " << b.first(k) << ", second " << a.second(k)
          << " vs " << b.second(k);
      throw Error(ErrorCode::kQuadratureNotConverged, msg.str());
    }
  }
}

ColumnResult integrate_column(const ColumnModel& col, const QuadratureConfig& quad,
                              const LaguerreRule* rule) {
  if (quad.method == QuadratureMethod::kGaussLaguerre) {
    ColumnResult primary = laguerre_column(col, *rule);
    if (quad.cross_check) check_agreement(primary, adaptive_column(col, quad), col, quad);
    return primary;
  }
  ColumnResult primary = adaptive_column(col, quad);
  if (quad.cross_check) check_agreement(primary, laguerre_column(col, *rule), col, quad);
  return primary;
}

void validate_inputs(const SnapshotSet& snapshots, const NoiseModel& noise, double ridge) {
  if (noise.dimension() != snapshots.n()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "noise model has " + std::to_string(noise.dimension()) + " states, data has " +
                    std::to_string(snapshots.n()));
  }
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw Error(ErrorCode::kInvalidArgument, "ridge must be finite and >= 0");
  }
}

}  // namespace

void QuadratureConfig::validate() const {
  if (node_count < 1 || node_count > 256) {
    throw Error(ErrorCode::kCountOutOfRange, "quadrature node_count must be in [1, 256]");
  }
  if (!(rel_tol > 0.0 && rel_tol <= 1e-2)) {
    throw Error(ErrorCode::kInvalidArgument, "quadrature rel_tol must be in (0, 1e-2]");
  }
  if (!(p2_max > 0.0) || !std::isfinite(p2_max)) {
    throw Error(ErrorCode::kInvalidArgument, "quadrature p2_max must be positive");
  }
}

std::string quadrature_method_name(QuadratureMethod method) {
  return method == QuadratureMethod::kGaussLaguerre ? "gauss_laguerre" : "adaptive_truncated";
}

QuadratureMethod parse_quadrature_method(const std::string& name) {
  if (name == "gauss_laguerre") return QuadratureMethod::kGaussLaguerre;
  if (name == "adaptive_truncated") return QuadratureMethod::kAdaptiveTruncated;
  throw Error(ErrorCode::kConfigError, "unknown quadrature method '" + name + "'");
}

double LogSigned::value() const { return sign * std::exp(log_magnitude); }

MgfContext build_context(const SnapshotSet& snapshots, const NoiseModel& noise, Index t, Index k,
                         double ridge) {
  validate_inputs(snapshots, noise, ridge);
  if (t < 0 || t >= snapshots.m() || k < 0 || k >= snapshots.n()) {
    throw Error(ErrorCode::kInvalidArgument, "build_context: (t, k) out of range");
  }
  const Matrix sigma = noise.covariance();
  const ColumnModel col =
      make_column(gram_without_column(snapshots.states, t), snapshots.states.col(t), sigma, t,
                  ridge);
  const auto sigma_chol = cholesky_logdet(sigma);
  const Index n = snapshots.n();

  MgfContext ctx;
  ctx.t = t;
  ctx.k = k;
  ctx.v = col.v;
  ctx.v_log_det = col.v_log_det;
  ctx.r_matrix = col.r_matrix;
  ctx.r = col.r_matrix.col(k);
  ctx.mu = col.mu;
  ctx.b = spd_solve(sigma_chol.factor, ctx.mu);
  ctx.sigma = sigma;
  ctx.sigma_factor = sigma_chol.factor;
  ctx.sigma_log_det = sigma_chol.log_determinant;
  ctx.log_c = -0.5 * ctx.mu.dot(ctx.b) - 0.5 * static_cast<double>(n) * std::log(2.0) -
              0.5 * sigma_chol.log_determinant;
  ctx.ridge = ridge;
  return ctx;
}

double deterministic_pinv_element(const MgfContext& context) {
  const double s1 = context.r.dot(context.mu);
  const double s2 = 1.0 + context.mu.dot(context.r_matrix * context.mu);
  return s1 / s2;
}

LogSigned mgf_closed_form(const MgfContext& context, double p1, double p2) {
  if (!(p2 >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "mgf_closed_form: p2 must be >= 0");
  const Matrix sigma_inv = spd_inverse(context.sigma_factor);
  const Matrix s = 0.5 * sigma_inv + p2 * context.r_matrix;
  const auto chol = cholesky_logdet(s);
  const Vector shifted = context.b + p1 * context.r;
  const double quadratic = shifted.dot(spd_solve(chol.factor, shifted)) / 4.0;
  LogSigned out;
  out.log_magnitude = context.log_c - p2 - 0.5 * chol.log_determinant + quadratic;
  out.sign = 1;
  return out;
}

MgfDerivatives mgf_derivatives(const MgfContext& context, double p2) {
  const ColumnModel col = column_from_context(context);
  const ColumnIntegrand f = evaluate_column(col, p2);
  const double g1 = f.g1(context.k);
  const double g2 = f.g2(context.k);
  MgfDerivatives out;
  out.first.sign = g1 < 0.0 ? -1 : 1;
  out.first.log_magnitude = g1 == 0.0 ? kNegInf : f.log_common + std::log(std::abs(g1));
  out.second.sign = 1;
  out.second.log_magnitude = f.log_common + std::log(g2);
  return out;
}

double first_moment_element(const MgfContext& context, const QuadratureConfig& quad) {
  quad.validate();
  const ColumnModel col = column_from_context(context);
  const LaguerreRule rule = gauss_laguerre_nodes(quad.node_count);
  return integrate_column(col, quad, &rule).first(context.k);
}

double second_moment_element(const MgfContext& context, const QuadratureConfig& quad) {
  quad.validate();
  const ColumnModel col = column_from_context(context);
  const LaguerreRule rule = gauss_laguerre_nodes(quad.node_count);
  return integrate_column(col, quad, &rule).second(context.k);
}

QuadratureComparison compare_quadrature_rules(const MgfContext& context,
                                              const QuadratureConfig& quad) {
  quad.validate();
  const ColumnModel col = column_from_context(context);
  const LaguerreRule rule = gauss_laguerre_nodes(quad.node_count);
  const ColumnResult gl = laguerre_column(col, rule);
  const ColumnResult ad = adaptive_column(col, quad);
  return {gl.first(context.k), ad.first(context.k), gl.second(context.k), ad.second(context.k)};
}

PinvMoments pinv_moments(const SnapshotSet& snapshots, const NoiseModel& noise,
                         const QuadratureConfig& quad, double ridge, int threads) {
  validate_inputs(snapshots, noise, ridge);
  quad.validate();
  const Index n = snapshots.n();
  const Index m = snapshots.m();
  const Matrix& x = snapshots.states;
  const Matrix sigma = noise.covariance();
  const LaguerreRule rule = gauss_laguerre_nodes(quad.node_count);

  using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  LongMatrix gram = LongMatrix::Zero(n, n);
  for (Index l = 0; l < m; ++l) {
    const auto col = x.col(l).cast<long double>();
    gram.noalias() += col * col.transpose();
  }

  PinvMoments out;
  out.first.resize(m, n);
  out.second_raw.resize(m, n);
  std::vector<std::string> errors(static_cast<size_t>(m));
  std::vector<int> error_codes(static_cast<size_t>(m), -1);

  parallel_for(static_cast<size_t>(m), threads, [&](size_t slot) {
    const Index t = static_cast<Index>(slot);
    try {
      const auto xt = x.col(t).cast<long double>();
      const Matrix v = (gram - xt * xt.transpose()).cast<double>();
      const ColumnModel col = make_column(v, x.col(t), sigma, t, ridge);
      const ColumnResult res = integrate_column(col, quad, &rule);
      out.first.row(t) = res.first.transpose();
      out.second_raw.row(t) = res.second.transpose();
    } catch (const Error& e) {
      errors[slot] = e.what();
      error_codes[slot] = static_cast<int>(e.code());
    }
  });

  // Report failures in column order so the message is scheduling independent.
  int failures = 0;
  std::string summary;
  int code = -1;
  for (size_t t = 0; t < errors.size(); ++t) {
    if (error_codes[t] < 0) continue;
    if (failures == 0) code = error_codes[t];
    if (failures < 5) summary += (failures ? "; " : "") + errors[t];
    ++failures;
  }
  if (failures > 0) {
    throw Error(static_cast<ErrorCode>(code),
                "pinv_moments: " + std::to_string(failures) + " column(s) failed: " + summary);
  }
  return out;
}

}  // namespace dmduq
